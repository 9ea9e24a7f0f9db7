"""Core module for exceptions, logging and unit conversions."""
