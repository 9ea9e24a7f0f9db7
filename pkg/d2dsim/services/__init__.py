"""Service layer for topology, channel, RRM and simulation logic."""
