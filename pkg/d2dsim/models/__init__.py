"""Domain types, enumerations and pydantic schemas."""
