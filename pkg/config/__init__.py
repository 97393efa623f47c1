"""Configuration package for numeric and runtime defaults."""
