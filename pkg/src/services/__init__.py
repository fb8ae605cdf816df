"""Numerical services package."""
