"""Models package: pydantic records and numeric containers."""
