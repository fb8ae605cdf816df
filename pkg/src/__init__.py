"""hssolve - randomized HSS compression and ULV solver."""

__version__ = "1.0.0"
