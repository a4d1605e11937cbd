"""Hidden two-stream activity recognition and geo-tagged activity mapping on numpy."""
__version__ = "0.1.0"
