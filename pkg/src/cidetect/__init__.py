"""Cross-inlining binary function similarity detection toolkit."""

__version__ = "0.1.0"
