"""Lambda-calculus trees, pi-calculus encodings and behavioural checking."""

__version__ = "0.1.0"
