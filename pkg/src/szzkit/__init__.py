"""szzkit: blame-based bug-inducing commit identification and its evaluation."""

__version__ = "0.1.0"
