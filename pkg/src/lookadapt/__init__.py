"""One-shot semantic parsing by looking up and adapting stored examples."""

__version__ = "0.1.0"
