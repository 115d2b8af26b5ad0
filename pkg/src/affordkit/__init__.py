"""Object-centric manipulation labeling, VQA I/O, geometry and evaluation toolkit."""

__version__ = "0.1.0"
