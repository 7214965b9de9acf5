"""GRU sequence classifier for extractive document summarization."""

__version__ = "0.1.0"
