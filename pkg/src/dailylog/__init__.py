"""Context-aware activity logs from multi-modal sensor streams."""

__version__ = "0.1.0"
