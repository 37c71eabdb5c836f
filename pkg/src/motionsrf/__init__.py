"""Motion prediction in still images with structured regression forests."""

__version__ = "0.1.0"
