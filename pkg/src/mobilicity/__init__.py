"""Trip inference from cell-tower logs and NMF-based mobility structure discovery."""

__version__ = "0.1.0"
