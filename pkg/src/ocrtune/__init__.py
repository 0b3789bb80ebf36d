"""Tuning image pre-processing operators for OCR with constrained NSGA-II."""

from .raster import Raster, read_pgm, write_pgm

__all__ = ["Raster", "read_pgm", "write_pgm"]
__version__ = "0.1.0"
