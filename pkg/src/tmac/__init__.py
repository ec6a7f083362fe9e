"""Temporal multi-modal graph learning for acoustic event classification."""

__version__ = "0.1.0"

from tmac.autodiff import Tensor, Tape, ShapeError, NumericError

__all__ = ["Tensor", "Tape", "ShapeError", "NumericError", "__version__"]
