"""Casimir forces from stress-tensor integrals along complex-frequency contours."""

__version__ = "0.1.0"
