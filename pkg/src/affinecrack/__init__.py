"""Neural and statistical key recovery for the affine cipher."""

__version__ = "0.1.0"
