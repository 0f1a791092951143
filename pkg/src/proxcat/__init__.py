"""Proximal point algorithm and gradient flows on CAT(0) spaces."""
__version__ = "0.1.0"
