"""Phase-plane toolkit for gradient Yamabe solitons on warped products."""

__version__ = "0.3.0"
