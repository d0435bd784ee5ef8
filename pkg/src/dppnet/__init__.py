"""Low-rank DPP basket-completion models with neural embedding towers."""

__version__ = "0.1.0"
