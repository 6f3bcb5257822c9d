"""Discrete-event MANET simulator: AODV, PART and PACK under five TCP variants."""

__version__ = "0.1.0"
