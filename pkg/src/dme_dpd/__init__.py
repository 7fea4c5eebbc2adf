"""Memory-polynomial predistortion for pulsed DME transmitters."""

__version__ = "0.1.0"
