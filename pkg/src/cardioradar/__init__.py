"""Heart-motion extraction from FMCW radar, ECG wave labeling, and
ECG/radar synchronization."""

__version__ = "0.1.0"
