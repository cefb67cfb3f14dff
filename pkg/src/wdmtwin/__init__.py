"""Digital twin of a multi-span WDM network with remotely trained EDFA models."""

__version__ = "0.1.0"
