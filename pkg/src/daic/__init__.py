"""Online pseudo-oracle monitoring and offline sampling assessment of classifier accuracy."""

__version__ = "0.1.0"
