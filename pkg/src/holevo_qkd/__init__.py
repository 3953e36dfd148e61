"""Two-qubit quantum key distribution at the Holevo limit."""

__version__ = "0.1.0"
