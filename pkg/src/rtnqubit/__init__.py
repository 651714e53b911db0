"""Gate fidelity of a square-wave-driven qubit under random telegraph noise."""

__version__ = "0.1.0"
