"""Simulation toolkit for a single-step multiplex-controlled phase gate on photonic qubits."""

__version__ = "0.1.0"
