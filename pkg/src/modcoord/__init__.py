"""Game-theoretic coordination of shared-vehicle companies around a queue-stabilizing operator."""

__version__ = "0.1.0"
