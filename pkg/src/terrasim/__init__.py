"""Simulator for a four-node failover cluster on a triple-mirrored SAN."""

__version__ = "0.1.0"
