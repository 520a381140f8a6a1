"""
igd-sync: inexact distributed gradient descent.

Peers run local steps on noisy neighbor gradients and synchronize over a
spanning tree only when their accumulated drift trips a trigger.
"""

__version__ = "1.0.0"

__all__ = ["__version__"]
