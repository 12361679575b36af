"""Electron emission from a metal surface driven by an oscillating field.

One-dimensional step potential U with a field E x cos(omega t) outside the
metal.  The boundary value psi(0, t) solves a weakly singular Volterra
equation; the wave function, currents and the periodic long-time state are
reconstructed from it.
"""

__version__ = "0.1.0"
