"""Continuum objects: harmonic measure, the coarse covariance ``C_K``, ``ψ`` and the measures ``Z_K``."""
