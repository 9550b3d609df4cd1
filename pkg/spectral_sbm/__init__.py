"""
spectral_sbm
============

Spectral community detection on symmetric stochastic block models:
power-iteration and centered-SVD clustering, SVD-I/II baselines, seeded
planted-partition samplers and numerical audits of the supporting bounds.
"""

__version__ = "0.1.0"
