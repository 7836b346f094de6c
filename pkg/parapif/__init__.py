"""
Parallel-in-time particle simulation of the Vlasov–Poisson system.

Particle-in-Fourier and Particle-in-Cell field solvers, a Boris pusher and a
parareal engine, driven from the command line (``python -m parapif``) or the
small FastAPI run service in ``parapif.main``.
"""

__version__ = "0.1.0"
