"""
otflow: Hermitian curvature flows on Oeljeklaus-Toma type Lie algebras.

Builds the solvable Lie algebras behind Oeljeklaus-Toma manifolds together
with their left-invariant complex structure, evaluates the Chern-Ricci and
Bismut-Ricci forms of left-invariant Hermitian metrics, classifies
pluriclosed metrics and algebraic solitons, and integrates the Chern-Ricci,
pluriclosed and generalized flows.
"""

__version__ = "0.3.0"

__all__ = ["__version__"]
