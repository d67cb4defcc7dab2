"""Structured low-rank matrix approximation with prescribed zero entries.

Find the rank-<= r matrix with forced zeros that is closest in Frobenius
distance to a data matrix.  The package combines exact combinatorial and
SVD-based solvers (rank one, rectangular and block-diagonal supports) with
a monodromy-based homotopy continuation solver that enumerates all complex
critical points of the general problem, verifies structural relations
among them, counts Euclidean distance degrees, and computes the exact best
nonnegative rank-2 approximation of 3x3 matrices.
"""

__version__ = "0.1.0"

from .patterns import ZeroPattern, MinimalCover, minimal_covers, rank1_ed_degree
