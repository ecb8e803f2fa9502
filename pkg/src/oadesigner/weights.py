"""Greedy symmetry-breaking penalty weights over candidate design points.

Uniform penalties cannot separate mirror-image designs with identical
objective values, so the optimizer has no sparse minimizer. The greedy
construction below grows a subspace from the first candidate's model-matrix
column and charges every other candidate the squared norm of its projection
onto that subspace, accumulating the charges into per-candidate weights.
Candidates that stay orthogonal to the growing subspace until selected end
up with zero weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import ModelMatrix, SpecificationError

# Argmin ties within this absolute slack are broken by policy.
TIE_TOLERANCE = 1e-9

# Basis vectors whose orthogonalized remainder falls below this relative
# threshold are treated as linearly dependent and dropped.
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class WeightTrace:
    """Weights plus the per-step quantities needed to replay the selection.

    ``lambdas[g]`` is the total charge of candidate g, ``selection_order``
    lists the chosen candidate indices (0-based, starting with 0), and
    ``l_matrix[g, t]`` is candidate g's charge at step t (zero once g has
    been selected).
    """

    lambdas: np.ndarray
    selection_order: tuple[int, ...]
    l_matrix: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).copy()
        lm = np.asarray(self.l_matrix, dtype=float).copy()
        lam.setflags(write=False)
        lm.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "l_matrix", lm)
        object.__setattr__(self, "selection_order", tuple(int(g) for g in self.selection_order))


def _orthonormalize(basis_vectors) -> np.ndarray:
    """Orthonormal basis via modified Gram-Schmidt with re-orthogonalization.

    Numerically dependent inputs are dropped at a relative tolerance of
    ``RANK_TOLERANCE`` against the largest input norm. Returns an array of
    shape (k, dim); k may be zero.
    """
    vectors = [np.asarray(v, dtype=float) for v in basis_vectors]
    if not vectors:
        return np.zeros((0, 0))
    dim = vectors[0].size
    scale = max((np.linalg.norm(v) for v in vectors), default=0.0)
    if scale == 0.0:
        return np.zeros((0, dim))
    ortho: list[np.ndarray] = []
    for v in vectors:
        if v.size != dim:
            raise SpecificationError("basis vectors must share one length")
        r = v.copy()
        for _ in range(2):  # second pass restores orthogonality lost to cancellation
            for q in ortho:
                r -= (q @ r) * q
        norm = np.linalg.norm(r)
        if norm > RANK_TOLERANCE * scale:
            ortho.append(r / norm)
    if not ortho:
        return np.zeros((0, dim))
    return np.array(ortho)


def projection_norm_sq(vector, basis_vectors) -> float:
    """Squared norm of the orthogonal projection of ``vector`` onto span(basis).

    Zero for an empty basis; rank-deficient bases are handled by dropping
    dependent vectors during orthonormalization.
    """
    v = np.asarray(vector, dtype=float)
    Q = _orthonormalize(basis_vectors)
    if Q.shape[0] == 0:
        return 0.0
    if Q.shape[1] != v.size:
        raise SpecificationError("vector and basis lengths differ")
    coeffs = Q @ v
    return float(coeffs @ coeffs)


def algorithm1_weights(
    M: ModelMatrix | np.ndarray,
    tie_break: str = "smallest-index",
    seed: int | None = None,
) -> WeightTrace:
    """Greedy subspace construction of the per-candidate weights.

    Starting from the first candidate, repeat once per model term: charge
    every unselected candidate the squared norm of its model-column
    projection onto the span of the selected columns, then select one
    candidate attaining the minimal charge. ``tie_break`` is
    ``"smallest-index"`` (default) or ``"random"`` (seeded by ``seed``).
    If the pool runs out early (G <= number of terms) selection stops and
    the remaining steps contribute nothing.
    """
    cols = M.values if isinstance(M, ModelMatrix) else np.asarray(M, dtype=float)
    n_terms, G = cols.shape
    if G < 1:
        raise SpecificationError("at least one candidate is required")
    if not np.any(cols[:, 0]):
        raise SpecificationError("the first model column is zero; weights are undefined")
    if tie_break not in ("smallest-index", "random"):
        raise SpecificationError(f"unknown tie-break policy {tie_break!r}")
    rng = np.random.default_rng(seed) if tie_break == "random" else None

    selected = [0]
    l_matrix = np.zeros((G, n_terms))
    # Orthonormal basis of the span of the selected columns, grown in place.
    q0 = cols[:, 0] / np.linalg.norm(cols[:, 0])
    Q = q0.reshape(1, -1)
    basis_scale = np.linalg.norm(cols[:, 0])
    for t in range(n_terms):
        rest = [g for g in range(G) if g not in selected]
        if not rest:
            break
        proj = Q @ cols[:, rest]
        charges = np.einsum("kg,kg->g", proj, proj)
        l_matrix[rest, t] = charges
        low = charges.min()
        ties = [g for g, c in zip(rest, charges) if c <= low + TIE_TOLERANCE]
        if rng is None:
            pick = ties[0]
        else:
            pick = ties[int(rng.integers(len(ties)))]
        selected.append(pick)
        r = cols[:, pick].astype(float)
        basis_scale = max(basis_scale, np.linalg.norm(r))
        for _ in range(2):
            r -= (Q @ r) @ Q
        norm = np.linalg.norm(r)
        if norm > RANK_TOLERANCE * basis_scale:
            Q = np.vstack([Q, r / norm])
    return WeightTrace(l_matrix.sum(axis=1), tuple(selected), l_matrix)


def scale_weights(trace: WeightTrace, scale: float) -> WeightTrace:
    """Multiply every weight (and the step charges) by a positive factor."""
    scale = float(scale)
    if scale <= 0:
        raise SpecificationError("scale must be positive")
    return WeightTrace(trace.lambdas * scale, trace.selection_order, trace.l_matrix * scale)
