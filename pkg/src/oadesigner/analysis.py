"""Verification tools: unbiasedness, variances, oracles and design equivalence.

Everything here is independent of the solvers so it can vouch for their
output: least-squares estimators come from the pseudo-inverse, the
A-optimality oracle enumerates supports exhaustively, and orthogonal-array
structure is checked by direct counting.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, inf

import numpy as np

from .design import CandidateSet, ModelMatrix, ModelSpec, SpecificationError
from .solver import FEASIBILITY_TOL, InfeasibleError, Solution

ORACLE_GUARD = 10_000_000
VALUE_TIE_TOL = 1e-9


class BiasedEstimatorError(ValueError):
    """Monte Carlo check asked to certify an estimator that is not unbiased."""


@dataclass(frozen=True)
class DesignMatrix:
    """Selected runs with their estimator rows and per-target variances."""

    points: np.ndarray  # F x n, columns are runs
    source_indices: tuple[int, ...]
    estimators: np.ndarray  # |J| x n
    variances: np.ndarray  # sigma^2 ||beta_j||^2 per target, sigma^2 = 1
    factor_levels: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).copy()
        est = np.asarray(self.estimators, dtype=float).copy()
        var = np.asarray(self.variances, dtype=float).copy()
        pts.setflags(write=False)
        est.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "estimators", est)
        object.__setattr__(self, "variances", var)
        object.__setattr__(self, "source_indices", tuple(int(g) for g in self.source_indices))
        object.__setattr__(
            self, "factor_levels", tuple(tuple(float(v) for v in lv) for lv in self.factor_levels)
        )

    @property
    def n_runs(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class OracleResult:
    """Outcome of the exhaustive A-optimality search."""

    optimal_value: float
    optimal_supports: tuple[tuple[int, ...], ...]
    evaluated_count: int


@dataclass(frozen=True)
class UnbiasednessReport:
    passed: bool
    residuals: np.ndarray  # per-target max-abs constraint violation
    tolerance: float

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max(initial=0.0))


def design_from_solution(
    candidates: CandidateSet, spec: ModelSpec, solution: Solution, threshold: float | None = None
) -> DesignMatrix:
    """Assemble the selected-design view of a solver solution."""
    support = sorted(
        solution.support
        if threshold is None
        else (g for g, n in enumerate(solution.group_norms) if n > threshold)
    )
    est = solution.B[:, support]
    return DesignMatrix(
        points=candidates.points[:, support],
        source_indices=support,
        estimators=est,
        variances=np.einsum("jn,jn->j", est, est),
        factor_levels=tuple(f.levels for f in spec.factors),
    )


def check_unbiasedness(M: ModelMatrix, B, tol: float, targets=None) -> UnbiasednessReport:
    """Whether M beta_j = e_j holds for every target, in the max-abs sense."""
    B = np.asarray(B, dtype=float)
    targets = list(M.spec.targets if targets is None else targets)
    if B.shape != (len(targets), M.n_candidates):
        raise SpecificationError(
            f"B has shape {B.shape}, expected ({len(targets)}, {M.n_candidates})"
        )
    E = np.zeros((M.n_terms, len(targets)))
    E[targets, np.arange(len(targets))] = 1.0
    residuals = np.abs(M.values @ B.T - E).max(axis=0)
    return UnbiasednessReport(bool(residuals.max(initial=0.0) <= tol), residuals, tol)


def variance_sum(B, sigma_sq: float = 1.0) -> tuple[float, np.ndarray]:
    """Total and per-target estimator variance sigma^2 ||beta_j||^2."""
    if sigma_sq <= 0:
        raise SpecificationError("sigma_sq must be positive")
    B = np.asarray(B, dtype=float)
    per = sigma_sq * np.einsum("jg,jg->j", B, B)
    return float(per.sum()), per


@dataclass(frozen=True)
class MonteCarloReport:
    passed: bool
    mean_errors: np.ndarray
    mean_tolerances: np.ndarray
    empirical_variances: np.ndarray
    expected_variances: np.ndarray

    @property
    def variance_ok(self) -> np.ndarray:
        return np.abs(self.empirical_variances - self.expected_variances) <= (
            0.1 * self.expected_variances
        )

    @property
    def mean_ok(self) -> np.ndarray:
        return self.mean_errors <= self.mean_tolerances


def monte_carlo_estimator_check(
    M: ModelMatrix,
    B,
    gamma_true,
    sigma_sq: float,
    n_draws: int,
    seed: int,
    targets=None,
) -> MonteCarloReport:
    """Simulate responses and verify estimator means and variances.

    Draws R = M^T gamma + eps with iid mean-zero Gaussian errors, forms the
    linear estimators R^T beta_j, and checks the empirical mean of each
    against gamma_j within 4 sigma ||beta_j|| / sqrt(n_draws) and the
    empirical variance within 10% of sigma^2 ||beta_j||^2.
    """
    B = np.asarray(B, dtype=float)
    gamma = np.asarray(gamma_true, dtype=float)
    targets = list(M.spec.targets if targets is None else targets)
    if sigma_sq < 0:
        raise SpecificationError("sigma_sq must be non-negative")
    report = check_unbiasedness(M, B, FEASIBILITY_TOL, targets)
    if not report.passed:
        raise BiasedEstimatorError(
            f"estimators are biased (max residual {report.max_residual:.3e}); "
            "the Monte Carlo check only applies to unbiased inputs"
        )
    rng = np.random.default_rng(seed)
    sigma = float(np.sqrt(sigma_sq))
    signal = B @ (M.values.T @ gamma)  # exact estimator means, one per target
    eps = rng.standard_normal((n_draws, M.n_candidates)) * sigma
    estimates = signal + eps @ B.T  # n_draws x |J|
    norms_sq = np.einsum("jg,jg->j", B, B)
    mean_err = np.abs(estimates.mean(axis=0) - gamma[targets])
    mean_tol = 4.0 * sigma * np.sqrt(norms_sq) / np.sqrt(n_draws)
    emp_var = estimates.var(axis=0, ddof=1)
    exp_var = sigma_sq * norms_sq
    passed = bool(np.all(mean_err <= mean_tol) and np.all(np.abs(emp_var - exp_var) <= 0.1 * exp_var))
    return MonteCarloReport(passed, mean_err, mean_tol, emp_var, exp_var)


def min_norm_least_squares(M: ModelMatrix, targets=None, support=None) -> np.ndarray:
    """Minimum-norm solutions of M_S beta = e_j, embedded as length-G rows.

    ``support`` selects candidate columns (all by default). Raises
    InfeasibleError naming the first target whose e_j is outside the range
    of the restricted matrix.
    """
    targets = list(M.spec.targets if targets is None else targets)
    support = list(range(M.n_candidates)) if support is None else sorted(support)
    Ms = M.values[:, support]
    E = np.zeros((M.n_terms, len(targets)))
    E[targets, np.arange(len(targets))] = 1.0
    U, s, Vt = np.linalg.svd(Ms, full_matrices=False)
    keep = s > (s[0] * 1e-12 if s.size and s[0] > 0 else 0.0)
    U, s, Vt = U[:, keep], s[keep], Vt[keep, :]
    resid = np.linalg.norm(E - U @ (U.T @ E), axis=0)
    for r, j in zip(resid, targets):
        if r > FEASIBILITY_TOL:
            raise InfeasibleError(j, float(r))
    B_support = (Vt.T @ ((U.T @ E) / s[:, None])).T
    B = np.zeros((len(targets), M.n_candidates))
    B[:, support] = B_support
    return B


def brute_force_a_optimal(M: ModelMatrix, targets=None, support_size: int = 1) -> OracleResult:
    """Enumerate every size-n support and minimize the summed variance.

    Infeasible supports are skipped; if none is feasible the result carries
    an infinite optimal value and no supports. Guarded to desk scale.
    """
    targets = list(M.spec.targets if targets is None else targets)
    G = M.n_candidates
    n = int(support_size)
    if not 1 <= n <= G:
        raise SpecificationError(f"support size {n} out of range 1..{G}")
    if comb(G, n) > ORACLE_GUARD:
        raise SpecificationError(
            f"C({G},{n}) = {comb(G, n)} supports exceed the enumeration guard"
        )
    E = np.zeros((M.n_terms, len(targets)))
    E[targets, np.arange(len(targets))] = 1.0
    best = inf
    best_supports: list[tuple[int, ...]] = []
    count = 0
    for S in itertools.combinations(range(G), n):
        count += 1
        Ms = M.values[:, S]
        U, s, _ = np.linalg.svd(Ms, full_matrices=False)
        keep = s > (s[0] * 1e-12 if s.size and s[0] > 0 else 0.0)
        U = U[:, keep]
        coeffs = U.T @ E
        resid = np.linalg.norm(E - U @ coeffs, axis=0)
        if np.any(resid > FEASIBILITY_TOL):
            continue
        value = float(np.sum((coeffs / s[keep, None]) ** 2))
        if value < best - VALUE_TIE_TOL:
            best = value
            best_supports = [S]
        elif value <= best + VALUE_TIE_TOL:
            best_supports.append(S)
    return OracleResult(best, tuple(best_supports), count)


def _design_points_and_levels(design, levels=None):
    if isinstance(design, DesignMatrix):
        return design.points, design.factor_levels
    pts = np.asarray(design, dtype=float)
    if levels is None:
        levels = tuple(tuple(sorted(set(row))) for row in pts)
    return pts, levels


def oa_strength_check(design, strength: int, levels=None) -> bool:
    """Orthogonal-array strength test by direct counting.

    Passes iff for every ``strength``-subset of factor rows, every level
    combination (from the full per-factor level sets) occurs equally often
    among the runs.
    """
    pts, levels = _design_points_and_levels(design, levels)
    F, n = pts.shape
    if not 1 <= strength <= F:
        raise SpecificationError(f"strength {strength} out of range 1..{F}")
    for rows in itertools.combinations(range(F), strength):
        cells = 1
        for f in rows:
            cells *= len(levels[f])
        if n % cells != 0:
            return False
        expected = n // cells
        counts: dict[tuple[float, ...], int] = {}
        for r in range(n):
            key = tuple(pts[f, r] for f in rows)
            counts[key] = counts.get(key, 0) + 1
        if len(counts) != cells or any(c != expected for c in counts.values()):
            return False
    return True


def _as_sign_matrix(pts: np.ndarray) -> np.ndarray:
    """Map each two-level factor row onto -1/+1 (lower level to -1)."""
    out = np.empty(pts.shape, dtype=np.int8)
    for f in range(pts.shape[0]):
        values = sorted(set(pts[f]))
        if len(values) > 2:
            raise SpecificationError("design equivalence is defined for two-level factors")
        if len(values) == 1:
            out[f] = 1
        else:
            out[f] = np.where(pts[f] == values[0], -1, 1)
    return out


def _canonical_form(pts: np.ndarray):
    """Lexicographically minimal representative over run permutation,
    factor permutation and per-factor sign flips (brute force, F <= 6)."""
    S = _as_sign_matrix(pts)
    F = S.shape[0]
    if F > 6:
        raise SpecificationError("equivalence brute force is limited to 6 factors")
    best = None
    for perm in itertools.permutations(range(F)):
        P = S[list(perm), :]
        for mask in range(1 << F):
            flips = np.array([-1 if (mask >> i) & 1 else 1 for i in range(F)], dtype=np.int8)
            Q = P * flips[:, None]
            key = tuple(sorted(map(tuple, Q.T)))
            if best is None or key < best:
                best = key
    return best


def design_equivalent(D1, D2) -> bool:
    """Whether two two-level designs coincide up to run permutation, factor
    permutation and per-factor level relabeling. Shape mismatch is False."""
    p1, _ = _design_points_and_levels(D1)
    p2, _ = _design_points_and_levels(D2)
    if p1.shape != p2.shape:
        return False
    return _canonical_form(p1) == _canonical_form(p2)
