"""Group-lasso solvers for sparse A-optimal design selection.

Two formulations over the coefficient block B (one row per target
coefficient, one column per candidate):

* constrained -- minimize sum_j ||beta_j||^2 + sum_g lambda_g ||B[:, g]||
  subject to M beta_j = e_j for every target j. Solved by operator
  splitting (ADMM): an equality-constrained quadratic step through one
  cached decomposition of M, alternated with an exact group
  soft-threshold, with a self-adapting splitting penalty.

* relaxed -- the same objective with each equality replaced by a quadratic
  penalty kappa_j ||M beta_j - e_j||^2. Solved by cyclic block coordinate
  descent with an exact per-group update (closed form for uniform kappa,
  safeguarded Newton on the group-norm stationarity equation otherwise).

Both solves are deterministic for fixed inputs and options.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .design import ModelMatrix, SpecificationError

FEASIBILITY_TOL = 1e-8
RANK_TOLERANCE = 1e-12
NEWTON_TOL = 1e-12


class InfeasibleError(ValueError):
    """A target unit vector is not reachable: e_j is outside range(M)."""

    def __init__(self, target_index: int, residual: float):
        self.target_index = target_index
        self.residual = residual
        super().__init__(
            f"target {target_index} is infeasible: distance {residual:.3e} "
            "from the span of the model columns"
        )


@dataclass(frozen=True)
class SolverOptions:
    primal_tol: float = 1e-8
    dual_tol: float = 1e-8
    max_iterations: int = 200000
    support_threshold: float = 1e-6
    penalty_parameter: float = 1.0  # initial ADMM splitting step, self-adapting
    init: str = "zeros"  # zeros | least-squares | random
    init_seed: int = 0

    def __post_init__(self):
        for name in ("primal_tol", "dual_tol", "support_threshold", "penalty_parameter"):
            if getattr(self, name) <= 0:
                raise SpecificationError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise SpecificationError("max_iterations must be at least 1")
        if self.init not in ("zeros", "least-squares", "random"):
            raise SpecificationError(f"unknown init strategy {self.init!r}")


@dataclass(frozen=True)
class GroupLassoProblem:
    """One solve: model matrix, targets, weights, formulation and options."""

    M: ModelMatrix
    targets: tuple[int, ...]
    lambdas: np.ndarray
    mode: str = "constrained"
    kappas: np.ndarray | None = None  # one entry per target, relaxed mode only
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        targets = tuple(int(j) for j in self.targets)
        if not targets:
            raise SpecificationError("at least one target is required")
        if min(targets) < 0 or max(targets) >= self.M.n_terms:
            raise SpecificationError("target index out of range")
        lam = np.asarray(self.lambdas, dtype=float).copy()
        if lam.shape != (self.M.n_candidates,):
            raise SpecificationError(
                f"lambdas has shape {lam.shape}, expected ({self.M.n_candidates},)"
            )
        if np.any(lam < 0):
            raise SpecificationError("lambdas must be non-negative")
        if self.mode not in ("constrained", "relaxed"):
            raise SpecificationError(f"unknown mode {self.mode!r}")
        kap = self.kappas
        if self.mode == "relaxed":
            if kap is None:
                raise SpecificationError("relaxed mode requires kappas")
            kap = np.broadcast_to(np.asarray(kap, dtype=float), (len(targets),)).copy()
            if np.any(kap < 0) or not np.all(np.isfinite(kap)):
                raise SpecificationError("kappas must be finite and non-negative")
            kap.setflags(write=False)
        elif kap is not None:
            kap = None
        lam.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "kappas", kap)

    def unit_targets(self) -> np.ndarray:
        """The e_j columns stacked into a (n_terms x |J|) matrix."""
        E = np.zeros((self.M.n_terms, len(self.targets)))
        E[list(self.targets), np.arange(len(self.targets))] = 1.0
        return E


@dataclass(frozen=True)
class Solution:
    B: np.ndarray
    group_norms: np.ndarray
    support: tuple[int, ...]
    objective: float
    constraint_residual: float
    iterations: int
    status: str  # converged | max_iterations

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float).copy()
        gn = np.asarray(self.group_norms, dtype=float).copy()
        B.setflags(write=False)
        gn.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "group_norms", gn)
        object.__setattr__(self, "support", tuple(int(g) for g in self.support))


def group_soft_threshold(d, c: float, lam: float) -> np.ndarray:
    """Minimizer of c||x||^2 - 2 d.x + lam ||x||, i.e. max(0, 1-lam/(2||d||)) d/c."""
    d = np.asarray(d, dtype=float)
    if c <= 0:
        raise SpecificationError("c must be positive")
    norm = np.linalg.norm(d)
    if norm == 0.0:
        return np.zeros_like(d)
    shrink = 1.0 - lam / (2.0 * norm)
    if shrink <= 0.0:
        return np.zeros_like(d)
    return (shrink / c) * d


def objective_value(problem: GroupLassoProblem, B) -> float:
    """The mode's objective at B (feasibility is not scored in constrained mode)."""
    B = np.asarray(B, dtype=float)
    J, G = len(problem.targets), problem.M.n_candidates
    if B.shape != (J, G):
        raise SpecificationError(f"B has shape {B.shape}, expected ({J}, {G})")
    value = float(np.sum(B * B))
    value += float(problem.lambdas @ np.linalg.norm(B, axis=0))
    if problem.mode == "relaxed":
        R = problem.M.values @ B.T - problem.unit_targets()
        value += float(problem.kappas @ np.einsum("fj,fj->j", R, R))
    return value


def extract_support(solution: Solution, threshold: float) -> set[int]:
    """Candidate indices whose coefficient group norm exceeds the threshold."""
    if threshold < 0:
        raise SpecificationError("threshold must be non-negative")
    return {g for g, n in enumerate(solution.group_norms) if n > threshold}


class _ModelFactorization:
    """Cached thin SVD of M, reused for every projection and quadratic step."""

    def __init__(self, M: np.ndarray):
        self.M = M
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        keep = s > (s[0] * RANK_TOLERANCE if s.size and s[0] > 0 else 0.0)
        self.U = U[:, keep]
        self.s = s[keep]
        self.Vt = Vt[keep, :]

    def range_residuals(self, E: np.ndarray) -> np.ndarray:
        """Distance of each column of E from range(M)."""
        proj = self.U @ (self.U.T @ E)
        return np.linalg.norm(E - proj, axis=0)

    def min_norm_solution(self, E: np.ndarray) -> np.ndarray:
        """Columns x with M x = e of minimal norm (pseudo-inverse applied to E)."""
        return self.Vt.T @ ((self.U.T @ E) / self.s[:, None])

    def gram_pinv_apply(self, RHS: np.ndarray) -> np.ndarray:
        """(M M^T)^+ RHS, consistent whenever RHS lies in range(M)."""
        return self.U @ ((self.U.T @ RHS) / (self.s * self.s)[:, None])


def _check_feasible(fact: _ModelFactorization, E: np.ndarray, targets) -> None:
    residuals = fact.range_residuals(E)
    for r, j in zip(residuals, targets):
        if r > FEASIBILITY_TOL:
            raise InfeasibleError(j, float(r))


def _kkt_residuals(M, lam, B, support_threshold):
    """(support residual, zero-group slack violation) for the constrained KKT system.

    Multipliers are fitted by least squares on the support columns; support
    groups must have vanishing stationarity residual, zero groups must have
    dual column norm within their lambda.
    """
    norms = np.linalg.norm(B, axis=0)
    on = norms > support_threshold
    T = 2.0 * B.copy()
    if on.any():
        T[:, on] += lam[on] * B[:, on] / norms[on]
    if on.any():
        alpha, *_ = np.linalg.lstsq(M[:, on].T, -T[:, on].T, rcond=None)
    else:
        alpha = np.zeros((M.shape[0], B.shape[0]))
    dual = alpha.T @ M
    support_resid = float(np.linalg.norm(T[:, on] + dual[:, on], axis=0).max(initial=0.0))
    off = ~on
    slack = np.linalg.norm(dual[:, off], axis=0) - lam[off]
    zero_violation = float(slack.max(initial=0.0))
    return support_resid, zero_violation


def solve_constrained(problem: GroupLassoProblem) -> Solution:
    """ADMM solve of the equality-constrained formulation.

    Alternates a quadratic step that enforces M beta_j = e_j exactly through
    the cached factorization with an exact group soft-threshold, adapting the
    splitting penalty by primal/dual residual balancing. Converged solutions
    carry a KKT certificate: stationarity on the support within dual_tol and
    dual-norm slack on zero groups within dual_tol.
    """
    if problem.mode != "constrained":
        raise SpecificationError("solve_constrained requires mode='constrained'")
    opts = problem.options
    M = problem.M.values
    G = problem.M.n_candidates
    J = len(problem.targets)
    lam = problem.lambdas
    E = problem.unit_targets()

    fact = _ModelFactorization(M)
    _check_feasible(fact, E, problem.targets)
    B_ls = fact.min_norm_solution(E).T  # J x G, the lam = 0 minimizer

    if opts.init == "zeros":
        Z = np.zeros((J, G))
    elif opts.init == "least-squares":
        Z = B_ls.copy()
    else:
        Z = np.random.default_rng(opts.init_seed).standard_normal((J, G))
    Dual = np.zeros((J, G))
    rho = opts.penalty_parameter

    B = Z.copy()
    status = "max_iterations"
    iterations = opts.max_iterations
    check_every = 10
    for it in range(1, opts.max_iterations + 1):
        V = Z - Dual
        RHS = rho * (M @ V.T) - (2.0 + rho) * E
        mu = fact.gram_pinv_apply(RHS)
        B = (rho * V - mu.T @ M) / (2.0 + rho)
        W = B + Dual
        Wn = np.linalg.norm(W, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            shrink = np.where(Wn > 0, np.maximum(0.0, 1.0 - lam / (rho * Wn)), 0.0)
        Z_new = W * shrink
        primal = float(np.linalg.norm(B - Z_new))
        dual_resid = rho * float(np.linalg.norm(Z_new - Z))
        Z = Z_new
        Dual = Dual + (B - Z)
        if primal > 10.0 * dual_resid:
            rho *= 2.0
            Dual /= 2.0
        elif dual_resid > 10.0 * primal:
            rho /= 2.0
            Dual *= 2.0
        if it % check_every == 0 or max(primal, dual_resid) <= opts.primal_tol:
            if primal <= opts.primal_tol and dual_resid <= opts.primal_tol:
                s_res, z_res = _kkt_residuals(M, lam, B, opts.support_threshold)
                if s_res <= opts.dual_tol and z_res <= opts.dual_tol:
                    status = "converged"
                    iterations = it
                    break

    norms = np.linalg.norm(B, axis=0)
    support = tuple(int(g) for g in np.flatnonzero(norms > opts.support_threshold))
    residual = float(np.linalg.norm(M @ B.T - E, axis=0).max(initial=0.0))
    return Solution(
        B=B,
        group_norms=norms,
        support=support,
        objective=objective_value(problem, B),
        constraint_residual=residual,
        iterations=iterations,
        status=status,
    )


def _group_norm_root(d: np.ndarray, c: np.ndarray, lam: float) -> float:
    """Solve sum_j (2 nu d_j / (2 nu c_j + lam))^2 = nu^2 for nu > 0.

    Used by the non-uniform-kappa block update. The reduced function
    h(nu) = sum_j 4 d_j^2/(2 nu c_j + lam)^2 - 1 is convex and decreasing,
    so Newton from the zero-crossing side converges monotonically; a
    bisection safeguard bounds the step.
    """
    hi = float(np.linalg.norm(d / c))
    lo = 0.0
    nu = hi
    for _ in range(200):
        q = 2.0 * nu * c + lam
        h = float(np.sum(4.0 * d * d / (q * q))) - 1.0
        if abs(h) <= NEWTON_TOL:
            return nu
        if h > 0:
            lo = nu
        else:
            hi = nu
        dh = float(np.sum(-16.0 * d * d * c / (q * q * q)))
        step = nu - h / dh if dh != 0 else 0.5 * (lo + hi)
        nu = step if lo < step < hi else 0.5 * (lo + hi)
    return nu


def _block_minimizer(d: np.ndarray, c: np.ndarray, lam: float, uniform: bool) -> np.ndarray:
    """Exact minimizer of sum_j c_j x_j^2 - 2 d_j x_j + lam ||x||."""
    if lam == 0.0:
        return d / c
    norm = np.linalg.norm(d)
    if 2.0 * norm <= lam:
        return np.zeros_like(d)
    if uniform:
        return group_soft_threshold(d, float(c[0]), lam)
    nu = _group_norm_root(d, c, lam)
    return d / (c + lam / (2.0 * nu))


def solve_relaxed(problem: GroupLassoProblem) -> Solution:
    """Cyclic block coordinate descent on the penalized formulation.

    Each pass updates every candidate group exactly; convergence is declared
    when the largest blockwise update norm in a pass drops to primal_tol.
    """
    if problem.mode != "relaxed":
        raise SpecificationError("solve_relaxed requires mode='relaxed'")
    opts = problem.options
    M = problem.M.values
    G = problem.M.n_candidates
    J = len(problem.targets)
    lam = problem.lambdas
    kap = problem.kappas
    E = problem.unit_targets()
    uniform = bool(np.all(kap == kap[0]))

    msq = np.einsum("fg,fg->g", M, M)
    c_blocks = 1.0 + np.outer(kap, msq)  # J x G
    B = np.zeros((J, G))
    R = E.copy()  # residual columns e_j - M beta_j

    status = "max_iterations"
    iterations = opts.max_iterations
    for sweep in range(1, opts.max_iterations + 1):
        max_change = 0.0
        for g in range(G):
            m = M[:, g]
            old = B[:, g]
            d = kap * (R.T @ m + old * msq[g])
            new = _block_minimizer(d, c_blocks[:, g], lam[g], uniform)
            delta = new - old
            change = float(np.linalg.norm(delta))
            if change > 0.0:
                B[:, g] = new
                R -= np.outer(m, delta)
                if change > max_change:
                    max_change = change
        if max_change <= opts.primal_tol:
            status = "converged"
            iterations = sweep
            break

    norms = np.linalg.norm(B, axis=0)
    support = tuple(int(g) for g in np.flatnonzero(norms > opts.support_threshold))
    residual = float(np.linalg.norm(M @ B.T - E, axis=0).max(initial=0.0))
    return Solution(
        B=B,
        group_norms=norms,
        support=support,
        objective=objective_value(problem, B),
        constraint_residual=residual,
        iterations=iterations,
        status=status,
    )


def solve(problem: GroupLassoProblem) -> Solution:
    """Dispatch on the problem's formulation."""
    if problem.mode == "constrained":
        return solve_constrained(problem)
    return solve_relaxed(problem)


def with_options(problem: GroupLassoProblem, **changes) -> GroupLassoProblem:
    """A copy of the problem with some solver options replaced."""
    return replace(problem, options=replace(problem.options, **changes))
