"""Factors, response models, candidate points and the model matrix.

A design problem is described by a list of factors (each with a finite set
of levels), a list of monomial model terms over those factors, and the set
of target coefficients to be estimated. Candidate design points are columns
of a factor-by-candidate matrix; evaluating every model term at every
candidate gives the model matrix used by the weight construction and the
solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np


class SpecificationError(ValueError):
    """Raised when factors, terms or candidate data are inconsistent."""


@dataclass(frozen=True)
class Factor:
    """A named experimental factor with an ordered list of distinct levels."""

    name: str
    levels: tuple[float, ...]

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if len(levels) < 1:
            raise SpecificationError(f"factor {self.name!r} needs at least one level")
        if len(set(levels)) != len(levels):
            raise SpecificationError(f"factor {self.name!r} has duplicate levels")
        object.__setattr__(self, "levels", levels)


@dataclass(frozen=True)
class ModelTerm:
    """A monomial, stored as one non-negative exponent per factor."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        if any(e < 0 for e in exps):
            raise SpecificationError("term exponents must be non-negative")
        object.__setattr__(self, "exponents", exps)

    def label(self, factor_names: list[str] | tuple[str, ...]) -> str:
        """Monomial string such as ``a1*a3`` or ``a2^2``; ``1`` for the intercept."""
        parts = []
        for name, e in zip(factor_names, self.exponents):
            if e == 1:
                parts.append(name)
            elif e > 1:
                parts.append(f"{name}^{e}")
        return "*".join(parts) if parts else "1"


@dataclass(frozen=True)
class ModelSpec:
    """Factors, ordered model terms, and the target-coefficient index set.

    ``targets`` holds 0-based indices into ``terms``.
    """

    factors: tuple[Factor, ...]
    terms: tuple[ModelTerm, ...]
    targets: tuple[int, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        terms = tuple(self.terms)
        targets = tuple(sorted(set(int(j) for j in self.targets)))
        if not factors:
            raise SpecificationError("at least one factor is required")
        if not terms:
            raise SpecificationError("at least one model term is required")
        for t in terms:
            if len(t.exponents) != len(factors):
                raise SpecificationError(
                    f"term {t.exponents} has {len(t.exponents)} exponents "
                    f"for {len(factors)} factors"
                )
        if len(set(t.exponents for t in terms)) != len(terms):
            raise SpecificationError("model terms must be pairwise distinct")
        if not targets:
            raise SpecificationError("at least one target coefficient is required")
        if targets[0] < 0 or targets[-1] >= len(terms):
            raise SpecificationError(
                f"target indices {targets} out of range for {len(terms)} terms"
            )
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "targets", targets)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def term_labels(self) -> list[str]:
        names = [f.name for f in self.factors]
        return [t.label(names) for t in self.terms]


@dataclass(frozen=True)
class CandidateSet:
    """Candidate design points, one column per point (shape F x G)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise SpecificationError("candidate matrix must be 2-D with G >= 1 columns")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_factors(self) -> int:
        return self.points.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class ModelMatrix:
    """Every model term evaluated at every candidate (shape |terms| x G)."""

    values: np.ndarray
    spec: ModelSpec = field(compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_terms(self) -> int:
        return self.values.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.values.shape[1]


def enumerate_full_factorial(factors) -> CandidateSet:
    """All level combinations, lexicographic with the first factor slowest.

    The first column is the point made of every factor's first level; with
    two-level (-1, 1) factors this starts at (-1, ..., -1).
    """
    factors = list(factors)
    if not factors:
        raise SpecificationError("at least one factor is required")
    cols = list(product(*(f.levels for f in factors)))
    return CandidateSet(np.array(cols, dtype=float).T)


def evaluate_term(point, term: ModelTerm) -> float:
    """The monomial value prod_f point[f]**e[f], with 0**0 == 1."""
    point = np.asarray(point, dtype=float)
    if point.shape != (len(term.exponents),):
        raise SpecificationError(
            f"point of length {point.size} does not match term of length "
            f"{len(term.exponents)}"
        )
    value = 1.0
    for x, e in zip(point, term.exponents):
        for _ in range(e):
            value *= x
    return value


def build_model_matrix(candidates: CandidateSet, spec: ModelSpec) -> ModelMatrix:
    """Evaluate every term of ``spec`` at every candidate column."""
    if candidates.n_factors != spec.n_factors:
        raise SpecificationError(
            f"candidates have {candidates.n_factors} factor rows, "
            f"spec has {spec.n_factors} factors"
        )
    C = candidates.points
    M = np.ones((spec.n_terms, candidates.n_candidates))
    for j, term in enumerate(spec.terms):
        for f, e in enumerate(term.exponents):
            for _ in range(e):
                M[j] *= C[f]
    return ModelMatrix(M, spec)


def duplicate_columns(candidates: CandidateSet, multiplicities) -> CandidateSet:
    """Repeat candidate column g ``multiplicities[g]`` times, preserving order."""
    mult = [int(m) for m in multiplicities]
    if len(mult) != candidates.n_candidates:
        raise SpecificationError(
            f"{len(mult)} multiplicities for {candidates.n_candidates} candidates"
        )
    if any(m < 1 for m in mult):
        raise SpecificationError("multiplicities must be positive integers")
    idx = np.repeat(np.arange(candidates.n_candidates), mult)
    return CandidateSet(candidates.points[:, idx])
