"""Coverage certificates and per-vertex submodularity checks.

A table ``a`` is certified when there is a probability vector ``b`` over
connection patterns with ``a = M b``.  That ``b`` is unique when it exists:
``(M b)[s] = sum(b) - zeta(b)[~s]``, so with ``sum(b) = 1`` the subset sums
of ``b`` are pinned to ``1 - a[~t]`` and Möbius inversion returns the only
candidate.  Certification is therefore a sign check, not a search.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .lattice import (
    apply_connection,
    mobius_transform,
    parent_count,
    subset_max,
    triple_arrays,
)
from .model import Network, lt_table

DEFAULT_EPS = 1e-9


@dataclass
class CoverageCertificate:
    feasible: bool
    b: Optional[np.ndarray]
    witness_pattern: Optional[int]
    witness_value: Optional[float]
    residual: float
    candidate: np.ndarray = field(repr=False, default=None)


def _is_exact(a):
    return a.dtype == object


def candidate_coefficients(a) -> np.ndarray:
    """The unique ``b`` with ``sum(b) = 1 - a[0]`` and ``M b = a`` off the empty state."""
    a = np.asarray(a)
    if a.dtype != object:
        a = a.astype(np.float64)
    parent_count(a.size)
    g = 1 - a[::-1]
    return mobius_transform(g)


def certify_vertex(a, eps: float = DEFAULT_EPS) -> CoverageCertificate:
    """Decide whether table ``a`` is a mixture of OR-of-live-parents rules.

    Feasible iff the candidate coefficients are all ``>= -eps`` and
    ``a[0] == 0`` (within ``eps``).  Near-zero negatives are clamped and
    the vector renormalised.  Object arrays of Fractions are handled
    exactly, in which case ``eps`` is ignored.
    """
    a = np.asarray(a)
    exact = _is_exact(a)
    if not exact:
        a = a.astype(np.float64)
    k = parent_count(a.size)
    cand = candidate_coefficients(a)
    residual = float(np.max(np.abs(apply_connection(cand, k) - a)[1:], initial=0.0))
    tol = 0 if exact else eps

    i_min = int(np.argmin(cand))
    low = cand[i_min]
    if a[0] > tol:
        # empty state row of M is zero: no b can produce a[0] > 0
        return CoverageCertificate(False, None, 0, -a[0] if exact else -float(a[0]),
                                   max(residual, abs(float(a[0]))), cand)
    if low < -tol:
        return CoverageCertificate(False, None, i_min, low if exact else float(low),
                                   residual, cand)
    if exact:
        b = cand.copy()
    else:
        b = np.clip(cand, 0.0, None)
        b /= b.sum()
        residual = float(np.max(np.abs(apply_connection(b, k) - a), initial=0.0))
    return CoverageCertificate(True, b, None, None, residual, cand)


@dataclass
class ModelCertificate:
    feasible: bool
    vertices: dict  # vertex index -> CoverageCertificate
    infeasible: list  # vertex indices, ascending

    def report(self, net: Network, eps: float) -> dict:
        out = {}
        for v, cert in sorted(self.vertices.items()):
            entry = {
                "parents": [net.vertices[u] for u in net.parents[v]],
                "feasible": cert.feasible,
                "residual": cert.residual,
            }
            if cert.feasible:
                entry["b"] = [float(x) for x in cert.b]
            else:
                entry["witness_pattern"] = [net.vertices[net.parents[v][m]]
                                            for m in range(len(net.parents[v]))
                                            if cert.witness_pattern >> m & 1]
                entry["witness_pattern_bits"] = int(cert.witness_pattern)
                entry["witness_value"] = float(cert.witness_value)
            out[net.vertices[v]] = entry
        return {
            "verdict": "feasible" if self.feasible else "infeasible",
            "feasible": self.feasible,
            "eps_feas": eps,
            "infeasible_vertices": [net.vertices[v] for v in self.infeasible],
            "vertices": out,
        }


def certify_model(net: Network, eps: float = DEFAULT_EPS) -> ModelCertificate:
    """Certify every vertex; PLMMI vertices are checked type by type."""
    certs = {}
    for v in range(len(net)):
        if net.n_types and len(net.parents[v]):
            per_type = [certify_vertex(a, eps) for a in net.type_tables(v)]
            pooled = certify_vertex(net.tables[v], eps)
            bad = next((c for c in per_type if not c.feasible), None)
            certs[v] = pooled if bad is None else bad
        else:
            certs[v] = certify_vertex(net.tables[v], eps)
    infeasible = [v for v, c in certs.items() if not c.feasible]
    return ModelCertificate(not infeasible, certs, infeasible)


class Violation(NamedTuple):
    kind: str  # "nonnegative" | "monotone" | "submodular"
    S: int
    T: int
    u: int
    margin: float


@dataclass
class Theorem2Report:
    """Per-vertex check: non-negative, monotone and submodular table."""

    nonnegative: bool
    monotone: bool
    submodular: bool
    violations: list

    @property
    def passed(self) -> bool:
        return self.nonnegative and self.monotone and self.submodular


def theorem2_check(a, eps: float = DEFAULT_EPS) -> Theorem2Report:
    """Check ``s -> a[s]`` for non-negativity, monotonicity and diminishing returns.

    Submodularity is checked on every triple ``S ⊆ T``, ``u ∉ T`` with
    margin ``(a[S+u] - a[S]) - (a[T+u] - a[T])``; a margin below ``-eps``
    is a violation.  Monotonicity only needs single-element steps.
    """
    a = np.asarray(a)
    if a.dtype != object:
        a = a.astype(np.float64)
    k = parent_count(a.size)
    if k > 12:
        raise ValueError(f"theorem2_check supports at most 12 parents, got {k}")
    tol = 0 if a.dtype == object else eps
    violations = []

    neg = np.flatnonzero(a < -tol)
    violations += [Violation("nonnegative", int(s), int(s), -1, a[s]) for s in neg]

    idx = np.arange(1 << k)
    for u in range(k):
        base = idx[(idx >> u & 1) == 0]
        step = a[base | (1 << u)] - a[base]
        for s in np.flatnonzero(step < -tol):
            violations.append(Violation("monotone", int(base[s]), int(base[s]), u, step[s]))

    S, T, U = triple_arrays(k)
    bit = np.left_shift(1, U)
    margin = (a[S | bit] - a[S]) - (a[T | bit] - a[T])
    for i in np.flatnonzero(margin < -tol):
        violations.append(Violation("submodular", int(S[i]), int(T[i]), int(U[i]), margin[i]))

    kinds = {v.kind for v in violations}
    return Theorem2Report("nonnegative" not in kinds, "monotone" not in kinds,
                          "submodular" not in kinds, violations)


def random_monotone_table(k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws closed upward by subset-max, empty state zeroed, scaled to [0, 1]."""
    x = rng.random(1 << k)
    a = subset_max(x, k)
    a[0] = 0.0
    top = a.max()
    return a / top if top > 0 else a


def truncated_rank_table(k: int, r: int) -> np.ndarray:
    """``a[s] = min(|s|, r) / r``: submodular and monotone; linear (certifiable) when r is 1 or k."""
    sizes = np.array([bin(s).count("1") for s in range(1 << k)], dtype=float)
    return np.minimum(sizes, r) / r


def falsify_equivalence(k: int, samples: int, rng_seed: int,
                        eps: float = DEFAULT_EPS) -> list[np.ndarray]:
    """Tables that pass :func:`theorem2_check` yet fail :func:`certify_vertex`.

    Candidates are the truncated-rank tables for ``r = 2 .. k-1``, two
    random LT tables, and ``samples`` random monotone tables drawn with
    ``numpy.random.default_rng(rng_seed)``.
    """
    if not 2 <= k <= 6:
        raise ValueError("falsify_equivalence supports 2 <= k <= 6")
    rng = np.random.default_rng(rng_seed)
    candidates = [truncated_rank_table(k, r) for r in range(2, k)]
    candidates += [lt_table(rng.dirichlet(np.ones(k + 1))[:k]) for _ in range(2)]
    candidates += [random_monotone_table(k, rng) for _ in range(samples)]
    found = []
    for a in candidates:
        if theorem2_check(a, eps).passed and not certify_vertex(a, eps).feasible:
            found.append(a)
    return found
