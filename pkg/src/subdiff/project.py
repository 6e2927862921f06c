"""Nearest certified tables in squared Euclidean distance.

The certified tables over ``k`` parents form the convex set
``C = {M b : b on the probability simplex}``.  Projecting onto ``C`` is a
simplex-constrained least-squares problem in ``b``.  ``M`` is badly
conditioned (the spectrum spreads geometrically with ``k``), so the main
solver is an active-set method that solves each face exactly; optimal
supports are small.  A restarted FISTA solver is kept for cross-checks.
``M`` is symmetric, so ``M.T @ r == apply_connection(r)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .certify import certify_vertex
from .lattice import apply_connection, parent_count
from .model import Network, replace_tables

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50_000


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = 1}`` by sort and threshold."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def connection_norm_bound(k: int, rounds: int = 50, safety: float = 1.01) -> float:
    """Power-iteration estimate of the top eigenvalue of ``M.T M``, inflated by ``safety``."""
    x = np.ones(1 << k) / np.sqrt(1 << k)
    lam = 0.0
    for _ in range(rounds):
        y = apply_connection(apply_connection(x, k), k)
        lam = float(np.linalg.norm(y))
        if lam == 0.0:
            break
        x = y / lam
    return safety * lam


def connection_columns(k: int, patterns) -> np.ndarray:
    """Dense columns of ``M`` for the given patterns, shape ``(2**k, len(patterns))``."""
    idx = np.arange(1 << k)
    return ((idx[:, None] & np.asarray(patterns, dtype=np.int64)[None, :]) != 0).astype(np.float64)


@dataclass
class SolverResult:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: np.ndarray = field(repr=False)


def _subproblem(columns, target, free):
    """Least squares over the face ``{x_free >= ?, sum(x_free) = 1}`` (sign unconstrained).

    The first free index is eliminated through the sum constraint.
    """
    cols = columns(free)
    pivot = cols[:, 0]
    rest = cols[:, 1:] - pivot[:, None]
    z = np.empty(len(free))
    if rest.shape[1]:
        w = np.linalg.lstsq(rest, target - pivot, rcond=None)[0]
        z[1:] = w
        z[0] = 1.0 - w.sum()
    else:
        z[0] = 1.0
    return z


def active_set_simplex_lsq(columns, forward, adjoint, target, dim, start, tol, max_iter,
                           record=True) -> SolverResult:
    """Minimise ``||A x - target||^2`` over the probability simplex by an active-set method.

    Lawson-Hanson adapted to the simplex: begin at vertex ``start``; add the
    coordinate with the most negative reduced gradient; solve least squares
    on the free face exactly; if that leaves the simplex, walk to the
    boundary and drop the coordinates that hit zero.  Each step moves along
    a segment toward a face minimiser, so the objective never increases.
    ``columns(idx)`` returns the dense columns of ``A``; ``forward`` and
    ``adjoint`` apply ``A`` and ``A.T``.  Optimal when every reduced
    gradient is within ``tol`` of the face multiplier.
    """
    x = np.zeros(dim)
    x[start] = 1.0
    free = [start]

    def objective(x):
        r = forward(x) - target
        return float(np.dot(r, r)), r

    fx, r = objective(x)
    history = [fx]
    converged = stalled = False
    it = 0
    while it < max_iter and not stalled:
        g = 2.0 * adjoint(r)
        mu = float(np.mean(g[free]))
        candidates = g.copy()
        candidates[free] = np.inf
        j = int(np.argmin(candidates))
        if not np.isfinite(candidates[j]) or candidates[j] >= mu - tol:
            converged = True
            break
        free.append(j)
        first = True
        while it < max_iter:
            it += 1
            z = _subproblem(columns, target, free)
            if np.all(z > 0):
                x[:] = 0.0
                x[free] = z
                break
            if first and z[-1] <= 0:
                # no descent along the newly freed coordinate: optimal up to rounding
                free.pop()
                stalled = True
                break
            first = False
            xf = x[free]
            ratio = np.full(len(free), np.inf)
            shrink = z <= 0
            ratio[shrink] = xf[shrink] / (xf[shrink] - z[shrink])
            blocking = int(np.argmin(ratio))
            xf = xf + ratio[blocking] * (z - xf)
            xf[blocking] = 0.0
            x[free] = np.maximum(xf, 0.0)
            free = [i for i in free if x[i] > 0]
        x = np.maximum(x, 0.0)
        x /= x.sum()
        f_new, r = objective(x)
        fx = min(fx, f_new)
        if record:
            history.append(fx)
    if not converged:
        g = 2.0 * adjoint(r)
        mu = float(np.mean(g[free]))
        outside = np.delete(g, free)
        converged = bool(outside.size == 0 or outside.min() >= mu - tol)
    return SolverResult(x, fx, it, converged, np.asarray(history))


def fista_simplex_lsq(forward, adjoint, target, dim, lipschitz, tol, max_iter,
                      x0=None) -> SolverResult:
    """Minimise ``||forward(x) - target||^2`` over the probability simplex.

    FISTA with adaptive restart: whenever the accelerated step would raise
    the objective, momentum is dropped and a plain projected-gradient step
    (guaranteed descent for step ``1/L``) is taken instead, so the recorded
    objective sequence never increases.  Stops once the gradient-mapping
    norm ``L * ||x - P(x - grad/L)||`` falls to ``tol``.  Slow on
    ill-conditioned lattices; kept as an independent check of the
    active-set solver.
    """
    L = 2.0 * lipschitz  # gradient of the squared norm is 2 * adjoint(residual)

    def objective(x):
        r = forward(x) - target
        return float(np.dot(r, r)), r

    x = np.full(dim, 1.0 / dim) if x0 is None else project_simplex(np.asarray(x0, float))
    fx, rx = objective(x)
    y, t = x.copy(), 1.0
    history = [fx]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ry = forward(y) - target
        x_new = project_simplex(y - 2.0 * adjoint(ry) / L)
        f_new, r_new = objective(x_new)
        if f_new > fx:
            x_new = project_simplex(x - 2.0 * adjoint(rx) / L)
            f_new, r_new = objective(x_new)
            t = 1.0
            y = x_new.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_next) * (x_new - x)
            t = t_next
        x, fx, rx = x_new, min(f_new, fx), r_new
        history.append(fx)
        grad = 2.0 * adjoint(rx)
        gap = L * np.linalg.norm(x - project_simplex(x - grad / L))
        if gap <= tol:
            converged = True
            break
    return SolverResult(x, fx, it, converged, np.asarray(history))


@dataclass
class ProjectionResult:
    a_star: np.ndarray
    b_star: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: np.ndarray = field(repr=False, default=None)


def _tidy_table(a):
    a = np.clip(a, 0.0, 1.0)
    a[0] = 0.0
    return a


def project_vertex(a, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> ProjectionResult:
    """Nearest point of ``C`` to table ``a``; identity on certified tables."""
    a = np.asarray(a, dtype=np.float64)
    k = parent_count(a.size)
    if k > 14:
        raise ValueError(f"projection supports at most 14 parents, got {k}")
    cert = certify_vertex(a)
    if cert.feasible:
        return ProjectionResult(a.copy(), cert.b, 0.0, 0, True, np.zeros(1))

    res = active_set_simplex_lsq(
        lambda cols: connection_columns(k, cols),
        lambda b: apply_connection(b, k),
        lambda r: apply_connection(r, k),
        a, 1 << k, 0, tol, max_iter)
    a_star = _tidy_table(apply_connection(res.x, k))
    objective = float(np.sum((a - a_star) ** 2))
    return ProjectionResult(a_star, res.x, objective, res.iterations, res.converged, res.history)


@dataclass
class ModelProjection:
    network: Network
    results: dict  # vertex index -> ProjectionResult
    partial: bool  # some vertex hit max_iter

    def report(self, original: Network) -> dict:
        vertices = {}
        for v, r in sorted(self.results.items()):
            delta = np.max(np.abs(r.a_star - original.tables[v]), initial=0.0)
            vertices[original.vertices[v]] = {
                "replaced": r.iterations > 0,
                "objective": float(r.objective),
                "iterations": r.iterations,
                "converged": bool(r.converged),
                "max_entry_delta": float(delta),
                "a_star": r.a_star.tolist(),
            }
        objectives = [r.objective for r in self.results.values()]
        return {
            "partial": self.partial,
            "replaced_vertices": [original.vertices[v] for v, r in sorted(self.results.items())
                                  if r.iterations > 0],
            "total_objective": float(sum(objectives)),
            "max_objective": float(max(objectives, default=0.0)),
            "vertices": vertices,
        }


def project_model(net: Network, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> ModelProjection:
    """Project every vertex table independently; certified vertices are untouched."""
    results, changed = {}, {}
    for v in range(len(net)):
        r = project_vertex(net.tables[v], tol, max_iter)
        results[v] = r
        if r.iterations > 0:
            changed[v] = r.a_star
    out = replace_tables(net, changed) if changed else net
    return ModelProjection(out, results, not all(r.converged for r in results.values()))


@dataclass
class MultiProjection:
    b: list  # per type: full-length coefficient vector
    a_star: list  # per type: projected table
    slack: float
    objective: float
    iterations: int
    converged: bool


def project_multi(tables, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  support: str = "singletons") -> MultiProjection:
    """Jointly project per-type tables with a shared coefficient budget.

    Each type ``n`` gets coefficients ``b_n`` on the allowed patterns
    (``"singletons"``: one-parent patterns; ``"all"``: every non-empty
    pattern).  All coefficients plus one slack coordinate lie on a single
    simplex, so the type totals sum to at most one and the slack absorbs the
    remainder as the empty pattern.
    """
    tables = [np.asarray(a, dtype=np.float64) for a in tables]
    if not tables:
        raise ValueError("project_multi needs at least one table")
    k = parent_count(tables[0].size)
    if any(a.size != tables[0].size for a in tables):
        raise ValueError("all tables must share the parent set")
    if k > 14:
        raise ValueError(f"projection supports at most 14 parents, got {k}")
    if support == "singletons":
        patterns = 1 << np.arange(k)
    elif support == "all":
        patterns = np.arange(1, 1 << k)
    else:
        raise ValueError(f"unknown support {support!r}")
    N, P, size = len(tables), patterns.size, 1 << k
    target = np.concatenate(tables)

    def expand(x):
        full = np.zeros((N, size))
        full[:, patterns] = x[:-1].reshape(N, P)
        return full

    def forward(x):
        full = expand(x)
        return np.concatenate([apply_connection(full[n], k) for n in range(N)])

    def adjoint(r):
        r = r.reshape(N, size)
        g = np.stack([apply_connection(r[n], k)[patterns] for n in range(N)])
        return np.append(g.reshape(-1), 0.0)

    def columns(idx):
        out = np.zeros((N * size, len(idx)))
        for j, i in enumerate(idx):
            if i < N * P:
                n, p = divmod(i, P)
                out[n * size:(n + 1) * size, j] = connection_columns(k, [patterns[p]])[:, 0]
        return out

    res = active_set_simplex_lsq(columns, forward, adjoint, target, N * P + 1, N * P,
                                 tol, max_iter)
    full = expand(res.x)
    a_star = [_tidy_table(apply_connection(full[n], k)) for n in range(N)]
    b = [full[n].copy() for n in range(N)]
    if support == "all" and N == 1:
        b[0][0] = res.x[-1]
    objective = float(sum(np.sum((a - s) ** 2) for a, s in zip(tables, a_star)))
    return MultiProjection(b, a_star, float(res.x[-1]), objective, res.iterations, res.converged)
