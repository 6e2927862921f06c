"""Random instances for tests and experiment scripts."""

import numpy as np

from .lattice import apply_connection
from .model import Network, build_network


def random_parents(n: int, rng: np.random.Generator, max_parents: int = 3,
                   edge_prob: float = 0.5) -> list[list[int]]:
    """Random DAG: vertex ``v`` may take parents among ``0..v-1`` under a shuffled labelling."""
    order = rng.permutation(n)
    parents = [[] for _ in range(n)]
    for i in range(1, n):
        v = int(order[i])
        earlier = [int(u) for u in order[:i] if rng.random() < edge_prob]
        rng.shuffle(earlier)
        parents[v] = earlier[:max_parents]
    return parents


def random_simplex(size: int, rng: np.random.Generator, sparsity: float = 0.0) -> np.ndarray:
    b = rng.dirichlet(np.ones(size))
    if sparsity:
        b[rng.random(size) < sparsity] = 0.0
        if b.sum() == 0:
            b[rng.integers(size)] = 1.0
        b /= b.sum()
    return b


def random_feasible_table(k: int, rng: np.random.Generator) -> np.ndarray:
    """``a = M b`` with ``b`` drawn on the simplex (some draws sparse)."""
    b = random_simplex(1 << k, rng, sparsity=rng.choice([0.0, 0.5, 0.9]))
    return np.clip(apply_connection(b, k), 0.0, 1.0)


def random_table(k: int, rng: np.random.Generator) -> np.ndarray:
    """Arbitrary table with a zero empty-state entry; usually not certifiable."""
    a = rng.random(1 << k)
    a[0] = 0.0
    return a


def and_table(k: int) -> np.ndarray:
    a = np.zeros(1 << k)
    a[-1] = 1.0
    return a


def _model(kind, parent_names, rng):
    k = len(parent_names)
    if kind == "ic":
        return {"kind": "ic", "p": {u: float(rng.uniform(0.05, 0.95)) for u in parent_names}}
    if kind == "lt":
        w = rng.dirichlet(np.ones(k + 1))[:k]
        return {"kind": "lt", "w": {u: float(x) for u, x in zip(parent_names, w)}}
    if kind == "mixture":
        return {"kind": "table", "a": random_feasible_table(k, rng).tolist()}
    if kind == "arbitrary":
        return {"kind": "table", "a": random_table(k, rng).tolist()}
    if kind == "and":
        return {"kind": "table", "a": and_table(k).tolist()}
    raise ValueError(kind)


def random_network(n: int, rng: np.random.Generator, max_parents: int = 3,
                   kinds=("ic", "lt", "mixture"), edge_prob: float = 0.5) -> Network:
    """Random DAG with each vertex's model kind drawn from ``kinds``."""
    parents = random_parents(n, rng, max_parents, edge_prob)
    names = [f"v{i}" for i in range(n)]
    edges = [[names[u], names[v]] for v in range(n) for u in parents[v]]
    models = {}
    for v in range(n):
        if parents[v]:
            kind = kinds[rng.integers(len(kinds))]
            models[names[v]] = _model(kind, [names[u] for u in parents[v]], rng)
    return build_network(names, edges, models)


def random_plmmi_network(n: int, n_types: int, rng: np.random.Generator,
                         max_parents: int = 3, edge_prob: float = 0.6,
                         total: float | None = None) -> Network:
    """Random PLMMI network; per-vertex weight totals uniform in [0.5, 1] unless ``total`` is set."""
    parents = random_parents(n, rng, max_parents, edge_prob)
    names = [f"v{i}" for i in range(n)]
    edges = [[names[u], names[v]] for v in range(n) for u in parents[v]]
    models = {}
    for v in range(n):
        k = len(parents[v])
        w = rng.dirichlet(np.ones(k * n_types)).reshape(k, n_types) if k else np.zeros((0, n_types))
        scale = rng.uniform(0.5, 1.0) if total is None else total
        w *= scale
        models[names[v]] = {
            "kind": "plmmi", "n_types": n_types,
            "w": {names[u]: w[m].tolist() for m, u in enumerate(parents[v])},
        }
    return build_network(names, edges, models)


def and_gadget() -> Network:
    """Two roots feeding one vertex that fires only when both are active."""
    return build_network(
        ["u1", "u2", "v"], [["u1", "v"], ["u2", "v"]],
        {"v": {"kind": "table", "a": [0.0, 0.0, 0.0, 1.0]}})
