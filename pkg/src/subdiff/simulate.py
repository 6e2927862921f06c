"""Propagation engines: sampling, blueprints, live patterns, exact enumeration.

Randomness comes from counter-based Philox streams.  Stream ``w`` of a run
with base seed ``s`` is ``Philox(SeedSequence(s, spawn_key=(w,)))``; within
a stream every propagation consumes one row of ``len(net)`` uniforms and
vertex ``v`` reads column ``v``.  Batches are drawn row-major, so splitting
a batch into chunks does not change the realisations.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lattice import as_exact, popcounts
from .model import Network, ModelError

CHUNK = 1 << 15
TIE_RULES = ("lowest-type-index", "highest-weight")
ENGINES = ("plmmi", "cltm")


def substream(base_seed: int, worker_index: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(base_seed, spawn_key=(worker_index,))
    return np.random.Generator(np.random.Philox(seq))


def _seed_mask(net, seeds):
    seeds = net.resolve(seeds)
    mask = np.zeros(len(net), dtype=bool)
    mask[list(seeds)] = True
    return mask


def _parent_state(active, parents):
    state = np.zeros(active.shape[0], dtype=np.int64)
    for m, u in enumerate(parents):
        state |= active[:, u].astype(np.int64) << m
    return state


def sweep(net: Network, seed_mask: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Activation matrix for a block of uniforms of shape ``(runs, len(net))``."""
    active = np.zeros(uniforms.shape, dtype=bool)
    active[:, seed_mask] = True
    for v in net.topo_order:
        if seed_mask[v]:
            continue
        state = _parent_state(active, net.parents[v])
        active[:, v] = uniforms[:, v] < net.tables[v][state]
    return active


def simulate_batch(net: Network, seeds, runs: int, rng: np.random.Generator) -> np.ndarray:
    mask = _seed_mask(net, seeds)
    blocks = []
    for start in range(0, runs, CHUNK):
        size = min(CHUNK, runs - start)
        blocks.append(sweep(net, mask, rng.random((size, len(net)))))
    return np.concatenate(blocks) if blocks else np.zeros((0, len(net)), dtype=bool)


def simulate_once(net: Network, seeds, rng_seed: int) -> frozenset:
    """One propagation: seeds first, then every vertex in topological order."""
    row = simulate_batch(net, seeds, 1, substream(rng_seed))[0]
    return frozenset(np.flatnonzero(row).tolist())


@dataclass(frozen=True)
class SpreadEstimate:
    mean: float
    stderr: float
    samples: int
    rng_seed: int
    workers: int = 1


def split_samples(samples, workers):
    base, extra = divmod(samples, workers)
    return [base + (i < extra) for i in range(workers)]


def estimate_spread(net: Network, seeds, samples: int, rng_seed: int,
                    workers: int = 1) -> SpreadEstimate:
    """Monte Carlo mean of ``|activated|``; worker ``i`` runs its share on stream ``i``."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    workers = max(1, min(workers, samples))
    sizes = split_samples(samples, workers)

    def run(i):
        return simulate_batch(net, seeds, sizes[i], substream(rng_seed, i)).sum(axis=1)

    if workers == 1:
        counts = [run(0)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(run, range(workers)))
    counts = np.concatenate(counts).astype(np.float64)
    stderr = counts.std(ddof=1) / np.sqrt(samples) if samples > 1 else 0.0
    return SpreadEstimate(float(counts.mean()), float(stderr), samples, rng_seed, workers)


def _positions_to_vertices(net, size):
    """Map masks over topological positions to masks over vertex indices."""
    idx = np.arange(size, dtype=np.int64)
    out = np.zeros(size, dtype=np.int64)
    for pos, v in enumerate(net.topo_order):
        out |= ((idx >> pos) & 1) << v
    return out


def outcome_probabilities(net: Network, seeds, exact: bool = False) -> np.ndarray:
    """``P(T | S)`` for every vertex mask ``T`` (array of length ``2**len(net)``).

    Built vertex by vertex along the topological order, so each entry is the
    product of one conditional activation probability per vertex.  With
    ``exact=True`` the tables are converted to Fractions and the result is
    an object array of exact rationals.
    """
    n = len(net)
    if n > 20:
        raise ValueError(f"exact enumeration supports at most 20 vertices, got {n}")
    mask = _seed_mask(net, seeds)
    pos = {v: i for i, v in enumerate(net.topo_order)}
    one = as_exact([1])[0] if exact else 1.0
    probs = np.array([one], dtype=object if exact else np.float64)
    for i, v in enumerate(net.topo_order):
        if mask[v]:
            probs = np.concatenate([probs * 0, probs])
            continue
        table = as_exact(net.tables[v]) if exact else net.tables[v]
        idx = np.arange(1 << i, dtype=np.int64)
        state = np.zeros(1 << i, dtype=np.int64)
        for m, u in enumerate(net.parents[v]):
            state |= ((idx >> pos[u]) & 1) << m
        q = table[state]
        probs = np.concatenate([probs * (1 - q), probs * q])
    out = np.zeros_like(probs)
    out[_positions_to_vertices(net, probs.size)] = probs
    return out


def exact_distribution(net: Network, seeds, exact: bool = False) -> dict:
    """``{frozenset T: P(T | S)}`` over outcomes with non-zero probability."""
    probs = outcome_probabilities(net, seeds, exact)
    return {frozenset(i for i in range(len(net)) if m >> i & 1): probs[m]
            for m in np.flatnonzero(probs != 0).tolist()}


def exact_spread(net: Network, seeds, exact: bool = False):
    """Expected number of active vertices, ``sum_T P(T | S) |T|``."""
    probs = outcome_probabilities(net, seeds, exact)
    sizes = popcounts(len(net))
    if exact:
        return sum((p * int(c) for p, c in zip(probs, sizes) if p), start=0 * probs[0])
    return float(np.dot(probs, sizes))


@dataclass(frozen=True)
class Blueprint:
    """One deterministic response vector per vertex, indexed by parent state."""

    responses: tuple


def sample_blueprint(net: Network, rng_seed: int) -> Blueprint:
    rng = substream(rng_seed)
    return Blueprint(tuple((rng.random(t.size) < t).astype(np.uint8) for t in net.tables))


def propagate_blueprint(bp: Blueprint, net: Network, seeds) -> frozenset:
    """Deterministic sweep applying each vertex's response rule to its parent state."""
    if len(bp.responses) != len(net) or any(
            r.size != t.size for r, t in zip(bp.responses, net.tables)):
        raise ValueError("blueprint shape does not match the network")
    active = _seed_mask(net, seeds)
    for v in net.topo_order:
        if active[v]:
            continue
        state = sum(1 << m for m, u in enumerate(net.parents[v]) if active[u])
        active[v] = bool(bp.responses[v][state])
    return frozenset(np.flatnonzero(active).tolist())


def blueprint_distribution(net: Network, seeds, max_bits: int = 20) -> np.ndarray:
    """Outcome distribution obtained by summing ``P(G)`` over every blueprint ``G``.

    Independent of :func:`outcome_probabilities`: here every response bit is
    enumerated and propagation is a deterministic sweep per blueprint.
    """
    sizes = [t.size for t in net.tables]
    bits = sum(sizes)
    if bits > max_bits:
        raise ValueError(f"{bits} response bits exceed the enumeration cap {max_bits}")
    n = len(net)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    g = np.arange(1 << bits, dtype=np.int64)
    weight = np.ones(g.size)
    for v in range(n):
        for i in range(sizes[v]):
            on = (g >> int(offsets[v] + i)) & 1
            weight *= np.where(on == 1, net.tables[v][i], 1.0 - net.tables[v][i])
    seed_mask = _seed_mask(net, seeds)
    active = np.zeros((g.size, n), dtype=bool)
    active[:, seed_mask] = True
    for v in net.topo_order:
        if seed_mask[v]:
            continue
        state = _parent_state(active, net.parents[v])
        active[:, v] = ((g >> (offsets[v] + state)) & 1).astype(bool)
    outcome = (active.astype(np.int64) << np.arange(n)).sum(axis=1)
    return np.bincount(outcome, weights=weight, minlength=1 << n)


def sample_live_pattern(certificates, rng_seed: int) -> list[int]:
    """Draw one connection pattern per vertex from its certificate's ``b``."""
    rng = substream(rng_seed)
    out = []
    for v, cert in enumerate(certificates):
        if not cert.feasible:
            raise ValueError(f"vertex {v} has no coverage certificate")
        b = np.asarray(cert.b, dtype=np.float64)
        out.append(int(rng.choice(b.size, p=b / b.sum())))
    return out


def propagate_live(patterns, net: Network, seeds) -> frozenset:
    """Live-edge sweep: a vertex fires iff some active parent is in its pattern."""
    active = _seed_mask(net, seeds)
    for v in net.topo_order:
        if active[v]:
            continue
        state = sum(1 << m for m, u in enumerate(net.parents[v]) if active[u])
        active[v] = bool(state & patterns[v])
    return frozenset(np.flatnonzero(active).tolist())


def live_distribution(net: Network, seeds, certificates) -> np.ndarray:
    """Outcome distribution of live-pattern propagation, enumerating pattern supports."""
    supports = []
    for cert in certificates:
        if not cert.feasible:
            raise ValueError("live-pattern distribution needs feasible certificates")
        b = np.asarray(cert.b, dtype=np.float64)
        supports.append([(int(c), float(b[c])) for c in np.flatnonzero(b > 0)])
    out = np.zeros(1 << len(net))
    for combo in itertools.product(*supports):
        p = float(np.prod([w for _, w in combo]))
        active = propagate_live([c for c, _ in combo], net, seeds)
        out[sum(1 << v for v in active)] += p
    return out


# multiple information types


@dataclass(frozen=True)
class MultiState:
    """Per-vertex labels: 0 inactive, ``n`` activated by type ``n``."""

    labels: tuple

    def activated(self, n: int) -> frozenset:
        return frozenset(v for v, lab in enumerate(self.labels) if lab == n)


def _multi_seeds(net, seeds_per_type):
    if not net.n_types:
        raise ModelError("network has no plmmi vertices")
    if len(seeds_per_type) > net.n_types:
        raise ModelError(f"seeds given for {len(seeds_per_type)} types, model has {net.n_types}")
    labels = np.zeros(len(net), dtype=np.int8)
    for n, seeds in enumerate(seeds_per_type, start=1):
        for v in net.resolve(seeds):
            if labels[v]:
                raise ModelError(f"vertex {net.vertices[v]!r} seeded with two types")
            labels[v] = n
    return labels


def type_expectations(net: Network, v: int, parent_labels: np.ndarray) -> np.ndarray:
    """``E[:, n] = sum of w[u, n] over parents u labelled n + 1``; shape ``(runs, N)``."""
    w = net.multi_weights[v]
    N = net.n_types
    E = np.zeros((parent_labels.shape[0], N))
    for m in range(parent_labels.shape[1]):
        onehot = parent_labels[:, m, None] == np.arange(1, N + 1)[None, :]
        E += onehot * w[m][None, :]
    return E


def _cltm_type(E, w, parent_labels, tie_rule):
    top = E.max(axis=1, keepdims=True)
    tied = E >= top - 1e-12
    if tie_rule == "lowest-type-index":
        return np.argmax(tied, axis=1)
    if tie_rule == "highest-weight":
        N = E.shape[1]
        best = np.zeros(E.shape)
        for m in range(parent_labels.shape[1]):
            onehot = parent_labels[:, m, None] == np.arange(1, N + 1)[None, :]
            best = np.maximum(best, onehot * w[m][None, :])
        score = np.where(tied, best, -1.0)
        return np.argmax(score >= score.max(axis=1, keepdims=True) - 1e-12, axis=1)
    raise ValueError(f"unknown tie rule {tie_rule!r}")


def multi_sweep(net, seed_labels, uniforms, engine="plmmi", tie_rule="lowest-type-index"):
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    labels = np.zeros(uniforms.shape, dtype=np.int8)
    labels[:] = seed_labels
    for v in net.topo_order:
        if seed_labels[v] or not net.parents[v]:
            continue
        pl = labels[:, list(net.parents[v])]
        E = type_expectations(net, v, pl)
        u = uniforms[:, v]
        if engine == "plmmi":
            # consecutive intervals of length E_1, ..., E_N, then the inactive remainder
            idx = (u[:, None] >= np.cumsum(E, axis=1)).sum(axis=1)
            labels[:, v] = np.where(idx < net.n_types, idx + 1, 0)
        else:
            fire = u < E.sum(axis=1)
            kind = _cltm_type(E, net.multi_weights[v], pl, tie_rule)
            labels[:, v] = np.where(fire, kind + 1, 0)
    return labels


def simulate_multi_batch(net: Network, seeds_per_type, runs: int, rng: np.random.Generator,
                         engine: str = "plmmi", tie_rule: str = "lowest-type-index") -> np.ndarray:
    seed_labels = _multi_seeds(net, seeds_per_type)
    blocks = []
    for start in range(0, runs, CHUNK):
        size = min(CHUNK, runs - start)
        blocks.append(multi_sweep(net, seed_labels, rng.random((size, len(net))), engine, tie_rule))
    return np.concatenate(blocks) if blocks else np.zeros((0, len(net)), dtype=np.int8)


def simulate_multi(net: Network, seeds_per_type, rng_seed: int) -> MultiState:
    """One PLMMI propagation: each vertex draws a single uniform against the type intervals."""
    row = simulate_multi_batch(net, seeds_per_type, 1, substream(rng_seed))[0]
    return MultiState(tuple(int(x) for x in row))


def simulate_cltm(net: Network, seeds_per_type, rng_seed: int,
                  tie_rule: str = "lowest-type-index") -> MultiState:
    """One competitive-threshold propagation with a shared uniform threshold per vertex.

    ``highest-weight`` breaks ties in favour of the type whose single
    strongest active parent carries the larger weight, then lowest index.
    """
    row = simulate_multi_batch(net, seeds_per_type, 1, substream(rng_seed), "cltm", tie_rule)[0]
    return MultiState(tuple(int(x) for x in row))


def exact_multi_distribution(net: Network, seeds_per_type, engine: str = "plmmi",
                             tie_rule: str = "lowest-type-index") -> dict:
    """``{MultiState: probability}`` by enumeration along the topological order."""
    n, N = len(net), net.n_types
    if n > 10 or N > 3:
        raise ValueError("exact multi enumeration supports at most 10 vertices and 3 types")
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    seed_labels = _multi_seeds(net, seeds_per_type)
    states = {tuple(int(x) for x in seed_labels): 1.0}
    for v in net.topo_order:
        if seed_labels[v] or not net.parents[v]:
            continue
        ps = list(net.parents[v])
        nxt = {}
        for lab, p in states.items():
            pl = np.array([[lab[u] for u in ps]], dtype=np.int8)
            E = type_expectations(net, v, pl)[0]
            if engine == "plmmi":
                branches = [(t + 1, E[t]) for t in range(N)]
            else:
                kind = int(_cltm_type(E[None, :], net.multi_weights[v], pl, tie_rule)[0])
                branches = [(kind + 1, E.sum())]
            rest = 1.0 - sum(q for _, q in branches)
            branches.append((0, rest))
            for label, q in branches:
                if q <= 0:
                    continue
                new = list(lab)
                new[v] = label
                key = tuple(new)
                nxt[key] = nxt.get(key, 0.0) + p * q
        states = nxt
    return {MultiState(k): p for k, p in states.items()}


def multi_spread(dist: dict, n_type: int) -> float:
    """Expected number of vertices carrying type ``n_type`` under an exact distribution."""
    return float(sum(p * sum(1 for x in s.labels if x == n_type) for s, p in dist.items()))


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * float(sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys))
