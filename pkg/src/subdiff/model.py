"""Networks of per-vertex activation tables.

An activation table for a vertex with ``k`` parents is a float array of
length ``2**k``: entry ``s`` is the probability the vertex activates when
exactly the parents in bitmask ``s`` are active.  Parent bit order is the
order in which the incoming edges appear in the network file.

Network file (JSON)::

    {"vertices": ["u", "v"],
     "edges": [["u", "v"]],
     "models": {"v": {"kind": "ic", "p": {"u": 0.5}}}}

Model kinds: ``ic`` (``p``: parent -> probability), ``lt`` (``w``: parent ->
weight, total at most 1), ``table`` (``a``: explicit list in state order,
optional ``"spontaneous": true``), ``plmmi`` (``n_types`` and ``w``: parent ->
list of per-type weights, grand total at most 1).  Vertices without parents
may omit their model; they never activate unless seeded.
"""

import json
import logging
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Mapping, Sequence

import numpy as np

from .lattice import MAX_PARENTS, parent_count

log = logging.getLogger(__name__)

KINDS = ("table", "ic", "lt", "plmmi")
_SLACK = 1e-12


class ModelError(ValueError):
    """Invalid network file or model parameters."""


def _probabilities(p, what="probability"):
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.size and (np.any(~np.isfinite(p)) or p.min() < 0 or p.max() > 1):
        raise ModelError(f"{what} out of range [0, 1]: {p.tolist()}")
    return p


def _weights(w):
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size and (np.any(~np.isfinite(w)) or w.min() < 0):
        raise ModelError(f"negative weight: {w.tolist()}")
    if w.sum() > 1 + _SLACK:
        raise ModelError(f"weights exceed 1 (total {w.sum():.12g})")
    return w


def _state_masks(k):
    idx = np.arange(1 << k)
    return [((idx >> i) & 1).astype(bool) for i in range(k)]


def ic_table(p: Sequence[float]) -> np.ndarray:
    """``a[s] = 1 - prod_{i in s} (1 - p_i)``."""
    p = _probabilities(p)
    miss = np.ones(1 << p.size)
    for i, inside in enumerate(_state_masks(p.size)):
        miss[inside] *= 1.0 - p[i]
    return 1.0 - miss


def lt_table(w: Sequence[float]) -> np.ndarray:
    """``a[s] = sum_{i in s} w_i``."""
    w = _weights(w)
    a = np.zeros(1 << w.size)
    for i, inside in enumerate(_state_masks(w.size)):
        a[inside] += w[i]
    return a


def ic_coefficients(p: Sequence[float]) -> np.ndarray:
    """Pattern distribution of independent edges: each edge live w.p. ``p_i``."""
    p = _probabilities(p)
    b = np.ones(1 << p.size)
    for i, inside in enumerate(_state_masks(p.size)):
        b *= np.where(inside, p[i], 1.0 - p[i])
    return b


def lt_coefficients(w: Sequence[float]) -> np.ndarray:
    """Single-edge patterns with mass ``w_i``; leftover mass on the empty pattern."""
    w = _weights(w)
    b = np.zeros(1 << w.size)
    b[1 << np.arange(w.size)] = w
    b[0] = max(0.0, 1.0 - w.sum())
    return b


def check_table(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    parent_count(a.size)
    if np.any(~np.isfinite(a)) or a.min() < -_SLACK or a.max() > 1 + _SLACK:
        raise ModelError("activation table entries must lie in [0, 1]")
    return np.clip(a, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable DAG with one activation table per vertex.

    ``tables[v]`` is the single-information table.  For PLMMI vertices it
    is the linear table of the weights pooled over types (identical to the
    type-1 table when there is one type); the per-type weights are kept in
    ``multi_weights[v]`` with shape ``(k, n_types)``.
    """

    vertices: tuple
    parents: tuple
    tables: tuple
    topo_order: tuple
    specs: tuple
    n_types: int = 0
    multi_weights: tuple = ()
    spontaneous: frozenset = field(default_factory=frozenset)

    def __len__(self):
        return len(self.vertices)

    def index(self, name) -> int:
        try:
            return self._lookup[name]
        except KeyError:
            raise ModelError(f"unknown vertex {name!r}") from None

    @property
    def _lookup(self):
        lookup = self.__dict__.get("_lookup_cache")
        if lookup is None:
            lookup = {name: i for i, name in enumerate(self.vertices)}
            object.__setattr__(self, "_lookup_cache", lookup)
        return lookup

    def resolve(self, seeds) -> frozenset:
        """Map vertex names (or indices) to a frozenset of indices."""
        out = set()
        for s in seeds:
            if isinstance(s, (int, np.integer)) and not isinstance(s, bool):
                if not 0 <= s < len(self.vertices):
                    raise ModelError(f"unknown vertex index {s}")
                out.add(int(s))
            else:
                out.add(self.index(s))
        return frozenset(out)

    def type_tables(self, v: int) -> list[np.ndarray]:
        """Per-type linear tables of a PLMMI vertex."""
        w = self.multi_weights[v]
        return [lt_table(w[:, n]) for n in range(self.n_types)]

    @classmethod
    def from_tables(cls, parents, tables, names=None, **kwargs) -> "Network":
        """Build from integer parent lists and explicit tables."""
        n = len(parents)
        names = [str(i) for i in range(n)] if names is None else list(names)
        edges = [[names[u], names[v]] for v in range(n) for u in parents[v]]
        models = {}
        for v in range(n):
            a = np.asarray(tables[v], dtype=np.float64)
            spec = {"kind": "table", "a": a.tolist()}
            if parents[v] and a[0] > 0:
                spec["spontaneous"] = True
            models[names[v]] = spec
        return build_network(names, edges, models, **kwargs)


def _expand(name, spec, parent_names, n_types_seen, strict):
    """Return (table, per-type weights or None, spontaneous flag)."""
    if not isinstance(spec, Mapping):
        raise ModelError(f"model for {name!r} must be an object")
    kind = spec.get("kind")
    k = len(parent_names)

    def per_parent(key):
        values = spec.get(key)
        if not isinstance(values, Mapping):
            raise ModelError(f"{kind} model for {name!r} needs an object {key!r}")
        if set(values) != set(parent_names):
            raise ModelError(
                f"{kind} model for {name!r}: {key!r} keys {sorted(values)} "
                f"do not match parents {parent_names}")
        return [values[u] for u in parent_names]

    if kind == "ic":
        return ic_table(per_parent("p")), None, False
    if kind == "lt":
        try:
            return lt_table(per_parent("w")), None, False
        except ModelError as exc:
            raise ModelError(f"vertex {name!r}: {exc}") from None
    if kind == "table":
        a = spec.get("a")
        if not isinstance(a, list) or len(a) != 1 << k:
            raise ModelError(f"table for {name!r} must list {1 << k} entries")
        a = check_table(a)
        spontaneous = bool(k and a[0] > 0)
        if spontaneous:
            if not spec.get("spontaneous", False):
                raise ModelError(
                    f"table for {name!r} activates with no active parent; "
                    "set \"spontaneous\": true to allow it")
            log.warning("vertex %r activates spontaneously; it cannot be certified", name)
        return a, None, spontaneous
    if kind == "plmmi":
        n_types = spec.get("n_types")
        if not isinstance(n_types, int) or n_types < 1:
            raise ModelError(f"plmmi model for {name!r} needs a positive n_types")
        if n_types_seen not in (0, n_types):
            raise ModelError("all plmmi vertices must share n_types")
        rows = per_parent("w") if k else []
        w = np.zeros((k, n_types))
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != n_types:
                raise ModelError(f"plmmi weights for {name!r} need {n_types} entries per parent")
            w[i] = row
        if np.any(~np.isfinite(w)) or (w.size and w.min() < 0):
            raise ModelError(f"negative weight in plmmi model for {name!r}")
        total = w.sum()
        if total > 1 + _SLACK:
            raise ModelError(f"vertex {name!r}: weights exceed 1 (total {total:.12g})")
        if strict and k and abs(total - 1) > 1e-9:
            raise ModelError(f"vertex {name!r}: plmmi weights sum to {total:.12g}, not 1")
        return lt_table(w.sum(axis=1)), w, False
    raise ModelError(f"unknown model kind {kind!r} for vertex {name!r}")


def build_network(vertices, edges, models=None, strict_normalization=False) -> Network:
    """Validate and expand a network description into a :class:`Network`."""
    models = {} if models is None else models
    names = [str(v) for v in vertices]
    if len(set(names)) != len(names):
        raise ModelError("duplicate vertex ids")
    lookup = {name: i for i, name in enumerate(names)}
    parents = [[] for _ in names]
    for edge in edges:
        if not isinstance(edge, (list, tuple)) or len(edge) != 2:
            raise ModelError(f"malformed edge {edge!r}")
        u, v = (str(x) for x in edge)
        if u not in lookup or v not in lookup:
            raise ModelError(f"edge {edge!r} names an unknown vertex")
        if lookup[u] in parents[lookup[v]]:
            raise ModelError(f"duplicate edge {edge!r}")
        parents[lookup[v]].append(lookup[u])
    for name in models:
        if name not in lookup:
            raise ModelError(f"model given for unknown vertex {name!r}")

    sorter = TopologicalSorter({v: ps for v, ps in enumerate(parents)})
    try:
        topo = tuple(sorter.static_order())
    except CycleError as exc:
        cycle = [names[i] for i in exc.args[1]]
        raise ModelError(f"cycle detected: {' -> '.join(cycle)}") from None

    tables, specs, weights, spontaneous = [], [], [], set()
    n_types = 0
    for v, name in enumerate(names):
        if len(parents[v]) > MAX_PARENTS:
            raise ModelError(f"vertex {name!r} has more than {MAX_PARENTS} parents")
        spec = models.get(name)
        if spec is None:
            if parents[v]:
                raise ModelError(f"vertex {name!r} has parents but no model")
            spec = {"kind": "table", "a": [0.0]}
        parent_names = [names[u] for u in parents[v]]
        table, w, spont = _expand(name, spec, parent_names, n_types, strict_normalization)
        if w is not None:
            n_types = w.shape[1]
        table.setflags(write=False)
        tables.append(table)
        weights.append(w)
        specs.append(json.loads(json.dumps(spec)))
        if spont:
            spontaneous.add(v)
    if n_types:
        for v, name in enumerate(names):
            if weights[v] is None and parents[v]:
                raise ModelError(f"vertex {name!r}: mixing plmmi with other kinds")
            if weights[v] is None:
                weights[v] = np.zeros((0, n_types))
    return Network(
        vertices=tuple(names),
        parents=tuple(tuple(p) for p in parents),
        tables=tuple(tables),
        topo_order=topo,
        specs=tuple(specs),
        n_types=n_types,
        multi_weights=tuple(weights) if n_types else (),
        spontaneous=frozenset(spontaneous),
    )


def load_network(document, strict_normalization=False) -> Network:
    """Parse a network document (JSON text, bytes, or an already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"malformed JSON: {exc}") from None
    if not isinstance(document, Mapping):
        raise ModelError("network document must be a JSON object")
    vertices = document.get("vertices")
    if not isinstance(vertices, list):
        raise ModelError("network document needs a 'vertices' list")
    return build_network(vertices, document.get("edges", []), document.get("models", {}),
                         strict_normalization=strict_normalization)


def read_network(path, strict_normalization=False) -> Network:
    with open(path, encoding="utf-8") as fh:
        return load_network(fh.read(), strict_normalization=strict_normalization)


def dump_network(net: Network) -> dict:
    """Inverse of :func:`load_network`."""
    edges = [[net.vertices[u], net.vertices[v]]
             for v in range(len(net)) for u in net.parents[v]]
    return {
        "vertices": list(net.vertices),
        "edges": edges,
        "models": {name: spec for name, spec in zip(net.vertices, net.specs)},
    }


def replace_tables(net: Network, new_tables: Mapping[int, np.ndarray]) -> Network:
    """Copy of ``net`` with the given vertices switched to explicit tables."""
    doc = dump_network(net)
    for v, a in new_tables.items():
        doc["models"][net.vertices[v]] = {"kind": "table", "a": np.asarray(a, float).tolist()}
    return load_network(doc)
