"""Subset-lattice primitives.

Parent states and connection patterns are both bitmasks over a vertex's
ordered parent list: bit ``m`` refers to the ``m``-th parent.  A lattice
vector over ``k`` parents has ``2**k`` entries indexed by those bitmasks.

The connection matrix ``M`` has ``M[s, c] = 1`` iff state ``s`` and pattern
``c`` share a set bit.  It is symmetric and is never needed in dense form:
``M @ b == sum(b) - zeta(b)[~s]`` (see :func:`apply_connection`).

All transforms accept float arrays or object arrays of
:class:`fractions.Fraction`; the latter give exact rational results.
"""

from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Tuple

import numpy as np

MAX_PARENTS = 20
MAX_DENSE_PARENTS = 12


def parent_count(n: int) -> int:
    """Return ``k`` with ``2**k == n``; raise if ``n`` is not a power of two."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"lattice vector length {n} is not a power of two")
    k = n.bit_length() - 1
    if k > MAX_PARENTS:
        raise ValueError(f"{k} parents exceeds the cap of {MAX_PARENTS}")
    return k


def _check(x, k):
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("lattice vector must be one-dimensional")
    if k is None:
        k = parent_count(x.size)
    elif x.size != 1 << k:
        raise ValueError(f"length {x.size} does not match 2**{k}")
    return x, k


def as_exact(values) -> np.ndarray:
    """Object array of Fractions; floats are converted by their exact binary value."""
    out = np.empty(len(values), dtype=object)
    for i, v in enumerate(values):
        out[i] = Fraction(v)
    return out


def popcounts(k: int) -> np.ndarray:
    idx = np.arange(1 << k)
    counts = np.zeros(1 << k, dtype=np.int64)
    for m in range(k):
        counts += (idx >> m) & 1
    return counts


def connection_matrix(k: int) -> np.ndarray:
    """Dense 0/1 connection matrix of size ``2**k`` x ``2**k`` (``1 <= k <= 12``)."""
    if not 1 <= k <= MAX_DENSE_PARENTS:
        raise ValueError(f"parent count {k} outside [1, {MAX_DENSE_PARENTS}]")
    idx = np.arange(1 << k)
    return ((idx[:, None] & idx[None, :]) != 0).astype(np.int8)


def zeta_transform(x, k: int | None = None) -> np.ndarray:
    """Subset sums: ``out[t] = sum(x[c] for c subset of t)`` in O(k 2^k)."""
    x, k = _check(x, k)
    out = x.astype(object if x.dtype == object else np.float64, copy=True)
    for m in range(k):
        view = out.reshape(-1, 2, 1 << m)
        view[:, 1, :] += view[:, 0, :]
    return out


def mobius_transform(g, k: int | None = None) -> np.ndarray:
    """Inverse of :func:`zeta_transform` (inclusion-exclusion over subsets)."""
    g, k = _check(g, k)
    out = g.astype(object if g.dtype == object else np.float64, copy=True)
    for m in range(k):
        view = out.reshape(-1, 2, 1 << m)
        view[:, 1, :] -= view[:, 0, :]
    return out


def apply_connection(b, k: int | None = None) -> np.ndarray:
    """``M @ b`` without forming ``M``.

    ``(M b)[s]`` sums ``b`` over patterns meeting ``s``, i.e. the total mass
    minus the mass on patterns inside the complement of ``s``.  The
    complement of ``s`` is ``full ^ s == full - s``, which is plain index
    reversal.
    """
    b, k = _check(b, k)
    z = zeta_transform(b, k)
    return z[-1] - z[::-1]


def superset_max(x, k: int | None = None) -> np.ndarray:
    """``out[s] = max(x[t] for t superset of s)``."""
    x, k = _check(x, k)
    out = np.array(x, copy=True)
    for m in range(k):
        view = out.reshape(-1, 2, 1 << m)
        np.maximum(view[:, 0, :], view[:, 1, :], out=view[:, 0, :])
    return out


def subset_max(x, k: int | None = None) -> np.ndarray:
    """``out[t] = max(x[s] for s subset of t)``."""
    x, k = _check(x, k)
    out = np.array(x, copy=True)
    for m in range(k):
        view = out.reshape(-1, 2, 1 << m)
        np.maximum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    return out


@lru_cache(maxsize=None)
def triple_arrays(k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All ``(S, T, u)`` with ``S ⊆ T ⊆ [k] \\ {u}`` as three int arrays.

    Pairs ``S ⊆ T`` over the ``k - 1`` remaining bits are the base-3 words
    (digit 0: in neither, 1: in T only, 2: in both); bit ``u`` is spliced in
    afterwards.  Total length is ``k * 3**(k-1)``.
    """
    if not 0 <= k <= MAX_DENSE_PARENTS:
        raise ValueError(f"parent count {k} outside [0, {MAX_DENSE_PARENTS}]")
    if k == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    words = np.arange(3 ** (k - 1))
    s_low = np.zeros_like(words)
    t_low = np.zeros_like(words)
    rest = words.copy()
    for j in range(k - 1):
        digit = rest % 3
        rest //= 3
        s_low |= (digit == 2).astype(np.int64) << j
        t_low |= (digit >= 1).astype(np.int64) << j
    S, T, U = [], [], []
    for u in range(k):
        low = (1 << u) - 1
        # shift bits at positions >= u up by one to make room for u
        S.append((s_low & low) | ((s_low & ~low) << 1))
        T.append((t_low & low) | ((t_low & ~low) << 1))
        U.append(np.full_like(words, u))
    out = tuple(np.concatenate(part) for part in (S, T, U))
    for arr in out:
        arr.setflags(write=False)
    return out


def enumerate_submodularity_triples(k: int) -> Iterator[Tuple[int, int, int]]:
    """Yield every ``(S, T, u)`` with ``S ⊆ T`` and ``u`` outside ``T``."""
    S, T, U = triple_arrays(k)
    for s, t, u in zip(S.tolist(), T.tolist(), U.tolist()):
        yield s, t, u


def bits_of(mask: int) -> list[int]:
    return [m for m in range(mask.bit_length()) if mask >> m & 1]
