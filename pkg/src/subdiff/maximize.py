"""Greedy seed selection with lazy marginal gains, and an exhaustive optimum."""

import heapq
import itertools
import math
from dataclasses import dataclass, field
from math import comb

from .certify import certify_model
from .model import Network
from .simulate import estimate_spread, exact_spread

GUARANTEE = 1.0 - 1.0 / math.e


@dataclass(frozen=True)
class MonteCarlo:
    """Spread estimator with common random numbers across seed sets."""

    samples: int = 10_000
    rng_seed: int = 0
    workers: int = 1


@dataclass
class GreedyTrace:
    chosen: list
    marginal_gains: list
    evaluations: int
    spread: float
    stderrs: list = field(default_factory=list)  # per step, Monte Carlo only
    certified: bool = False

    @property
    def pooled_stderr(self) -> float:
        return math.sqrt(sum(s * s for s in self.stderrs))


class _Evaluator:
    def __init__(self, net, estimator):
        self.net = net
        self.estimator = estimator
        self.count = 0
        self.last_stderr = 0.0

    def __call__(self, seeds):
        self.count += 1
        if self.estimator == "exact":
            return exact_spread(self.net, seeds)
        est = estimate_spread(self.net, seeds, self.estimator.samples,
                              self.estimator.rng_seed, self.estimator.workers)
        self.last_stderr = est.stderr
        return est.mean


def greedy_select(net: Network, K: int, estimator="exact", lazy: bool = True) -> GreedyTrace:
    """Pick ``K`` seeds one at a time by largest marginal spread.

    ``estimator`` is ``"exact"`` or a :class:`MonteCarlo`.  With ``lazy``
    the previous marginal gains serve as upper bounds in a max-heap and a
    candidate is re-evaluated only when it surfaces with a stale bound.  The
    bounds are valid when the spread is submodular; otherwise lazy mode is a
    heuristic.  Ties go to the lowest vertex index.
    """
    n = len(net)
    if not 1 <= K <= n:
        raise ValueError(f"budget K={K} outside [1, {n}]")
    if estimator != "exact" and not isinstance(estimator, MonteCarlo):
        raise ValueError(f"unknown estimator {estimator!r}")
    f = _Evaluator(net, estimator)
    chosen, gains, stderrs = [], [], []
    current = f([])

    if lazy:
        heap = []
        for v in range(n):
            heapq.heappush(heap, (-(f([v]) - current), v, 0))
        while len(chosen) < K:
            neg_gain, v, stamp = heapq.heappop(heap)
            if stamp == len(chosen):
                chosen.append(v)
                gains.append(-neg_gain)
                current -= neg_gain
                stderrs.append(f.last_stderr)
                continue
            gain = f(chosen + [v]) - current
            heapq.heappush(heap, (-gain, v, len(chosen)))
    else:
        while len(chosen) < K:
            best, best_gain, best_se = None, -math.inf, 0.0
            for v in range(n):
                if v in chosen:
                    continue
                gain = f(chosen + [v]) - current
                if gain > best_gain:
                    best, best_gain, best_se = v, gain, f.last_stderr
            chosen.append(best)
            gains.append(best_gain)
            stderrs.append(best_se)
            current += best_gain

    # lazy bookkeeping can record a stale stderr; report the final set directly
    spread = f(chosen) if estimator != "exact" else current
    return GreedyTrace(chosen, gains, f.count, spread,
                       stderrs if estimator != "exact" else [],
                       certify_model(net).feasible)


def brute_force_opt(net: Network, K: int) -> tuple:
    """Best ``K``-subset by exact spread; first in lexicographic order on ties."""
    n = len(net)
    if n > 14 or not 0 <= K <= n or comb(n, K) > 10**6:
        raise ValueError("instance too large for brute force")
    best, best_val = (), -math.inf
    for combo in itertools.combinations(range(n), K):
        val = exact_spread(net, combo)
        if val > best_val + 1e-12:
            best, best_val = combo, val
    return best, best_val
