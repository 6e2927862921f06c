from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subdiff.certify import certify_model
from subdiff.generators import random_network
from subdiff.model import Network, read_network
from subdiff.simulate import (
    CHUNK,
    blueprint_distribution,
    estimate_spread,
    exact_distribution,
    exact_spread,
    live_distribution,
    outcome_probabilities,
    propagate_blueprint,
    propagate_live,
    sample_blueprint,
    sample_live_pattern,
    simulate_batch,
    simulate_once,
    split_samples,
    substream,
    sweep,
)


def product_oracle(net, seeds):
    """P(T | S) straight from the factorisation over vertices, one mask at a time."""
    n = len(net)
    seeds = set(seeds)
    out = np.zeros(1 << n)
    for T in range(1 << n):
        if any(not T >> s & 1 for s in seeds):
            continue
        p = 1.0
        for v in range(n):
            if v in seeds:
                continue
            state = sum(1 << m for m, u in enumerate(net.parents[v]) if T >> u & 1)
            q = net.tables[v][state]
            p *= q if T >> v & 1 else 1 - q
        out[T] = p
    return out


@pytest.fixture
def diamond(data_dir):
    return read_network(data_dir / "ic_diamond.json")


def test_diamond_exact_spread(diamond):
    # u seeded; x, y each 1/2; z fires w.p. 1/4 * 3/4 + 1/2 * 1/2 = 7/16
    assert exact_spread(diamond, ["u"]) == pytest.approx(1 + 0.5 + 0.5 + 7 / 16, abs=1e-15)
    assert exact_spread(diamond, ["u"], exact=True) == Fraction(39, 16)
    assert exact_spread(diamond, []) == 0


def test_diamond_distribution_by_hand(diamond):
    dist = exact_distribution(diamond, ["u"])
    assert dist[frozenset({0})] == pytest.approx(0.25)
    assert dist[frozenset({0, 1, 2, 3})] == pytest.approx(0.25 * 0.75)
    assert dist[frozenset({0, 1, 3})] == pytest.approx(0.125)
    assert sum(dist.values()) == pytest.approx(1.0)
    # 2 x 2 states of x, y times z's state, less {u, z}, which needs an active parent
    assert len(dist) == 7 and frozenset({0, 3}) not in dist


@settings(max_examples=25)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_outcome_probabilities_match_oracle(n, seed):
    rng = np.random.default_rng(seed)
    net = random_network(n, rng, kinds=("ic", "lt", "arbitrary"))
    seeds = [int(v) for v in rng.choice(n, size=rng.integers(0, n + 1), replace=False)]
    assert np.allclose(outcome_probabilities(net, seeds), product_oracle(net, seeds),
                       atol=1e-14, rtol=0)


def test_exact_arithmetic_path(rng):
    net = random_network(6, rng)
    exact = outcome_probabilities(net, [0], exact=True)
    assert sum(exact) == 1
    assert np.allclose(np.array(exact, dtype=float), outcome_probabilities(net, [0]), atol=1e-15)


def test_seeds_always_active(rng):
    net = random_network(8, rng)
    for outcome in exact_distribution(net, [2, 5]):
        assert {2, 5} <= outcome


def test_blueprint_and_live_match_exact(rng):
    for _ in range(5):
        net = random_network(5, rng, max_parents=2)
        if sum(t.size for t in net.tables) > 18:
            continue
        seeds = [0]
        exact = outcome_probabilities(net, seeds)
        assert np.allclose(blueprint_distribution(net, seeds), exact, atol=1e-14)
        certs = [certify_model(net).vertices[v] for v in range(len(net))]
        assert np.allclose(live_distribution(net, seeds, certs), exact, atol=1e-14)


def test_blueprint_cap(rng):
    net = random_network(8, rng, max_parents=4, edge_prob=1.0)
    with pytest.raises(ValueError, match="enumeration cap"):
        blueprint_distribution(net, [0], max_bits=10)


def test_blueprint_propagation(diamond):
    bp = sample_blueprint(diamond, 3)
    out = propagate_blueprint(bp, diamond, ["u"])
    assert 0 in out
    assert propagate_blueprint(bp, diamond, ["u"]) == out
    with pytest.raises(ValueError):
        propagate_blueprint(bp, read_network_from_tables(), [0])


def read_network_from_tables():
    return Network.from_tables([[]], [[0.0]])


def test_live_pattern_sampling(diamond):
    certs = [certify_model(diamond).vertices[v] for v in range(4)]
    pats = sample_live_pattern(certs, 1)
    assert pats[0] == 0 and all(0 <= p < 4 for p in pats)
    assert propagate_live([0, 1, 1, 3], diamond, ["u"]) == {0, 1, 2, 3}
    assert propagate_live([0, 0, 1, 3], diamond, ["u"]) == {0, 2, 3}


def test_live_pattern_rejects_infeasible(data_dir):
    net = read_network(data_dir / "and_gadget.json")
    certs = [certify_model(net).vertices[v] for v in range(3)]
    with pytest.raises(ValueError):
        sample_live_pattern(certs, 0)


def test_sweep_semantics():
    net = Network.from_tables([[], [0], [0, 1]], [[0.0], [0.0, 0.6], [0, 0.5, 0.5, 0.9]])
    seeds = np.array([True, False, False])
    U = np.array([[0.9, 0.59, 0.89], [0.9, 0.61, 0.49], [0.9, 0.61, 0.51]])
    assert sweep(net, seeds, U).tolist() == [
        [True, True, True], [True, False, True], [True, False, False]]


def test_simulate_once_reproducible(diamond):
    runs = {simulate_once(diamond, ["u"], s) for s in range(40)}
    assert simulate_once(diamond, ["u"], 7) == simulate_once(diamond, ["u"], 7)
    assert len(runs) > 1 and all(0 in r for r in runs)


def test_batch_chunking_is_transparent(diamond):
    runs = CHUNK + 17
    a = simulate_batch(diamond, ["u"], runs, substream(5))
    rng = substream(5)
    b = np.concatenate([sweep(diamond, np.array([1, 0, 0, 0], bool), rng.random((CHUNK, 4))),
                        sweep(diamond, np.array([1, 0, 0, 0], bool), rng.random((17, 4)))])
    assert np.array_equal(a, b)


def test_substreams_distinct():
    assert substream(1, 0).random() != substream(1, 1).random()
    assert substream(1, 0).random() == substream(1, 0).random()


def test_split_samples():
    assert split_samples(10, 3) == [4, 3, 3]
    assert sum(split_samples(100_001, 8)) == 100_001


def test_estimate_spread_reproducible(diamond):
    a = estimate_spread(diamond, ["u"], 5000, 11, workers=4)
    b = estimate_spread(diamond, ["u"], 5000, 11, workers=4)
    assert a == b
    assert estimate_spread(diamond, ["u"], 5000, 11).workers == 1
    with pytest.raises(ValueError):
        estimate_spread(diamond, ["u"], 0, 1)


def test_estimate_spread_close_to_exact(diamond):
    est = estimate_spread(diamond, ["u"], 100_000, 3, workers=2)
    assert abs(est.mean - 2.4375) <= 4 * est.stderr
    assert 0 < est.stderr < 0.01


def test_exact_enumeration_cap():
    net = Network.from_tables([[]] * 21, [[0.0]] * 21)
    with pytest.raises(ValueError):
        outcome_probabilities(net, [])


def chain(p):
    return Network.from_tables([[], [0]], [[0.0], [0.0, p]], names=["u", "v"])


def test_simulation_examples():
    net = chain(1.0)
    assert simulate_once(net, ["u"], 0) == {0, 1}
    assert simulate_once(net, ["u", "v"], 0) == {0, 1}
    est = estimate_spread(net, ["u", "v"], 100, 0)
    assert est.mean == 2 and est.stderr == 0
    assert exact_distribution(Network.from_tables([[]], [[0.0]]), [0]) == {frozenset({0}): 1.0}
    dist = exact_distribution(chain(0.3), ["u"])
    assert dist == pytest.approx({frozenset({0}): 0.7, frozenset({0, 1}): 0.3})


def test_chain_frequencies():
    runs = simulate_batch(chain(0.5), ["u"], 100_000, substream(1))
    freq = runs[:, 1].mean()
    assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / 100_000)
    est = estimate_spread(chain(0.3), ["u"], 100_000, 2)
    assert abs(est.mean - 1.3) <= 3 * est.stderr


def test_blueprints_marginals_and_spread(diamond):
    n = 100_000
    z = diamond.tables[3]
    hits = np.zeros(4)
    total = 0
    for s in range(n):
        bp = sample_blueprint(diamond, s)
        hits += bp.responses[3]
        total += len(propagate_blueprint(bp, diamond, ["u"]))
    sigma = np.sqrt(z * (1 - z) / n)
    assert np.all(np.abs(hits / n - z) <= 3 * sigma + 1e-12)
    est = estimate_spread(diamond, ["u"], n, 5)
    stderr = np.hypot(est.stderr, est.stderr)
    assert abs(total / n - est.mean) <= 3 * stderr


def test_live_pattern_frequencies():
    from subdiff.certify import certify_vertex
    from subdiff.model import lt_table
    net = Network.from_tables([[], [], [0, 1]], [[0.0], [0.0], lt_table([0.3, 0.4])])
    certs = [certify_vertex(t) for t in net.tables]
    n = 100_000
    counts = np.bincount([sample_live_pattern(certs, s)[2] for s in range(n)], minlength=4)
    expected = np.array([0.3, 0.3, 0.4, 0.0])
    assert np.all(np.abs(counts / n - expected) <= 3 * np.sqrt(expected * (1 - expected) / n) + 1e-12)


def test_empty_blueprint():
    net = Network.from_tables([], [])
    assert sample_blueprint(net, 0).responses == ()


def live_blueprint(net, patterns):
    from subdiff.simulate import Blueprint
    return Blueprint(tuple((np.bitwise_and(np.arange(t.size), c) != 0).astype(np.uint8)
                           for t, c in zip(net.tables, patterns)))


def test_live_blueprints_are_monotone(rng):
    net = random_network(8, rng)
    certs = [certify_model(net).vertices[v] for v in range(8)]
    for s in range(20):
        bp = live_blueprint(net, sample_live_pattern(certs, s))
        prev = frozenset()
        for v in rng.permutation(8):
            seeds = prev | {int(v)}
            out = propagate_blueprint(bp, net, seeds)
            assert propagate_blueprint(bp, net, prev) <= out
            prev = seeds


def test_certified_spread_monotone_submodular(rng):
    import itertools
    for _ in range(3):
        net = random_network(7, rng)
        assert certify_model(net).feasible
        f = {}
        for r in range(8):
            for S in itertools.combinations(range(7), r):
                f[frozenset(S)] = exact_spread(net, S)
        for T, fT in f.items():
            for u in set(range(7)) - T:
                gain = f[T | {u}] - fT
                assert gain >= -1e-12
                for S in (T - {x} for x in T):
                    assert f[S | {u}] - f[S] >= gain - 1e-12
