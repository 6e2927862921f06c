from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from subdiff.certify import (
    candidate_coefficients,
    certify_model,
    certify_vertex,
    falsify_equivalence,
    random_monotone_table,
    theorem2_check,
    truncated_rank_table,
)
from subdiff.generators import and_table, random_feasible_table, random_network, random_table
from subdiff.lattice import as_exact, connection_matrix
from subdiff.model import ic_table, load_network, lt_table


def lp_feasible(a, tol=1e-9):
    """Independent oracle: is there b >= 0, sum b = 1, M b = a (dense LP)?"""
    k = int(np.log2(len(a)))
    M = connection_matrix(k).astype(float)
    A_eq = np.vstack([M, np.ones((1, M.shape[1]))])
    b_eq = np.append(a, 1.0)
    res = linprog(np.zeros(M.shape[1]), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def naive_submodular(a, k, eps=1e-9):
    for T in range(1 << k):
        S = T
        while True:
            for u in range(k):
                if not T >> u & 1:
                    if (a[S | 1 << u] - a[S]) < (a[T | 1 << u] - a[T]) - eps:
                        return False
            if S == 0:
                break
            S = (S - 1) & T
    return True


def test_lt_example():
    cert = certify_vertex(lt_table([0.3, 0.3]))
    assert cert.feasible
    assert np.allclose(cert.b, [0.4, 0.3, 0.3, 0.0])
    assert cert.residual < 1e-15


def test_and_witness():
    cert = certify_vertex(and_table(2))
    assert not cert.feasible
    assert cert.witness_pattern == 3
    assert cert.witness_value == pytest.approx(-1, abs=1e-9)
    assert cert.b is None


def test_and_witness_exact():
    cert = certify_vertex(as_exact([0, 0, 0, 1]))
    assert not cert.feasible and cert.witness_value == Fraction(-1)


def test_zero_parents():
    assert certify_vertex([0.0]).feasible
    assert certify_vertex([0.0]).b.tolist() == [1.0]
    bad = certify_vertex([0.5])
    assert not bad.feasible and bad.witness_pattern == 0


def test_spontaneous_activation_infeasible():
    cert = certify_vertex([0.2, 0.5, 0.5, 0.7])
    assert not cert.feasible
    assert cert.witness_pattern == 0 and cert.witness_value == pytest.approx(-0.2)


def test_eps_boundary():
    # candidate slack b[empty] = 1 - a[full] = -1e-10
    a = np.array([0.0, 0.5, 0.5, 1.0 + 1e-10])
    assert certify_vertex(a, eps=1e-9).feasible
    cert = certify_vertex(a, eps=1e-12)
    assert not cert.feasible and cert.witness_pattern == 0


def test_clamped_b_is_a_distribution():
    cert = certify_vertex([0.0, 0.5, 0.5, 1.0 + 1e-11], eps=1e-9)
    assert cert.feasible and cert.b.min() >= 0 and cert.b.sum() == pytest.approx(1, abs=1e-15)


def test_candidate_sums_to_one_minus_a0(rng):
    a = random_table(4, rng)
    a[0] = 0.3
    assert candidate_coefficients(a).sum() == pytest.approx(0.7)


@settings(max_examples=40)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.booleans())
def test_certify_agrees_with_lp(k, seed, feasible_draw):
    rng = np.random.default_rng(seed)
    a = random_feasible_table(k, rng) if feasible_draw else random_table(k, rng)
    cert = certify_vertex(a, eps=1e-9)
    assert cert.feasible == lp_feasible(a)
    if cert.feasible:
        assert np.abs(connection_matrix(k) @ cert.b - a).max() <= 1e-9
    else:
        assert cert.witness_value < -1e-9


@settings(max_examples=40)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_feasible_tables_pass_theorem2(k, seed):
    a = random_feasible_table(k, np.random.default_rng(seed))
    assert theorem2_check(a).passed


@settings(max_examples=30)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_theorem2_matches_naive(k, seed):
    rng = np.random.default_rng(seed)
    a = random_table(k, rng)
    rep = theorem2_check(a)
    assert rep.submodular == naive_submodular(a, k)
    monotone = all(a[s | 1 << i] >= a[s] - 1e-9 for s in range(1 << k) for i in range(k))
    assert rep.monotone == monotone


def test_theorem2_and_violation():
    rep = theorem2_check(and_table(2))
    assert rep.monotone and not rep.submodular
    kinds = {(v.S, v.T, v.u) for v in rep.violations}
    assert (0, 1, 1) in kinds and (0, 2, 0) in kinds
    assert all(v.margin == -1 for v in rep.violations)


def test_theorem2_nonnegative_and_monotone_flags():
    rep = theorem2_check([0.0, -0.1])
    assert not rep.nonnegative and not rep.monotone
    rep = theorem2_check([0.0, 0.5, 0.4, 0.4])
    assert not rep.monotone


def test_theorem2_exact():
    a = as_exact([0, Fraction(1, 2), Fraction(1, 2), 1])
    assert theorem2_check(a).passed


def test_truncated_rank_divergence():
    a = truncated_rank_table(3, 2)
    assert theorem2_check(a).passed
    cert = certify_vertex(a)
    assert not cert.feasible and cert.witness_value == pytest.approx(-0.5, abs=1e-9)
    assert not lp_feasible(a)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_truncated_rank_linear_cases(k):
    assert certify_vertex(truncated_rank_table(k, 1)).feasible
    assert certify_vertex(truncated_rank_table(k, k)).feasible


def test_random_monotone_table_properties(rng):
    for k in range(1, 6):
        a = random_monotone_table(k, rng)
        assert a[0] == 0 and a.max() <= 1
        assert theorem2_check(a).monotone


def test_falsify_equivalence():
    assert falsify_equivalence(2, 50, 0) == []
    found = falsify_equivalence(3, 20, 0)
    assert any(np.array_equal(a, truncated_rank_table(3, 2)) for a in found)
    for a in found:
        assert theorem2_check(a).passed and not lp_feasible(a)
    with pytest.raises(ValueError):
        falsify_equivalence(7, 1, 0)


def test_certify_model_ic_lt(rng):
    net = random_network(12, rng, kinds=("ic", "lt", "mixture"))
    cert = certify_model(net)
    assert cert.feasible and cert.infeasible == []


def test_certify_model_reports_infeasible(rng):
    net = random_network(10, rng, kinds=("and",), edge_prob=0.9)
    cert = certify_model(net)
    expected = [v for v in range(10) if len(net.parents[v]) >= 2]
    assert cert.infeasible == expected
    report = cert.report(net, 1e-9)
    assert report["verdict"] == ("infeasible" if expected else "feasible")
    for v in expected:
        assert report["vertices"][net.vertices[v]]["witness_value"] < 0


def test_certify_model_plmmi_per_type(data_dir):
    from subdiff.model import read_network
    net = read_network(data_dir / "plmmi_fan.json")
    assert certify_model(net).feasible


def test_report_names_witness_parents():
    net = load_network({"vertices": ["x", "y", "v"], "edges": [["x", "v"], ["y", "v"]],
                        "models": {"v": {"kind": "table", "a": [0, 0, 0, 1]}}})
    entry = certify_model(net).report(net, 1e-9)["vertices"]["v"]
    assert entry["witness_pattern"] == ["x", "y"] and entry["witness_pattern_bits"] == 3
    assert certify_model(net).report(net, 1e-9)["vertices"]["x"]["b"] == [1.0]


def test_ic_certifies(rng):
    for _ in range(20):
        p = rng.random(4)
        assert certify_vertex(ic_table(p)).feasible


@pytest.mark.parametrize("eps", [1e-12, 1e-10, 1e-9, 1e-8, 1e-6])
def test_and_infeasible_across_eps(eps):
    cert = certify_vertex(and_table(2), eps)
    assert not cert.feasible and cert.witness_value == pytest.approx(-1)


def test_spec_examples():
    cert = certify_vertex([0, 0.5, 0.5, 0.75])
    assert cert.feasible and np.allclose(cert.b, [0.25] * 4)
    cert = certify_vertex([0, 0.3, 0.4, 0.7])
    assert cert.feasible and np.allclose(cert.b, [0.3, 0.3, 0.4, 0.0])
    assert theorem2_check([0, 0.5, 0.5, 0.75]).passed
    assert theorem2_check([0, 1]).passed


def test_violations_iff_flag_false(rng):
    for _ in range(50):
        a = random_table(int(rng.integers(1, 5)), rng)
        rep = theorem2_check(a)
        assert bool(rep.violations) == (not rep.passed)


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_candidate_always_reconstructs(k, seed):
    # uniqueness: the candidate solves M b = a whether or not it is non-negative
    a = random_table(k, np.random.default_rng(seed))
    cand = certify_vertex(a).candidate
    assert np.abs(connection_matrix(k) @ cand - a).max() <= 1e-10


def test_empty_network_certifies():
    from subdiff.model import build_network
    assert certify_model(build_network([], [])).feasible
