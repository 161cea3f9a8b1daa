"""Merge-operator truncation: bounds, cancellation identities, MPO assembly."""

import math

import mpmath
import numpy as np
import pytest

from gibbsmpo.merge import (
    CertificationError,
    MergeOperatorSpec,
    assembly_bond_profile,
    bond_ledger,
    build_merge_mpo,
    certify_merge_truncation,
    merge_operator_dense,
    merge_order_term_dense,
    merge_spec_for,
    tail_prefactor,
    truncated_merge_dense,
    truncation_order_for,
)
from gibbsmpo.model import (
    HamiltonianSpec,
    Interval,
    boundary_bound,
    extensivity_constant,
    power_law_ising,
)
from gibbsmpo.mpo import BondCapError, CompressionPolicy


def chain(n, alpha=3.0, hx=0.5):
    return power_law_ising(n, alpha, transverse_field=hx)


def half_merge(spec, beta0, order):
    cut = spec.n // 2
    return merge_spec_for(spec, Interval(1, cut), Interval(cut + 1, spec.n),
                          beta0, order)


def window(spec):
    return 1.0 / (24.0 * extensivity_constant(spec) * spec.k ** 2)


# ---------------------------------------------------------------------------
# truncation order
# ---------------------------------------------------------------------------

def test_truncation_order_exact_powers():
    g, k, gt = 1.3, 2, 0.9
    c0 = tail_prefactor(g, k, gt)
    assert truncation_order_for(c0, g, k, gt) == 0
    assert truncation_order_for(c0 / 8.0, g, k, gt) == 3
    assert truncation_order_for(c0 / 7.9, g, k, gt) == 3
    assert truncation_order_for(c0 / 8.1, g, k, gt) == 4
    with pytest.raises(ValueError):
        truncation_order_for(0.0, g, k, gt)
    with pytest.raises(ValueError):
        truncation_order_for(-0.5, g, k, gt)


def test_truncation_order_against_independent_arithmetic():
    # closed forms evaluated with high-precision arithmetic on the n=4
    # chain's own constants
    spec = chain(4, hx=0.0)
    g = extensivity_constant(spec)
    gt = boundary_bound(spec)
    with mpmath.workdps(40):
        c0_mp = mpmath.exp(mpmath.mpf(gt) / (6 * mpmath.mpf(g) * 4))
        m0_mp = int(mpmath.ceil(mpmath.log(c0_mp / mpmath.mpf("1e-4"), 2)))
    assert tail_prefactor(g, 2, gt) == pytest.approx(float(c0_mp), rel=1e-12)
    assert truncation_order_for(1e-4, g, 2, gt) == m0_mp


# ---------------------------------------------------------------------------
# merge spec construction
# ---------------------------------------------------------------------------

def test_merge_spec_locality_and_cut():
    spec = chain(6)
    ms = half_merge(spec, window(spec), 4)
    assert ms.spec_ab.n == 6 and ms.cut == 3
    crossing = [t for t in ms.spec_sum.terms
                if t.sites[0] <= ms.cut < t.sites[-1]]
    assert crossing == []
    assert len(ms.spec_ab.terms) > len(ms.spec_sum.terms)


def test_merge_spec_requires_adjacency():
    spec = chain(6)
    with pytest.raises(ValueError):
        merge_spec_for(spec, Interval(1, 2), Interval(4, 6), 0.01, 3)
    with pytest.raises(ValueError):
        MergeOperatorSpec(Interval(1, 3), Interval(4, 6), 0.01, 99,
                          spec_ab=chain(6), spec_sum=chain(6))


# ---------------------------------------------------------------------------
# identities
# ---------------------------------------------------------------------------

def decoupled(n):
    base = chain(n)
    return HamiltonianSpec(
        n=n, d=2, k=2,
        terms=tuple(t for t in base.terms
                    if not (t.sites[0] <= n // 2 < t.sites[-1])))


@pytest.mark.parametrize("order", [0, 1, 2, 5])
def test_binomial_cancellation_identity_dense(order):
    spec = decoupled(6)
    ms = half_merge(spec, window(spec), order)
    got = truncated_merge_dense(ms)
    assert np.abs(got - np.eye(64)).max() < 1e-13


def test_binomial_cancellation_identity_mpo_route():
    spec = decoupled(4)
    ms = half_merge(spec, window(spec), 3)
    got = build_merge_mpo(ms, route="mpo").densify()
    assert np.abs(got - np.eye(16)).max() < 1e-13


def test_order_zero_is_identity():
    spec = chain(4)
    ms = half_merge(spec, window(spec), 0)
    assert np.abs(truncated_merge_dense(ms) - np.eye(16)).max() == 0.0
    assert np.abs(build_merge_mpo(ms, route="mpo").densify()
                  - np.eye(16)).max() < 1e-14


def test_zero_beta0_exact_identity():
    spec = chain(4)
    ms = half_merge(spec, 0.0, 6)
    rep = certify_merge_truncation(ms)
    assert rep["measured_error"] < 1e-12
    assert np.abs(merge_operator_dense(ms) - np.eye(16)).max() < 1e-12


# ---------------------------------------------------------------------------
# truncation bound and per-order decay
# ---------------------------------------------------------------------------

def test_truncation_bound_n4_order8():
    spec = chain(4, hx=0.0)
    ms = half_merge(spec, window(spec), 8)
    rep = certify_merge_truncation(ms)
    assert rep["certified_regime"]
    assert rep["error_bound"] == pytest.approx(
        rep["tail_prefactor"] * 2.0 ** -8)
    assert rep["measured_error"] <= rep["error_bound"]


@pytest.mark.parametrize("n", [4, 6])
def test_truncation_bound_order_sweep(n):
    spec = chain(n)
    gt = boundary_bound(spec)
    for order in range(2, 9):
        ms = half_merge(spec, window(spec), order)
        rep = certify_merge_truncation(ms, gtilde=gt, max_order_terms=0)
        assert rep["ok"], (order, rep["measured_error"], rep["error_bound"])


def test_per_order_decay_at_window_boundary():
    spec = chain(6)
    ms = half_merge(spec, window(spec), 0)
    rep = certify_merge_truncation(ms, max_order_terms=10, check=False)
    for row in rep["per_order"]:
        assert row["ok"], row
        assert row["bound"] == pytest.approx(
            2.0 ** -row["m"] * math.exp(rep["boundary_norm"]
                                        / (6 * rep["extensivity"] * 4)))


def test_per_order_decay_general_beta0():
    # the bound (2*C*|b0|)^m * exp(gt/C) holds anywhere inside the window
    spec = chain(4)
    rng = np.random.default_rng(11)
    g = extensivity_constant(spec)
    gt = boundary_bound(spec)
    comm = 6 * g * 4
    for _ in range(5):
        beta0 = float(rng.uniform(0.05, 1.0)) * window(spec)
        ms = half_merge(spec, beta0, 0)
        for m in range(0, 7):
            term = merge_order_term_dense(ms, m)
            bound = (2 * comm * beta0) ** m * math.exp(gt / comm)
            assert np.linalg.norm(term, ord=2) <= bound * (1 + 1e-9)


def test_truncation_bound_random_pairwise_model():
    # random coupling-matrix chains inside the window also obey the bound
    from gibbsmpo.model import power_law_pairwise
    rng = np.random.default_rng(424242)
    for _ in range(3):
        channels = [["X", "X", float(rng.uniform(-1, 1))],
                    ["Z", "Z", float(rng.uniform(-1, 1))],
                    ["Y", "Y", float(rng.uniform(-1, 1))]]
        fields = [["Z", float(rng.uniform(-0.5, 0.5))]]
        spec = power_law_pairwise(6, 3.0, channels=channels, fields=fields)
        beta0 = float(rng.uniform(0.3, 1.0)) * window(spec)
        for order in (3, 6):
            ms = half_merge(spec, beta0, order)
            rep = certify_merge_truncation(ms, max_order_terms=0)
            assert rep["certified_regime"] and rep["ok"]


def test_certification_error_carries_values():
    spec = chain(4)
    # far outside the window the bound genuinely fails at low order
    ms = half_merge(spec, 60.0 * window(spec), 1)
    rep = certify_merge_truncation(ms, check=False)
    assert not rep["certified_regime"]
    with pytest.raises(ValueError):
        build_merge_mpo(ms)  # refuses outside the window without force
    built = build_merge_mpo(ms, force=True, route="dense")
    assert built.n == 4


def test_certification_raises_inside_regime_on_violation():
    # at extreme orders the analytic bound drops below the fp noise floor
    # of the dense evaluation, which must surface as a violation
    spec = chain(4)
    ms = half_merge(spec, window(spec), 55)
    with pytest.raises(CertificationError) as err:
        certify_merge_truncation(ms, max_order_terms=0)
    assert "exceeds bound" in str(err.value)


# ---------------------------------------------------------------------------
# MPO assembly
# ---------------------------------------------------------------------------

def test_routes_agree_dense_vs_mpo():
    spec = chain(5)
    ms = half_merge(spec, window(spec), 3)
    ref = truncated_merge_dense(ms)
    via_mpo = build_merge_mpo(ms, route="mpo").densify()
    via_dense = build_merge_mpo(ms, route="dense").densify()
    assert np.abs(via_mpo - ref).max() < 1e-10
    assert np.abs(via_dense - ref).max() < 1e-10


def test_real_time_merge_routes_agree():
    spec = chain(4)
    ms = half_merge(spec, 1j * window(spec), 3)
    ref = truncated_merge_dense(ms)
    assert np.abs(build_merge_mpo(ms, route="mpo").densify() - ref).max() < 1e-10
    rep = certify_merge_truncation(ms)
    assert rep["certified_regime"]
    assert rep["measured_error"] <= rep["error_bound"]


def test_assembly_profile_matches_and_obeys_ledger():
    spec = chain(4, hx=0.0)
    ms = half_merge(spec, window(spec), 3)
    built = build_merge_mpo(ms, route="mpo")
    predicted = assembly_bond_profile(ms)
    assert built.bond_profile == predicted
    ledger = bond_ledger(ms)
    assert all(b <= ledger for b in built.bond_profile)


def test_bond_cap_fails_fast_with_ledger():
    spec = chain(6)
    ms = half_merge(spec, window(spec), 12)
    with pytest.raises(BondCapError) as err:
        build_merge_mpo(ms, route="mpo", max_bond=256)
    assert err.value.estimate is not None
    # auto route falls back to the dense construction instead
    assert build_merge_mpo(ms, max_bond=256).n == 6


def test_auto_route_beyond_both_caps_reports_estimate():
    spec = chain(6)
    ms = half_merge(spec, window(spec), 12)
    with pytest.raises(BondCapError) as err:
        build_merge_mpo(ms, max_bond=64, dense_cap=4)
    assert err.value.estimate == bond_ledger(ms)


def test_compressed_assembly_stays_close():
    spec = chain(5)
    ms = half_merge(spec, window(spec), 3)
    ref = truncated_merge_dense(ms)
    policy = CompressionPolicy(mode="tolerance", tolerance=1e-24)
    built = build_merge_mpo(ms, route="mpo", policy=policy)
    assert np.abs(built.densify() - ref).max() < 1e-8
    assert max(built.bond_profile) <= max(assembly_bond_profile(ms))
