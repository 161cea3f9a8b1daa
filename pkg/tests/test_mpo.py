"""MPO arithmetic exactness, compression contract, serialization, builders."""

import numpy as np
import pytest

from gibbsmpo.model import (
    HamiltonianSpec,
    LocalTerm,
    dense_matrix,
    nearest_neighbor_ising,
    power_law_heisenberg,
    power_law_ising,
)
from gibbsmpo.mpo import (
    MPO,
    BondCapError,
    CompressionPolicy,
    add,
    compress,
    concat,
    from_dense,
    hamiltonian_mpo,
    identity_mpo,
    load_mpo,
    mpo_from_bytes,
    mpo_to_bytes,
    multiply,
    multiply_compressed,
    power,
    random_mpo,
    save_mpo,
    scale,
    zero_mpo,
)

RNG = np.random.default_rng(777)


def dev(a, b):
    return float(np.abs(a - b).max())


# ---------------------------------------------------------------------------
# constructors and contracts
# ---------------------------------------------------------------------------

def test_identity_densify():
    assert dev(identity_mpo(1, 2).densify(), np.eye(2)) == 0.0
    assert dev(identity_mpo(3, 2).densify(), np.eye(8)) == 0.0
    assert identity_mpo(5, 2).bond_profile == (1,) * 6


def test_zero_mpo():
    assert np.abs(zero_mpo(3, 2).densify()).max() == 0.0


def test_core_shape_validation():
    with pytest.raises(ValueError):
        MPO([np.zeros((2, 2, 2, 1))])  # boundary bond must be 1
    with pytest.raises(ValueError):
        MPO([np.zeros((1, 2, 2, 3)), np.zeros((2, 2, 2, 1))])  # bond mismatch


def test_bond_profile_reports_actual_shapes():
    a = random_mpo(4, 2, 3, seed=5)
    assert a.bond_profile == (1, 3, 3, 3, 1)
    prod = multiply(a, a)
    assert prod.bond_profile == (1, 9, 9, 9, 1)
    total = add(a, a)
    assert total.bond_profile == (1, 6, 6, 6, 1)


# ---------------------------------------------------------------------------
# exact arithmetic against the dense oracle
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_multiply_matches_dense(n):
    a = random_mpo(n, 2, 3, rng=RNG)
    b = random_mpo(n, 2, 3, rng=RNG)
    assert dev(multiply(a, b).densify(), a.densify() @ b.densify()) < 1e-10


def test_multiply_identity_is_neutral():
    a = random_mpo(5, 2, 3, rng=RNG)
    assert dev(multiply(a, identity_mpo(5, 2)).densify(), a.densify()) < 1e-12
    assert dev(multiply(identity_mpo(5, 2), a).densify(), a.densify()) < 1e-12


def test_multiply_shape_mismatch():
    with pytest.raises(ValueError):
        multiply(random_mpo(3, 2, 2, rng=RNG), random_mpo(4, 2, 2, rng=RNG))


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_add_scale_match_dense(n):
    a = random_mpo(n, 2, 2, rng=RNG)
    b = random_mpo(n, 2, 2, rng=RNG)
    c = 0.3 - 1.7j
    assert dev(add(a, b).densify(), a.densify() + b.densify()) < 1e-10
    assert dev(scale(a, c).densify(), c * a.densify()) < 1e-12
    assert np.abs(scale(a, 0.0).densify()).max() == 0.0


def test_add_zero_is_neutral():
    a = random_mpo(4, 2, 3, rng=RNG)
    assert dev(add(a, zero_mpo(4, 2)).densify(), a.densify()) < 1e-12


def test_power_matches_dense_cube():
    a = random_mpo(4, 2, 2, rng=RNG)
    assert dev(power(a, 3).densify(),
               np.linalg.matrix_power(a.densify(), 3)) < 1e-10
    assert power(a, 3).bond_profile == (1, 8, 8, 8, 1)


def test_power_identity_and_unit_exponent():
    a = random_mpo(3, 2, 2, rng=RNG)
    assert power(a, 1) is a
    assert dev(power(identity_mpo(4, 2), 5).densify(), np.eye(16)) < 1e-12
    with pytest.raises(ValueError):
        power(a, 0)


def test_power_parenthesization_is_dense_equal():
    # left fold is the chosen order; other orders agree without compression
    a = random_mpo(4, 2, 2, rng=RNG)
    left = power(a, 4).densify()
    square = multiply(a, a)
    balanced = multiply(square, square).densify()
    right = multiply(a, multiply(a, multiply(a, a))).densify()
    assert dev(left, balanced) < 1e-10
    assert dev(left, right) < 1e-10


def test_power_bond_cap_fails_fast_with_estimate():
    a = random_mpo(6, 2, 4, rng=RNG)
    with pytest.raises(BondCapError) as err:
        power(a, 8, max_bond=1024)
    assert err.value.estimate == 4 ** 8


def test_trace_matches_dense():
    a = random_mpo(5, 2, 3, rng=RNG)
    assert complex(a.trace()) == pytest.approx(complex(np.trace(a.densify())),
                                               rel=1e-12)


def test_concat_is_tensor_product():
    a = random_mpo(2, 2, 2, rng=RNG)
    b = random_mpo(3, 2, 2, rng=RNG)
    assert dev(concat(a, b).densify(), np.kron(a.densify(), b.densify())) < 1e-10


# ---------------------------------------------------------------------------
# from_dense
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_from_dense_roundtrip(n):
    op = RNG.standard_normal((2 ** n, 2 ** n)) \
        + 1j * RNG.standard_normal((2 ** n, 2 ** n))
    back = from_dense(op, n, 2).densify()
    assert dev(back, op) < 1e-10 * np.abs(op).max()


def test_densify_cap_enforced():
    from gibbsmpo.oracle import DenseCapError
    with pytest.raises(DenseCapError):
        random_mpo(6, 2, 2, rng=RNG).densify(cap=16)


def test_from_dense_rank_reduction():
    a = random_mpo(6, 2, 2, rng=RNG)
    rebuilt = from_dense(a.densify(), 6, 2)
    assert max(rebuilt.bond_profile) <= 4  # true rank of a bond-2 operator


# ---------------------------------------------------------------------------
# compression
# ---------------------------------------------------------------------------

def test_compress_mode_none_is_identity():
    a = random_mpo(5, 2, 4, rng=RNG)
    out, w = compress(a, CompressionPolicy())
    assert out is a and w == 0.0


def test_compress_zero_tolerance_keeps_operator():
    a = random_mpo(6, 2, 8, rng=RNG)
    out, w = compress(a, CompressionPolicy(mode="tolerance", tolerance=0.0))
    ref = a.densify()
    assert np.linalg.norm(out.densify() - ref) < 1e-10 * np.linalg.norm(ref)
    assert w < 1e-20
    # rank caps beat the stored profile near the boundary
    assert out.bond_profile[1] <= 4 < a.bond_profile[1]
    assert all(x <= y for x, y in zip(out.bond_profile, a.bond_profile))


def test_compress_redundant_product_shrinks():
    a = random_mpo(5, 2, 2, rng=RNG)
    prod = multiply(a, identity_mpo(5, 2))
    out, _ = compress(prod, CompressionPolicy(mode="tolerance", tolerance=0.0))
    assert max(out.bond_profile) <= max(a.bond_profile)


def test_compress_maxbond_caps_profile():
    a = random_mpo(6, 2, 8, rng=RNG)
    out, w = compress(a, CompressionPolicy(mode="maxbond", max_bond=3))
    assert max(out.bond_profile) <= 3
    assert w > 0.0


def test_compress_frobenius_error_bounded_by_discarded_weight():
    for bond, tol in [(8, 1e-4), (8, 1e-2), (6, 1e-1)]:
        a = random_mpo(6, 2, bond, rng=RNG)
        out, w = compress(a, CompressionPolicy(mode="tolerance", tolerance=tol))
        ref = a.densify()
        rel = np.linalg.norm(out.densify() - ref) / np.linalg.norm(ref)
        assert rel <= np.sqrt(w) * 1.01 + 1e-12


def test_policy_parse():
    assert CompressionPolicy.parse("none").is_none
    tol = CompressionPolicy.parse("tol=1e-8")
    assert tol.mode == "tolerance" and tol.tolerance == 1e-8
    mb = CompressionPolicy.parse("maxbond=64")
    assert mb.mode == "maxbond" and mb.max_bond == 64
    with pytest.raises(ValueError):
        CompressionPolicy.parse("squeeze=9")
    with pytest.raises(ValueError):
        CompressionPolicy(mode="maxbond")


def test_multiply_compressed_tracks_error():
    a = random_mpo(6, 2, 4, rng=RNG)
    b = random_mpo(6, 2, 4, rng=RNG)
    exact = a.densify() @ b.densify()
    out, w = multiply_compressed(a, b, CompressionPolicy(mode="tolerance",
                                                         tolerance=0.0))
    assert np.linalg.norm(out.densify() - exact) < 1e-9 * np.linalg.norm(exact)
    lossy, w2 = multiply_compressed(a, b, CompressionPolicy(mode="maxbond",
                                                            max_bond=4))
    assert max(lossy.bond_profile) <= 4
    with pytest.raises(ValueError):
        multiply_compressed(a, b, CompressionPolicy())


# ---------------------------------------------------------------------------
# Hamiltonian builders
# ---------------------------------------------------------------------------

def test_hamiltonian_mpo_single_pair_term():
    spec = HamiltonianSpec(n=2, d=2, k=2,
                           terms=(LocalTerm((1, 2), 1.0, ("Z", "Z")),))
    h = hamiltonian_mpo(spec)
    assert h.bond_profile[1] <= 4
    assert dev(h.densify(), dense_matrix(spec)) < 1e-12


def test_hamiltonian_mpo_empty_spec_is_zero():
    spec = HamiltonianSpec(n=4, d=2, k=2, terms=())
    assert np.abs(hamiltonian_mpo(spec).densify()).max() == 0.0


@pytest.mark.parametrize("builder,kwargs", [
    (power_law_ising, {"alpha": 3.0}),
    (power_law_ising, {"alpha": 2.5, "transverse_field": 0.3}),
    (power_law_heisenberg, {"alpha": 3.0}),
    (nearest_neighbor_ising, {}),
])
def test_hamiltonian_mpo_matches_dense(builder, kwargs):
    spec = builder(6, **kwargs)
    h = hamiltonian_mpo(spec)
    assert dev(h.densify(), dense_matrix(spec)) < 1e-10
    assert h.max_bond <= spec.n ** spec.k * spec.d ** spec.k


def test_hamiltonian_mpo_gapped_three_site_term():
    # k = 3 with a non-contiguous support: identity bridges the gaps
    spec = HamiltonianSpec(n=5, d=2, k=3, terms=(
        LocalTerm((1, 3, 5), 0.7, ("Z", "X", "Z")),
        LocalTerm((2, 4), -0.4, ("X", "X")),
        LocalTerm((3,), 0.2, ("Y",))))
    h = hamiltonian_mpo(spec)
    assert dev(h.densify(), dense_matrix(spec)) < 1e-12
    assert h.max_bond <= 4


def test_hamiltonian_mpo_qutrit_model():
    from gibbsmpo.model import power_law_pairwise
    spec = power_law_pairwise(4, 3.0, channels=[["S01", "S01", 1.0]],
                              fields=[["D1", 0.3]], d=3)
    h = hamiltonian_mpo(spec)
    assert dev(h.densify(), dense_matrix(spec)) < 1e-10


def test_hamiltonian_mpo_generic_cap_documented():
    spec = power_law_ising(8, 3.0)
    h = hamiltonian_mpo(spec)
    # the automaton needs 2 + (pairs straddling the cut) states
    assert h.max_bond <= 2 + (spec.n // 2) ** 2
    assert h.max_bond <= spec.n ** 2 * spec.d ** 2


def test_exponential_channel_three_state_layout():
    # one decay channel: classic (source, decay, sink) automaton
    spec = HamiltonianSpec(
        n=6, d=2, k=2, terms=(), coupling=1.0,
        pair_channels=(("Z", "Z", 1.0),), exp_channels=((0.8, 0.5),))
    h = hamiltonian_mpo(spec)
    assert h.max_bond == 3
    assert h.max_bond <= spec.d ** 2 + 2
    z = np.diag([1.0, -1.0]).astype(complex)
    expected = np.zeros((64, 64), dtype=complex)
    for i in range(1, 7):
        for j in range(i + 1, 7):
            mats = {i: z, j: z}
            acc = np.array([[1.0 + 0j]])
            for s in range(1, 7):
                acc = np.kron(acc, mats.get(s, np.eye(2)))
            expected += 0.8 * np.exp(-0.5 * (j - i)) * acc
    assert dev(h.densify(), expected) < 1e-12


def test_exponential_channels_match_kernel_spec():
    import warnings
    from gibbsmpo.expsum import approximate_hamiltonian
    spec = power_law_ising(6, 3.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        approx, series = approximate_hamiltonian(spec, 1e-2)
    h = hamiltonian_mpo(approx)
    assert dev(h.densify(), dense_matrix(approx)) < 1e-10
    # bond grows with the series length, not the interaction range
    assert h.max_bond <= series.num_terms + 2


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_serialization_bit_exact_roundtrip(tmp_path):
    a = random_mpo(5, 2, 4, seed=31337)
    blob = mpo_to_bytes(a)
    back = mpo_from_bytes(blob)
    assert mpo_to_bytes(back) == blob
    for x, y in zip(a.cores, back.cores):
        assert np.array_equal(x, y)
    path = tmp_path / "op.mpo"
    save_mpo(a, path)
    assert mpo_to_bytes(load_mpo(path)) == blob


def test_serialization_rejects_garbage():
    with pytest.raises(ValueError):
        mpo_from_bytes(b"NOPE" + b"\x00" * 64)
    blob = mpo_to_bytes(identity_mpo(2, 2))
    with pytest.raises(ValueError):
        mpo_from_bytes(blob + b"\x00")
