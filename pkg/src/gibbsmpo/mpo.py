"""Matrix product operator data structure and exact arithmetic.

An MPO stores one rank-4 tensor per site with index order
(left bond, row physical, column physical, right bond) and boundary bonds
of dimension 1.  All arithmetic here is exact: multiply/add/scale never
truncate, and the bond profile of a result follows the product/sum rules
of the inputs.  Lossy truncation only happens through an explicit
:class:`CompressionPolicy`.

Cores are always complex128 so thermal and real-time scalars share one
code path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .model import HamiltonianSpec, site_basis
from .oracle import DEFAULT_DENSE_CAP, DenseCapError

DEFAULT_MAX_BOND = 4096

_EPS = np.finfo(np.float64).eps


class BondCapError(RuntimeError):
    """An exact operation would exceed the configured bond-dimension cap."""

    def __init__(self, message: str, estimate: int | None = None):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class CompressionPolicy:
    """How (and whether) to truncate bonds.

    mode "none" leaves operators untouched.  mode "tolerance" drops, at each
    cut, the smallest singular values whose combined squared weight stays
    below ``tolerance`` relative to the total (tolerance 0 removes only
    numerically zero modes, leaving the operator intact).  mode "maxbond"
    keeps at most ``max_bond`` values per cut.
    """

    mode: str = "none"
    tolerance: float = 0.0
    max_bond: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("none", "tolerance", "maxbond"):
            raise ValueError(f"unknown compression mode {self.mode!r}")
        if self.tolerance < 0.0:
            raise ValueError("tolerance must be >= 0")
        if self.mode == "maxbond" and (self.max_bond is None or self.max_bond < 1):
            raise ValueError("maxbond mode requires max_bond >= 1")

    @property
    def is_none(self) -> bool:
        return self.mode == "none"

    @property
    def lossless(self) -> bool:
        """True when applying the policy cannot change the operator."""
        return self.mode == "none" or (self.mode == "tolerance" and self.tolerance == 0.0)

    @classmethod
    def parse(cls, text: str) -> "CompressionPolicy":
        """Parse CLI syntax: 'none', 'tol=1e-8' or 'maxbond=64'."""
        if text == "none":
            return cls()
        if text.startswith("tol="):
            return cls(mode="tolerance", tolerance=float(text[4:]))
        if text.startswith("maxbond="):
            return cls(mode="maxbond", max_bond=int(text[8:]))
        raise ValueError(f"cannot parse compression policy {text!r}")

    def describe(self) -> str:
        if self.mode == "none":
            return "none"
        if self.mode == "tolerance":
            return f"tol={self.tolerance:g}"
        return f"maxbond={self.max_bond}"


class MPO:
    """Chain of (left, d, d, right) tensors with unit boundary bonds.

    Values are immutable after construction: every operation returns a new
    MPO, so instances are safe to share between threads.
    """

    __slots__ = ("cores", "d")

    def __init__(self, cores):
        cores = tuple(np.ascontiguousarray(c, dtype=complex) for c in cores)
        if not cores:
            raise ValueError("an MPO needs at least one site")
        d = cores[0].shape[1]
        for j, c in enumerate(cores):
            if c.ndim != 4 or c.shape[1] != d or c.shape[2] != d:
                raise ValueError(f"core {j} has invalid shape {c.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for j in range(len(cores) - 1):
            if cores[j].shape[3] != cores[j + 1].shape[0]:
                raise ValueError(f"bond mismatch between cores {j} and {j + 1}")
        for c in cores:
            c.flags.writeable = False
        self.cores = cores
        self.d = d

    @property
    def n(self) -> int:
        return len(self.cores)

    @property
    def bond_profile(self) -> tuple[int, ...]:
        return tuple([1] + [c.shape[3] for c in self.cores])

    @property
    def max_bond(self) -> int:
        return max(self.bond_profile)

    def densify(self, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        """Exact dense matrix of the encoded operator."""
        dim = self.d ** self.n
        if dim > cap:
            raise DenseCapError(f"dense dimension {dim} exceeds cap {cap}")
        acc = np.ones((1, 1, 1), dtype=complex)  # (bond, rows, cols)
        for core in self.cores:
            acc = np.einsum("lab,lxyr->raxby", acc, core)
            r = core.shape[3]
            acc = acc.reshape(r, acc.shape[1] * acc.shape[2], -1)
        return acc[0]

    def trace(self) -> complex:
        acc = np.ones((1, 1), dtype=complex)
        for core in self.cores:
            acc = acc @ np.einsum("lssr->lr", core)
        return complex(acc[0, 0])

    def copy(self) -> "MPO":
        return MPO([c.copy() for c in self.cores])


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def identity_mpo(n: int, d: int) -> MPO:
    eye = np.eye(d, dtype=complex).reshape(1, d, d, 1)
    return MPO([eye.copy() for _ in range(n)])


def zero_mpo(n: int, d: int) -> MPO:
    return MPO([np.zeros((1, d, d, 1), dtype=complex) for _ in range(n)])


def random_mpo(n: int, d: int, bond: int, seed: int | None = None,
               rng: np.random.Generator | None = None) -> MPO:
    """Random complex MPO with interior bond dimension ``bond``."""
    if rng is None:
        rng = np.random.default_rng(seed)
    profile = [1] + [bond] * (n - 1) + [1]
    cores = []
    for j in range(n):
        l, r = profile[j], profile[j + 1]
        c = rng.standard_normal((l, d, d, r)) + 1j * rng.standard_normal((l, d, d, r))
        cores.append(c / np.sqrt(l * d * r))
    return MPO(cores)


def from_dense(op: np.ndarray, n: int, d: int, rel_tol: float = 0.0) -> MPO:
    """Exact tensor-train factorization of a dense operator.

    Sequential SVDs keep every singular value above the numerical-zero
    threshold (plus an optional relative truncation ``rel_tol`` on each
    spectrum), so the default reproduces the operator to machine precision
    with bonds equal to the true cut ranks.
    """
    dim = d ** n
    if op.shape != (dim, dim):
        raise ValueError(f"expected shape {(dim, dim)}, got {op.shape}")
    t = op.reshape((d,) * (2 * n))
    perm = [ax for j in range(n) for ax in (j, n + j)]
    t = np.ascontiguousarray(t.transpose(perm), dtype=complex)
    cores = []
    left = 1
    rest = t.reshape(left * d * d, -1)
    for j in range(n - 1):
        u, s, vh = np.linalg.svd(rest, full_matrices=False)
        cutoff = (s[0] if s.size else 0.0) * max(rest.shape) * _EPS
        if rel_tol > 0.0 and s.size:
            cutoff = max(cutoff, s[0] * rel_tol)
        keep = max(1, int(np.count_nonzero(s > cutoff)))
        cores.append(u[:, :keep].reshape(left, d, d, keep))
        rest = (s[:keep, None] * vh[:keep]).reshape(keep * d * d, -1)
        left = keep
    cores.append(rest.reshape(left, d, d, 1))
    return MPO(cores)


def concat(a: MPO, b: MPO) -> MPO:
    """Tensor product of operators on adjacent blocks (chain join)."""
    if a.d != b.d:
        raise ValueError("local dimensions differ")
    return MPO([c.copy() for c in a.cores] + [c.copy() for c in b.cores])


# ---------------------------------------------------------------------------
# exact arithmetic
# ---------------------------------------------------------------------------

def _check_compatible(a: MPO, b: MPO) -> None:
    if a.n != b.n or a.d != b.d:
        raise ValueError(f"incompatible MPOs: ({a.n}, d={a.d}) vs ({b.n}, d={b.d})")


def multiply(a: MPO, b: MPO, max_bond: int = DEFAULT_MAX_BOND) -> MPO:
    """Exact operator product a @ b; bond profile multiplies elementwise.

    The contraction cost scales as n * (D_a * D_b)^2 * d^3.
    """
    _check_compatible(a, b)
    predicted = max(x * y for x, y in zip(a.bond_profile, b.bond_profile))
    if predicted > max_bond:
        raise BondCapError(
            f"product bond {predicted} exceeds cap {max_bond}", estimate=predicted)
    d = a.d
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        c = np.einsum("asxb,cxte->acstbe", ca, cb)
        la, lc = ca.shape[0], cb.shape[0]
        ra, re = ca.shape[3], cb.shape[3]
        cores.append(c.reshape(la * lc, d, d, ra * re))
    return MPO(cores)


def add(a: MPO, b: MPO, max_bond: int = DEFAULT_MAX_BOND) -> MPO:
    """Exact operator sum; interior bond profile adds elementwise."""
    _check_compatible(a, b)
    if a.n == 1:
        return MPO([a.cores[0] + b.cores[0]])
    predicted = max(x + y for x, y in zip(a.bond_profile[1:-1], b.bond_profile[1:-1]))
    if predicted > max_bond:
        raise BondCapError(
            f"sum bond {predicted} exceeds cap {max_bond}", estimate=predicted)
    d = a.d
    cores = [np.concatenate([a.cores[0], b.cores[0]], axis=3)]
    for j in range(1, a.n - 1):
        ca, cb = a.cores[j], b.cores[j]
        block = np.zeros((ca.shape[0] + cb.shape[0], d, d,
                          ca.shape[3] + cb.shape[3]), dtype=complex)
        block[:ca.shape[0], :, :, :ca.shape[3]] = ca
        block[ca.shape[0]:, :, :, ca.shape[3]:] = cb
        cores.append(block)
    cores.append(np.concatenate([a.cores[-1], b.cores[-1]], axis=0))
    return MPO(cores)


def scale(a: MPO, c: complex) -> MPO:
    """Scalar multiple (complex scalars supported throughout)."""
    cores = [a.cores[0] * c] + [core.copy() for core in a.cores[1:]]
    return MPO(cores)


def power(a: MPO, q: int, policy: CompressionPolicy | None = None,
          max_bond: int = DEFAULT_MAX_BOND) -> MPO:
    """Left-folded q-th operator power with optional per-step compression.

    Without compression the bond profile is the q-fold elementwise power;
    exceeding ``max_bond`` fails fast with the analytic estimate attached.
    """
    if q < 1:
        raise ValueError(f"exponent must be a positive integer, got {q}")
    out = a
    for _ in range(q - 1):
        try:
            out = multiply(out, a, max_bond=max_bond)
        except BondCapError as exc:
            estimate = max(x ** q for x in a.bond_profile)
            raise BondCapError(
                f"{exc}; uncompressed power would reach bond {estimate}",
                estimate=estimate) from exc
        if policy is not None and not policy.is_none:
            out, _ = compress(out, policy)
    return out


# ---------------------------------------------------------------------------
# compression
# ---------------------------------------------------------------------------

def _split_rank(s: np.ndarray, policy: CompressionPolicy, dims: tuple[int, int]):
    """Rank to keep for one singular spectrum plus relative discarded weight."""
    if s.size == 0:
        return 1, 0.0
    total = float(np.sum(s ** 2))
    if total == 0.0:
        return 1, 0.0
    cutoff = s[0] * max(dims) * _EPS
    keep = max(1, int(np.count_nonzero(s > cutoff)))
    if policy.mode == "tolerance" and policy.tolerance > 0.0:
        tail = np.cumsum((s[::-1] ** 2))[::-1] / total  # tail[i] = weight of s[i:]
        while keep > 1 and tail[keep - 1] <= policy.tolerance:
            keep -= 1
    elif policy.mode == "maxbond":
        keep = min(keep, policy.max_bond)
    discarded = float(np.sum(s[keep:] ** 2)) / total
    return keep, discarded


def compress(a: MPO, policy: CompressionPolicy) -> tuple[MPO, float]:
    """Canonicalize and truncate per policy.

    Left-to-right QR orthogonalization followed by a right-to-left SVD
    sweep truncating each cut.  Returns the new MPO and the cumulative
    relative discarded squared singular-value weight (0 for mode "none",
    and 0 up to roundoff for tolerance 0).
    """
    if policy.is_none:
        return a, 0.0
    d = a.d
    cores = [c.copy() for c in a.cores]
    for j in range(len(cores) - 1):
        l, _, _, r = cores[j].shape
        q, rr = np.linalg.qr(cores[j].reshape(l * d * d, r))
        cores[j] = q.reshape(l, d, d, q.shape[1])
        cores[j + 1] = np.einsum("ab,bxyr->axyr", rr, cores[j + 1])
    discarded = 0.0
    for j in range(len(cores) - 1, 0, -1):
        l, _, _, r = cores[j].shape
        mat = cores[j].reshape(l, d * d * r)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep, w = _split_rank(s, policy, mat.shape)
        discarded += w
        cores[j] = vh[:keep].reshape(keep, d, d, r)
        cores[j - 1] = np.einsum("axyb,bk->axyk", cores[j - 1], u[:, :keep] * s[:keep])
    return MPO(cores), discarded


def multiply_compressed(a: MPO, b: MPO, policy: CompressionPolicy) -> tuple[MPO, float]:
    """Operator product with on-the-fly truncation (zip-up sweep).

    Avoids materializing the full product bond profile, so it stays usable
    when the exact product would exceed memory.  Requires a truncating
    policy; the result is an approximation whose discarded weight is
    returned for error accounting.
    """
    _check_compatible(a, b)
    if policy.is_none:
        raise ValueError("zip-up multiply requires a truncating policy")
    d = a.d
    carry = np.ones((1, 1, 1), dtype=complex)  # (kept bond, a bond, b bond)
    cores = []
    discarded = 0.0
    for j in range(a.n):
        ca, cb = a.cores[j], b.cores[j]
        theta = np.einsum("kab,axyc,bytd->kxtcd", carry, ca, cb)
        k = theta.shape[0]
        ra, rb = ca.shape[3], cb.shape[3]
        mat = theta.reshape(k * d * d, ra * rb)
        if j == a.n - 1:
            cores.append(mat.reshape(k, d, d, 1))
            break
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep, w = _split_rank(s, policy, mat.shape)
        discarded += w
        cores.append(u[:, :keep].reshape(k, d, d, keep))
        carry = (s[:keep, None] * vh[:keep]).reshape(keep, ra, rb)
    out, extra = compress(MPO(cores), policy)
    return out, discarded + extra


# ---------------------------------------------------------------------------
# Hamiltonian MPOs (finite-state automaton layout)
# ---------------------------------------------------------------------------

_SRC = ("src",)
_SNK = ("snk",)


def hamiltonian_mpo(spec: HamiltonianSpec) -> MPO:
    """MPO of a Hamiltonian spec via a finite-state automaton layout.

    Explicit terms contribute one chain of states spanning their support;
    exponential pair channels contribute one decaying state per series term
    and distinct left operator, so the bond stays O(d^2) per series term
    instead of growing with the interaction range.  The interior bond is
    2 + (number of in-progress states per cut), always below the generic
    n**k * d**k cap.
    """
    basis = site_basis(spec.d)
    n, d = spec.n, spec.d
    # states per cut (0..n); interior cuts carry source and sink
    states: list[dict] = [dict() for _ in range(n + 1)]
    states[0][_SRC] = 0
    states[n][_SNK] = 0
    for c in range(1, n):
        states[c][_SRC] = 0
        states[c][_SNK] = 1

    def state_index(cut: int, key) -> int:
        if key not in states[cut]:
            states[cut][key] = len(states[cut])
        return states[cut][key]

    # edges[j] holds (left key, right key, d x d matrix) for site j (1-based)
    edges: list[list] = [[] for _ in range(n + 1)]
    eye = basis["I"]
    for j in range(1, n):
        edges[j].append((_SRC, _SRC, eye))
        edges[j + 1].append((_SNK, _SNK, eye))

    for t_idx, term in enumerate(spec.terms):
        if term.kernel_generated and spec.exp_channels is not None:
            continue  # encoded through decay channels below
        first, last = term.sites[0], term.sites[-1]
        op_at = {s: basis[name] for s, name in zip(term.sites, term.ops)}
        if first == last:
            edges[first].append((_SRC, _SNK, term.coefficient * op_at[first]))
            continue
        key = ("term", t_idx)
        for cut in range(first, last):
            state_index(cut, key)
        for site in range(first, last + 1):
            mat = op_at.get(site, eye)
            lkey = _SRC if site == first else key
            rkey = _SNK if site == last else key
            if site == first:
                mat = term.coefficient * mat
            edges[site].append((lkey, rkey, mat))

    if spec.exp_channels is not None and spec.pair_channels is not None:
        scale_j = 1.0 if spec.coupling is None else spec.coupling
        by_left: dict[str, list[tuple[str, float]]] = {}
        for op1, op2, w in spec.pair_channels:
            by_left.setdefault(op1, []).append((op2, scale_j * w))
        for s_idx, (w_s, rate) in enumerate(spec.exp_channels):
            damp = float(np.exp(-rate))
            for op1, rights in by_left.items():
                key = ("dec", s_idx, op1)
                for cut in range(1, n):
                    state_index(cut, key)
                closing = sum(cw * basis[op2] for op2, cw in rights)
                for site in range(1, n + 1):
                    if site < n:
                        edges[site].append((_SRC, key, w_s * damp * basis[op1]))
                    if site > 1:
                        edges[site].append((key, _SNK, closing))
                    if 1 < site < n:
                        edges[site].append((key, key, damp * eye))

    cores = []
    for j in range(1, n + 1):
        left, right = states[j - 1], states[j]
        w = np.zeros((len(left), d, d, len(right)), dtype=complex)
        for lkey, rkey, mat in edges[j]:
            if lkey in left and rkey in right:
                w[left[lkey], :, :, right[rkey]] += mat
        cores.append(w)
    return MPO(cores)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------
#
# Byte layout (little endian), version 1:
#   0   4s  magic  b"GMPO"
#   4   u32 version (1)
#   8   u32 n
#   12  u32 d
#   16  u32 scalar kind (1 = complex128 pairs of float64)
#   20  u64 * (n+1)  bond profile including unit boundaries
#   ..  cores, site 1..n, row-major (left, d, d, right) complex128
#
# Round trips are bit-exact: bytes -> arrays -> bytes is the identity.

_MAGIC = b"GMPO"
_HEADER = struct.Struct("<4sIIII")


def mpo_to_bytes(a: MPO) -> bytes:
    parts = [_HEADER.pack(_MAGIC, 1, a.n, a.d, 1)]
    profile = a.bond_profile
    parts.append(struct.pack(f"<{len(profile)}Q", *profile))
    for core in a.cores:
        parts.append(np.ascontiguousarray(core, dtype=np.complex128).tobytes())
    return b"".join(parts)


def mpo_from_bytes(data: bytes) -> MPO:
    magic, version, n, d, scalar = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise ValueError("not an MPO container")
    if version != 1 or scalar != 1:
        raise ValueError(f"unsupported container version {version}/scalar {scalar}")
    off = _HEADER.size
    profile = struct.unpack_from(f"<{n + 1}Q", data, off)
    off += 8 * (n + 1)
    cores = []
    for j in range(n):
        shape = (profile[j], d, d, profile[j + 1])
        count = int(np.prod(shape))
        core = np.frombuffer(data, dtype=np.complex128, count=count, offset=off)
        cores.append(core.reshape(shape).copy())
        off += count * 16
    if off != len(data):
        raise ValueError("trailing bytes in MPO container")
    return MPO(cores)


def save_mpo(a: MPO, path) -> None:
    with open(path, "wb") as fh:
        fh.write(mpo_to_bytes(a))


def load_mpo(path) -> MPO:
    with open(path, "rb") as fh:
        return mpo_from_bytes(fh.read())
