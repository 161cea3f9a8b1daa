"""Full pipeline: block tree, layered merging, powering, error budgets.

The thermal operator exp(-beta*H) is built in four stages.  (1) Exact
high-temperature operators exp(-b0*H_leaf) on two-site leaf blocks.
(2) log2(n) merge layers, each joining adjacent blocks with a truncated
merge operator.  (3) The result approximates exp(-b0*H) with a relative
error eps0' that obeys the per-layer recursion e_q = a2*d0 + a1*e_{q-1}.
(4) Raising it to the integer power Q = beta/b0 reaches the target
temperature with relative error at most 5*Q*eps0' in every Schatten norm.
Setting beta = i*t runs the same pipeline for real-time evolution.

The per-merge tolerance d0 is chosen so the powered error meets the
requested target; for power-law pairwise models the Hamiltonian is first
replaced by its exponential-kernel surrogate and the budget split so the
combined error still lands below the target.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .expsum import ExpSumApprox, approximate_hamiltonian
from .model import HamiltonianSpec, Interval, boundary_bound, dense_matrix, \
    extensivity_constant, restrict, spec_digest
from .oracle import DEFAULT_DENSE_CAP, DenseCapError, dense_exp, relative_error
from . import mpo as mpo_ops
from .mpo import DEFAULT_MAX_BOND, MPO, CompressionPolicy, hamiltonian_mpo
from .merge import build_merge_mpo, merge_spec_for, tail_prefactor, \
    truncated_merge_dense, truncation_order_for


class BudgetError(ValueError):
    """The requested run parameters admit no certified budget."""


def recursion_constants(g: float, k: int, gtilde: float) -> tuple[float, float]:
    """Per-merge error recursion constants (gain a1, truncation offset a2)."""
    a1 = 12.0 * math.exp(gtilde / (4.0 * g * k * k))
    a2 = 2.0 * math.exp(gtilde / (24.0 * g * k * k))
    return a1, a2


@dataclass(frozen=True)
class ErrorBudget:
    """All constants and tolerances of one pipeline run."""

    epsilon: float            # requested total relative error
    beta: complex             # i*t for real-time runs
    beta_abs: float
    steps: int                # integer power Q = |beta| / |beta0|
    beta0: complex
    merge_tol: float          # per-merge operator-error target d0
    order: int                # Taylor truncation order of each merge
    num_layers: int           # q0, leaf layer included
    ham_tol: float            # Hamiltonian replacement error (0 = generic path)
    mpo_target: float         # error budgeted to the MPO stage itself
    extensivity: float        # g of the run Hamiltonian
    boundary_norm: float      # uniform boundary bound of the run Hamiltonian
    locality: int
    tail_prefactor: float     # c0
    merge_gain: float         # a1
    merge_offset: float       # a2
    high_temp_error: float    # predicted relative error of the merged operator
    powered_error: float      # predicted relative error after Q-fold powering
    total_predicted: float    # powered error composed with the replacement error
    two_local_path: bool
    real_time: bool
    ham_bond: int             # bond of the run-Hamiltonian MPO
    merge_bond_ledger: int    # (m0+1)^2 * D_H^m0
    high_temp_bond_ledger: int
    final_bond_ledger: int

    def to_dict(self) -> dict:
        out = {
            "epsilon": self.epsilon,
            "beta_real": self.beta.real,
            "beta_imag": self.beta.imag,
            "beta_abs": self.beta_abs,
            "steps": self.steps,
            "beta0_real": self.beta0.real,
            "beta0_imag": self.beta0.imag,
            "merge_tol": self.merge_tol,
            "order": self.order,
            "num_layers": self.num_layers,
            "ham_tol": self.ham_tol,
            "mpo_target": self.mpo_target,
            "extensivity": self.extensivity,
            "boundary_norm": self.boundary_norm,
            "locality": self.locality,
            "tail_prefactor": self.tail_prefactor,
            "merge_gain": self.merge_gain,
            "merge_offset": self.merge_offset,
            "high_temp_error": self.high_temp_error,
            "powered_error": self.powered_error,
            "total_predicted": self.total_predicted,
            "two_local_path": self.two_local_path,
            "real_time": self.real_time,
            "ham_bond": self.ham_bond,
            "merge_bond_ledger_log10": _log10_int(self.merge_bond_ledger),
            "high_temp_bond_ledger_log10": _log10_int(self.high_temp_bond_ledger),
            "final_bond_ledger_log10": _log10_int(self.final_bond_ledger),
        }
        return out


def _log10_int(value: int) -> float:
    if value <= 0:
        return float("-inf")
    shift = max(0, value.bit_length() - 64)
    return math.log10(value >> shift) + shift * math.log10(2.0)


@dataclass(frozen=True)
class MergePlan:
    """Binary block tree: layer q tiles the chain, layer q+1 joins pairs."""

    n: int
    leaf_size: int
    layers: tuple[tuple[Interval, ...], ...]

    @property
    def num_layers(self) -> int:
        return len(self.layers)


def build_merge_plan(n: int, leaf_size: int = 2) -> MergePlan:
    """Halving tree over [1, n]; odd blocks are carried up unmerged."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    leaves = tuple(Interval(lo, min(lo + leaf_size - 1, n))
                   for lo in range(1, n + 1, leaf_size))
    layers = [leaves]
    while len(layers[-1]) > 1:
        prev = layers[-1]
        nxt = [Interval(prev[i].lo, prev[i + 1].hi)
               for i in range(0, len(prev) - 1, 2)]
        if len(prev) % 2 == 1:
            nxt.append(prev[-1])
        layers.append(tuple(nxt))
    return MergePlan(n=n, leaf_size=leaf_size, layers=tuple(layers))


def plan_budget(spec: HamiltonianSpec, beta: float, epsilon: float, *,
                real_time: bool = False, two_local: str = "auto",
                dense_cap: int = DEFAULT_DENSE_CAP,
                force_steps: int | None = None,
                ) -> tuple[ErrorBudget, HamiltonianSpec, ExpSumApprox | None]:
    """Derive the full error budget for one run.

    Picks the largest admissible high-temperature step (fewest powering
    steps Q), then the per-merge tolerance

        d0 = |b0| * eps_mpo / (5 * |beta| * a2 * n^log2(2*a1))

    whose powered error lands at eps_mpo by construction.  On the pairwise
    power-law path the Hamiltonian is replaced first (tolerance eps/(6*beta),
    MPO stage budgeted eps/3) so the composed error stays below eps.

    Returns (budget, run spec, kernel series or None).  The run spec is the
    Hamiltonian the pipeline actually exponentiates.
    """
    if not 0.0 < epsilon <= 1.0:
        raise BudgetError(f"target error must lie in (0, 1], got {epsilon}")
    beta_abs = abs(beta)
    if beta_abs <= 0.0:
        raise BudgetError(f"evolution parameter must be nonzero, got {beta}")
    if beta_abs >= spec.n:
        raise BudgetError(f"budget requires |beta| < n, got |beta|={beta_abs} "
                          f"with n={spec.n}")
    if two_local not in ("auto", "on", "off"):
        raise ValueError(f"two_local must be auto/on/off, got {two_local!r}")
    use_pairwise = spec.two_local_pairwise() and spec.alpha is not None \
        and spec.exp_channels is None
    if two_local == "on" and not use_pairwise:
        raise BudgetError("pairwise fast path requested but the model has no "
                          "power-law pairwise structure")
    if two_local == "off":
        use_pairwise = False

    beta_c = 1j * beta if real_time else complex(beta)
    if use_pairwise:
        ham_tol = epsilon / (6.0 * beta_abs)
        run_spec, series = approximate_hamiltonian(spec, ham_tol)
        mpo_target = epsilon / 3.0
    else:
        run_spec, series = spec, None
        ham_tol = 0.0
        mpo_target = epsilon

    g = extensivity_constant(run_spec)
    gtilde = boundary_bound(run_spec)
    k = run_spec.k
    if g <= 0.0:
        # zero Hamiltonian: a single exact step suffices
        g = 1.0
    beta0_max = 1.0 / (24.0 * g * k * k)
    steps = max(1, math.ceil(beta_abs / beta0_max - 1e-12))
    if force_steps is not None:
        if force_steps < steps:
            raise BudgetError(f"forcing {force_steps} steps would leave the "
                              f"certified window (minimum {steps})")
        steps = force_steps
    beta0 = beta_c / steps
    beta0_abs = beta_abs / steps

    a1, a2 = recursion_constants(g, k, gtilde)
    c0 = tail_prefactor(g, k, gtilde)
    num_leaves = -(-spec.n // 2)
    q0 = 1 + (num_leaves - 1).bit_length() if num_leaves > 1 else 1
    merge_tol = beta0_abs * mpo_target / (
        5.0 * beta_abs * a2 * spec.n ** math.log2(2.0 * a1))
    order = truncation_order_for(merge_tol, g, k, gtilde)
    high_temp_error = a2 * merge_tol * q0 * a1 ** (q0 - 2) if q0 >= 2 else 0.0
    powered_error = 5.0 * steps * high_temp_error
    ham_component = math.exp(beta_abs * ham_tol) * beta_abs * ham_tol
    total_predicted = ham_component + powered_error * (1.0 + ham_component)

    d_h = hamiltonian_mpo(run_spec).max_bond
    merge_ledger = (order + 1) ** 2 * max(d_h, 1) ** order
    high_temp_ledger = run_spec.d ** 2 * merge_ledger ** max(0, q0 - 1)
    budget = ErrorBudget(
        epsilon=epsilon, beta=beta_c, beta_abs=beta_abs, steps=steps,
        beta0=beta0, merge_tol=merge_tol, order=order, num_layers=q0,
        ham_tol=ham_tol, mpo_target=mpo_target, extensivity=g,
        boundary_norm=gtilde, locality=k, tail_prefactor=c0, merge_gain=a1,
        merge_offset=a2, high_temp_error=high_temp_error,
        powered_error=powered_error, total_predicted=total_predicted,
        two_local_path=use_pairwise, real_time=real_time, ham_bond=d_h,
        merge_bond_ledger=merge_ledger,
        high_temp_bond_ledger=high_temp_ledger,
        final_bond_ledger=high_temp_ledger ** steps,
    )
    return budget, run_spec, series


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def leaf_gibbs_mpos(run_spec: HamiltonianSpec, beta0: complex,
                    plan: MergePlan) -> list[tuple[Interval, MPO]]:
    """Exact thermal MPOs of the leaf blocks (dense exponential per leaf).

    Leaf blocks have at most ``leaf_size`` sites, so the conversion is a
    trivial tensor-train refactorization with bond at most d^leaf_size; the
    leaf layer therefore carries no approximation error.
    """
    out = []
    for leaf in plan.layers[0]:
        local = restrict(run_spec, leaf)
        h = dense_matrix(local, cap=local.d ** local.n)
        out.append((leaf, mpo_ops.from_dense(dense_exp(h, -beta0),
                                             local.n, local.d)))
    return out


@dataclass
class LayerDiagnostics:
    """Measured per-layer state of the merging cascade."""

    errors: list[float] = field(default_factory=list)       # max rel S2 error
    bond_profiles: list[list[int]] = field(default_factory=list)
    discarded_weight: float = 0.0
    measured: bool = True


def _block_reference(run_spec, interval, beta0, dense_cap):
    local = restrict(run_spec, interval)
    return dense_exp(dense_matrix(local, cap=dense_cap), -beta0)


def _measure_layer(blocks, run_spec, beta0, dense_cap, as_dense):
    worst = 0.0
    for interval, payload in blocks:
        ref = _block_reference(run_spec, interval, beta0, dense_cap)
        got = payload if as_dense else payload.densify(cap=dense_cap)
        worst = max(worst, relative_error(ref, got, 2))
    return worst


def merge_layer(blocks: list[tuple[Interval, MPO]], run_spec: HamiltonianSpec,
                beta0: complex, order: int,
                policy: CompressionPolicy | None = None, *,
                dense_cap: int = DEFAULT_DENSE_CAP,
                max_bond: int = DEFAULT_MAX_BOND,
                force: bool = False) -> tuple[list[tuple[Interval, MPO]], float]:
    """Join adjacent block pairs with truncated merge operators (MPO engine).

    Returns the next layer and the cumulative discarded compression weight
    (0 for lossless policies).  An odd trailing block passes through.
    """
    nxt: list[tuple[Interval, MPO]] = []
    discarded = 0.0
    for i in range(0, len(blocks) - 1, 2):
        (iva, ma), (ivb, mb) = blocks[i], blocks[i + 1]
        ms = merge_spec_for(run_spec, iva, ivb, beta0, order)
        psi = build_merge_mpo(ms, policy=policy, dense_cap=dense_cap,
                              max_bond=max_bond, force=force)
        pair = mpo_ops.concat(ma, mb)
        if policy is not None and not policy.lossless:
            merged, w = mpo_ops.multiply_compressed(psi, pair, policy)
            discarded += w
        else:
            merged = mpo_ops.multiply(psi, pair, max_bond=max_bond)
        nxt.append((Interval(iva.lo, ivb.hi), merged))
    if len(blocks) % 2 == 1:
        nxt.append(blocks[-1])
    return nxt, discarded


def build_high_temp_mpo(run_spec: HamiltonianSpec, budget: ErrorBudget,
                        plan: MergePlan | None = None,
                        policy: CompressionPolicy | None = None, *,
                        engine: str = "auto",
                        dense_cap: int = DEFAULT_DENSE_CAP,
                        max_bond: int = DEFAULT_MAX_BOND,
                        force: bool = False,
                        measure: bool = True) -> tuple[MPO, LayerDiagnostics]:
    """Run leaves plus all merge layers; returns the merged-chain MPO.

    engine "dense" evaluates block operators densely and refactorizes them
    into exact MPOs (bonds equal true cut ranks); it requires the chain to
    fit the dense cap and a lossless policy, and is numerically identical
    to the uncompressed MPO arithmetic.  engine "mpo" runs the literal MPO
    pipeline (mandatory for truncating policies).  "auto" picks "dense"
    when admissible, else "mpo".
    """
    if plan is None:
        plan = build_merge_plan(run_spec.n)
    engine = _resolve_engine(engine, run_spec, policy, dense_cap)
    diag = LayerDiagnostics()
    beta0 = budget.beta0
    dense_ok = run_spec.d ** run_spec.n <= dense_cap

    if engine == "dense":
        blocks = [(leaf, _block_reference(run_spec, leaf, beta0, dense_cap))
                  for leaf in plan.layers[0]]
        _record_layer(diag, blocks, run_spec, beta0, dense_cap, measure, True)
        for _ in range(1, plan.num_layers):
            blocks = _merge_layer_dense(blocks, run_spec, beta0, budget.order,
                                        dense_cap, force)
            _record_layer(diag, blocks, run_spec, beta0, dense_cap, measure, True)
        interval, dense = blocks[0]
        return mpo_ops.from_dense(dense, run_spec.n, run_spec.d), diag

    blocks = leaf_gibbs_mpos(run_spec, beta0, plan)
    _record_layer(diag, blocks, run_spec, beta0, dense_cap,
                  measure and dense_ok, False)
    for _ in range(1, plan.num_layers):
        blocks, w = merge_layer(blocks, run_spec, beta0, budget.order, policy,
                                dense_cap=dense_cap, max_bond=max_bond,
                                force=force)
        diag.discarded_weight += w
        _record_layer(diag, blocks, run_spec, beta0, dense_cap,
                      measure and dense_ok, False)
    diag.measured = measure and dense_ok
    return blocks[0][1], diag


def _resolve_engine(engine: str, run_spec, policy, dense_cap) -> str:
    if engine not in ("auto", "dense", "mpo"):
        raise ValueError(f"unknown engine {engine!r}")
    lossless = policy is None or policy.lossless
    dense_ok = run_spec.d ** run_spec.n <= dense_cap
    if engine == "dense":
        if not dense_ok:
            raise DenseCapError(f"dense engine needs d^n <= {dense_cap}")
        if not lossless:
            raise ValueError("dense engine cannot apply a truncating policy")
        return "dense"
    if engine == "mpo":
        return "mpo"
    return "dense" if (dense_ok and lossless) else "mpo"


def _merge_layer_dense(blocks, run_spec, beta0, order, dense_cap, force):
    nxt = []
    for i in range(0, len(blocks) - 1, 2):
        (iva, da), (ivb, db) = blocks[i], blocks[i + 1]
        ms = merge_spec_for(run_spec, iva, ivb, beta0, order)
        if not ms.certified_regime() and not force:
            raise ValueError(f"|beta0|={abs(beta0):.3e} outside the certified "
                             "window; pass force=True to run anyway")
        psi = truncated_merge_dense(ms, cap=dense_cap)
        nxt.append((Interval(iva.lo, ivb.hi), psi @ np.kron(da, db)))
    if len(blocks) % 2 == 1:
        nxt.append(blocks[-1])
    return nxt


def _record_layer(diag, blocks, run_spec, beta0, dense_cap, measure, as_dense):
    if measure:
        diag.errors.append(_measure_layer(blocks, run_spec, beta0, dense_cap,
                                          as_dense))
    profiles = []
    for _, payload in blocks:
        if as_dense:
            interval_mpo = mpo_ops.from_dense(
                payload, int(round(math.log(payload.shape[0], run_spec.d))),
                run_spec.d)
            profiles.append(list(interval_mpo.bond_profile))
        else:
            profiles.append(list(payload.bond_profile))
    diag.bond_profiles.append([max(p) for p in profiles])


# ---------------------------------------------------------------------------
# top-level builds
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    """Predicted and measured errors plus bond accounting for one run."""

    budget: ErrorBudget
    engine: str
    policy: str
    measured: dict[str, float]
    per_layer_error: list[float]
    per_layer_max_bond: list[list[int]]
    bond_profile: list[int]
    discarded_weight: float
    certified: bool
    notes: list[str]
    timings: dict[str, float]
    model_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "format": 1,
            "model_digest": self.model_digest,
            "budget": self.budget.to_dict(),
            "engine": self.engine,
            "policy": self.policy,
            "measured": dict(sorted(self.measured.items())),
            "per_layer_error": self.per_layer_error,
            "per_layer_max_bond": self.per_layer_max_bond,
            "bond_profile": self.bond_profile,
            "discarded_weight": self.discarded_weight,
            "certified": self.certified,
            "notes": list(self.notes),
            "timings": dict(sorted(self.timings.items())),
        }


def build_gibbs_mpo(spec: HamiltonianSpec, beta: float, epsilon: float,
                    policy: CompressionPolicy | None = None, *,
                    real_time: bool = False,
                    engine: str = "auto",
                    two_local: str = "auto",
                    dense_cap: int = DEFAULT_DENSE_CAP,
                    max_bond: int = DEFAULT_MAX_BOND,
                    override_order: int | None = None,
                    override_steps: int | None = None,
                    pnorms: tuple = (1, 2, np.inf),
                    measure: bool = True) -> tuple[MPO, ErrorReport]:
    """Build the MPO approximation of exp(-beta*H) with its error report.

    With a lossless policy the result carries only the certified truncation
    error of the budget; measured relative Schatten errors against the
    dense oracle are included whenever the chain fits the dense cap (beyond
    it the report keeps predictions only).  Truncating policies run the
    compressed MPO engine; their predictions are heuristic and flagged.
    """
    t_start = time.perf_counter()
    policy = policy or CompressionPolicy()
    if beta == 0.0:  # trivial evolution: exp(0) is the identity
        return _trivial_identity_run(spec, epsilon, real_time, policy)
    budget, run_spec, _series = plan_budget(
        spec, beta, epsilon, real_time=real_time, two_local=two_local,
        dense_cap=dense_cap, force_steps=override_steps)
    notes: list[str] = []
    certified = True
    if override_order is not None:
        if not 0 <= override_order <= 60:
            raise ValueError(f"override order {override_order} out of range")
        if override_order < budget.order:
            certified = False
            notes.append(f"order forced to {override_order} below the "
                         f"certified requirement {budget.order}")
        budget = replace(budget, order=override_order)
    if real_time:
        certified = False
        notes.append("real-time run: thermal constants reused with |beta0|; "
                     "bounds are empirical here")
    if not policy.lossless:
        certified = False
        notes.append("truncating compression active: error predictions are "
                     "heuristic, not certified")

    engine = _resolve_engine(engine, run_spec, policy, dense_cap)
    force = override_order is not None
    plan = build_merge_plan(run_spec.n)
    t_merge = time.perf_counter()
    m_base, diag = build_high_temp_mpo(run_spec, budget, plan, policy,
                                       engine=engine, dense_cap=dense_cap,
                                       max_bond=max_bond, force=force,
                                       measure=measure)
    t_power = time.perf_counter()
    m_final, extra_discard = _power_step(m_base, budget.steps, policy, engine,
                                         run_spec, dense_cap, max_bond)
    diag.discarded_weight += extra_discard
    t_measure = time.perf_counter()

    measured: dict[str, float] = {}
    dense_ok = spec.d ** spec.n <= dense_cap
    if measure and dense_ok:
        reference = dense_exp(dense_matrix(spec, cap=dense_cap), -budget.beta)
        approx = m_final.densify(cap=dense_cap)
        for p in pnorms:
            measured[_pkey(p)] = relative_error(reference, approx, p)
        if not real_time:  # tr exp(-iHt) can vanish; only thermal traces compared
            ref_trace = complex(np.trace(reference))
            measured["trace"] = abs(complex(m_final.trace()) - ref_trace) / abs(ref_trace)
    elif measure:
        notes.append("oracle cap exceeded: measurements skipped, "
                     "predictions kept")

    report = ErrorReport(
        budget=budget,
        model_digest=spec_digest(spec),
        engine=engine,
        policy=policy.describe(),
        measured=measured,
        per_layer_error=list(diag.errors),
        per_layer_max_bond=list(diag.bond_profiles),
        bond_profile=list(m_final.bond_profile),
        discarded_weight=diag.discarded_weight,
        certified=certified,
        notes=notes,
        timings={
            "plan_s": t_merge - t_start,
            "merge_s": t_power - t_merge,
            "power_s": t_measure - t_power,
            "measure_s": time.perf_counter() - t_measure,
            "total_s": time.perf_counter() - t_start,
        },
    )
    return m_final, report


def _pkey(p) -> str:
    return "pinf" if p == np.inf else f"p{p:g}"


def _trivial_identity_run(spec, epsilon, real_time, policy):
    budget = ErrorBudget(
        epsilon=epsilon, beta=0j, beta_abs=0.0, steps=1, beta0=0j,
        merge_tol=0.0, order=0, num_layers=1, ham_tol=0.0,
        mpo_target=epsilon, extensivity=extensivity_constant(spec),
        boundary_norm=boundary_bound(spec), locality=spec.k,
        tail_prefactor=1.0, merge_gain=1.0, merge_offset=1.0,
        high_temp_error=0.0, powered_error=0.0, total_predicted=0.0,
        two_local_path=False, real_time=real_time, ham_bond=1,
        merge_bond_ledger=1, high_temp_bond_ledger=1, final_bond_ledger=1)
    ident = mpo_ops.identity_mpo(spec.n, spec.d)
    report = ErrorReport(
        budget=budget, model_digest=spec_digest(spec), engine="dense",
        policy=policy.describe(),
        measured={"p1": 0.0, "p2": 0.0, "pinf": 0.0, "trace": 0.0},
        per_layer_error=[0.0], per_layer_max_bond=[[1]],
        bond_profile=list(ident.bond_profile), discarded_weight=0.0,
        certified=True, notes=["zero evolution parameter: exact identity"],
        timings={"total_s": 0.0})
    return ident, report


def _power_step(m_base: MPO, steps: int, policy: CompressionPolicy,
                engine: str, run_spec, dense_cap, max_bond):
    """Left-folded Q-th power of the merged-chain MPO."""
    if steps == 1:
        return m_base, 0.0
    if engine == "dense":
        dense = m_base.densify(cap=dense_cap)
        powered = np.linalg.matrix_power(dense, steps)
        return mpo_ops.from_dense(powered, run_spec.n, run_spec.d), 0.0
    if policy.lossless:
        return mpo_ops.power(m_base, steps, max_bond=max_bond), 0.0
    out = m_base
    discarded = 0.0
    for _ in range(steps - 1):
        out, w = mpo_ops.multiply_compressed(out, m_base, policy)
        discarded += w
    return out, discarded


def build_real_time_mpo(spec: HamiltonianSpec, t: float, epsilon: float,
                        policy: CompressionPolicy | None = None,
                        **kwargs) -> tuple[MPO, ErrorReport]:
    """MPO approximation of the real-time propagator exp(-i*H*t).

    Identical pipeline with an imaginary step; the reported operator-norm
    error is absolute (the reference is unitary, so relative equals
    absolute for p = inf).
    """
    return build_gibbs_mpo(spec, t, epsilon, policy, real_time=True, **kwargs)
