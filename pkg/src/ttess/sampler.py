"""Metropolis-Hastings-Green sampler over T-tessellations, with numerical verifiers.

The chain mixes three update types. At each iteration a type is drawn with
probabilities ``(p_split, p_merge, p_flip)`` (the remaining mass is a no-op),
an update of that type is drawn uniformly, applied, and undone unless
accepted with probability ``min(1, r)``.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats as sps

from . import operators as ops
from .geom import Polygon
from .lines import LinePattern, _Arrangement, _build, enumerate_keys, flip_graph, state_key
from .models import CrttModel, EnergyModel
from .tessellation import TTessellation

log = logging.getLogger(__name__)

KINDS = ("split", "merge", "flip")


@dataclass(frozen=True)
class ProposalConfig:
    p_split: float = 1.0 / 3.0
    p_merge: float = 1.0 / 3.0
    p_flip: float = 1.0 / 3.0

    def __post_init__(self):
        ps = (self.p_split, self.p_merge, self.p_flip)
        if any(not (p >= 0 and math.isfinite(p)) for p in ps):
            raise ValueError(f"proposal probabilities must be finite and non-negative, got {ps}")
        if sum(ps) > 1 + 1e-12:
            raise ValueError(f"proposal probabilities sum to {sum(ps)} > 1")


@dataclass
class ChainState:
    tessellation: TTessellation
    model: EnergyModel
    proposals: ProposalConfig
    rng: np.random.Generator
    iteration: int = 0
    proposed: dict = field(default_factory=lambda: dict.fromkeys(KINDS, 0))
    accepted: dict = field(default_factory=lambda: dict.fromkeys(KINDS, 0))
    energy: float = float("nan")
    trace: deque = field(default_factory=lambda: deque(maxlen=100_000))

    def __post_init__(self):
        if math.isnan(self.energy):
            self.energy = self.model.energy(self.tessellation)

    @classmethod
    def new(
        cls,
        domain,
        model: EnergyModel,
        proposals: Optional[ProposalConfig] = None,
        seed=None,
        trace_capacity: int = 100_000,
    ) -> "ChainState":
        """Chain started from the empty tessellation of ``domain``."""
        t = TTessellation.new_empty(domain)
        st = cls(t, model, proposals or ProposalConfig(), np.random.default_rng(seed))
        st.trace = deque(maxlen=trace_capacity)
        return st

    def acceptance_rate(self, kind: str) -> float:
        n = self.proposed[kind]
        return self.accepted[kind] / n if n else 0.0


# ----------------------------------------------------------------------
# Hastings ratios


def log_hastings_ratio(
    model: EnergyModel, proposals: ProposalConfig, domain: Polygon, receipt: ops.UpdateReceipt
) -> float:
    """Log of the acceptance ratio of the update recorded in ``receipt`` (uniform proposals).

    Returns ``-inf`` for a proposal whose reverse move is impossible.
    """
    b = receipt.before
    lh = model.log_h_ratio(None, receipt.update, receipt)
    u = receipt.update
    if isinstance(u, ops.Split):
        if proposals.p_merge == 0:
            return -math.inf
        den = math.pi * (b.nnbseint + 1 - receipt.xi)
        return (
            lh
            + math.log(proposals.p_merge / proposals.p_split)
            + math.log(2.0 * b.total_edge_length - domain.perimeter)
            - math.log(den)
        )
    if isinstance(u, ops.Merge):
        if proposals.p_split == 0:
            return -math.inf
        den = 2.0 * (b.total_edge_length - receipt.removed_length) - domain.perimeter
        return (
            lh
            + math.log(proposals.p_split / proposals.p_merge)
            + math.log(math.pi * b.nnbseint)
            - math.log(den)
        )
    if isinstance(u, ops.Flip):
        nb_after = b.nbseint + receipt.delta.nbseint
        if nb_after <= 0:
            return -math.inf
        return lh + math.log(b.nbseint) - math.log(nb_after)
    raise TypeError(f"not an update: {u!r}")


def hastings_ratio(state: ChainState, receipt: ops.UpdateReceipt) -> float:
    lr = log_hastings_ratio(state.model, state.proposals, state.tessellation.domain, receipt)
    return math.exp(min(lr, 700.0))


# ----------------------------------------------------------------------
# the chain


def step(state: ChainState) -> bool:
    """One iteration. Returns True iff an update was accepted."""
    t = state.tessellation
    rng = state.rng
    pr = state.proposals
    state.iteration += 1
    x = rng.random()
    try:
        if x < pr.p_split:
            kind = "split"
            state.proposed[kind] += 1
            upd = ops.sample_uniform_split(t, rng)
        elif x < pr.p_split + pr.p_merge:
            kind = "merge"
            state.proposed[kind] += 1
            if not len(t.nonblocking):
                return False
            upd = ops.sample_uniform_merge(t, rng)
        elif x < pr.p_split + pr.p_merge + pr.p_flip:
            kind = "flip"
            state.proposed[kind] += 1
            if not len(t.blocking):
                return False
            upd = ops.sample_uniform_flip(t, rng)
        else:
            return False
        rec = ops.apply(t, upd)
    except ops.InapplicableUpdate:
        # degenerate proposal (probability zero): counted as rejected
        return False
    lr = log_hastings_ratio(state.model, pr, t.domain, rec)
    if lr >= 0.0 or rng.random() < math.exp(lr):
        state.accepted[kind] += 1
        state.energy += state.model.energy_from_stats(rec.delta)
        return True
    ops.apply(t, rec.inverse)
    return False


Callback = Callable[[ChainState], None]


def run(
    state: ChainState,
    n_iterations: int,
    callbacks: Iterable[tuple] = (),
    validate_every: Optional[int] = None,
    record_trace: bool = True,
) -> ChainState:
    """Run ``n_iterations`` steps.

    ``callbacks`` holds ``(period, fn)`` pairs; ``fn(state)`` is called after
    every iteration whose number is a multiple of ``period``. With
    ``validate_every`` set, the tessellation is fully validated at that period
    and a RuntimeError is raised on the first violation.
    """
    if n_iterations < 0:
        raise ValueError("n_iterations must be non-negative")
    cbs = list(callbacks)
    for _ in range(n_iterations):
        step(state)
        if record_trace:
            state.trace.append(state.energy)
        it = state.iteration
        if validate_every and it % validate_every == 0:
            bad = state.tessellation.validate()
            if bad:
                raise RuntimeError(f"invalid state at iteration {it}: {bad[:5]}")
        for period, fn in cbs:
            if it % period == 0:
                fn(state)
    return state


def samples(state: ChainState, n_states: int, period: int, burn_in: int = 0):
    """Yield the tessellation after burn-in and then every ``period`` iterations."""
    run(state, burn_in, record_trace=False)
    for _ in range(n_states):
        run(state, period, record_trace=False)
        yield state.tessellation


def default_burn_in(model: EnergyModel, domain: Polygon) -> int:
    """Burn-in length: 1000 iterations, or more for a large scale parameter or domain."""
    tau = getattr(model, "tau", 1.0)
    return max(1000, int(100 * tau * domain.perimeter / math.pi))


@dataclass(frozen=True)
class ConvergenceReport:
    h_strictly_positive: bool
    irreducible: Optional[bool]  # None when h is not known to be positive
    aperiodic: bool
    verdict: str  # "convergent", "not established" or "unknown"

    @property
    def convergent(self) -> bool:
        return self.verdict == "convergent"


def check_convergence_conditions(model: EnergyModel, proposals: ProposalConfig) -> ConvergenceReport:
    """Sufficient conditions for convergence in total variation, for uniform proposals.

    Irreducibility needs a positive density and positive split, merge and flip
    probabilities; aperiodicity needs a positive merge or flip probability.
    """
    pos = bool(model.strictly_positive)
    aper = proposals.p_merge > 0 or proposals.p_flip > 0
    props_ok = proposals.p_split > 0 and proposals.p_merge > 0 and proposals.p_flip > 0
    if not pos:
        return ConvergenceReport(False, None, aper, "unknown")
    irr = props_ok
    return ConvergenceReport(True, irr, aper, "convergent" if irr and aper else "not established")


# ----------------------------------------------------------------------
# GNZ verifiers


def batch_means_se(x: Sequence[float], n_batches: Optional[int] = None) -> float:
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return float("nan") if n < 2 else float(np.std(x, ddof=1) / math.sqrt(n))
    b = n_batches or max(2, int(math.sqrt(n)))
    size = n // b
    means = x[: b * size].reshape(b, size).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(b))


@dataclass(frozen=True)
class GnzReport:
    lhs_estimate: float
    rhs_estimate: float
    lhs_se: float
    rhs_se: float
    n_states: int
    test_functional: str
    diff_se: float = float("nan")  # batch-means SE of the per-state difference

    @property
    def combined_se(self) -> float:
        return math.hypot(self.lhs_se, self.rhs_se)

    @property
    def z(self) -> float:
        d = self.lhs_estimate - self.rhs_estimate
        if d == 0:
            return 0.0
        return d / self.combined_se if self.combined_se > 0 else math.inf

    def agrees(self, k: float = 3.0) -> bool:
        return abs(self.lhs_estimate - self.rhs_estimate) <= k * self.combined_se

    def summary(self) -> str:
        return (
            f"{self.test_functional}: lhs={self.lhs_estimate:.6g} (se {self.lhs_se:.3g}) "
            f"rhs={self.rhs_estimate:.6g} (se {self.rhs_se:.3g}) z={self.z:+.2f} n={self.n_states}"
        )


SplitFunctional = Union[float, Callable[[ops.Split, TTessellation], float]]
FlipFunctional = Union[float, Callable[[ops.Flip, TTessellation], float]]


def _report(lhs, rhs, n, name) -> GnzReport:
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    return GnzReport(
        float(lhs.mean()),
        float(rhs.mean()),
        batch_means_se(lhs),
        batch_means_se(rhs),
        n,
        name,
        batch_means_se(lhs - rhs),
    )


def _chain(model, domain, proposals, rng) -> ChainState:
    if not model.is_hereditary():
        raise ValueError(f"{model!r} is not hereditary; the GNZ identities need h > 0")
    return ChainState(TTessellation.new_empty(domain), model, proposals or ProposalConfig(), rng)


def verify_gnz_split(
    model: EnergyModel,
    phi: SplitFunctional,
    n_states: int,
    subsample_period: int,
    rng: np.random.Generator,
    domain: Optional[Polygon] = None,
    burn_in: Optional[int] = None,
    j: int = 10,
    proposals: Optional[ProposalConfig] = None,
    name: str = "phi",
) -> GnzReport:
    """Compare both sides of the split GNZ identity along one chain.

    LHS per state: sum over merges m of ``phi(m^-1, T without m)``. RHS per
    state: total split mass times the mean of ``phi * h-ratio`` over ``j``
    uniform splits. ``phi`` may be a constant.
    """
    domain = domain or Polygon.square()
    st = _chain(model, domain, proposals, rng)
    const = None if callable(phi) else float(phi)
    burn = default_burn_in(model, domain) if burn_in is None else burn_in
    lhs, rhs = [], []
    for t in samples(st, n_states, subsample_period, burn):
        if const == 0.0:
            lhs.append(0.0)
            rhs.append(0.0)
            continue
        if const is not None:
            lhs.append(const * len(t.nonblocking))
        else:
            acc = 0.0
            for m in ops.enumerate_merges(t):
                rec = ops.apply(t, m)
                acc += phi(rec.inverse, t)
                ops.apply(t, rec.inverse)
            lhs.append(acc)
        mass = ops.split_total_mass(t)
        acc = 0.0
        for _ in range(j):
            s = ops.sample_uniform_split(t, rng)
            val = const if const is not None else phi(s, t)
            rec = ops.apply(t, s)
            acc += val * math.exp(model.log_h_ratio(t, s, rec))
            ops.apply(t, rec.inverse)
        rhs.append(mass * acc / j)
    return _report(lhs, rhs, n_states, name)


def added_edge_length(f: ops.Flip, t: TTessellation) -> float:
    """Length of the edge a flip would add (0 for a degenerate flip)."""
    try:
        return ops.preview_flip(t, f).added_length
    except ops.InapplicableUpdate:
        return 0.0


def verify_gnz_flip(
    model: EnergyModel,
    phi: FlipFunctional,
    n_states: int,
    subsample_period: int,
    rng: np.random.Generator,
    domain: Optional[Polygon] = None,
    burn_in: Optional[int] = None,
    proposals: Optional[ProposalConfig] = None,
    name: str = "phi",
) -> GnzReport:
    """Compare both sides of the flip GNZ identity along one chain.

    LHS per state: sum over flips F of ``phi(F^-1, FT)``; RHS: sum over flips
    of ``phi(F, T) * h(FT)/h(T)``.
    """
    domain = domain or Polygon.square()
    st = _chain(model, domain, proposals, rng)
    const = None if callable(phi) else float(phi)
    burn = default_burn_in(model, domain) if burn_in is None else burn_in
    lhs, rhs = [], []
    for t in samples(st, n_states, subsample_period, burn):
        a = b = 0.0
        if const != 0.0:
            for f in ops.enumerate_flips(t):
                before = const if const is not None else phi(f, t)
                try:
                    rec = ops.apply(t, f)
                except ops.InapplicableUpdate:
                    continue
                after = const if const is not None else phi(rec.inverse, t)
                b += before * math.exp(model.log_h_ratio(t, f, rec))
                a += after
                ops.apply(t, rec.inverse)
        lhs.append(a)
        rhs.append(b)
    return _report(lhs, rhs, n_states, name)


# ----------------------------------------------------------------------
# conditional uniformity of the CRTT given its lines


@dataclass(frozen=True)
class UniformityReport:
    counts: dict
    chi2: float
    p_value: float
    n_states: int
    n_classes: int


def conditional_uniformity_test(
    pattern: LinePattern,
    n_states: int,
    rng: np.random.Generator,
    subsample_period: int = 8,
    p_flip: float = 0.5,
) -> UniformityReport:
    """Chi-square test that a flip-only chain is uniform on the tessellations of ``pattern``.

    The chain proposes a uniform flip with probability ``p_flip`` and stays
    put otherwise; the lazy step breaks the bipartite structure of flip graphs.
    Every ``subsample_period`` iterations the state is classified against the
    enumeration of ``pattern``.
    """
    keys = enumerate_keys(pattern)
    graph = flip_graph(pattern)
    seen = {keys[0]}
    todo = [keys[0]]
    while todo:
        for nb in graph[todo.pop()]:
            if nb not in seen:
                seen.add(nb)
                todo.append(nb)
    if len(seen) != len(keys):
        raise ValueError("flip graph of the pattern is disconnected; uniformity is not testable")
    counts = dict.fromkeys(keys, 0)
    if len(keys) == 1:
        counts[keys[0]] = n_states
        return UniformityReport(counts, 0.0, 1.0, n_states, 1)
    arr = _Arrangement(pattern)
    st = ChainState(
        _build(pattern, arr, keys[0]),
        CrttModel(1.0),
        ProposalConfig(0.0, 0.0, p_flip),
        rng,
    )
    for _ in range(n_states):
        run(st, subsample_period, record_trace=False)
        counts[state_key(pattern, st.tessellation, arr)] += 1
    obs = np.array([counts[k] for k in keys], dtype=float)
    res = sps.chisquare(obs)
    return UniformityReport(counts, float(res.statistic), float(res.pvalue), n_states, len(keys))
