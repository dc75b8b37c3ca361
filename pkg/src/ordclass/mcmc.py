"""MCMC over compositions.

Two schemes target the ordered classification model:

``m1``
    Split/merge Metropolis-Hastings on the number of groups, followed by one
    shuffle of an adjacent pair of groups per iteration.
``m2``
    The chained-proposal variant. Each iteration refreshes auxiliary
    compositions with one more and one fewer group, then proposes a
    move of k to k+1 or k-1 while the auxiliary compositions stay fixed.
    The lower chain is built by drawing the two-group composition from its
    exact conditional and splitting upwards.

At k = 1 and k = n only one direction is possible. That move is proposed
with probability 1, and the Hastings ratio uses the actual selection
probabilities.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError
from .model import Composition, Hyperparams, OrderedDataset, log_segment, log_unnorm_prob

__all__ = [
    "McmcConfig",
    "ChainState",
    "McmcSummary",
    "Target",
    "n_splittable",
    "propose_split",
    "propose_merge",
    "accept_split",
    "accept_merge",
    "shuffle_move",
    "split_kernel_prob",
    "step_m1",
    "step_m2",
    "run_chain",
    "run_chains",
]

SCHEMES = ("m1", "m2")


@dataclass(frozen=True)
class McmcConfig:
    scheme: str = "m1"
    iterations: int = 10_000
    burn_in: int = 1_000
    seed: int = 1
    q: float = 0.5
    shuffle: bool = True
    init: Composition | None = None
    debug: bool = False
    check_every: int = 1_000

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.iterations < 1:
            raise ValueError("no samples collected: iterations must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


class Target:
    """Log-probability of compositions of one dataset, memoized per group."""

    def __init__(self, ds: OrderedDataset, h: Hyperparams):
        self.ds = ds
        self.h = h
        self.n = ds.n
        self._cache: dict[tuple[int, int], float] = {}
        self._two_part: np.ndarray | None = None
        self._two_part_cdf: np.ndarray | None = None

    def segment(self, start: int, stop: int) -> float:
        key = (start, stop)
        val = self._cache.get(key)
        if val is None:
            val = self._cache[key] = log_segment(self.ds, start, stop, self.h)
        return val

    def __call__(self, comp: Composition) -> float:
        total = 0.0
        start = 0
        for p in comp.parts:
            total += self.segment(start, start + p)
            start += p
        return total

    @property
    def two_part_log_probs(self) -> np.ndarray:
        """Normalized log-probs of (i, n-i), i = 1..n-1, given k = 2."""
        if self._two_part is None:
            lp = np.array([self.segment(0, i) + self.segment(i, self.n) for i in range(1, self.n)])
            m = lp.max()
            self._two_part = lp - (m + math.log(np.exp(lp - m).sum()))
            self._two_part_cdf = np.cumsum(np.exp(self._two_part))
        return self._two_part

    def draw_two_part(self, rng: np.random.Generator) -> tuple[Composition, float]:
        """Draw (i, n-i) from its exact conditional given k = 2."""
        logp = self.two_part_log_probs
        u = rng.random() * self._two_part_cdf[-1]
        i = min(int(np.searchsorted(self._two_part_cdf, u, side="right")), len(logp) - 1)
        return Composition((i + 1, self.n - i - 1)), float(logp[i])


@dataclass
class ChainState:
    comp: Composition
    log_prob: float
    rng: np.random.Generator


def n_splittable(comp: Composition) -> int:
    return sum(1 for p in comp.parts if p > 1)


def _split_select_prob(k: int, n: int, q: float) -> float:
    if k == 1:
        return 1.0
    if k == n:
        return 0.0
    return q


def propose_split(state: ChainState, rng: np.random.Generator) -> tuple[Composition, float]:
    """Split a uniformly chosen group of size > 1 at a uniform interior point.

    Returns the proposal and log(1 / (n_g * (n_s - 1))).
    """
    parts = state.comp.parts
    splittable = [j for j, p in enumerate(parts) if p > 1]
    if not splittable:
        raise ValueError("no splittable group")
    j = splittable[int(rng.integers(len(splittable)))]
    size = parts[j]
    left = 1 + int(rng.integers(size - 1))
    new = Composition(parts[:j] + (left, size - left) + parts[j + 1 :])
    return new, -math.log(len(splittable) * (size - 1))


def propose_merge(state: ChainState, rng: np.random.Generator) -> tuple[Composition, float]:
    """Merge a uniformly chosen adjacent pair; returns the proposal and log(1/(k-1))."""
    parts = state.comp.parts
    k = len(parts)
    if k < 2:
        raise ValueError("nothing to merge")
    j = int(rng.integers(k - 1))
    new = Composition(parts[:j] + (parts[j] + parts[j + 1],) + parts[j + 2 :])
    return new, -math.log(k - 1)


def split_kernel_prob(frm: Composition, to: Composition) -> float:
    """Probability that one split move takes ``frm`` to ``to``.

    Sums over every group of ``frm`` whose split yields ``to``. Each pair
    is reachable in at most one way, but the sum does not rely on that.
    """
    if to.k != frm.k + 1 or to.n != frm.n:
        raise ValueError("not a one-step split")
    n_g = n_splittable(frm)
    if n_g == 0:
        return 0.0
    a, b = frm.parts, to.parts
    total = 0.0
    for j in range(len(a)):
        if a[:j] == b[:j] and a[j + 1 :] == b[j + 2 :] and b[j] + b[j + 1] == a[j]:
            total += 1.0 / (n_g * (a[j] - 1))
    return total


def _log_accept(log_ratio: float) -> float:
    return 0.0 if log_ratio >= 0.0 else log_ratio


def accept_split(
    target: Target, state: ChainState, proposal: tuple[Composition, float], q: float = 0.5
) -> float:
    """Acceptance probability of a split proposal from ``propose_split``."""
    new, log_fwd = proposal
    k = state.comp.k
    n = target.n
    log_ratio = (
        target(new)
        - state.log_prob
        + math.log(1.0 - _split_select_prob(k + 1, n, q))
        - math.log(_split_select_prob(k, n, q))
        - math.log(k)  # reverse: one of the k adjacent pairs of the new state
        - log_fwd
    )
    return math.exp(_log_accept(log_ratio))


def accept_merge(
    target: Target, state: ChainState, proposal: tuple[Composition, float], q: float = 0.5
) -> float:
    """Acceptance probability of a merge proposal from ``propose_merge``."""
    new, log_fwd = proposal
    k = state.comp.k
    n = target.n
    # the merged group has size >= 2, so the reverse split is always possible
    log_rev = math.log(split_kernel_prob(new, state.comp))
    log_ratio = (
        target(new)
        - state.log_prob
        + math.log(_split_select_prob(k - 1, n, q))
        - math.log(1.0 - _split_select_prob(k, n, q))
        + log_rev
        - log_fwd
    )
    return math.exp(_log_accept(log_ratio))


def shuffle_move(target: Target, state: ChainState, rng: np.random.Generator) -> tuple[Composition, float]:
    """Pool a uniformly chosen adjacent pair and re-split it uniformly.

    The pair total is unchanged, so the proposal is symmetric and the
    acceptance probability is min(1, p(new) / p(old)). Returns the current
    composition with probability 1 when k = 1.
    """
    parts = state.comp.parts
    k = len(parts)
    if k < 2:
        return state.comp, 1.0
    j = int(rng.integers(k - 1))
    total = parts[j] + parts[j + 1]
    left = 1 + int(rng.integers(total - 1))
    new = Composition(parts[:j] + (left, total - left) + parts[j + 2 :])
    if new == state.comp:
        return new, 1.0
    return new, math.exp(_log_accept(target(new) - state.log_prob))


class _Tally:
    def __init__(self):
        self.proposed: Counter[str] = Counter()
        self.accepted: Counter[str] = Counter()

    def record(self, kind: str, accepted: bool):
        self.proposed[kind] += 1
        if accepted:
            self.accepted[kind] += 1

    def rates(self) -> dict[str, float]:
        return {k: self.accepted[k] / self.proposed[k] for k in sorted(self.proposed)}


def _maybe_move(state: ChainState, new: Composition, alpha: float, target: Target) -> bool:
    if alpha >= 1.0 or state.rng.random() < alpha:
        state.comp = new
        state.log_prob = target(new)
        return True
    return False


def step_m1(target: Target, state: ChainState, config: McmcConfig, tally: _Tally | None = None) -> ChainState:
    """One split-or-merge attempt followed by one shuffle attempt."""
    rng = state.rng
    k = state.comp.k
    if target.n > 1:
        if rng.random() < _split_select_prob(k, target.n, config.q):
            prop = propose_split(state, rng)
            moved = _maybe_move(state, prop[0], accept_split(target, state, prop, config.q), target)
            kind = "split"
        else:
            prop = propose_merge(state, rng)
            moved = _maybe_move(state, prop[0], accept_merge(target, state, prop, config.q), target)
            kind = "merge"
        if tally is not None:
            tally.record(kind, moved)
    if config.shuffle and state.comp.k >= 2:
        new, alpha = shuffle_move(target, state, rng)
        moved = _maybe_move(state, new, alpha, target)
        if tally is not None:
            tally.record("shuffle", moved)
    return state


def _draw_lower_chain(target: Target, k: int, rng: np.random.Generator) -> tuple[Composition, float]:
    """Draw n^(k-1) from the lower auxiliary chain, for k >= 3.

    Returns n^(k-1) and the log density of its last link: the exact
    two-group conditional when k = 3, otherwise the split kernel from n^(k-2).
    """
    comp, log_last = target.draw_two_part(rng)
    for _ in range(3, k):
        tmp = ChainState(comp, 0.0, rng)
        comp, log_last = propose_split(tmp, rng)
    return comp, log_last


def _log_two_part(target: Target, comp: Composition) -> float:
    return float(target.two_part_log_probs[comp.parts[0] - 1])


def step_m2(target: Target, state: ChainState, config: McmcConfig, tally: _Tally | None = None) -> ChainState:
    """One chained-proposal move of k to k+1 or k-1."""
    rng = state.rng
    n = target.n
    if n == 1:
        return state
    cur = state.comp
    k = cur.k
    lower, log_lower = (_draw_lower_chain(target, k, rng) if k >= 3 else (None, 0.0))

    p_up = _split_select_prob(k, n, config.q)
    if rng.random() < p_up:
        new, log_fwd = propose_split(state, rng)
        # density of n^(k) under the lower chain of the (k+1)-state
        if k == 1:
            log_link = 0.0
        elif k == 2:
            log_link = _log_two_part(target, cur)
        else:
            s = split_kernel_prob(lower, cur)
            log_link = math.log(s) if s > 0 else -math.inf
        log_ratio = (
            target(new)
            - state.log_prob
            + log_link
            - log_fwd
            + math.log(1.0 - _split_select_prob(k + 1, n, config.q))
            - math.log(p_up)
        )
        kind = "up"
    else:
        if k == 2:
            new, log_new_link = Composition((n,)), 0.0
        else:
            new, log_new_link = lower, log_lower
        s = split_kernel_prob(new, cur)
        log_fwd_split = math.log(s) if s > 0 else -math.inf
        log_ratio = (
            target(new)
            - state.log_prob
            + log_fwd_split
            - log_new_link
            + math.log(_split_select_prob(k - 1, n, config.q))
            - math.log(1.0 - p_up)
        )
        kind = "down"
    if log_ratio == -math.inf:
        moved = False
    else:
        moved = _maybe_move(state, new, math.exp(_log_accept(log_ratio)), target)
    if tally is not None:
        tally.record(kind, moved)
    return state


@dataclass
class McmcSummary:
    k_estimates: np.ndarray
    comp_frequencies: dict[Composition, float]
    acceptance: dict[str, float]
    map_estimate: tuple[Composition, float]
    config: McmcConfig
    samples: int
    final_state: Composition
    k_trace: np.ndarray = field(repr=False, default=None)

    def k_table(self) -> dict[int, float]:
        return {k + 1: float(p) for k, p in enumerate(self.k_estimates)}


def _debug_enabled(config: McmcConfig) -> bool:
    return config.debug or os.environ.get("CLASSIFY_DEBUG", "") not in ("", "0")


def run_chain(
    ds: OrderedDataset, h: Hyperparams, config: McmcConfig, seed: int | np.random.SeedSequence | None = None
) -> McmcSummary:
    """Burn in, then sample and tabulate post burn-in visit frequencies.

    The generator is PCG64 seeded from ``SeedSequence(config.seed)`` unless an
    explicit seed sequence is passed (see :func:`run_chains`).
    """
    target = Target(ds, h)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed) if seed is None else seed)
    init = config.init if config.init is not None else Composition((ds.n,))
    if init.n != ds.n:
        raise ValueError("composition/dataset length mismatch")
    state = ChainState(init, target(init), rng)
    step = step_m1 if config.scheme == "m1" else step_m2
    debug = _debug_enabled(config)

    tally = _Tally()
    counts: Counter[tuple[int, ...]] = Counter()
    k_trace = np.empty(config.iterations, dtype=np.int32)
    for it in range(config.burn_in + config.iterations):
        step(target, state, config, tally if it >= config.burn_in else None)
        if it >= config.burn_in:
            counts[state.comp.parts] += 1
            k_trace[it - config.burn_in] = state.comp.k
        if debug and (it + 1) % config.check_every == 0:
            fresh = log_unnorm_prob(state.comp, ds, h)
            if not math.isclose(fresh, state.log_prob, rel_tol=1e-12, abs_tol=1e-9):
                raise InvariantError(
                    f"cached log-probability {state.log_prob} != recomputed {fresh} at iteration {it + 1}"
                )

    total = config.iterations
    k_est = np.bincount(k_trace - 1, minlength=ds.n) / total
    freqs = {
        Composition(parts): c / total
        for parts, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    }
    map_comp = next(iter(freqs))
    return McmcSummary(
        k_estimates=k_est,
        comp_frequencies=freqs,
        acceptance=tally.rates(),
        map_estimate=(map_comp, freqs[map_comp]),
        config=config,
        samples=total,
        final_state=state.comp,
        k_trace=k_trace,
    )


def run_chains(
    ds: OrderedDataset, h: Hyperparams, config: McmcConfig, n_chains: int, workers: int = 1
) -> list[McmcSummary]:
    """Independent chains on spawned child streams of ``SeedSequence(config.seed)``.

    Chain i always uses child stream i, so results do not depend on
    ``workers``. Summaries are returned separately, never pooled.
    """
    children = np.random.SeedSequence(config.seed).spawn(n_chains)
    if workers <= 1:
        return [run_chain(ds, h, config, seed=c) for c in children]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_chain, ds, h, config, c) for c in children]
        return [f.result() for f in futures]
