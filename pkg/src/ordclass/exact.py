"""Exact posteriors by complete enumeration.

Two supports are covered: integer compositions for the ordered model, and
set partitions for the unconstrained Dirichlet process mixture. A forward
recursion over segment end points is also provided; it gives the exact
k-marginal and the most probable composition without enumerating, so it
still works when ``2**(n-1)`` is out of reach.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import logsumexp

from .errors import InfeasibleError
from .model import (
    Composition,
    Hyperparams,
    OrderedDataset,
    _log_marginal,
    log_segment,
    shrunk_ss,
)

__all__ = [
    "InfeasibleError",
    "COMPOSITION_CAP",
    "PARTITION_CAP",
    "ExactPosterior",
    "SetPartition",
    "MdpPosterior",
    "SegmentPosterior",
    "enumerate_compositions",
    "composition_from_mask",
    "segment_table",
    "exact_posterior",
    "top_n",
    "enumerate_set_partitions",
    "log_mdp_partition_mass",
    "mdp_exact_posterior",
    "segment_posterior",
    "BELL_NUMBERS",
]

COMPOSITION_CAP = 25
PARTITION_CAP = 12

BELL_NUMBERS = (1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597)


# -- compositions -----------------------------------------------------------
#
# Compositions of n are indexed by an (n-1)-bit mask over the gaps between
# consecutive sorted points.  The mask is read as a binary string with its
# most significant bit on the first gap: bit (n-1-g) set means a new group
# starts after point g (g = 1..n-1).  Mask 0 is the single group (n) and
# mask 2**(n-1)-1 is all singletons.


def composition_from_mask(n: int, mask: int) -> Composition:
    parts = []
    run = 1
    for g in range(1, n):
        if mask >> (n - 1 - g) & 1:
            parts.append(run)
            run = 1
        else:
            run += 1
    parts.append(run)
    return Composition(tuple(parts))


def mask_from_composition(comp: Composition) -> int:
    n = comp.n
    mask = 0
    for g in comp.cuts():
        mask |= 1 << (n - 1 - g)
    return mask


def enumerate_compositions(n: int, cap: int = COMPOSITION_CAP) -> Iterator[Composition]:
    """Yield every composition of ``n`` once, in mask order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > cap:
        raise InfeasibleError(f"exact enumeration infeasible for n={n} (cap {cap}); use MCMC")
    for mask in range(1 << (n - 1)):
        yield composition_from_mask(n, mask)


def segment_table(ds: OrderedDataset, h: Hyperparams) -> np.ndarray:
    """``F[s, e]`` = log contribution of the group ``values[s:e]``; -inf where e <= s."""
    n = ds.n
    table = np.full((n + 1, n + 1), -np.inf)
    for s in range(n):
        for e in range(s + 1, n + 1):
            table[s, e] = log_segment(ds, s, e, h)
    return table


@dataclass(frozen=True)
class ExactPosterior:
    """Normalized probabilities of all ``2**(n-1)`` compositions.

    ``log_probs[mask]`` is the normalized log-probability of the composition
    with that gap mask (see :func:`composition_from_mask`).
    """

    n: int
    log_probs: np.ndarray
    k_marginal: np.ndarray
    log_norm_const: float

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def __len__(self):
        return len(self.log_probs)

    def entries(self) -> Iterator[tuple[Composition, float]]:
        for mask, lp in enumerate(self.log_probs):
            yield composition_from_mask(self.n, mask), math.exp(lp)

    def prob(self, comp: Composition) -> float:
        return math.exp(self.log_probs[mask_from_composition(comp)])

    def map_estimate(self) -> tuple[Composition, float]:
        return top_n(self, 1)[0]


def _all_log_probs(table: np.ndarray, n: int) -> np.ndarray:
    # V[e] holds the unnormalized log-probs of all compositions of the first
    # e points, indexed by their own (e-1)-bit mask.  A composition of e whose
    # last group is [s, e) has mask (mask_s << (e-s)) | (1 << (e-s-1)).
    levels: list[np.ndarray] = [np.zeros(1)]
    for e in range(1, n + 1):
        cur = np.empty(1 << (e - 1))
        cur[0] = table[0, e]
        for s in range(1, e):
            shift = e - s
            idx = (np.arange(len(levels[s])) << shift) | (1 << (shift - 1))
            cur[idx] = levels[s] + table[s, e]
        levels.append(cur)
    return levels[n]


def exact_posterior(ds: OrderedDataset, h: Hyperparams, cap: int = COMPOSITION_CAP) -> ExactPosterior:
    """Normalize the ordered model over every composition of ``ds.n``."""
    n = ds.n
    if n > cap:
        raise InfeasibleError(f"exact enumeration infeasible for n={n} (cap {cap}); use MCMC")
    log_p = _all_log_probs(segment_table(ds, h), n)
    log_z = float(logsumexp(log_p))
    log_p -= log_z
    ks = np.bitwise_count(np.arange(len(log_p), dtype=np.uint64)).astype(np.intp)
    k_marginal = np.bincount(ks, weights=np.exp(log_p), minlength=n)
    return ExactPosterior(n=n, log_probs=log_p, k_marginal=k_marginal, log_norm_const=log_z)


def top_n(post: ExactPosterior, n_top: int) -> list[tuple[Composition, float]]:
    """Most probable compositions; ties keep mask order."""
    if n_top < 1:
        raise ValueError("n_top must be >= 1")
    order = np.argsort(-post.log_probs, kind="stable")[:n_top]
    return [(composition_from_mask(post.n, int(m)), math.exp(post.log_probs[m])) for m in order]


# -- forward recursion --------------------------------------------------------


@dataclass(frozen=True)
class SegmentPosterior:
    k_marginal: np.ndarray
    log_norm_const: float
    map_composition: Composition
    map_prob: float


def segment_posterior(ds: OrderedDataset, h: Hyperparams) -> SegmentPosterior:
    """Exact k-marginal and MAP composition in O(n**3) time.

    The model factorizes over groups given their end points, so summing over
    the last group's start gives the forward recursion
    ``A[k, e] = logsumexp_s(A[k-1, s] + F[s, e])``.
    """
    n = ds.n
    table = segment_table(ds, h)
    fwd = np.full((n + 1, n + 1), -np.inf)
    fwd[0, 0] = 0.0
    for k in range(1, n + 1):
        for e in range(k, n + 1):
            fwd[k, e] = logsumexp(fwd[k - 1, :e] + table[:e, e])
    log_z = float(logsumexp(fwd[1:, n]))
    k_marginal = np.exp(fwd[1:, n] - log_z)

    best = np.full(n + 1, -np.inf)
    best[0] = 0.0
    back = np.zeros(n + 1, dtype=int)
    for e in range(1, n + 1):
        cand = best[:e] + table[:e, e]
        back[e] = int(np.argmax(cand))
        best[e] = cand[back[e]]
    cuts = []
    e = n
    while e > 0:
        e = back[e]
        if e:
            cuts.append(e)
    comp = Composition.from_cuts(n, cuts)
    return SegmentPosterior(k_marginal, log_z, comp, math.exp(best[n] - log_z))


# -- set partitions (Dirichlet process mixture) -------------------------------


@dataclass(frozen=True)
class SetPartition:
    """Disjoint, non-empty blocks of 0-based indices covering ``range(n)``."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(b)) for b in self.blocks)
        if any(not b for b in blocks):
            raise ValueError("empty block")
        flat = sorted(i for b in blocks for i in b)
        if flat != list(range(len(flat))):
            raise ValueError("blocks must be disjoint and cover 0..n-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @classmethod
    def from_labels(cls, labels) -> "SetPartition":
        groups: dict[int, list[int]] = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        return cls(tuple(tuple(g) for g in groups.values()))

    @classmethod
    def _trusted(cls, blocks: tuple[tuple[int, ...], ...]) -> "SetPartition":
        # caller guarantees sorted, disjoint, covering blocks
        obj = object.__new__(cls)
        object.__setattr__(obj, "blocks", blocks)
        return obj

    def canonical(self) -> "SetPartition":
        return SetPartition(tuple(sorted(self.blocks)))

    def __str__(self):
        return "{" + ", ".join("[" + ",".join(str(i + 1) for i in b) + "]" for b in self.blocks) + "}"


def _restricted_growth_strings(n: int) -> Iterator[list[int]]:
    """Yield label lists a with a[0] = 0 and a[i] <= 1 + max(a[:i]), in lexicographic order."""
    labels = [0] * n
    # prefix_max[i] = max(labels[:i]), for i >= 1
    prefix_max = [0] * n
    while True:
        yield labels
        i = n - 1
        while i > 0 and labels[i] > prefix_max[i]:
            i -= 1
        if i == 0:
            return
        labels[i] += 1
        top = max(prefix_max[i], labels[i])
        for j in range(i + 1, n):
            labels[j] = 0
            prefix_max[j] = top


def enumerate_set_partitions(n: int, cap: int = PARTITION_CAP) -> Iterator[SetPartition]:
    """Yield every set partition of ``range(n)`` once, in restricted-growth-string order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > cap:
        raise InfeasibleError(f"MDP exact enumeration infeasible for n={n} (cap {cap})")
    for labels in _restricted_growth_strings(n):
        blocks: list[list[int]] = [[] for _ in range(max(labels) + 1)]
        for i, lab in enumerate(labels):
            blocks[lab].append(i)
        yield SetPartition._trusted(tuple(map(tuple, blocks)))


def _log_block(ds: OrderedDataset, idx, h: Hyperparams) -> float:
    vals = ds.values[list(idx)]
    ybar = float(vals.mean())
    ssw = float(np.sum((vals - ybar) ** 2))
    return math.lgamma(len(vals)) + _log_marginal(len(vals), shrunk_ss(len(vals), ybar, ssw, h.c), h)


def log_mdp_partition_mass(part: SetPartition, ds: OrderedDataset, h: Hyperparams) -> float:
    """Unnormalized log posterior of a set partition under the DP mixture.

    Dirichlet process EPPF ``theta**k prod (n_b - 1)! / (theta)_n`` times the
    Normal-Gamma marginal of every block.
    """
    if part.n != ds.n:
        raise ValueError("partition/dataset length mismatch")
    log_rising = math.lgamma(h.theta + ds.n) - math.lgamma(h.theta)
    return part.k * math.log(h.theta) - log_rising + sum(_log_block(ds, b, h) for b in part.blocks)


@dataclass(frozen=True)
class MdpPosterior:
    k_marginal: np.ndarray
    top_partitions: list[tuple[SetPartition, float]]
    log_norm_const: float
    count: int


def mdp_exact_posterior(
    ds: OrderedDataset, h: Hyperparams, n_top: int = 10, cap: int = PARTITION_CAP
) -> MdpPosterior:
    """Exact DP-mixture posterior over all set partitions of the data.

    Walks restricted growth strings depth first, carrying per-block running
    sums so each extension updates one block term.
    """
    n = ds.n
    if n > cap:
        raise InfeasibleError(f"MDP exact enumeration infeasible for n={n} (cap {cap})")
    y = (ds.values - ds.values.mean()).tolist()
    shift = float(ds.values.mean())
    log_theta = math.log(h.theta)
    const = -(math.lgamma(h.theta + n) - math.lgamma(h.theta))

    def block_term(cnt: int, s: float, q: float) -> float:
        mean = s / cnt
        ssw = max(q - s * mean, 0.0)
        return math.lgamma(cnt) + _log_marginal(cnt, shrunk_ss(cnt, mean + shift, ssw, h.c), h)

    cnt = [0] * n
    sums = [0.0] * n
    sqs = [0.0] * n
    terms = [0.0] * n
    labels = [0] * n

    # per-k running log-sum-exp accumulators
    k_max = [-math.inf] * (n + 1)
    k_acc = [0.0] * (n + 1)
    heap: list[tuple[float, int, tuple[int, ...]]] = []
    counter = 0

    def visit(i: int, k: int, total: float):
        nonlocal counter
        if i == n:
            lp = total + k * log_theta + const
            if lp > k_max[k]:
                k_acc[k] = k_acc[k] * math.exp(k_max[k] - lp) + 1.0
                k_max[k] = lp
            else:
                k_acc[k] += math.exp(lp - k_max[k])
            item = (lp, -counter, tuple(labels))
            counter += 1
            if len(heap) < n_top:
                heapq.heappush(heap, item)
            elif item > heap[0]:
                heapq.heapreplace(heap, item)
            return
        yi = y[i]
        for b in range(k + 1):
            old = terms[b] if b < k else 0.0
            old_s, old_q = sums[b], sqs[b]
            cnt[b] += 1
            sums[b] = old_s + yi
            sqs[b] = old_q + yi * yi
            new = block_term(cnt[b], sums[b], sqs[b])
            terms[b] = new
            labels[i] = b
            visit(i + 1, max(k, b + 1), total - old + new)
            cnt[b] -= 1
            sums[b], sqs[b] = old_s, old_q
            terms[b] = old

    visit(0, 0, 0.0)

    log_k = np.array([m + math.log(a) if a > 0 else -math.inf for m, a in zip(k_max, k_acc)])
    log_z = float(logsumexp(log_k))
    k_marginal = np.exp(log_k[1:] - log_z)
    top = sorted(heap, reverse=True)
    top_parts = [(SetPartition.from_labels(lab), math.exp(lp - log_z)) for lp, _, lab in top]
    return MdpPosterior(k_marginal=k_marginal, top_partitions=top_parts, log_norm_const=log_z, count=counter)
