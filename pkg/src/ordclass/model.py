"""Ordered-composition classification model.

Observations are sorted and every group holds a run of consecutive values,
so a clustering is fully described by its group sizes ``(n_1, ..., n_k)``.
The unnormalized log-probability of such a composition is a sum of one term
per group, each depending only on where the group starts and stops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Hyperparams",
    "OrderedDataset",
    "Composition",
    "GroupStats",
    "shrunk_ss",
    "prepare_dataset",
    "group_stats",
    "log_weight_term",
    "log_marginal_term",
    "log_segment",
    "log_unnorm_prob",
]


@dataclass(frozen=True)
class Hyperparams:
    """Model constants.

    theta is the Dirichlet process total mass; ``a`` and ``b`` are the shape
    and rate of the gamma prior on the precision; ``c`` scales the prior
    precision of the group mean.
    """

    theta: float = 1.0
    a: float = 1.0
    b: float = 1.0
    c: float = 0.1

    def __post_init__(self):
        for name in ("theta", "a", "b", "c"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"hyperparameter {name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True, eq=False)
class OrderedDataset:
    """Sorted observations with cumulative sums of y and y**2."""

    values: np.ndarray
    prefix_sum: np.ndarray
    prefix_sumsq: np.ndarray
    # leading-zero prefix sums of values centred at _shift; keeps the
    # within-group sum of squares free of large cancellations
    _cs: np.ndarray = field(repr=False)
    _cq: np.ndarray = field(repr=False)
    _shift: float = field(repr=False, default=0.0)

    @property
    def n(self) -> int:
        return len(self.values)

    def slice_sums(self, start: int, stop: int) -> tuple[float, float]:
        """Return (sum, sum of squares) of ``values[start:stop] - shift``."""
        return self._cs[stop] - self._cs[start], self._cq[stop] - self._cq[start]

    def slice_stats(self, start: int, stop: int) -> tuple[float, float]:
        """Return (mean, within-group sum of squares) of ``values[start:stop]``."""
        n_j = stop - start
        s, q = self.slice_sums(start, stop)
        centred_mean = s / n_j
        return centred_mean + self._shift, max(q - s * centred_mean, 0.0)

    def __eq__(self, other):
        if not isinstance(other, OrderedDataset):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def prepare_dataset(raw: Iterable[float]) -> OrderedDataset:
    """Sort the observations and cache their prefix sums."""
    values = np.asarray(list(raw) if not isinstance(raw, np.ndarray) else raw, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empty dataset")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"non-finite observation at index {int(bad[0])}")
    values = np.sort(values, kind="stable")
    shift = float(np.mean(values))
    centred = values - shift
    return OrderedDataset(
        values=_frozen(values),
        prefix_sum=_frozen(np.cumsum(values)),
        prefix_sumsq=_frozen(np.cumsum(values * values)),
        _cs=_frozen(np.concatenate(([0.0], np.cumsum(centred)))),
        _cq=_frozen(np.concatenate(([0.0], np.cumsum(centred * centred)))),
        _shift=shift,
    )


@dataclass(frozen=True)
class Composition:
    """Group sizes of consecutive sorted observations."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if not parts:
            raise ValueError("composition needs at least one part")
        if any(p < 1 for p in parts):
            raise ValueError(f"composition parts must be >= 1, got {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def of(cls, *parts: int) -> "Composition":
        return cls(tuple(parts))

    @property
    def k(self) -> int:
        return len(self.parts)

    @property
    def n(self) -> int:
        return sum(self.parts)

    def bounds(self) -> list[tuple[int, int]]:
        """Half-open ``(start, stop)`` index ranges of the groups."""
        out = []
        start = 0
        for p in self.parts:
            out.append((start, start + p))
            start += p
        return out

    def cuts(self) -> frozenset[int]:
        """Positions ``i`` (1..n-1) such that a new group starts at index ``i``."""
        return frozenset(stop for _, stop in self.bounds()[:-1])

    @classmethod
    def from_cuts(cls, n: int, cuts: Iterable[int]) -> "Composition":
        edges = [0, *sorted(cuts), n]
        return cls(tuple(b - a for a, b in zip(edges, edges[1:])))

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __str__(self):
        return "(" + ",".join(map(str, self.parts)) + ")"


def shrunk_ss(n_j: int, ybar: float, ssw: float, c: float) -> float:
    """sum(y**2) - n_j * ybar**2 / (1 + c/n_j), written as SSW plus a non-negative term."""
    return ssw + ybar * ybar * n_j * c / (n_j + c)


@dataclass(frozen=True)
class GroupStats:
    n_j: int
    ybar_j: float
    s2_j: float
    m_j: int

    @classmethod
    def from_values(cls, values: Sequence[float], c: float, m_j: int = 0) -> "GroupStats":
        arr = np.asarray(values, dtype=float)
        ybar = float(arr.mean())
        ssw = float(np.sum((arr - ybar) ** 2))
        return cls(n_j=len(arr), ybar_j=ybar, s2_j=shrunk_ss(len(arr), ybar, ssw, c), m_j=m_j)


def group_stats(ds: OrderedDataset, start: int, length: int, c: float) -> GroupStats:
    """Statistics of the ``length`` consecutive observations beginning at ``start``."""
    if length < 1 or start < 0 or start + length > ds.n:
        raise ValueError("invalid group bounds")
    ybar, ssw = ds.slice_stats(start, start + length)
    return GroupStats(length, ybar, shrunk_ss(length, ybar, ssw, c), ds.n - start - length)


def log_weight_term(n_j: int, m_j: int, theta: float) -> float:
    """log of theta * G(1+n_j) G(theta+m_j) / G(1+theta+n_j+m_j)."""
    return (
        math.log(theta)
        + math.lgamma(1 + n_j)
        + math.lgamma(theta + m_j)
        - math.lgamma(1 + theta + n_j + m_j)
    )


def _log_marginal(n_j: int, s2: float, h: Hyperparams) -> float:
    half = 0.5 * n_j
    return (
        math.lgamma(h.a + half)
        - math.lgamma(h.a)
        + h.a * math.log(h.b)
        + 0.5 * (math.log(h.c) - math.log(h.c + n_j))
        - (h.a + half) * math.log(h.b + 0.5 * s2)
    )


def log_marginal_term(stats: GroupStats, h: Hyperparams) -> float:
    """Log Normal-Gamma marginal likelihood of one group."""
    return _log_marginal(stats.n_j, stats.s2_j, h)


def log_segment(ds: OrderedDataset, start: int, stop: int, h: Hyperparams) -> float:
    """Contribution of the group ``values[start:stop]`` to the log-probability."""
    n_j = stop - start
    ybar, ssw = ds.slice_stats(start, stop)
    s2 = shrunk_ss(n_j, ybar, ssw, h.c)
    return log_weight_term(n_j, ds.n - stop, h.theta) + _log_marginal(n_j, s2, h)


def log_unnorm_prob(comp: Composition | Sequence[int], ds: OrderedDataset, h: Hyperparams) -> float:
    """Unnormalized log-probability of a composition (normalizing constant omitted)."""
    parts = comp.parts if isinstance(comp, Composition) else tuple(comp)
    if sum(parts) != ds.n:
        raise ValueError("composition/dataset length mismatch")
    out = 0.0
    start = 0
    for p in parts:
        out += log_segment(ds, start, start + p, h)
        start += p
    return out
