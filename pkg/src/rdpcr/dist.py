"""Finite-alphabet probability primitives.

Distributions, channels and the factored triple P(x) P(u|x) P(y|u), together
with the information measures, total-variation distance and maximal
couplings used by the rest of the package. All logarithms are base 2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

ATOL = 1e-12
RENORM_TOL = 1e-9
DEFAULT_MEMORY_CAP = 2**24


class DimensionError(ValueError):
    """Alphabets or table shapes do not agree."""


class CapacityError(MemoryError):
    """An enumeration would exceed the configured memory cap."""


def _as_pmf(values, what: str) -> np.ndarray:
    p = np.array(values, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{what}: expected a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{what}: non-finite entries")
    if np.any(p < -ATOL):
        raise ValueError(f"{what}: negative entries")
    p = np.clip(p, 0.0, None)
    drift = abs(p.sum() - 1.0)
    if drift > RENORM_TOL:
        raise ValueError(f"{what}: entries sum to {p.sum():.15g}, not 1")
    if drift > 0:
        p = p / p.sum()
    return p


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability mass function over ``{0, ..., k-1}``."""

    mass: np.ndarray

    def __init__(self, mass):
        object.__setattr__(self, "mass", _freeze(_as_pmf(mass, "Distribution")))

    @property
    def alphabet_size(self) -> int:
        return self.mass.size

    def __len__(self) -> int:
        return self.mass.size

    def __array__(self, dtype=None, copy=None):
        return self.mass if dtype is None else self.mass.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.mass.shape == other.mass.shape and bool(np.all(self.mass == other.mass))

    def __repr__(self) -> str:
        return f"Distribution({self.mass.tolist()})"

    @classmethod
    def uniform(cls, k: int) -> "Distribution":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def point(cls, k: int, at: int) -> "Distribution":
        m = np.zeros(k)
        m[at] = 1.0
        return cls(m)

    def entropy(self) -> float:
        return entropy(self.mass)

    def to_json(self) -> dict[str, Any]:
        return {"alphabet": self.alphabet_size, "mass": self.mass.tolist()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Distribution":
        mass = obj["mass"]
        if "alphabet" in obj and obj["alphabet"] != len(mass):
            raise DimensionError(f"alphabet={obj['alphabet']} but {len(mass)} masses given")
        return cls(mass)


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic conditional table, ``rows[a, b] = P(b | a)``."""

    rows: np.ndarray

    def __init__(self, rows):
        r = np.array(rows, dtype=float)
        if r.ndim != 2 or 0 in r.shape:
            raise ValueError(f"Channel: expected a non-empty matrix, got shape {r.shape}")
        r = np.stack([_as_pmf(row, f"Channel row {i}") for i, row in enumerate(r)])
        object.__setattr__(self, "rows", _freeze(r))

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Channel):
            return NotImplemented
        return self.rows.shape == other.rows.shape and bool(np.all(self.rows == other.rows))

    def __repr__(self) -> str:
        return f"Channel({self.rows.tolist()})"

    def row(self, a: int) -> Distribution:
        return Distribution(self.rows[a])

    @classmethod
    def identity(cls, k: int) -> "Channel":
        return cls(np.eye(k))

    @classmethod
    def constant(cls, k_in: int, out: Distribution) -> "Channel":
        return cls(np.tile(out.mass, (k_in, 1)))

    @classmethod
    def bsc(cls, crossover: float) -> "Channel":
        e = crossover
        return cls([[1 - e, e], [e, 1 - e]])

    def apply(self, p: Distribution) -> Distribution:
        """Output law when the input is drawn from ``p``."""
        if p.alphabet_size != self.input_size:
            raise DimensionError(f"input law has {p.alphabet_size} symbols, channel expects {self.input_size}")
        return Distribution(p.mass @ self.rows)

    def joint(self, p: Distribution) -> np.ndarray:
        if p.alphabet_size != self.input_size:
            raise DimensionError(f"input law has {p.alphabet_size} symbols, channel expects {self.input_size}")
        return p.mass[:, None] * self.rows

    def reverse(self, p: Distribution) -> "Channel":
        """Bayes reversal P(a|b) given the input law ``p``.

        Output symbols of zero probability get a uniform row; they are never
        conditioned on.
        """
        j = self.joint(p)
        col = j.sum(axis=0)
        rev = np.full((self.output_size, self.input_size), 1.0 / self.input_size)
        ok = col > 0
        rev[ok] = (j[:, ok] / col[ok]).T
        return Channel(rev)

    def to_json(self) -> dict[str, Any]:
        return {"rows": self.rows.tolist()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Channel":
        return cls(obj["rows"])


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    """Nonnegative finite table ``table[x, y]``."""

    table: np.ndarray

    def __init__(self, table):
        t = np.array(table, dtype=float)
        if t.ndim != 2 or 0 in t.shape:
            raise ValueError(f"DistortionMeasure: expected a matrix, got shape {t.shape}")
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise ValueError("DistortionMeasure: entries must be finite and nonnegative")
        object.__setattr__(self, "table", _freeze(t))

    @property
    def shape(self) -> tuple[int, int]:
        return self.table.shape

    def max(self) -> float:
        return float(self.table.max())

    @classmethod
    def hamming(cls, k: int) -> "DistortionMeasure":
        return cls(1.0 - np.eye(k))

    @classmethod
    def squared(cls, points) -> "DistortionMeasure":
        x = np.asarray(points, dtype=float)
        return cls((x[:, None] - x[None, :]) ** 2)

    def to_json(self) -> dict[str, Any]:
        return {"rows": self.table.tolist()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "DistortionMeasure":
        return cls(obj["rows"])


@dataclass(frozen=True)
class TripleJoint:
    """Joint law of (X, U, Y) stored as P(x) P(u|x) P(y|u).

    The factored storage makes X - U - Y a Markov chain by construction.
    """

    source: Distribution
    forward: Channel
    synthesis: Channel

    def __post_init__(self):
        if self.forward.input_size != self.source.alphabet_size:
            raise DimensionError("forward channel input does not match the source alphabet")
        if self.synthesis.input_size != self.forward.output_size:
            raise DimensionError("synthesis channel input does not match the auxiliary alphabet")

    @property
    def aux_size(self) -> int:
        return self.forward.output_size

    def joint(self) -> np.ndarray:
        """Full array p[x, u, y]."""
        return self.source.mass[:, None, None] * self.forward.rows[:, :, None] * self.synthesis.rows[None, :, :]

    def marginal(self, which: str):
        """Marginal law of one variable ("x", "u", "y") or pair ("xu", "uy", "xy", ...).

        Single variables come back as a :class:`Distribution`, pairs as a
        matrix with axes in the order named.
        """
        axes = {"x": 0, "u": 1, "y": 2}
        if which == "x":
            return self.source
        if which == "u":
            return self.forward.apply(self.source)
        if which == "y":
            return self.synthesis.apply(self.forward.apply(self.source))
        if len(which) != 2 or which[0] == which[1] or any(c not in axes for c in which):
            raise ValueError(f"unknown marginal {which!r}")
        full = self.joint()
        drop = ({0, 1, 2} - {axes[which[0]], axes[which[1]]}).pop()
        m = full.sum(axis=drop)
        if axes[which[0]] > axes[which[1]]:
            m = m.T
        return m

    def to_json(self) -> dict[str, Any]:
        return {
            "source": self.source.to_json(),
            "forward": self.forward.to_json(),
            "synthesis": self.synthesis.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "TripleJoint":
        return cls(
            Distribution.from_json(obj["source"]),
            Channel.from_json(obj["forward"]),
            Channel.from_json(obj["synthesis"]),
        )


@dataclass(frozen=True, eq=False)
class Coupling:
    joint: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.joint, dtype=float)
        if j.ndim != 2 or np.any(j < -ATOL) or abs(j.sum() - 1.0) > RENORM_TOL:
            raise ValueError("Coupling: joint must be a nonnegative matrix summing to 1")
        object.__setattr__(self, "joint", _freeze(np.clip(j, 0.0, None)))

    @property
    def first(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def second(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def mismatch(self) -> float:
        """Pr(first != second); only meaningful on a common alphabet."""
        return float(1.0 - np.trace(self.joint))


def _mass(p) -> np.ndarray:
    return p.mass if isinstance(p, Distribution) else np.asarray(p, dtype=float)


def tv_distance(p, q) -> float:
    """Total-variation distance, sup over events of |p(A) - q(A)|."""
    a, b = _mass(p), _mass(q)
    if a.shape != b.shape:
        raise DimensionError(f"alphabet mismatch: {a.shape} vs {b.shape}")
    return float(np.clip(a - b, 0.0, None).sum())


def maximal_coupling(p, q) -> Coupling:
    """Coupling of ``p`` and ``q`` whose mismatch probability equals their TV distance.

    The diagonal carries min(p, q); the residuals (p - q)^+ and (q - p)^+
    are paired off as a product, scaled by the TV distance.
    """
    a, b = _mass(p), _mass(q)
    if a.shape != b.shape:
        raise DimensionError(f"alphabet mismatch: {a.shape} vs {b.shape}")
    overlap = np.minimum(a, b)
    joint = np.diag(overlap)
    ra, rb = a - overlap, b - overlap
    tv = ra.sum()
    if tv > 0:
        joint = joint + np.outer(ra, rb) / tv
    return Coupling(joint)


def entropy(p) -> float:
    m = _mass(p)
    nz = m[m > 0]
    return float(-(nz * np.log2(nz)).sum())


def mutual_information(joint) -> float:
    """I(A;B) in bits for a bivariate pmf, with 0 log 0 = 0."""
    j = np.asarray(joint, dtype=float)
    if j.ndim != 2 or np.any(j < -ATOL) or abs(j.sum() - 1.0) > RENORM_TOL:
        raise ValueError("mutual_information: joint must be a bivariate pmf")
    j = np.clip(j, 0.0, None)
    pa = j.sum(axis=1, keepdims=True)
    pb = j.sum(axis=0, keepdims=True)
    nz = j > 0
    # separate logs so tiny marginals cannot underflow their product
    la = np.log2(np.broadcast_to(pa, j.shape)[nz])
    lb = np.log2(np.broadcast_to(pb, j.shape)[nz])
    return float(max((j[nz] * (np.log2(j[nz]) - la - lb)).sum(), 0.0))


def expected_distortion(joint, d) -> float:
    j = np.asarray(joint, dtype=float)
    table = d.table if isinstance(d, DistortionMeasure) else np.asarray(d, dtype=float)
    if j.shape != table.shape:
        raise DimensionError(f"joint shape {j.shape} does not match distortion table {table.shape}")
    return float((j * table).sum())


def compose(first: Channel, second: Channel) -> Channel:
    """Cascade: ``first`` then ``second``."""
    if first.output_size != second.input_size:
        raise DimensionError("cannot compose: inner alphabets differ")
    return Channel(first.rows @ second.rows)


def product_extension(p, n: int, cap: int = DEFAULT_MEMORY_CAP) -> Distribution:
    """i.i.d. extension to n-sequences, indexed lexicographically (first symbol most significant)."""
    m = _mass(p)
    if n < 1:
        raise ValueError("n must be positive")
    if m.size**n > cap:
        raise CapacityError(f"{m.size}^{n} outcomes exceed the cap of {cap}")
    out = np.ones(1)
    for _ in range(n):
        out = np.kron(out, m)
    return Distribution(out)
