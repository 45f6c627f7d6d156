"""Finite-blocklength simulation of the random-codebook scheme.

A codebook u^n(i, j) is drawn i.i.d. from P(u); the encoder, given the source
block and the shared index j, picks the message i with probability
proportional to the likelihood P(x^n | u^n(i, j)); the decoder passes
u^n(i, j) through the memoryless channel P(y|u). At small n every law
involved is enumerated exactly.

All randomness comes from Philox streams keyed by (seed, purpose, n,
replicate), so a configuration and replicate index fully determine a run.

Sequences over a k-ary alphabet are indexed lexicographically with the first
symbol most significant, matching :func:`rdpcr.dist.product_extension`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .dist import (
    CapacityError,
    DimensionError,
    Distribution,
    DistortionMeasure,
    TripleJoint,
    product_extension,
    tv_distance,
)

ENUM_CAP = 2**20
CODEBOOK_CAP = 2**24
WORK_CAP = 2**25  # cells per vectorized block

_PURPOSE = {"codebook": 1, "source": 2, "common": 3, "encoder": 4, "decoder": 5, "tv": 6}


def stream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    """Counter-based generator for one (purpose, index) cell of a run."""
    ss = np.random.SeedSequence(seed, spawn_key=(_PURPOSE[purpose], *index))
    return np.random.Generator(np.random.Philox(ss))


def codebook_size(n: int, rate: float, slack: float) -> int:
    """floor(2^(n (rate + slack))), guarded against the power landing a hair under an integer."""
    return math.floor(2.0 ** (n * (rate + slack)) * (1.0 + 1e-12))


@dataclass(frozen=True)
class SimConfig:
    n: int
    rate: float
    common_rate: float
    slack: float
    triple: TripleJoint
    seed: int = 0
    mc_samples: int = 10_000
    distortion: DistortionMeasure | None = None
    tv_samples: int = 20_000
    enum_cap: int = ENUM_CAP
    codebook_cap: int = CODEBOOK_CAP

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("blocklength must be positive")
        if self.rate < 0 or self.common_rate < 0:
            raise ValueError("rates must be nonnegative")
        if not self.slack > 0:
            raise ValueError("slack must be positive")
        if self.mc_samples < 0:
            raise ValueError("mc_samples must be nonnegative")
        k = self.triple.source.alphabet_size
        if self.triple.synthesis.output_size != k:
            raise DimensionError("reconstruction alphabet must equal the source alphabet")
        if self.distortion is not None and self.distortion.shape != (k, k):
            raise DimensionError(f"distortion table must be {k}x{k}")
        m_i, m_j = self.sizes
        if m_i < 1 or m_j < 1:
            raise ValueError("codebook dimensions must be at least 1")
        if m_i * m_j * self.n > self.codebook_cap:
            raise CapacityError(f"codebook of {m_i}x{m_j} words of length {self.n} exceeds the cap")

    @property
    def sizes(self) -> tuple[int, int]:
        return codebook_size(self.n, self.rate, self.slack), codebook_size(self.n, self.common_rate, self.slack)

    @property
    def measure(self) -> DistortionMeasure:
        if self.distortion is not None:
            return self.distortion
        return DistortionMeasure.hamming(self.triple.source.alphabet_size)

    def enumerable(self) -> bool:
        kx, ku = self.triple.source.alphabet_size, self.triple.aux_size
        return kx**self.n <= self.enum_cap and ku**self.n <= self.enum_cap

    def to_json(self) -> dict[str, Any]:
        out = {
            "n": self.n,
            "rate": self.rate,
            "rc": self.common_rate,
            "slack": self.slack,
            "seed": self.seed,
            "mc_samples": self.mc_samples,
            "tv_samples": self.tv_samples,
            "triple": self.triple.to_json(),
        }
        if self.distortion is not None:
            out["distortion"] = self.distortion.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SimConfig":
        d = obj.get("distortion")
        return cls(
            n=int(obj["n"]),
            rate=float(obj["rate"]),
            common_rate=float(obj["rc"]),
            slack=float(obj["slack"]),
            triple=TripleJoint.from_json(obj["triple"]),
            seed=int(obj.get("seed", 0)),
            mc_samples=int(obj.get("mc_samples", 10_000)),
            tv_samples=int(obj.get("tv_samples", 20_000)),
            distortion=DistortionMeasure.from_json(d) if d is not None else None,
        )


@dataclass(frozen=True)
class Codebook:
    """``entries[i, j]`` is the auxiliary sequence for message i and shared index j."""

    entries: np.ndarray
    triple: TripleJoint

    def __post_init__(self):
        e = self.entries
        if e.ndim != 3:
            raise ValueError("codebook entries must have shape (messages, shared indices, n)")
        if e.size and (e.min() < 0 or e.max() >= self.triple.aux_size):
            raise ValueError("codebook symbol outside the auxiliary alphabet")

    @property
    def n(self) -> int:
        return self.entries.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape[0], self.entries.shape[1]


@dataclass(frozen=True)
class SimReport:
    n: int
    tv_gap: float
    tv_ci: float
    tv_mode: str
    distortion: float
    distortion_se: float
    codebook_shape: tuple[int, int]
    seed: int
    replicate: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "tv_gap": self.tv_gap,
            "tv_ci": self.tv_ci,
            "tv_mode": self.tv_mode,
            "distortion": None if math.isnan(self.distortion) else self.distortion,
            "distortion_se": None if math.isnan(self.distortion_se) else self.distortion_se,
            "codebook_shape": list(self.codebook_shape),
            "seed": self.seed,
            "replicate": self.replicate,
        }


@dataclass(frozen=True)
class TracePoint:
    n: int
    tv_gap: float
    tv_ci: float
    distortion: float
    tv_values: tuple[float, ...] = field(default=(), repr=False)


def sample_codebook(cfg: SimConfig, replicate: int = 0) -> Codebook:
    m_i, m_j = cfg.sizes
    pu = cfg.triple.marginal("u").mass
    rng = stream(cfg.seed, "codebook", cfg.n, replicate)
    entries = rng.choice(pu.size, size=(m_i, m_j, cfg.n), p=pu)
    return Codebook(entries, cfg.triple)


def _reverse_log(triple: TripleJoint) -> np.ndarray:
    """log P(x|u) as a (u, x) table."""
    rev = triple.forward.reverse(triple.source).rows
    with np.errstate(divide="ignore"):
        return np.log(rev)


def _posterior(loglik: np.ndarray) -> np.ndarray:
    """Normalize log-likelihood rows; rows with no support fall back to uniform."""
    top = loglik.max(axis=-1, keepdims=True)
    dead = ~np.isfinite(top)
    w = np.exp(loglik - np.where(dead, 0.0, top))
    w = np.where(dead, 1.0, w)
    return w / w.sum(axis=-1, keepdims=True)


def likelihood_encoder(codebook: Codebook, x, j: int) -> np.ndarray:
    """Distribution over messages i proportional to P(x^n | u^n(i, j))."""
    x = np.asarray(x)
    m_i, m_j = codebook.shape
    if not 0 <= j < m_j:
        raise IndexError(f"shared index {j} out of range [0, {m_j})")
    if x.shape != (codebook.n,):
        raise DimensionError(f"source block must have length {codebook.n}")
    if x.min() < 0 or x.max() >= codebook.triple.source.alphabet_size:
        raise IndexError("source symbol out of range")
    logp = _reverse_log(codebook.triple)
    words = codebook.entries[:, j, :]
    loglik = logp[words, x[None, :]].sum(axis=1)
    return _posterior(loglik)


def decode(codebook: Codebook, i: int, j: int, rng: np.random.Generator) -> np.ndarray:
    """Pass u^n(i, j) through the memoryless synthesis channel."""
    m_i, m_j = codebook.shape
    if not (0 <= i < m_i and 0 <= j < m_j):
        raise IndexError(f"indices ({i}, {j}) out of range for a {m_i}x{m_j} codebook")
    return _channel_sample(codebook.triple.synthesis.rows, codebook.entries[i, j][None, :], rng)[0]


def _channel_sample(rows: np.ndarray, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(rows, axis=1)
    cdf[:, -1] = 1.0
    r = rng.random(u.shape)
    return (r[..., None] > cdf[u]).sum(axis=-1)


def _seq_index(seqs: np.ndarray, k: int) -> np.ndarray:
    n = seqs.shape[-1]
    return seqs @ (k ** np.arange(n - 1, -1, -1))


def _apply_each_axis(tensor: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """Apply a (k_in, k_out) matrix along every axis of an n-way tensor."""
    for ax in range(tensor.ndim):
        tensor = np.moveaxis(np.tensordot(tensor, mat, axes=([ax], [0])), -1, ax)
    return tensor


def _word_counts(entries: np.ndarray, ku: int) -> np.ndarray:
    """Histogram of codewords over all ku^n sequences."""
    flat = entries.reshape(-1, entries.shape[-1])
    return np.bincount(_seq_index(flat, ku), minlength=ku ** entries.shape[-1]).astype(float)


def exact_output_law(codebook: Codebook, cap: int = ENUM_CAP) -> Distribution:
    """Uniform mixture over all codewords of the n-fold synthesis channel."""
    ku, ky = codebook.triple.aux_size, codebook.triple.synthesis.output_size
    n = codebook.n
    if ku**n > cap or ky**n > cap:
        raise CapacityError(f"enumerating {max(ku, ky)}^{n} sequences exceeds the cap of {cap}")
    counts = _word_counts(codebook.entries, ku)
    tensor = (counts / counts.sum()).reshape((ku,) * n)
    law = _apply_each_axis(tensor, codebook.triple.synthesis.rows).ravel()
    return Distribution(law)


def mixture_pmf(codebook: Codebook, ys: np.ndarray) -> np.ndarray:
    """Mixture output law evaluated at each sequence in ``ys`` (shape (B, n))."""
    with np.errstate(divide="ignore"):
        logw = np.log(codebook.triple.synthesis.rows)
    words = codebook.entries.reshape(-1, codebook.n)
    out = np.empty(ys.shape[0])
    step = max(1, WORK_CAP // max(1, words.shape[0] * codebook.n))
    for s in range(0, ys.shape[0], step):
        y = ys[s : s + step]
        ll = logw[words[None, :, :], y[:, None, :]].sum(axis=2)
        out[s : s + step] = np.exp(ll).mean(axis=1)
    return out


def _tv_monte_carlo(cfg: SimConfig, codebook: Codebook, replicate: int) -> tuple[float, float]:
    """Unbiased estimate E_P[(1 - q/p)^+] with a bootstrap 95% radius."""
    rng = stream(cfg.seed, "tv", cfg.n, replicate)
    p = cfg.triple.source.mass
    ys = rng.choice(p.size, size=(cfg.tv_samples, cfg.n), p=p)
    pn = np.prod(p[ys], axis=1)
    q = mixture_pmf(codebook, ys)
    g = np.clip(1.0 - q / pn, 0.0, None)
    boot = rng.integers(0, g.size, size=(200, g.size))
    means = g[boot].mean(axis=1)
    lo, hi = np.quantile(means, [0.025, 0.975])
    return float(g.mean()), float((hi - lo) / 2)


def _kron_table(table: np.ndarray, n: int, op) -> np.ndarray:
    out = table
    for _ in range(n - 1):
        out = op(out[:, None, :, None], table[None, :, None, :]).reshape(out.shape[0] * table.shape[0], -1)
    return out


def _encoder_tables(codebook: Codebook):
    """Exact posterior over auxiliary sequences for every source sequence, one table per shared index.

    Yields arrays of shape (kx^n, ku^n). Messages sharing a codeword are
    interchangeable for the output, so grouping them by value is exact.
    """
    triple = codebook.triple
    ku, n = triple.aux_size, codebook.n
    loglik = _kron_table(_reverse_log(triple), n, np.add).T  # (x^n, u^n)
    for j in range(codebook.shape[1]):
        counts = _word_counts(codebook.entries[:, j : j + 1, :], ku)
        with np.errstate(divide="ignore"):
            scores = loglik + np.log(counts)[None, :]
        post = _posterior(scores)
        # no codeword explains x: the encoder picks a message uniformly
        dead = ~np.isfinite(scores.max(axis=1))
        post[dead] = counts / counts.sum()
        yield post


def exact_scheme_distortion(cfg: SimConfig, codebook: Codebook) -> float:
    """Expected per-letter distortion of the full encoder/decoder chain, by enumeration."""
    triple = codebook.triple
    n = codebook.n
    if not cfg.enumerable() or (triple.source.alphabet_size * triple.aux_size) ** n > WORK_CAP:
        raise CapacityError("exact scheme distortion needs an enumerable configuration")
    g = triple.synthesis.rows @ cfg.measure.table.T  # E[d(x, Y) | u] as (u, x)
    per = _kron_table(g, n, np.add).T / n  # (x^n, u^n)
    px = product_extension(triple.source, n).mass
    total = sum(float(px @ (post * per).sum(axis=1)) for post in _encoder_tables(codebook))
    return total / codebook.shape[1]


def _sample_chain(cfg: SimConfig, codebook: Codebook, replicate: int):
    triple = codebook.triple
    n, m = cfg.n, cfg.mc_samples
    kx, ku = triple.source.alphabet_size, triple.aux_size
    m_i, m_j = codebook.shape
    xs = stream(cfg.seed, "source", n, replicate).choice(kx, size=(m, n), p=triple.source.mass)
    js = stream(cfg.seed, "common", n, replicate).integers(0, m_j, size=m)
    enc = stream(cfg.seed, "encoder", n, replicate)
    us = np.empty((m, n), dtype=np.int64)

    if cfg.enumerable() and kx**n * ku**n <= WORK_CAP:
        # one posterior table per shared index, streamed
        xi = _seq_index(xs, kx)
        r = enc.random(m)
        key = js * kx**n + xi
        order = np.argsort(key, kind="stable")
        bounds = np.flatnonzero(np.diff(key[order])) + 1
        groups = np.split(order, bounds)
        useq = np.empty(m, dtype=np.int64)
        g = 0
        for j, table in enumerate(_encoder_tables(codebook)):
            while g < len(groups) and js[groups[g][0]] == j:
                grp = groups[g]
                cdf = np.cumsum(table[xi[grp[0]]])
                useq[grp] = np.minimum(np.searchsorted(cdf, r[grp] * cdf[-1], side="right"), cdf.size - 1)
                g += 1
        for t in range(n - 1, -1, -1):
            us[:, t] = useq % ku
            useq //= ku
    else:
        logp = _reverse_log(triple)
        step = max(1, WORK_CAP // max(1, m_i * n))
        for s in range(0, m, step):
            x = xs[s : s + step]
            words = codebook.entries[:, js[s : s + step], :].transpose(1, 0, 2)  # (B, m_i, n)
            ll = logp[words, x[:, None, :]].sum(axis=2)
            cdf = np.cumsum(_posterior(ll), axis=1)
            r = enc.random(x.shape[0])[:, None]
            i = np.minimum((r * cdf[:, -1:] >= cdf).sum(axis=1), m_i - 1)
            us[s : s + step] = words[np.arange(x.shape[0]), i]

    ys = _channel_sample(triple.synthesis.rows, us, stream(cfg.seed, "decoder", n, replicate))
    return xs, ys


def run(cfg: SimConfig, replicate: int = 0) -> SimReport:
    codebook = sample_codebook(cfg, replicate)
    if cfg.enumerable():
        law = exact_output_law(codebook, cfg.enum_cap)
        tv = tv_distance(product_extension(cfg.triple.source, cfg.n, cfg.enum_cap), law)
        tv_ci, mode = 0.0, "exact"
    else:
        tv, tv_ci = _tv_monte_carlo(cfg, codebook, replicate)
        mode = "monte_carlo"
    if cfg.mc_samples > 0:
        xs, ys = _sample_chain(cfg, codebook, replicate)
        per_block = cfg.measure.table[xs, ys].mean(axis=1)
        dist = float(per_block.mean())
        se = float(per_block.std(ddof=1) / math.sqrt(per_block.size)) if per_block.size > 1 else math.nan
    else:
        dist = se = math.nan
    return SimReport(cfg.n, float(min(max(tv, 0.0), 1.0)), tv_ci, mode, dist, se, codebook.shape, cfg.seed, replicate)


def sweep(cfg: SimConfig, n_list, n_codebooks: int = 1) -> list[TracePoint]:
    """Run every blocklength in ``n_list`` over ``n_codebooks`` independent codebooks.

    Reported tv_gap is the median over codebooks and distortion the mean.
    """
    trace = []
    for n in n_list:
        reports = [run(replace(cfg, n=int(n)), rep) for rep in range(n_codebooks)]
        tvs = tuple(r.tv_gap for r in reports)
        dists = [r.distortion for r in reports]
        trace.append(
            TracePoint(
                n=int(n),
                tv_gap=float(np.median(tvs)),
                tv_ci=float(max(r.tv_ci for r in reports)),
                distortion=float(np.mean(dists)) if not any(math.isnan(x) for x in dists) else math.nan,
                tv_values=tvs,
            )
        )
    return trace
