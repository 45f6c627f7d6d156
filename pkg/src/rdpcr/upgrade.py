"""Turning a nearly distribution-preserving decoder into an exactly preserving one.

The decoder is a channel from (message, common-randomness) pairs to a finite
reconstruction alphabet, flattened so that each row is one (i, j) pair. On
symbols the decoder over-produces, output is thinned by the ratio
target/produced; the removed mass is re-emitted according to the
under-produced residual. Product alphabets are handled by enumerating them
before calling in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import (
    Channel,
    DimensionError,
    Distribution,
    DistortionMeasure,
    maximal_coupling,
    tv_distance,
)

CERT_TOL = 1e-12


@dataclass(frozen=True)
class UpgradeInput:
    target: Distribution
    decoder: Channel
    weights: Distribution

    def __post_init__(self):
        if self.decoder.output_size != self.target.alphabet_size:
            raise DimensionError("decoder output alphabet differs from the target alphabet")
        if self.decoder.input_size != self.weights.alphabet_size:
            raise DimensionError("one weight per decoder row is required")


@dataclass(frozen=True)
class UpgradeOutput:
    upgraded: Channel
    plus_set: np.ndarray
    theta: dict[int, float]
    phi: np.ndarray
    residual: Distribution | None
    tv_before: float


@dataclass(frozen=True)
class CouplingCertificate:
    mismatch_prob: float
    tv_before: float


def induced_marginal(inp: UpgradeInput) -> Distribution:
    return Distribution(inp.weights.mass @ inp.decoder.rows)


def _upgrade_rows(target: np.ndarray, weights: np.ndarray, rows: np.ndarray):
    produced = weights @ rows
    plus = produced > target
    deficit = np.clip(target - produced, 0.0, None)
    # excess that exists only as rounding drift has no deficit to move into
    if not plus.any() or deficit.sum() <= 0.0:
        return rows, np.zeros_like(plus), np.ones_like(target), np.zeros(rows.shape[0]), None
    ratio = np.ones_like(target)
    ratio[plus] = target[plus] / produced[plus]
    residual = deficit / deficit.sum()
    phi = rows[:, plus] @ (1.0 - ratio[plus])
    new = rows * ratio[None, :] + phi[:, None] * residual[None, :]
    return new, plus, ratio, phi, residual


def upgrade(inp: UpgradeInput) -> UpgradeOutput:
    target = inp.target.mass
    rows = inp.decoder.rows
    new, plus, ratio, phi, residual = _upgrade_rows(target, inp.weights.mass, rows)
    tv = tv_distance(inp.target, induced_marginal(inp))
    if residual is None:
        return UpgradeOutput(inp.decoder, np.flatnonzero(plus), {}, phi, None, tv)
    return UpgradeOutput(
        upgraded=Channel(new),
        plus_set=np.flatnonzero(plus),
        theta={int(y): float(ratio[y]) for y in np.flatnonzero(plus)},
        phi=phi,
        residual=Distribution(residual),
        tv_before=tv,
    )


def repair_rows(target, weights, rows) -> np.ndarray:
    """Array-level upgrade used by the region optimizer; returns the new rows."""
    t = np.asarray(target, dtype=float)
    w = np.asarray(weights, dtype=float)
    r = np.asarray(rows, dtype=float)
    return _upgrade_rows(t, w, r)[0]


def coupling_certificate(inp: UpgradeInput, out: UpgradeOutput) -> CouplingCertificate:
    """Weighted mismatch of per-row maximal couplings between the old and new decoder.

    Raises if the mismatch does not reproduce the TV distance between the
    target and the induced marginal.
    """
    if out.upgraded.rows.shape != inp.decoder.rows.shape:
        raise DimensionError("output was not produced from this input")
    per_row = np.array(
        [maximal_coupling(inp.decoder.rows[k], out.upgraded.rows[k]).mismatch() for k in range(inp.decoder.input_size)]
    )
    mismatch = float(inp.weights.mass @ per_row)
    tv = tv_distance(inp.target, induced_marginal(inp))
    if abs(mismatch - tv) > CERT_TOL:
        raise AssertionError(f"coupling mismatch {mismatch!r} differs from TV distance {tv!r}")
    return CouplingCertificate(mismatch, tv)


def distortion_delta_bound(inp: UpgradeInput, out: UpgradeOutput, d: DistortionMeasure) -> float:
    """Upper bound on the distortion increase: max distortion times the mismatch probability."""
    return d.max() * out.tv_before


def measured_distortion_change(inp: UpgradeInput, out: UpgradeOutput, d: DistortionMeasure, source: Channel) -> float:
    """E[D(X, Y_new)] - E[D(X, Y_old)] when X given (i, j) follows ``source``."""
    if source.input_size != inp.decoder.input_size:
        raise DimensionError("source channel needs one row per (i, j) pair")
    w = inp.weights.mass
    before = np.einsum("k,kx,ky,xy->", w, source.rows, inp.decoder.rows, d.table)
    after = np.einsum("k,kx,ky,xy->", w, source.rows, out.upgraded.rows, d.table)
    return float(after - before)
