"""Single-letter rate region under perfect realism with a common-randomness budget.

A triple (R, Rc, Delta) is in the region when some auxiliary U and
reconstruction Y with X - U - Y, Y distributed as X, satisfy

    R >= I(X;U),   R + Rc >= I(Y;U),   Delta >= E[D(X,Y)].

The minimum rate at (Delta, Rc) is therefore
min max(I(X;U), I(Y;U) - Rc) over such (U, Y). The problem is nonconvex, so
:func:`solve_min_rate` is a multi-start local search; its answers are upper
bounds on the region boundary for the given auxiliary alphabet size.

Search space. A point is a vector in the unit cube. The first block maps
through stick-breaking to the rows of P(u|x); the second block picks a
coupling of P(u) with the source law one cell at a time, so Y has exactly
the source law by construction and only the distortion constraint remains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .dist import (
    Channel,
    DimensionError,
    Distribution,
    DistortionMeasure,
    TripleJoint,
    entropy,
    expected_distortion,
    mutual_information,
    tv_distance,
)

INF = math.inf
CONSTRAINT_TOL = 1e-9
OBJECTIVE_TOL = 1e-10
ORACLE_CAP = 5 * 10**7
POLISH_MARGIN = 1e-11


class InfeasibleError(ValueError):
    """Distortion target below the least distortion any realism-preserving Y attains."""


class NotFoundError(RuntimeError):
    """The search budget ran out without a feasible point. Not a proof of infeasibility."""

    def __init__(self, msg, aux_size, n_starts):
        super().__init__(msg)
        self.aux_size = aux_size
        self.n_starts = n_starts


@dataclass(frozen=True)
class RegionQuery:
    rate: float
    common_rate: float
    distortion: float
    source: Distribution
    measure: DistortionMeasure
    aux_size: int | None = None

    def __post_init__(self):
        k = self.source.alphabet_size
        if self.measure.shape != (k, k):
            raise DimensionError(f"distortion table must be {k}x{k}, got {self.measure.shape}")
        if self.aux_size is not None and self.aux_size < 1:
            raise ValueError("aux_size must be at least 1")
        if self.rate < 0 or self.common_rate < 0 or self.distortion < 0:
            raise ValueError("rate, common rate and distortion must be nonnegative")


@dataclass(frozen=True)
class Achieved:
    info_xu: float
    info_yu: float
    distortion: float
    realism_gap: float

    def objective(self, rc: float) -> float:
        return max(self.info_xu, self.info_yu - rc)


@dataclass(frozen=True)
class RegionWitness:
    triple: TripleJoint
    achieved: Achieved

    def satisfies(self, rate, rc, delta, tol=CONSTRAINT_TOL) -> bool:
        a = self.achieved
        return (
            a.realism_gap <= tol
            and a.info_xu <= rate + tol
            and a.info_yu <= rate + rc + tol
            and a.distortion <= delta + tol
        )


@dataclass(frozen=True)
class MinRateResult:
    rate: float
    witness: RegionWitness
    delta: float
    common_rate: float
    aux_size: int
    n_starts: int
    params: np.ndarray = field(repr=False)


def evaluate_triple(triple: TripleJoint, d: DistortionMeasure) -> Achieved:
    """Recompute every region quantity of a candidate from its joint law alone."""
    return Achieved(
        info_xu=mutual_information(triple.marginal("xu")),
        info_yu=mutual_information(triple.marginal("uy")),
        distortion=expected_distortion(triple.marginal("xy"), d),
        realism_gap=tv_distance(triple.marginal("y"), triple.source),
    )


# ---------------------------------------------------------------------------
# search-space parametrization


def _stick(v: np.ndarray) -> np.ndarray:
    """Unit cube of dim k-1 onto the k-simplex."""
    out = np.empty(v.size + 1)
    left = 1.0
    for i, vi in enumerate(v):
        out[i] = left * vi
        left -= out[i]
    out[-1] = max(left, 0.0)
    return out


def _coupling(pu: np.ndarray, py: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Coupling of ``pu`` and ``py``, filled row by row; each cell interpolates its feasible range."""
    ku, ky = pu.size, py.size
    pi = np.zeros((ku, ky))
    rem = py.copy()
    v = v.reshape(ku - 1, ky - 1) if ku > 1 and ky > 1 else np.zeros((max(ku - 1, 0), max(ky - 1, 0)))
    for u in range(ku - 1):
        need = pu[u]
        for y in range(ky - 1):
            after = rem[y + 1 :].sum()
            lo = max(0.0, need - after)
            hi = max(min(rem[y], need), lo)
            pi[u, y] = lo + v[u, y] * (hi - lo)
            need -= pi[u, y]
            rem[y] -= pi[u, y]
        pi[u, -1] = min(max(need, 0.0), max(rem[-1], 0.0))
        rem[-1] -= pi[u, -1]
    pi[-1] = np.clip(rem, 0.0, None)
    return pi


class _Problem:
    def __init__(self, source: Distribution, d: DistortionMeasure, aux_size: int, delta: float, rc: float):
        self.px = source.mass
        self.d = d.table
        self.kx = source.alphabet_size
        self.ku = aux_size
        self.delta = delta
        # I(Y;U) <= H(Y) = H(X), so any larger budget leaves the same problem
        self.rc = min(rc, entropy(source))
        self.nq = self.kx * (self.ku - 1)
        self.nc = (self.ku - 1) * (self.kx - 1)
        self.dim = self.nq + self.nc

    def channels(self, v: np.ndarray):
        v = np.clip(v, 0.0, 1.0)
        q = np.stack([_stick(v[x * (self.ku - 1) : (x + 1) * (self.ku - 1)]) for x in range(self.kx)])
        pu = self.px @ q
        pi = _coupling(pu, self.px, v[self.nq :])
        w = np.tile(self.px, (self.ku, 1))
        ok = (pu > 0) & (pi.sum(axis=1) > 0)
        w[ok] = np.clip(pi[ok], 0.0, None) / pu[ok, None]
        w /= w.sum(axis=1, keepdims=True)
        return q, w, pu, pi

    def terms(self, v: np.ndarray):
        q, w, pu, pi = self.channels(v)
        pxu = self.px[:, None] * q
        ixu = _mi(pxu, self.px, pu)
        iyu = _mi(pi, pu, self.px)
        dist = float(np.einsum("xu,uy,xy->", pxu, w, self.d))
        return ixu, iyu, dist

    def objective(self, v):
        ixu, iyu, _ = self.terms(v)
        return max(ixu, iyu - self.rc)

    def penalized(self, v, mu):
        ixu, iyu, dist = self.terms(v)
        return max(ixu, iyu - self.rc) + mu * max(0.0, dist - self.delta)

    def triple(self, v) -> TripleJoint:
        q, w, _, _ = self.channels(v)
        return TripleJoint(Distribution(self.px), Channel(q), Channel(w))


def _mi(joint: np.ndarray, pa: np.ndarray, pb: np.ndarray) -> float:
    outer = pa[:, None] * pb[None, :]
    nz = (joint > 0) & (outer > 0)
    return float(max((joint[nz] * np.log2(joint[nz] / outer[nz])).sum(), 0.0))


def _structured_seeds(prob: _Problem) -> list[np.ndarray]:
    seeds = [np.zeros(prob.dim)]  # U constant, Y independent of X
    if prob.ku >= prob.kx:
        v = np.zeros(prob.dim)
        for x in range(prob.kx):
            if x < prob.ku - 1:
                v[x * (prob.ku - 1) + x] = 1.0
        v[prob.nq :] = 1.0
        seeds.append(v)  # U = X = Y
    return seeds


def _local_search(prob: _Problem, v0: np.ndarray, max_mu: float = 1e8) -> np.ndarray:
    bounds = [(0.0, 1.0)] * prob.dim
    v = v0.copy()
    mu = 1.0
    while True:
        res = optimize.minimize(
            prob.penalized,
            v,
            args=(mu,),
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": 1e-10, "fatol": OBJECTIVE_TOL, "maxfev": 4000 * prob.dim, "adaptive": prob.dim > 4},
        )
        v = np.clip(res.x, 0.0, 1.0)
        if prob.terms(v)[2] - prob.delta < CONSTRAINT_TOL or mu >= max_mu:
            break
        mu *= 10.0
    return _polish(prob, v)


def _polish(prob: _Problem, v0: np.ndarray) -> np.ndarray:
    """SLSQP on the epigraph form; kept only if it improves a feasible point."""

    def cons(z):
        ixu, iyu, dist = prob.terms(z[:-1])
        return np.array([z[-1] - ixu, z[-1] - (iyu - prob.rc), prob.delta - POLISH_MARGIN - dist])

    z0 = np.append(v0, prob.objective(v0))
    try:
        res = optimize.minimize(
            lambda z: z[-1],
            z0,
            jac=lambda z: np.eye(z.size)[-1],
            method="SLSQP",
            bounds=[(0.0, 1.0)] * prob.dim + [(None, None)],
            constraints=[{"type": "ineq", "fun": cons}],
            options={"ftol": 1e-13, "maxiter": 300},
        )
        v1 = np.clip(res.x[:-1], 0.0, 1.0)
    except (ValueError, FloatingPointError):
        return v0
    ok0 = prob.terms(v0)[2] <= prob.delta + CONSTRAINT_TOL
    ok1 = prob.terms(v1)[2] <= prob.delta + CONSTRAINT_TOL
    if ok1 and (not ok0 or prob.objective(v1) < prob.objective(v0)):
        return v1
    return v0


def min_realism_distortion(source: Distribution, d: DistortionMeasure) -> float:
    """Least E[D(X,Y)] over couplings with Y distributed as X (a transport LP)."""
    p = source.mass
    k = p.size
    a_eq = np.vstack([np.kron(np.eye(k), np.ones(k)), np.kron(np.ones(k), np.eye(k))])
    res = optimize.linprog(d.table.ravel(), A_eq=a_eq, b_eq=np.concatenate([p, p]), bounds=(0, None), method="highs")
    return float(res.fun)


def solve_min_rate(
    delta: float,
    rc: float,
    source: Distribution,
    d: DistortionMeasure,
    aux_size: int | None = None,
    *,
    n_starts: int = 8,
    n_probe: int = 512,
    seed: int = 0,
) -> MinRateResult:
    """Smallest rate found at distortion ``delta`` with ``rc`` bits of common randomness.

    Raises :class:`InfeasibleError` below the least achievable distortion and
    :class:`NotFoundError` if no start reaches a feasible point.
    """
    k = source.alphabet_size
    if d.shape != (k, k):
        raise DimensionError(f"distortion table must be {k}x{k}, got {d.shape}")
    if rc < 0 or delta < 0:
        raise ValueError("delta and rc must be nonnegative")
    aux_size = k + 1 if aux_size is None else aux_size
    dmin = min_realism_distortion(source, d)
    if delta < dmin - CONSTRAINT_TOL:
        raise InfeasibleError(f"delta={delta} is below the least realism-preserving distortion {dmin:.12g}")

    prob = _Problem(source, d, aux_size, delta, rc)
    if prob.dim == 0:
        starts = [np.zeros(0)]
    else:
        probe = qmc.Sobol(prob.dim, scramble=True, seed=seed).random(n_probe)
        scores = np.array([prob.penalized(v, 10.0) for v in probe])
        order = np.lexsort((np.arange(n_probe), scores))
        starts = _structured_seeds(prob) + [probe[i] for i in order[:n_starts]]

    found = []
    for v0 in starts:
        v = _local_search(prob, v0) if prob.dim else v0
        ixu, iyu, dist = prob.terms(v)
        if dist <= delta + CONSTRAINT_TOL:
            found.append((max(ixu, iyu - prob.rc), tuple(v)))
    if not found:
        raise NotFoundError(f"no feasible point found with aux_size={aux_size}", aux_size, len(starts))
    best_val = min(f[0] for f in found)
    best = min(f[1] for f in found if f[0] <= best_val + 1e-12)
    v = np.array(best)
    triple = prob.triple(v)
    achieved = evaluate_triple(triple, d)
    witness = RegionWitness(triple, achieved)
    rate = max(achieved.info_xu, achieved.info_yu - min(rc, entropy(source)), 0.0)
    return MinRateResult(rate, witness, delta, rc, aux_size, len(starts), v)


def min_rate(delta, rc, source, d, aux_size=None, **kw) -> float:
    return solve_min_rate(delta, rc, source, d, aux_size, **kw).rate


def check_membership(q: RegionQuery, **kw) -> RegionWitness | None:
    """A witness placing (R, Rc, Delta) in the region, or None if the search finds none.

    None is not a proof of non-membership.
    """
    try:
        res = solve_min_rate(q.distortion, q.common_rate, q.source, q.measure, q.aux_size, **kw)
    except (InfeasibleError, NotFoundError):
        return None
    w = res.witness
    return w if w.satisfies(q.rate, q.common_rate, q.distortion) else None


# ---------------------------------------------------------------------------
# independent checks


def _simplex_grid(k: int, step: float) -> np.ndarray:
    m = int(round(1.0 / step))
    if k == 2:
        a = np.arange(m + 1) / m
        return np.stack([1.0 - a, a], axis=1)
    if k == 3:
        pts = [(i, j, m - i - j) for i in range(m + 1) for j in range(m + 1 - i)]
        return np.array(pts, dtype=float) / m
    raise ValueError("grid oracle supports auxiliary alphabets of size 2 or 3")


def _xlogy_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(num > 0, num * np.log2(np.where(num > 0, num, 1.0) / np.where(den > 0, den, 1.0)), 0.0)
    return r


def brute_force_oracle(
    delta: float,
    rc: float,
    source: Distribution,
    d: DistortionMeasure,
    aux_size: int = 2,
    step: float = 1e-3,
    cap: int = ORACLE_CAP,
) -> float:
    """Exhaustive grid search over P(u|x) for binary sources.

    Every pair of rows of P(u|x) on the simplex grid of resolution ``step``
    is visited. For two auxiliary symbols the coupling of P(u) with the
    source has a single free cell; I(Y;U) is convex in it and E[D] affine,
    so its optimum is the independent value clipped to the feasible
    interval, computed in closed form. For three auxiliary symbols the two
    free cells are also swept on the grid. Returns ``inf`` if no grid point
    is feasible.
    """
    if source.alphabet_size != 2 or aux_size not in (2, 3):
        raise ValueError("brute_force_oracle supports binary sources with aux_size 2 or 3")
    if d.shape != (2, 2):
        raise DimensionError("distortion table must be 2x2")
    px = source.mass
    rows = _simplex_grid(aux_size, step)
    m = rows.shape[0]
    inner = 1 if aux_size == 2 else (int(round(1.0 / step)) + 1) ** 2
    if m * m * inner > cap:
        raise ValueError(f"grid of {m * m * inner} points exceeds the cap of {cap}")
    rc_term = min(rc, 1.0)  # I(Y;U) <= H(Y) <= 1 bit for a binary source
    best = INF
    for r0 in range(m):
        q0 = rows[r0][None, :]
        q1 = rows
        pu = px[0] * q0 + px[1] * q1  # (m, ku)
        pxu0 = px[0] * q0
        pxu1 = px[1] * q1
        ixu = (_xlogy_ratio(np.broadcast_to(pxu0, pu.shape), px[0] * pu).sum(axis=1)
               + _xlogy_ratio(pxu1, px[1] * pu).sum(axis=1))
        # a[u, y] = sum_x p(x) q(u|x) d(x, y), per grid row
        a = pxu0[:, :, None] * d.table[0][None, None, :] + pxu1[:, :, None] * d.table[1][None, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(pu[:, :, None] > 0, a / pu[:, :, None], 0.0)
        if aux_size == 2:
            iyu, feas = _inner_closed_form(pu, px, c, delta)
        else:
            iyu, feas = _inner_grid(pu, px, c, delta, step)
        with np.errstate(invalid="ignore"):
            obj = np.where(feas, np.maximum(ixu, iyu - rc_term), INF)
        best = min(best, float(obj.min()))
    return max(best, 0.0)


def _inner_closed_form(pu, px, c, delta):
    p0 = pu[:, 0]
    lo = np.maximum(0.0, p0 - px[0])
    hi = np.minimum(px[1], p0)
    # E[D](t) = base + slope * t with t = pi(u=0, y=1)
    base = c[:, 0, 0] * p0 + c[:, 1, 1] * px[1] + c[:, 1, 0] * (px[0] - p0)
    slope = c[:, 0, 1] - c[:, 0, 0] - c[:, 1, 1] + c[:, 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = np.where(slope > 0, (delta - base) / slope, np.where(slope < 0, (delta - base) / slope, np.nan))
    flo = np.where(slope < 0, np.maximum(lo, bound), lo)
    fhi = np.where(slope > 0, np.minimum(hi, bound), hi)
    flat_ok = np.where(slope == 0, base <= delta + 1e-12, True)
    feas = flat_ok & (flo <= fhi + 1e-15)
    t = np.clip(p0 * px[1], flo, np.maximum(flo, fhi))
    pi = np.stack([p0 - t, t, px[0] - p0 + t, px[1] - t], axis=1).clip(0.0)
    outer = np.stack([p0 * px[0], p0 * px[1], pu[:, 1] * px[0], pu[:, 1] * px[1]], axis=1)
    iyu = _xlogy_ratio(pi, outer).sum(axis=1)
    return iyu, feas


def _inner_grid(pu, px, c, delta, step):
    g = np.arange(int(round(1.0 / step)) + 1) * step
    s, r = np.meshgrid(g, g, indexing="ij")
    s, r = s.ravel()[None, :], r.ravel()[None, :]
    p0, p1, p2 = pu[:, 0:1], pu[:, 1:2], pu[:, 2:3]
    t2 = px[1] - s - r
    ok = (s <= p0 + 1e-15) & (r <= p1 + 1e-15) & (t2 >= -1e-15) & (t2 <= p2 + 1e-15)
    t2 = np.clip(t2, 0.0, None)
    cells = [p0 - s, s, p1 - r, r, p2 - t2, t2]
    cells = [np.clip(x, 0.0, None) for x in cells]
    dist = sum(cells[2 * u + y] * c[:, u, y][:, None] for u in range(3) for y in range(2))
    ok &= dist <= delta + 1e-12
    iyu = sum(_xlogy_ratio(cells[2 * u + y], pu[:, u : u + 1] * px[y]) for u in range(3) for y in range(2))
    iyu = np.where(ok, iyu, INF)
    return iyu.min(axis=1), ok.any(axis=1)


def dp_rdf(delta: float, source: Distribution, d: DistortionMeasure) -> float:
    """Unlimited-common-randomness rate: min I(X;Y) over couplings of the source with itself.

    Solved directly over P(y|x) as a convex program (relative-entropy cone),
    without any auxiliary variable.
    """
    import cvxpy as cp

    p = source.mass
    k = p.size
    pi = cp.Variable((k, k), nonneg=True)
    ref = np.outer(p, p)
    cons = [cp.sum(pi, axis=1) == p, cp.sum(pi, axis=0) == p, cp.sum(cp.multiply(pi, d.table)) <= delta]
    prob = cp.Problem(cp.Minimize(cp.sum(cp.rel_entr(pi, ref)) / math.log(2)), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise InfeasibleError(f"no realism-preserving coupling meets delta={delta}")
    return max(float(prob.value), 0.0)


def blahut_arimoto_rd(
    delta: float,
    source: Distribution,
    d: DistortionMeasure,
    tol: float = 1e-12,
    max_iter: int = 20000,
) -> float:
    """Classical rate-distortion function (no realism constraint), in bits.

    Blahut-Arimoto at fixed slope, with bisection on the slope to hit
    ``delta``.
    """
    p = source.mass
    dmax = float((p @ d.table).min())
    if delta >= dmax:
        return 0.0
    dmin = float((p * d.table.min(axis=1)).sum())
    if delta < dmin - CONSTRAINT_TOL:
        raise InfeasibleError(f"delta={delta} is below the least attainable distortion {dmin}")

    def at_slope(beta):
        q = np.full(d.shape[1], 1.0 / d.shape[1])
        kern = np.exp(-beta * (d.table - d.table.min(axis=1, keepdims=True)))
        for _ in range(max_iter):
            cond = q[None, :] * kern
            cond /= cond.sum(axis=1, keepdims=True)
            q_new = p @ cond
            if np.abs(q_new - q).max() < tol:
                q = q_new
                break
            q = q_new
        cond = q[None, :] * kern
        cond /= cond.sum(axis=1, keepdims=True)
        joint = p[:, None] * cond
        return mutual_information(joint), expected_distortion(joint, d)

    lo, hi = 0.0, 1.0
    while at_slope(hi)[1] > delta and hi < 1e4:
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if at_slope(mid)[1] > delta:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    return at_slope(hi)[0]
