"""Sliced Wasserstein distances and fitting of box mixtures.

A mixture of ``k`` boxes ``(c_j - w_j, c_j + w_j]`` carries weights
proportional to the box volumes, so it is the uniform probability measure
on the union of the boxes (overlaps counted twice).  Its projection onto
``theta`` has an exact CDF built from the box slab volumes; quantiles come
from bracketing on the radius grid, bisection and a final Newton step.
Empirical measures are snapped to the nearest radius, voxel images go
through their sinogram.

Squared 1D Wasserstein distances are midpoint-rule averages over the
quantile levels, and the sliced distance averages them over directions.
Mixtures are fitted with ADAM on the centres and log half-widths.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .directions import circle_equispaced, fibonacci_sphere
from .geometry import KAHAN_THRESHOLD, SMALL_ENTRY
from .nrcdt import DiscreteCDF, QuantileProfile, cdf_from_projection, quantile, xi_grid
from .voxel import Sinogram, VoxelImage, sinogram

__all__ = [
    "AdamState",
    "CubeMixture",
    "EmpiricalMeasure",
    "FitResult",
    "SWConfig",
    "adam_step",
    "barycenter_config",
    "default_init",
    "fit_config",
    "fit_mixture",
    "mixture_cdf",
    "mixture_quantiles",
    "mixture_sinogram",
    "quantile_profiles",
    "radon_empirical",
    "read_fit_json",
    "sw2_sq",
    "sw_barycenter",
    "wasserstein1d_sq",
    "write_fit_json",
]

MAX_COMPONENTS = 10_000
BISECTION_STEPS = 10
FD_STEP = 1e-4
BLOCK_ENTRIES = 1 << 15


@dataclass(frozen=True)
class CubeMixture:
    """Boxes with centres ``c_j`` and half-widths ``exp(log_widths_j)``."""

    centers: np.ndarray
    log_widths: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        lw = np.atleast_2d(np.asarray(self.log_widths, dtype=float))
        if c.shape != lw.shape or c.shape[0] < 1:
            raise ValueError(f"centers {c.shape} and log_widths {lw.shape} must match with k >= 1")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(lw))):
            raise ValueError("mixture parameters must be finite")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "log_widths", lw)

    @classmethod
    def from_widths(cls, centers, widths) -> "CubeMixture":
        w = np.asarray(widths, dtype=float)
        if np.any(w <= 0):
            raise ValueError("widths must be positive")
        return cls(centers, np.log(w))

    @classmethod
    def from_params(cls, p, k, d) -> "CubeMixture":
        p = np.asarray(p, dtype=float)
        return cls(p[: k * d].reshape(k, d), p[k * d :].reshape(k, d))

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def widths(self) -> np.ndarray:
        return np.exp(self.log_widths)

    @property
    def volumes(self) -> np.ndarray:
        return 2.0**self.d * np.prod(self.widths, axis=1)

    @property
    def weights(self) -> np.ndarray:
        v = self.volumes
        return v / v.sum()

    def params(self) -> np.ndarray:
        return np.concatenate([self.centers.ravel(), self.log_widths.ravel()])


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform weights ``1/n`` on the rows of ``points``."""

    points: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.points, dtype=float))
        if x.shape[0] < 1:
            raise ValueError("empirical measure needs at least one point")
        object.__setattr__(self, "points", x)

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SWConfig:
    directions: np.ndarray
    radii: np.ndarray
    levels: int = 256
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.99
    epochs: int = 100
    eps_hat: float = 1e-8

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(getattr(self.directions, "points", self.directions), dtype=float))
        radii = np.asarray(self.radii, dtype=float)
        if radii.ndim != 1 or radii.size < 2 or np.any(np.diff(radii) <= 0):
            raise ValueError("radii must be a strictly increasing grid with at least two points")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.epochs < 0 or self.levels < 1:
            raise ValueError("epochs must be >= 0 and levels >= 1")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "radii", radii)

    @property
    def xi(self) -> np.ndarray:
        return xi_grid(self.levels)


def _directions_for(d, n):
    if d == 2:
        return circle_equispaced(n).points
    if d == 3:
        return fibonacci_sphere(n).points
    raise ValueError("default direction sets exist for d = 2 and 3")


def fit_config(d: int = 2, **overrides) -> SWConfig:
    """128 directions and 101 radii on ``[-sqrt(d), sqrt(d)]``."""
    r = math.sqrt(d)
    kw = dict(directions=_directions_for(d, 128), radii=np.linspace(-r, r, 101))
    kw.update(overrides)
    return SWConfig(**kw)


def barycenter_config(d: int = 3, half_range: float | None = None, **overrides) -> SWConfig:
    """42 directions and 31 radii covering the unit voxel grid by default."""
    r = math.sqrt(d) / 2.0 if half_range is None else half_range
    kw = dict(directions=_directions_for(d, 42), radii=np.linspace(-r, r, 31))
    kw.update(overrides)
    return SWConfig(**kw)


# ---------------------------------------------------------------------------
# projected box mixtures


def _significant(B):
    """Vectorised version of ``geometry.significant_entries`` over the last axis."""
    absb = np.abs(B)
    total = absb.sum(axis=-1, keepdims=True)
    r = absb / np.where(total > 0, total, 1.0)
    m = np.count_nonzero((r > 0) & (r < SMALL_ENTRY), axis=-1)
    cut = np.where(m > 0, np.finfo(float).eps ** (1.0 / (m + 1.0)), 0.0)
    return r > cut[..., None]


class _Projected:
    """Box mixture seen along a set of directions.

    ``eval(t)`` gives, for evaluation points ``t`` of shape ``(n, T)`` (one
    row per direction), the box volumes below ``t`` per component, and with
    ``grad`` also the section areas and the derivatives of those volumes in
    the half-widths.
    """

    def __init__(self, mix: CubeMixture, thetas):
        self.mix = mix
        self.thetas = thetas = np.atleast_2d(thetas)
        n, k, d = thetas.shape[0], mix.k, mix.d
        w = mix.widths
        self.proj = thetas @ mix.centers.T  # (n, k)
        B = thetas[:, None, :] * w[None, :, :]
        self.support = np.abs(B).sum(axis=-1)
        self.vol = mix.volumes
        self.total = float(self.vol.sum())
        masks = _significant(B).reshape(n * k, d)
        patterns, inverse = np.unique(masks, axis=0, return_inverse=True)
        self.groups = []
        Bf = B.reshape(n * k, d)
        th = np.repeat(thetas, k, axis=0)
        wf = np.tile(w, (n, 1))
        for g, pat in enumerate(patterns):
            sel = np.flatnonzero(inverse.reshape(-1) == g)
            if sel.size == n * k:
                sel = slice(None)
            ell = int(pat.sum())
            if ell == 0:
                raise ValueError("zero direction in mixture projection")
            if ell >= KAHAN_THRESHOLD:
                raise ValueError(f"mixture projections support at most {KAHAN_THRESHOLD - 1} nonzero entries")
            # vertices come in pairs +-k with offsets +-o; at x <= 0 only the
            # member with positive offset can contribute, so keep one per pair
            half = np.array([(1.0,) + c for c in itertools.product((-1.0, 1.0), repeat=ell - 1)])
            offs = Bf[sel][:, pat] @ half.T
            flip = offs < 0.0
            signs = np.prod(half, axis=1) * np.where(flip, (-1.0) ** ell, 1.0)
            base = 2.0 ** (d - ell) * np.prod(wf[sel][:, ~pat], axis=1) / np.prod(th[sel][:, pat], axis=1)
            self.groups.append(
                dict(
                    sel=sel,
                    pat=pat,
                    ell=ell,
                    corners=np.where(flip[:, :, None], -half, half),
                    signs=np.where(offs == 0.0, 0.0, signs),
                    offs=np.abs(offs),
                    base=base,
                    theta=th[sel][:, pat],
                )
            )

    def eval(self, t, level=0):
        """Volumes below ``t``; ``level`` 1 adds areas, 2 adds width derivatives."""
        n, k, d = self.thetas.shape[0], self.mix.k, self.mix.d
        T = t.shape[1]
        s = (t[:, None, :] - self.proj[:, :, None]).reshape(n * k, T)
        vol = np.tile(self.vol, n)
        w = np.tile(self.mix.widths, (n, 1))
        G = np.empty((n * k, T))
        A = np.empty((n * k, T)) if level >= 1 else None
        dW = np.empty((n * k, T, d)) if level >= 2 else None
        # row blocks keep the temporaries cache sized
        rows = max(1, BLOCK_ENTRIES // T)
        for grp in self.groups:
            sel = grp["sel"]
            count = n * k if isinstance(sel, slice) else sel.size
            for lo in range(0, count, rows):
                hi = min(lo + rows, count)
                dst = slice(lo, hi) if isinstance(sel, slice) else sel[lo:hi]
                out = self._block(grp, slice(lo, hi), s[dst], vol[dst], w[dst], level)
                G[dst] = out[0]
                if level >= 1:
                    A[dst] = out[1]
                if level >= 2:
                    dW[dst] = out[2]
        G = G.reshape(n, k, T)
        if level == 0:
            return G
        if level == 1:
            return G, A.reshape(n, k, T)
        return G, A.reshape(n, k, T), dW.reshape(n, k, T, self.mix.d)

    @staticmethod
    def _block(grp, part, sg, vol, ws, level):
        ell = grp["ell"]
        offs, signs = grp["offs"][part], grp["signs"][part]
        base = grp["base"][part]
        # beyond the support every truncated power vanishes exactly
        x = -np.abs(sg)
        P = np.zeros_like(x)
        Pm = np.zeros_like(x) if level >= 1 else None
        Q = np.zeros(x.shape + (ell,)) if level >= 2 else None
        for c in range(offs.shape[1]):
            yp = x + offs[:, c][:, None]
            np.maximum(yp, 0.0, out=yp)
            sign = signs[:, c][:, None]
            if ell == 1:
                low = (yp > 0.0).astype(float) if level >= 1 else None
                term = yp
            elif ell == 2:
                low = yp
                term = yp * yp
            else:
                low = yp ** (ell - 1)
                term = yp * low
            P += sign * term
            if level >= 1:
                Pm += sign * low
            if level >= 2:
                Q += (sign * low)[:, :, None] * grp["corners"][part][:, c][:, None, :]
        cum = base[:, None] / math.factorial(ell)
        v = vol[:, None]
        left = np.minimum(np.maximum(cum * P, 0.0), 0.5 * v)
        right = sg > 0.0
        # blend instead of np.where, which is slow on irregular masks
        Gs = left + right * (v - 2.0 * left)
        if level == 0:
            return (Gs,)
        dens = base[:, None] / math.factorial(ell - 1)
        As = np.maximum(dens * Pm, 0.0)
        if level == 1:
            return Gs, As
        # d(left)/dw_m for carried entries, d/dw_m of the volume otherwise
        dw = Gs[:, :, None] / ws[:, None, :]
        dleft = dens[:, :, None] * Q * grp["theta"][part][:, None, :]
        carried = np.where(right[:, :, None], v[:, :, None] / ws[:, None, grp["pat"]] - dleft, dleft)
        dw[:, :, grp["pat"]] = carried
        return Gs, As, dw

    def cdf(self, t):
        return self.eval(t).sum(axis=1) / self.total


def mixture_cdf(m: CubeMixture, theta, t):
    """Exact CDF of the projection of ``m`` onto ``theta``."""
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float).reshape(1, -1)
    if theta.shape[1] != m.d:
        raise ValueError("dimension mismatch between mixture and theta")
    t_arr = np.asarray(t, dtype=float)
    out = _Projected(m, theta).cdf(t_arr.reshape(1, -1)).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def mixture_sinogram(m: CubeMixture, directions, radii) -> Sinogram:
    """Density of the projected mixture on a direction by radius grid."""
    thetas = np.atleast_2d(np.asarray(getattr(directions, "points", directions), dtype=float))
    radii = np.asarray(radii, dtype=float)
    proj = _Projected(m, thetas)
    t = np.broadcast_to(radii, (thetas.shape[0], radii.size)).copy()
    _, A = proj.eval(t, level=1)
    return Sinogram(thetas, radii, A.sum(axis=1) / proj.total)


def _mixture_quantiles(proj: _Projected, radii, xi):
    """Quantiles ``(n, L)`` with the final CDF bracket values."""
    n = proj.thetas.shape[0]
    lo = np.min(proj.proj - proj.support, axis=1)
    hi = np.max(proj.proj + proj.support, axis=1)
    grid = np.concatenate([lo[:, None], np.clip(radii[None, :], lo[:, None], hi[:, None]), hi[:, None]], axis=1)
    F = proj.cdf(grid)
    F[:, 0] = 0.0
    F[:, -1] = 1.0
    # first grid point with F > xi; F(lo) = 0 <= xi < 1 = F(hi)
    idx = np.array([np.searchsorted(row, xi, side="right") for row in F])
    idx = np.clip(idx, 1, grid.shape[1] - 1)
    rows = np.arange(n)[:, None]
    a, b = grid[rows, idx - 1], grid[rows, idx]
    Fa, Fb = F[rows, idx - 1], F[rows, idx]
    X = np.broadcast_to(xi, a.shape)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (a + b)
        Fm = proj.cdf(mid)
        below = (Fm <= X).astype(float)
        a, b = a + below * (mid - a), mid + below * (b - mid)
        Fa, Fb = Fa + below * (Fm - Fa), Fm + below * (Fb - Fm)
    span = Fb - Fa
    q = np.where(span > 0, a + (X - Fa) / np.where(span > 0, span, 1.0) * (b - a), a)
    G, A = proj.eval(q, level=1)
    Fq = G.sum(axis=1) / proj.total
    f = A.sum(axis=1) / proj.total
    step = np.where(f > 0, (Fq - X) / np.where(f > 0, f, 1.0), 0.0)
    newton = q - step
    q = np.where((newton >= a) & (newton <= b), newton, q)
    return np.maximum.accumulate(q, axis=1)


def mixture_quantiles(m: CubeMixture, directions, radii, levels) -> np.ndarray:
    """Quantiles of the projected mixture, shape ``(directions, levels)``."""
    thetas = np.atleast_2d(np.asarray(getattr(directions, "points", directions), dtype=float))
    return _mixture_quantiles(_Projected(m, thetas), np.asarray(radii, dtype=float), np.asarray(levels, dtype=float))


# ---------------------------------------------------------------------------
# empirical measures and images


def radon_empirical(mu: EmpiricalMeasure, theta, radii) -> DiscreteCDF:
    """CDF of the projected sample after snapping to the nearest radius."""
    radii = np.asarray(radii, dtype=float)
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float).reshape(-1)
    p = mu.points @ theta
    tol = 1e-12 * max(1.0, float(np.max(np.abs(radii))))
    if np.any(p < radii[0] - tol) or np.any(p > radii[-1] + tol):
        raise ValueError(f"projections span [{p.min():.6g}, {p.max():.6g}], outside the radius grid")
    j = np.clip(np.searchsorted(radii, p), 1, radii.size - 1)
    # ties go to the lower radius
    nearest = np.where(p - radii[j - 1] <= radii[j] - p, j - 1, j)
    mass = np.bincount(nearest, minlength=radii.size) / p.size
    c = np.minimum(np.cumsum(mass), 1.0)
    c[-1] = 1.0
    return DiscreteCDF(radii, c)


def quantile_profiles(measure, cfg: SWConfig, threads=None) -> np.ndarray:
    """Quantiles of ``measure`` along every direction of ``cfg``."""
    xi = cfg.xi
    dirs = cfg.directions
    if isinstance(measure, CubeMixture):
        return mixture_quantiles(measure, dirs, cfg.radii, xi)
    if isinstance(measure, EmpiricalMeasure):
        # atoms on the grid: the literal generalised inverse is exact
        return np.array([quantile(radon_empirical(measure, th, cfg.radii), xi, interpolate=False) for th in dirs])
    if isinstance(measure, VoxelImage):
        S = sinogram(measure, dirs, cfg.radii, eps="auto", threads=threads)
        return np.array([quantile(cdf_from_projection(S.radii, row), xi) for row in S.values])
    raise TypeError(f"cannot project {type(measure).__name__}")


def wasserstein1d_sq(qa, qb) -> float:
    """Midpoint-rule average of the squared quantile difference."""
    if isinstance(qa, QuantileProfile) and isinstance(qb, QuantileProfile):
        if qa.xi_grid.shape != qb.xi_grid.shape or np.any(qa.xi_grid != qb.xi_grid):
            raise ValueError("quantile profiles use different level grids")
        qa, qb = qa.values, qb.values
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    if qa.shape != qb.shape:
        raise ValueError("quantile arrays differ in shape")
    return float(np.mean((qa - qb) ** 2))


def sw2_sq(mu, nu, cfg: SWConfig, threads=None) -> float:
    """Average over ``cfg.directions`` of the squared 1D distances."""
    qa = quantile_profiles(mu, cfg, threads)
    qb = quantile_profiles(nu, cfg, threads)
    return float(np.mean([wasserstein1d_sq(a, b) for a, b in zip(qa, qb)]))


# ---------------------------------------------------------------------------
# optimisation


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, size):
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(params, grads, state: AdamState, lr=0.05, beta1=0.9, beta2=0.99, eps_hat=1e-8):
    """One bias-corrected ADAM update; returns new parameters and state."""
    params = np.asarray(params, dtype=float)
    g = np.asarray(grads, dtype=float)
    if g.shape != params.shape or state.m.shape != params.shape:
        raise ValueError("parameter, gradient and state shapes differ")
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps_hat), AdamState(m, v, t)


class _Objective:
    """``sum_i lam_i SW^2(target_i, mixture)`` on fixed grids."""

    def __init__(self, targets, cfg: SWConfig, k, d, threads=None):
        self.cfg = cfg
        self.k, self.d = k, d
        self.xi = cfg.xi
        self.lams = np.array([lam for lam, _ in targets], dtype=float)
        self.refs = [quantile_profiles(mu, cfg, threads) for _, mu in targets]
        self.threads = threads

    def _loss_of(self, q):
        return float(sum(lam * np.mean((q - r) ** 2) for lam, r in zip(self.lams, self.refs)))

    def value(self, p):
        mix = CubeMixture.from_params(p, self.k, self.d)
        return self._loss_of(mixture_quantiles(mix, self.cfg.directions, self.cfg.radii, self.xi))

    def fd_gradient(self, p, step=FD_STEP):
        def one(i):
            h = step * (1.0 + abs(p[i]))
            e = np.zeros_like(p)
            e[i] = h
            return (self.value(p + e) - self.value(p - e)) / (2.0 * h)

        if self.threads is None or self.threads <= 1:
            return np.array([one(i) for i in range(p.size)])
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return np.array(list(pool.map(one, range(p.size))))

    def value_and_gradient(self, p):
        """Loss and its gradient through the implicit quantile derivative.

        At a quantile ``q`` with ``F(q) = xi``, ``dq/dp = -dF/dp / f(q)``.
        """
        mix = CubeMixture.from_params(p, self.k, self.d)
        proj = _Projected(mix, self.cfg.directions)
        q = _mixture_quantiles(proj, self.cfg.radii, self.xi)
        loss = self._loss_of(q)
        n, L = q.shape
        resid = sum(lam * (q - r) for lam, r in zip(self.lams, self.refs))
        G, A, dW = proj.eval(q, level=2)
        F = G.sum(axis=1) / proj.total
        f = A.sum(axis=1) / proj.total
        coef = np.where(f > 0, 2.0 * resid / (n * L * proj.total * np.where(f > 0, f, 1.0)), 0.0)
        # dF/dc_j = -A_j theta / V;  dF/dlog w_jm = (w_jm dG_j/dw_jm - F V_j) / V
        g_c = np.einsum("nt,nkt,nd->kd", coef, A, self.cfg.directions)
        w = mix.widths
        g_w = -(np.einsum("nt,nktd->kd", coef, dW) * w - np.einsum("nt,nt->", coef, F) * mix.volumes[:, None])
        return loss, np.concatenate([g_c.ravel(), g_w.ravel()])


@dataclass
class FitResult:
    mixture: CubeMixture
    loss_trace: list
    final_loss: float
    snapshots: list = field(default_factory=list)  # (epoch, CubeMixture)


def _optimise(obj: _Objective, init: CubeMixture, cfg: SWConfig, gradient, snapshot_every, callback):
    if gradient not in ("fd", "analytic"):
        raise ValueError(f"gradient must be 'fd' or 'analytic', got {gradient!r}")
    p = init.params()
    state = AdamState.fresh(p.size)
    trace = []
    snaps = []
    for epoch in range(cfg.epochs):
        if gradient == "analytic":
            loss, g = obj.value_and_gradient(p)
        else:
            loss = obj.value(p)
            g = obj.fd_gradient(p)
        if not (math.isfinite(loss) and np.all(np.isfinite(g))):
            raise FloatingPointError(f"non-finite loss or gradient at epoch {epoch}")
        trace.append(loss)
        if snapshot_every and epoch % snapshot_every == 0:
            snaps.append((epoch, CubeMixture.from_params(p, init.k, init.d)))
        if callback is not None:
            callback(epoch, loss, p)
        p, state = adam_step(p, g, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_hat)
    final = CubeMixture.from_params(p, init.k, init.d)
    if snapshot_every:
        snaps.append((cfg.epochs, final))
    return FitResult(final, trace, obj.value(p), snaps)


def default_init(k: int, d: int, width: float = 0.1, rng_seed=None, spread: float = 0.25) -> CubeMixture:
    """Starting mixture.

    ``k = 2`` gives centres ``+-spread * e``; otherwise centres lie evenly
    on the diagonal, or uniformly in ``[-spread, spread]^d`` when a seed is
    given.  All half-widths equal ``width``.
    """
    if rng_seed is not None:
        c = np.random.default_rng(rng_seed).uniform(-spread, spread, size=(k, d))
    elif k == 2:
        c = np.array([-spread, spread])[:, None] * np.ones(d)
    else:
        c = np.linspace(-spread, spread, k)[:, None] * np.ones(d) if k > 1 else np.zeros((1, d))
    return CubeMixture.from_widths(c, np.full((k, d), width))


def _check_k(k):
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if k > MAX_COMPONENTS:
        raise ValueError(f"k={k} exceeds the cap of {MAX_COMPONENTS}")
    return int(k)


def fit_mixture(
    target,
    k: int = 2,
    cfg: SWConfig | None = None,
    init: CubeMixture | None = None,
    gradient: str = "analytic",
    snapshot_every: int | None = None,
    threads=None,
    callback=None,
) -> FitResult:
    """Minimise ``SW^2(mixture, target)`` over centres and log half-widths.

    ``loss_trace[e]`` is the loss at the parameters entering epoch ``e``;
    ``final_loss`` is the loss of the returned mixture.

    ``gradient="fd"`` uses central differences instead.  The loss jumps
    where a component's mass fraction crosses a level ``xi``, so with
    well separated components those differences spike and disturb ADAM.
    """
    k = _check_k(k)
    d = target.d
    cfg = fit_config(d) if cfg is None else cfg
    init = default_init(k, d) if init is None else init
    if init.k != k or init.d != d:
        raise ValueError("initial mixture does not match k and the target dimension")
    obj = _Objective([(1.0, target)], cfg, k, d, threads)
    return _optimise(obj, init, cfg, gradient, snapshot_every, callback)


def sw_barycenter(
    mu1,
    mu2,
    lam: float = 0.5,
    k: int = 200,
    cfg: SWConfig | None = None,
    init: CubeMixture | None = None,
    gradient: str = "analytic",
    rng_seed: int = 0,
    snapshot_every: int | None = None,
    threads=None,
    callback=None,
) -> FitResult:
    """Minimise ``lam SW^2(mu1, Y) + (1 - lam) SW^2(mu2, Y)`` over mixtures ``Y``.

    The default start has ``k`` centres drawn uniformly from
    ``[-1/4, 1/4]^d`` with seed ``rng_seed`` and half-widths ``0.05``.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    k = _check_k(k)
    d = getattr(mu1, "d", None)
    if d is None or d != getattr(mu2, "d", None):
        raise ValueError("both measures need the same dimension")
    cfg = barycenter_config(d) if cfg is None else cfg
    init = default_init(k, d, width=0.05, rng_seed=rng_seed) if init is None else init
    if init.k != k or init.d != d:
        raise ValueError("initial mixture does not match k and the dimension")
    obj = _Objective([(lam, mu1), (1.0 - lam, mu2)], cfg, k, d, threads)
    return _optimise(obj, init, cfg, gradient, snapshot_every, callback)


def fit_to_dict(mixture: CubeMixture, loss_trace=()) -> dict:
    return {
        "centers": mixture.centers.tolist(),
        "widths": mixture.widths.tolist(),
        "loss_trace": [float(v) for v in loss_trace],
    }


def write_fit_json(path, mixture: CubeMixture, loss_trace=(), extra=None) -> None:
    data = fit_to_dict(mixture, loss_trace)
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def read_fit_json(path):
    """Mixture and loss trace from a file written by :func:`write_fit_json`."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        mix = CubeMixture.from_widths(np.array(data["centers"], dtype=float), np.array(data["widths"], dtype=float))
        trace = [float(v) for v in data.get("loss_trace", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: not a mixture file ({exc})") from None
    return mix, trace
