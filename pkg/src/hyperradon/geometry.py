"""Closed-form sections and slab volumes of axis-aligned boxes.

The box ``(-a, a]`` in ``R^d`` is cut by the hyperplane ``<x, theta> = t``.
Its section area, as a function of ``t``, is a piecewise polynomial of
degree ``l - 1`` where ``l`` is the number of nonzero entries of
``theta``.  It is evaluated as a signed sum over the ``2**l`` box vertices
of truncated powers ``(t + <k, (a*theta)°>)_+^(l-1)``.

All public functions accept scalars or arrays for ``t`` and return a float
for scalar input.  ``theta`` need not be normalised: for a raw vector the
value is the section of the scaled hyperplane family, which is what the
coordinate-change identity ``A_e^a(t) = P(a) A_a^e(t)`` relies on.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

MAX_SUPPORT = 170  # (l-1)! overflows double beyond this
KAHAN_THRESHOLD = 10
# Entries with small |a_j theta_j| relative to the support make the vertex
# sum cancel: keeping m of them costs about eps_mach / prod(r_j) relative
# accuracy, while replacing them by the theta_j -> 0 limit costs about r_j.
# Entries below SMALL_ENTRY are candidates; with m candidates those below
# eps_mach**(1/(m+1)) go through the limit.
SMALL_ENTRY = 1e-2

__all__ = [
    "Direction",
    "HalfWidths",
    "SlabInterval",
    "cube_plane_area",
    "cube_plane_area_2d",
    "cube_plane_area_3d",
    "cube_plane_area_regularized",
    "cube_slab_volume",
    "indicator_convolution",
    "product_all",
    "restrict_to_support",
    "snap_tolerance",
]


def product_all(x) -> float:
    """Product of all entries; 1.0 for an empty vector."""
    return float(np.prod(np.asarray(x, dtype=float)))


def restrict_to_support(x) -> np.ndarray:
    """Return the nonzero entries of ``x`` in their original order."""
    x = np.asarray(x, dtype=float)
    return x[x != 0.0]


def snap_tolerance(theta, tol: float = 0.0) -> np.ndarray:
    """Set entries with ``|theta_j| <= tol`` to exact zero.

    With the default ``tol=0`` the vector is returned unchanged (as a copy).
    """
    theta = np.array(theta, dtype=float)
    if tol > 0:
        theta[np.abs(theta) <= tol] = 0.0
    return theta


@dataclass(frozen=True)
class HalfWidths:
    """Half side lengths ``a`` of the box ``(-a, a]``."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        if a.size < 1:
            raise ValueError("half-widths need at least one entry")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValueError(f"half-widths must be finite and > 0, got {a}")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)

    @property
    def d(self) -> int:
        return self.a.size

    @property
    def volume(self) -> float:
        return 2.0**self.d * product_all(self.a)


@dataclass(frozen=True)
class Direction:
    """A direction vector with its cached support.

    Entries are structurally zero only when exactly ``0.0``; use
    :func:`snap_tolerance` beforehand to round near-zero entries.
    """

    theta: np.ndarray
    support: np.ndarray = field(init=False, repr=False)
    ell: int = field(init=False)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.size < 1 or not np.all(np.isfinite(theta)):
            raise ValueError(f"invalid direction {theta}")
        support = np.flatnonzero(theta != 0.0)
        if support.size == 0:
            raise ValueError("direction must have at least one nonzero entry")
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "ell", int(support.size))

    @classmethod
    def unit(cls, v) -> "Direction":
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot normalise the zero vector")
        return cls(v / norm)

    @property
    def d(self) -> int:
        return self.theta.size

    @property
    def is_unit(self) -> bool:
        return abs(float(np.linalg.norm(self.theta)) - 1.0) <= 1e-12


@dataclass(frozen=True)
class SlabInterval:
    t1: float
    t2: float

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise ValueError(f"slab needs t1 < t2, got ({self.t1}, {self.t2})")


def significant_entries(a, theta) -> np.ndarray:
    """Mask of direction entries kept by the vertex sums.

    Exact zeros are always dropped.  Nonzero entries whose share
    ``|a_j theta_j| / sum(|a * theta|)`` is tiny are handled as zeros, which
    is the continuous limit of the formula; see ``SMALL_ENTRY``.
    """
    b = np.abs(np.asarray(a, dtype=float) * np.asarray(theta, dtype=float))
    total = float(np.sum(b))
    if total == 0.0:
        return b > 0.0
    r = b / total
    m = int(np.count_nonzero((r > 0.0) & (r < SMALL_ENTRY)))
    cut = np.finfo(float).eps ** (1.0 / (m + 1)) if m else 0.0
    return r > cut


def _as_widths(a) -> np.ndarray:
    return a.a if isinstance(a, HalfWidths) else HalfWidths(a).a


def _as_theta(theta) -> np.ndarray:
    return theta.theta if isinstance(theta, Direction) else Direction(theta).theta


class CubeKernel:
    """Vertex data for one (box, direction) pair, reused over many offsets.

    Evaluation always happens at ``-|t|``.  For ``l >= 2`` the section is an
    even continuous function, and on the left half only vertices with
    positive offset contribute, which halves the work and avoids summing
    large cancelling terms beyond the support.  The cumulative volume on the
    right half is obtained from ``volume - G(-t)``.
    """

    def __init__(self, a, theta):
        a = np.asarray(a, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if a.shape != theta.shape:
            raise ValueError(f"dimension mismatch: a has {a.size}, theta has {theta.size}")
        self.d = a.size
        self.ell = int(np.count_nonzero(theta))
        if self.ell > MAX_SUPPORT:
            raise ValueError(f"support size {self.ell} exceeds {MAX_SUPPORT}")
        self.volume = 2.0**self.d * float(np.prod(a))
        mask = significant_entries(a, theta)
        # number of entries actually carried by the vertex sum
        self.order = ell = int(mask.sum())
        b = a[mask] * theta[mask]
        self.support = float(np.sum(np.abs(b)))
        if ell == 0:
            self.offsets = np.zeros(0)
            self.signs = np.zeros(0)
            self.area_const = self.cum_const = 0.0
            return
        # 2^(d-l) P(a) / P(b), written without forming P(a) to avoid overflow
        base = 2.0 ** (self.d - ell) * float(np.prod(a[~mask])) / float(np.prod(theta[mask]))
        corners = np.array(list(itertools.product((-1.0, 1.0), repeat=ell)))
        offsets = corners @ b
        signs = np.prod(corners, axis=1)
        if ell == 1:
            keep = np.ones(2, dtype=bool)
        else:
            keep = offsets > 0.0
        self.offsets = offsets[keep]
        self.signs = signs[keep]
        self.area_const = base / math.factorial(ell - 1)
        self.cum_const = base / math.factorial(ell)

    def _vertex_sum(self, x: np.ndarray, power: int) -> np.ndarray:
        acc = np.zeros_like(x)
        comp = np.zeros_like(x) if self.order >= KAHAN_THRESHOLD else None
        for off, sign in zip(self.offsets, self.signs):
            y = x + off
            if power == 0:
                term = (y > 0.0).astype(float)
            else:
                term = np.where(y > 0.0, y, 0.0) ** power
            term = sign * term
            if comp is None:
                acc += term
            else:
                yk = term - comp
                tk = acc + yk
                comp = (tk - acc) - yk
                acc = tk
        return acc

    def area(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.order == 0:
            raise ValueError("section area is undefined for the zero direction")
        if self.order == 1:
            # (x)_+^0 with 0^0 = 0 gives the half-open indicator of (-|b|, |b|]
            val = self.area_const * self._vertex_sum(t, 0)
            return np.maximum(val, 0.0)
        x = -np.abs(t)
        val = self.area_const * self._vertex_sum(x, self.order - 1)
        val = np.maximum(val, 0.0)
        return np.where(x <= -self.support, 0.0, val)

    def cumulative(self, t) -> np.ndarray:
        """Volume of the box part with ``<x, theta> <= t``."""
        t = np.asarray(t, dtype=float)
        if self.order == 0:
            return np.where(t >= 0.0, self.volume, 0.0)
        x = -np.abs(t)
        left = self.cum_const * self._vertex_sum(x, self.order)
        left = np.clip(left, 0.0, 0.5 * self.volume)
        left = np.where(x <= -self.support, 0.0, left)
        return np.where(t > 0.0, self.volume - left, left)

    def slab(self, t1, t2) -> np.ndarray:
        return self.cumulative(t2) - self.cumulative(t1)


def _scalar_or_array(t, out):
    return float(out) if np.ndim(t) == 0 else out


def cube_plane_area(a, theta, t):
    """Area of the section of ``(-a, a]`` by the hyperplane ``<x, theta> = t``.

    Parameters
    ----------
    a : array_like or HalfWidths
        Positive half-widths.
    theta : array_like or Direction
        Direction; unit norm for a geometric area, any nonzero vector
        otherwise.
    t : float or array_like
        Offsets along ``theta``.

    Returns
    -------
    float or ndarray
        Nonnegative area, exactly zero for ``|t| >= sum(a * |theta|)`` when at
        least two entries of ``theta`` are nonzero.
    """
    kernel = CubeKernel(_as_widths(a), _as_theta(theta))
    return _scalar_or_array(t, kernel.area(t))


def _axis_area(a, theta, j, t):
    # single nonzero entry: 2^(d-1) P(a) / (a_j |theta_j|) on (-|b|, |b|]
    b = abs(a[j] * theta[j])
    scale = 2.0 ** (a.size - 1) * float(np.prod(np.delete(a, j))) / abs(theta[j])
    return np.where((t > -b) & (t <= b), scale, 0.0)


def _check_dim(a, theta, d):
    if a.size != d or theta.size != d:
        raise ValueError(f"expected dimension {d}, got a with {a.size} and theta with {theta.size}")


def _area_2d(a, theta, t):
    corners = np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], dtype=float)
    t1, t2, t3, t4 = np.sort(corners @ (a * theta), kind="stable")
    scale = 1.0 / abs(theta[0] * theta[1])
    out = np.zeros_like(t)
    rising = (t > t1) & (t <= t2)
    plateau = (t > t2) & (t <= t3)
    falling = (t > t3) & (t <= t4)
    out[rising] = t[rising] - t1
    out[plateau] = t2 - t1
    out[falling] = t4 - t[falling]
    return scale * out


def cube_plane_area_2d(a, theta, t):
    """Rectangle section length from the explicit trapezoid form.

    Uses the four sorted corner projections ``t1 <= ... <= t4`` and the
    half-open branches ``(t_i, t_{i+1}]``.
    """
    a = _as_widths(a)
    theta = _as_theta(theta)
    _check_dim(a, theta, 2)
    tt = np.atleast_1d(np.asarray(t, dtype=float)).astype(float)
    nz = np.flatnonzero(significant_entries(a, theta))
    if nz.size == 1:
        out = _axis_area(a, theta, nz[0], tt)
    else:
        out = _area_2d(a, theta, tt)
    return _scalar_or_array(t, out.reshape(np.shape(t)))


def _area_3d_full(a, theta, t):
    # |b| sorted descending; projections of the lowest vertices relative
    # to the minimum carry parities +, -, -, then + only if b1 > b2 + b3.
    b1, b2, b3 = np.sort(np.abs(a * theta))[::-1]
    s = b1 + b2 + b3
    t1 = -s
    t2 = -s + 2 * b3
    t3 = -s + 2 * b2
    if b1 > b2 + b3:
        t4, sigma4 = -s + 2 * (b2 + b3), 1.0
    else:
        t4, sigma4 = -s + 2 * b1, -1.0
    denom = 2.0 * abs(theta[0] * theta[1] * theta[2])
    x = -np.abs(t)
    out = np.zeros_like(x)

    m = (x > t1) & (x <= t2)
    out[m] = (x[m] - t1) ** 2
    m = (x > t2) & (x <= t3)
    out[m] = (t2 - t1) * (2 * x[m] - t2 - t1)
    m = (x > t3) & (x <= t4)
    out[m] = (t2 - t1) * (2 * x[m] - t2 - t1) - (x[m] - t3) ** 2
    m = (x > t4) & (x <= 0)
    out[m] = (t2 - t1) * (2 * x[m] - t2 - t1) - (x[m] - t3) ** 2 + sigma4 * (x[m] - t4) ** 2
    return np.maximum(out / denom, 0.0)


def cube_plane_area_3d(a, theta, t):
    """Box section area in 3D from the explicit quadratic-spline form.

    One nonzero direction entry uses the axis formula, two reduce to the
    rectangle case scaled by the extent ``2 a_j`` of the free axis, and the
    general case evaluates the branches on ``t <= 0`` and reflects.
    """
    a = _as_widths(a)
    theta = _as_theta(theta)
    _check_dim(a, theta, 3)
    tt = np.atleast_1d(np.asarray(t, dtype=float)).astype(float)
    keep = significant_entries(a, theta)
    nz = np.flatnonzero(keep)
    if nz.size == 1:
        out = _axis_area(a, theta, nz[0], tt)
    elif nz.size == 2:
        j = int(np.flatnonzero(~keep)[0])
        out = 2.0 * a[j] * _area_2d(a[nz], theta[nz], tt)
    else:
        out = _area_3d_full(a, theta, tt)
    return _scalar_or_array(t, out.reshape(np.shape(t)))


def cube_slab_volume(a, theta, slab):
    """Volume of ``(-a, a]`` between the hyperplanes at ``t1`` and ``t2``.

    ``slab`` is a :class:`SlabInterval` or a ``(t1, t2)`` pair of scalars
    or broadcastable arrays.
    """
    if isinstance(slab, SlabInterval):
        t1, t2 = slab.t1, slab.t2
    else:
        t1, t2 = slab
        if np.any(np.asarray(t1) >= np.asarray(t2)):
            raise ValueError("slab needs t1 < t2")
    kernel = CubeKernel(_as_widths(a), _as_theta(theta))
    out = kernel.slab(t1, t2)
    return float(out) if np.ndim(out) == 0 else out


def cube_plane_area_regularized(a, theta, t, eps: float):
    """Slab average ``V(t - eps, t + eps) / (2 eps)``."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    kernel = CubeKernel(_as_widths(a), _as_theta(theta))
    t_arr = np.asarray(t, dtype=float)
    out = kernel.slab(t_arr - eps, t_arr + eps) / (2.0 * eps)
    return _scalar_or_array(t, out)


def indicator_convolution(b, t):
    """k-fold convolution of the indicators of ``(-b_j, b_j]``.

    The convolution carries the ``(2 pi)^(-1/2)`` factor, so the result is
    ``(2 pi)^((1-k)/2) / (k-1)!`` times the signed vertex sum.
    """
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size == 0:
        raise ValueError("need at least one width")
    if np.any(b <= 0) or not np.all(np.isfinite(b)):
        raise ValueError(f"widths must be finite and > 0, got {b}")
    k = b.size
    # box (-b, b] cut by <x, e> = t: the prefactor P(b) / P(b * e) is 1
    kernel = CubeKernel(b, np.ones(k))
    scale = (2.0 * math.pi) ** ((1 - k) / 2)
    area = kernel.area(t)
    return _scalar_or_array(t, scale * area)
