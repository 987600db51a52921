"""Direction sets on the circle, the 2-sphere and the 3-sphere."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DirectionSet",
    "circle_equispaced",
    "explicit",
    "fibonacci_sphere",
    "inverse_normal_cdf",
    "parse_direction_spec",
    "sobol_points",
    "sobol_sphere_s3",
    "spherical_grid",
    "write_directions_csv",
]

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
SCHEMES = ("circle_equispaced", "spherical_grid", "fibonacci", "sobol_gaussian", "explicit")


@dataclass(frozen=True)
class DirectionSet:
    """Unit vectors stored row-wise in ``points`` (shape ``(n, d)``).

    ``grid_index`` is only set for spherical grids; it maps the full
    ``(n1, n2)`` angle grid onto rows of ``points`` (the poles are stored
    once but appear in every column of the grid).
    """

    points: np.ndarray
    scheme: str = "explicit"
    grid_index: np.ndarray | None = None
    angles: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 0:
            raise ValueError("direction set is empty")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("all directions must have unit norm")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("direction set contains duplicates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


def _snap(v):
    # cos/sin at multiples of pi/2 leave ~1e-16 residues; those entries are
    # exactly zero and are stored as such
    v = np.asarray(v, dtype=float)
    return np.where(np.abs(v) < 1e-15, 0.0, v)


def _check_count(n, what="n"):
    if int(n) != n or n < 1:
        raise ValueError(f"{what} must be a positive integer, got {n}")
    return int(n)


def explicit(points) -> DirectionSet:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return DirectionSet(pts / np.linalg.norm(pts, axis=1, keepdims=True), "explicit")


def circle_equispaced(n) -> DirectionSet:
    """``n`` equispaced angles on the half circle, ``pi i / n``."""
    n = _check_count(n)
    ang = math.pi * np.arange(n) / n
    pts = np.stack([_snap(np.cos(ang)), _snap(np.sin(ang))], axis=1)
    return DirectionSet(pts, "circle_equispaced")


def _sphere_point(phi1, phi2):
    phi1, phi2 = np.broadcast_arrays(phi1, phi2)
    s2 = np.sin(phi2)
    return np.stack([np.sin(phi1) * s2, np.cos(phi1) * s2, np.cos(phi2)], axis=-1)


def spherical_grid(n1, n2) -> DirectionSet:
    """Uniform grid in the spherical angles.

    ``phi1 = 2 pi i / n1`` and ``phi2 = pi j / (n2 - 1)`` (``phi2 = 0`` when
    ``n2 = 1``), mapped to ``(sin phi1 sin phi2, cos phi1 sin phi2, cos phi2)``.
    Both poles are kept once.  Rows follow ``j`` outer, ``i`` inner.
    """
    n1 = _check_count(n1, "n1")
    n2 = _check_count(n2, "n2")
    phi1 = 2 * math.pi * np.arange(n1) / n1
    phi2 = math.pi * np.arange(n2) / (n2 - 1) if n2 > 1 else np.zeros(1)
    full = _snap(_sphere_point(phi1[:, None], phi2[None, :]))
    index = np.empty((n1, n2), dtype=np.int64)
    rows = []
    for j in range(n2):
        pole = j == 0 or (n2 > 1 and j == n2 - 1)
        if pole:
            index[:, j] = len(rows)
            rows.append(full[0, j])
            continue
        for i in range(n1):
            index[i, j] = len(rows)
            rows.append(full[i, j])
    return DirectionSet(np.array(rows), "spherical_grid", grid_index=index, angles=(phi1, phi2))


def fibonacci_sphere(n) -> DirectionSet:
    """Golden-angle spiral with ``z_i = 1 - (2i - 1)/n`` for ``i = 1..n``."""
    n = _check_count(n)
    i = np.arange(1, n + 1)
    z = 1.0 - (2.0 * i - 1.0) / n
    r = np.sqrt((1.0 - z) * (1.0 + z))
    phi1 = i * GOLDEN_ANGLE
    pts = np.stack([np.sin(phi1) * r, np.cos(phi1) * r, z], axis=1)
    return DirectionSet(pts, "fibonacci")


# Joe-Kuo direction numbers for the first four dimensions: (s, a, m)
SOBOL_PARAMS = [None, (1, 0, (1,)), (2, 1, (1, 3)), (3, 1, (1, 3, 1))]
SOBOL_BITS = 32


def _direction_numbers(dim):
    """``v[k] = m_k 2^(bits - k)`` for one coordinate, ``k = 1..bits``."""
    bits = SOBOL_BITS
    v = [0] * (bits + 1)
    if SOBOL_PARAMS[dim] is None:
        for k in range(1, bits + 1):
            v[k] = 1 << (bits - k)
        return v
    s, a, m = SOBOL_PARAMS[dim]
    for k in range(1, s + 1):
        v[k] = m[k - 1] << (bits - k)
    for k in range(s + 1, bits + 1):
        val = v[k - s] ^ (v[k - s] >> s)
        for j in range(1, s):
            if (a >> (s - 1 - j)) & 1:
                val ^= v[k - j]
        v[k] = val
    return v


def sobol_points(n, start=0, dims=4) -> np.ndarray:
    """Unscrambled Sobol points with indices ``start .. start + n - 1``.

    Points follow the Gray-code order, so index 0 is the origin and index 1
    is ``(1/2, ..., 1/2)``.
    """
    if dims > len(SOBOL_PARAMS):
        raise ValueError(f"only {len(SOBOL_PARAMS)} dimensions are tabulated")
    total = start + n
    if total > 2**SOBOL_BITS:
        raise ValueError("too many Sobol points requested")
    vs = [_direction_numbers(k) for k in range(dims)]
    x = [0] * dims
    out = np.empty((n, dims))
    for idx in range(total):
        if idx >= start:
            out[idx - start] = [xi / 2.0**SOBOL_BITS for xi in x]
        # lowest zero bit of idx selects the direction number for idx + 1
        c = 1
        while (idx >> (c - 1)) & 1:
            c += 1
        for k in range(dims):
            x[k] ^= vs[k][c]
    return out


# rational approximation coefficients for the inverse normal CDF
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _ppf_lower(p):
    # valid for 0 < p <= 1/2
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    # one Halley step on Phi(x) - p
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def inverse_normal_cdf(p):
    """Quantile of the standard normal law for ``0 < p < 1``.

    The upper half uses the reflection ``-ppf(1 - p)``; ``1 - p`` is exact
    there, so accuracy is kept in both tails.
    """
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise ValueError("p must lie strictly between 0 and 1")
    flat = arr.reshape(-1)
    out = np.empty_like(flat)
    for i, v in enumerate(flat):
        if v == 0.5:
            out[i] = 0.0
        elif v < 0.5:
            out[i] = _ppf_lower(v)
        else:
            out[i] = -_ppf_lower(1.0 - v)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def sobol_sphere_s3(n, seed_skip=1) -> DirectionSet:
    """Quasi-uniform points on the 3-sphere from Gaussian-mapped Sobol points.

    Sobol indices start at ``seed_skip`` (at least 1, which drops the origin).
    A point whose mapped vector is zero, such as ``(1/2, 1/2, 1/2, 1/2)``, is
    skipped and the next index is used instead.
    """
    n = _check_count(n)
    if seed_skip < 1:
        raise ValueError("seed_skip must be at least 1 to avoid the origin")
    pts = []
    idx = seed_skip
    while len(pts) < n:
        batch = sobol_points(2 * (n - len(pts)) + 2, start=idx)
        idx += batch.shape[0]
        for u in batch:
            g = inverse_normal_cdf(u)
            norm = math.sqrt(float(np.dot(g, g)))
            if norm == 0.0:
                continue
            pts.append(g / norm)
            if len(pts) == n:
                break
    return DirectionSet(np.array(pts), "sobol_gaussian")


def parse_direction_spec(spec: str) -> DirectionSet:
    """``fibonacci:n``, ``grid:n1,n2``, ``circle:n`` or ``sobol:n``."""
    try:
        kind, arg = spec.split(":", 1)
        if kind == "fibonacci":
            return fibonacci_sphere(int(arg))
        if kind == "circle":
            return circle_equispaced(int(arg))
        if kind == "sobol":
            return sobol_sphere_s3(int(arg))
        if kind == "grid":
            n1, n2 = (int(x) for x in arg.split(","))
            return spherical_grid(n1, n2)
    except ValueError as exc:
        raise ValueError(f"bad direction spec {spec!r}: {exc}") from None
    raise ValueError(f"bad direction spec {spec!r}: unknown kind")


def write_directions_csv(target, dirs: DirectionSet, header_line=None) -> None:
    lines = [header_line.rstrip("\n")] if header_line else []
    lines.append("index," + ",".join(f"x{k + 1}" for k in range(dirs.d)))
    for i, p in enumerate(dirs.points):
        lines.append(f"{i}," + ",".join(f"{v:.17g}" for v in p))
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w") as fh:
            fh.write(text)
