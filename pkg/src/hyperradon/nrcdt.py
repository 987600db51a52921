"""Quantile profiles of projections and their normalised maxima.

For each direction the projection is turned into a CDF over the radius
grid and inverted at fixed levels ``xi``.  Standardising a profile to mean
0 and standard deviation 1 removes shifts and scalings along the
direction; the pointwise maximum over directions is invariant under
affine maps of the image.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .voxel import Sinogram, VoxelImage, sinogram

__all__ = [
    "DEFAULT_LEVELS",
    "DegenerateProjectionError",
    "DiscreteCDF",
    "QuantileProfile",
    "cdf_from_projection",
    "image_max_nrcdt",
    "max_nrcdt",
    "nrcdt",
    "quantile",
    "rcdt",
    "write_profile_csv",
    "xi_grid",
]

DEFAULT_LEVELS = 256
MIN_STD = 1e-12


class DegenerateProjectionError(ValueError):
    """Projection without mass or without spread along the radius axis."""


@dataclass(frozen=True)
class DiscreteCDF:
    t_grid: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        c = np.asarray(self.cdf, dtype=float)
        if t.ndim != 1 or t.shape != c.shape or t.size < 2:
            raise ValueError("t_grid and cdf must be matching 1D arrays of length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be strictly increasing")
        if np.any(np.diff(c) < 0) or c[0] < 0 or abs(c[-1] - 1.0) > 1e-9:
            raise ValueError("cdf must be nondecreasing from >= 0 up to 1")
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "cdf", c)


@dataclass(frozen=True)
class QuantileProfile:
    xi_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if xi.shape != v.shape or xi.ndim != 1:
            raise ValueError("xi_grid and values must be matching 1D arrays")
        if np.any(np.diff(v) < 0):
            raise ValueError("quantile profile must be nondecreasing")
        object.__setattr__(self, "xi_grid", xi)
        object.__setattr__(self, "values", v)


def xi_grid(L: int = DEFAULT_LEVELS) -> np.ndarray:
    """Midpoints ``(2i - 1) / (2L)``, ``i = 1..L``."""
    if L < 1:
        raise ValueError("L must be positive")
    return (2.0 * np.arange(1, L + 1) - 1.0) / (2.0 * L)


def cdf_from_projection(radii, projection_values) -> DiscreteCDF:
    """Normalised cumulative trapezoidal integral of a projection.

    Raises
    ------
    DegenerateProjectionError
        If the projection carries no mass.
    """
    t = np.asarray(radii, dtype=float)
    p = np.asarray(projection_values, dtype=float)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError("radii and projection values must be matching 1D arrays")
    if np.any(p < 0):
        raise ValueError("projection values must be nonnegative")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(t))])
    total = cum[-1]
    if not total > 0:
        raise DegenerateProjectionError("projection has no mass")
    c = np.maximum.accumulate(np.clip(cum / total, 0.0, 1.0))
    c[-1] = 1.0
    return DiscreteCDF(t, c)


def quantile(cdf: DiscreteCDF, xi, interpolate: bool = True):
    """Generalised inverse of a discrete CDF.

    The crossing index is the first grid point whose CDF exceeds ``xi``.
    With ``interpolate`` the result is linear inside the crossing cell,
    otherwise it is that grid point.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any((xi_arr <= 0) | (xi_arr >= 1)):
        raise ValueError("xi must lie in (0, 1)")
    t, c = cdf.t_grid, cdf.cdf
    k = np.minimum(np.searchsorted(c, xi_arr, side="right"), t.size - 1)
    if not interpolate:
        out = t[k]
    else:
        # an atom at the first grid point has no cell below it
        j = np.maximum(k, 1)
        c0, c1 = c[j - 1], c[j]
        # c0 <= xi < c1 inside the crossing cell
        frac = np.where(c1 > c0, (xi_arr - c0) / np.where(c1 > c0, c1 - c0, 1.0), 1.0)
        out = np.where(k == 0, t[0], t[j - 1] + np.clip(frac, 0.0, 1.0) * (t[j] - t[j - 1]))
    return float(out) if np.ndim(out) == 0 else out


def rcdt(radii, projection_values, levels=None, interpolate: bool = True) -> np.ndarray:
    """Quantiles of one projection at ``levels`` (default :func:`xi_grid`)."""
    levels = xi_grid() if levels is None else np.asarray(levels, dtype=float)
    return quantile(cdf_from_projection(radii, projection_values), levels, interpolate)


def _standardise(q):
    # midpoint rule on the equispaced levels: uniform weights
    mean = float(np.mean(q))
    std = float(np.sqrt(np.mean((q - mean) ** 2)))
    if std < MIN_STD:
        raise DegenerateProjectionError(f"projection spread {std:.3g} is below {MIN_STD}")
    return (q - mean) / std


def nrcdt(S: Sinogram, direction_index: int, levels=None, interpolate: bool = True) -> QuantileProfile:
    """Standardised quantile profile of one sinogram row.

    Raises
    ------
    DegenerateProjectionError
        If the row has no mass, is positive at fewer than two radii (a
        point mass at grid resolution) or has spread below ``MIN_STD``.
    """
    levels = xi_grid() if levels is None else np.asarray(levels, dtype=float)
    row = S.values[direction_index]
    if np.count_nonzero(row > 0) < 2:
        raise DegenerateProjectionError("projection is concentrated on a single radius")
    q = rcdt(S.radii, row, levels, interpolate)
    return QuantileProfile(levels, _standardise(q))


def max_nrcdt(S: Sinogram, levels=None, interpolate: bool = True) -> QuantileProfile:
    """Pointwise maximum of the standardised profiles over all directions.

    Degenerate directions are skipped with a warning.
    """
    levels = xi_grid() if levels is None else np.asarray(levels, dtype=float)
    best = None
    skipped = 0
    for i in range(S.values.shape[0]):
        try:
            v = nrcdt(S, i, levels, interpolate).values
        except DegenerateProjectionError:
            skipped += 1
            continue
        best = v if best is None else np.maximum(best, v)
    if best is None:
        raise DegenerateProjectionError("all directions are degenerate")
    if skipped:
        warnings.warn(f"skipped {skipped} degenerate direction(s)", RuntimeWarning, stacklevel=2)
    return QuantileProfile(levels, best)


def image_max_nrcdt(F: VoxelImage, directions, radii=None, eps=None, levels=None, threads=None) -> QuantileProfile:
    """Sinogram of ``F`` followed by :func:`max_nrcdt`."""
    return max_nrcdt(sinogram(F, directions, radii, eps=eps, threads=threads), levels)


def write_profile_csv(target, profile: QuantileProfile, header_line=None) -> None:
    buf = io.StringIO()
    if header_line:
        buf.write(header_line.rstrip("\n") + "\n")
    buf.write("xi,value\n")
    for x, v in zip(profile.xi_grid, profile.values):
        buf.write(f"{x:.17g},{v:.17g}\n")
    if hasattr(target, "write"):
        target.write(buf.getvalue())
    else:
        with open(target, "w") as fh:
            fh.write(buf.getvalue())
