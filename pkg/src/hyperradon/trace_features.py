"""Trace-transform features of 3D sinogram tensors.

A tensor ``R[t, phi1, phi2]`` is reduced to a scalar by three scalar
functionals applied one axis at a time.  Each of the 51 extractors fixes
an axis order and a triple of functionals.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .directions import spherical_grid
from .voxel import VoxelImage, sinogram

__all__ = [
    "AXES",
    "ExtractorSpec",
    "SinogramTensor3",
    "TABLE_I",
    "extract_features",
    "functional",
    "trace_tensor",
    "write_features_csv",
]

AXES = ("t", "phi1", "phi2")


def _f1(g, axis):
    return np.max(g, axis=axis)


def _f2(g, axis):
    # no wrap-around term, also on the periodic phi1 axis
    return 0.5 * np.sum(np.abs(np.diff(g, axis=axis)), axis=axis)


def _f3(g, axis):
    return np.sum(g, axis=axis)


def _f4(g, axis):
    return np.max(g, axis=axis) - np.min(g, axis=axis)


_FUNCTIONALS = {1: _f1, 2: _f2, 3: _f3, 4: _f4}


def functional(i: int, g, axis: int = 0):
    """Scalar functional ``F_i`` along ``axis``.

    ``F1`` max, ``F2`` half the total variation, ``F3`` sum, ``F4`` range.
    """
    if i not in _FUNCTIONALS:
        raise ValueError(f"functional index must be 1..4, got {i}")
    g = np.asarray(g, dtype=float)
    if g.ndim == 0 or g.shape[axis] == 0:
        raise ValueError("functional needs a nonempty vector")
    return _FUNCTIONALS[i](g, axis)


@dataclass(frozen=True)
class ExtractorSpec:
    """Axis order ``perm`` (names from ``AXES``) and functionals ``(i1, i2, i3)``.

    ``F_i1`` consumes ``perm[0]``, ``F_i2`` consumes ``perm[1]`` and
    ``F_i3`` the last axis.
    """

    perm: tuple
    triple: tuple

    def __post_init__(self):
        if sorted(self.perm) != sorted(AXES):
            raise ValueError(f"perm must order {AXES}, got {self.perm}")
        if len(self.triple) != 3 or any(i not in _FUNCTIONALS for i in self.triple):
            raise ValueError(f"bad functional triple {self.triple}")

    def label(self) -> str:
        return f"{','.join(self.perm)}:{''.join(map(str, self.triple))}"


_COLUMNS = [
    (("t", "phi1", "phi2"), "111 112 114 121 131 134 141 142 211 214 234 241 242 312 314 321 341"),
    (("t", "phi2", "phi1"), "112 113 114 121 124 141 143 211 213 214 222 241 243 311 324 344"),
    (("phi2", "t", "phi1"), "114 121 124 211 221 311 312 314 324 334"),
    (("phi1", "t", "phi2"), "114 121 131 132 211 221 311 321"),
]

# column by column, rows top to bottom within a column
TABLE_I = tuple(
    ExtractorSpec(perm, tuple(int(ch) for ch in code)) for perm, codes in _COLUMNS for code in codes.split()
)


@dataclass(frozen=True)
class SinogramTensor3:
    """Radon samples indexed ``[t, phi1, phi2]`` with their grids."""

    values: np.ndarray
    t_grid: np.ndarray
    phi1_grid: np.ndarray
    phi2_grid: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        shape = (len(self.t_grid), len(self.phi1_grid), len(self.phi2_grid))
        if v.shape != shape:
            raise ValueError(f"tensor shape {v.shape} does not match grids {shape}")
        object.__setattr__(self, "values", v)


def _apply(values, spec: ExtractorSpec):
    order = [AXES.index(name) for name in spec.perm]
    g = np.transpose(values, order)
    i1, i2, i3 = spec.triple
    g = functional(i1, g, axis=0)
    g = functional(i2, g, axis=0)
    return float(functional(i3, g, axis=0))


def extract_features(S, specs=TABLE_I) -> np.ndarray:
    """All extractor values of a tensor, in ``specs`` order (51 by default)."""
    values = S.values if isinstance(S, SinogramTensor3) else np.asarray(S, dtype=float)
    if values.ndim != 3 or 0 in values.shape:
        raise ValueError(f"expected a nonempty 3D tensor, got shape {values.shape}")
    return np.array([_apply(values, spec) for spec in specs])


def trace_tensor(F: VoxelImage, n1: int, n2: int, n_radii: int, eps=None, threads=None) -> SinogramTensor3:
    """Sample the transform of a 3D image on a spherical angle grid.

    Radii are equispaced on ``[-sqrt(3)/2, sqrt(3)/2]``; poles are computed
    once and copied across the ``phi1`` axis.
    """
    if F.d != 3:
        raise ValueError("trace tensors need a 3D image")
    dirs = spherical_grid(n1, n2)
    r = math.sqrt(3.0) / 2.0
    radii = np.linspace(-r, r, n_radii)
    sino = sinogram(F, dirs.points, radii, eps=eps, threads=threads)
    vals = sino.values[dirs.grid_index]  # (n1, n2, radii)
    phi1, phi2 = dirs.angles
    return SinogramTensor3(np.transpose(vals, (2, 0, 1)), radii, phi1, phi2)


def write_features_csv(target, sample_ids, features, header_line=None) -> None:
    features = np.atleast_2d(features)
    buf = io.StringIO()
    if header_line:
        buf.write(header_line.rstrip("\n") + "\n")
    buf.write("sample_id," + ",".join(f"f{k + 1}" for k in range(features.shape[1])) + "\n")
    for sid, row in zip(sample_ids, features):
        buf.write(f"{sid}," + ",".join(f"{v:.17g}" for v in row) + "\n")
    if hasattr(target, "write"):
        target.write(buf.getvalue())
    else:
        with open(target, "w") as fh:
            fh.write(buf.getvalue())
