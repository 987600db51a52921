"""Voxel images and their exact discrete Radon transform.

A voxel image is a piecewise constant function: voxel ``n`` (half-integer
centred multi-index) carries the value ``F(n)`` on the cube of side ``s``
centred at ``s * n``.  Its Radon transform is a shifted sum of cube
sections, each evaluated with the closed-form kernel of
:mod:`hyperradon.geometry`.
"""

from __future__ import annotations

import io
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import CubeKernel

__all__ = [
    "RvoxFormatError",
    "Sinogram",
    "VoxelImage",
    "binned_radon",
    "default_eps",
    "default_radii",
    "discrete_radon",
    "discrete_radon_regularized",
    "discrete_slab_volume",
    "read_rvox",
    "read_sinogram_csv",
    "sinogram",
    "write_rvox",
    "write_sinogram_csv",
]

RVOX_MAGIC = b"RVOX"
RVOX_VERSION = 1
DEFAULT_NUM_RADII = 513
# voxels per accumulation block; fixed so summation order never depends on
# pruning or on the thread schedule
BLOCK = 1 << 15


@dataclass(frozen=True)
class VoxelImage:
    """Piecewise constant image on a centred regular grid.

    Parameters
    ----------
    values : ndarray
        Array of shape ``extents``; C order means the last axis runs fastest.
    voxel_size : float
        Edge length ``s`` of every voxel.
    """

    values: np.ndarray
    voxel_size: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim < 1 or v.size == 0:
            raise ValueError("voxel image needs at least one voxel")
        if not np.all(np.isfinite(v)):
            raise ValueError("voxel values must be finite")
        s = float(self.voxel_size)
        if not s > 0.0:
            raise ValueError(f"voxel size must be positive, got {s}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "voxel_size", s)

    @classmethod
    def from_flat(cls, flat, extents, voxel_size=1.0) -> "VoxelImage":
        flat = np.asarray(flat, dtype=float)
        extents = tuple(int(n) for n in extents)
        if flat.size != math.prod(extents):
            raise ValueError(f"{flat.size} values do not fill extents {extents}")
        return cls(flat.reshape(extents), voxel_size)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def extents(self) -> tuple:
        return self.values.shape

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.extents[axis]
        return self.voxel_size * (np.arange(n) - (n - 1) / 2.0)

    def centers(self) -> np.ndarray:
        """Voxel centres, shape ``(num_voxels, d)`` in storage order."""
        grids = np.meshgrid(*[self.axis_centers(i) for i in range(self.d)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def mass(self) -> float:
        return self.voxel_size**self.d * float(np.sum(self.values))

    def projections(self, theta) -> np.ndarray:
        """``s <n, theta>`` for every voxel, in storage order."""
        theta = _theta_for(self, theta)
        p = np.zeros(self.extents)
        for i in range(self.d):
            shape = [1] * self.d
            shape[i] = self.extents[i]
            p = p + (self.axis_centers(i) * theta[i]).reshape(shape)
        return p.ravel()


@dataclass(frozen=True)
class Sinogram:
    """Radon samples: ``values[i, j]`` belongs to ``directions[i]``, ``radii[j]``."""

    directions: np.ndarray
    radii: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        radii = np.asarray(self.radii, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (dirs.shape[0], radii.size):
            raise ValueError(f"values shape {vals.shape} does not match grids {(dirs.shape[0], radii.size)}")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", vals)


def _theta_for(image: VoxelImage, theta) -> np.ndarray:
    theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
    if theta.shape != (image.d,):
        raise ValueError(f"dimension mismatch: image has d={image.d}, theta has shape {theta.shape}")
    if not np.any(theta):
        raise ValueError("theta must be nonzero")
    return theta


def _direction_array(directions, d) -> np.ndarray:
    dirs = getattr(directions, "points", directions)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    if dirs.shape[0] == 0:
        raise ValueError("direction set is empty")
    if dirs.shape[1] != d:
        raise ValueError(f"directions have dimension {dirs.shape[1]}, image has {d}")
    return dirs


def _row(image: VoxelImage, theta, radii, eps=None, prune=True) -> np.ndarray:
    """Transform along one direction at every radius.

    Active voxels are visited in increasing projection order.  With pruning
    each voxel only touches the radii inside its kernel support, which is
    found by binary search on the sorted radius grid; without pruning every
    voxel touches every radius.  Skipped pairs contribute exact zeros, so
    both modes agree bitwise.
    """
    theta = _theta_for(image, theta)
    radii = np.asarray(radii, dtype=float)
    out = np.zeros(radii.size)
    flat = image.flat
    active = np.flatnonzero(flat)
    if active.size == 0 or radii.size == 0:
        return out
    proj = image.projections(theta)[active]
    order = np.argsort(proj, kind="stable")
    proj = proj[order]
    weight = flat[active][order]
    kernel = CubeKernel(np.full(image.d, image.voxel_size / 2.0), theta)
    reach = kernel.support if eps is None else kernel.support + eps
    if prune:
        sorted_radii = np.all(np.diff(radii) >= 0)
        if not sorted_radii:
            raise ValueError("radii must be sorted ascending")
    for start in range(0, proj.size, BLOCK):
        p = proj[start:start + BLOCK]
        w = weight[start:start + BLOCK]
        if prune:
            lo = np.searchsorted(radii, p - reach, side="left")
            hi = np.searchsorted(radii, p + reach, side="right")
        else:
            lo = np.zeros(p.size, dtype=np.int64)
            hi = np.full(p.size, radii.size, dtype=np.int64)
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(p.size), counts)
        # position of each pair inside its voxel's radius range
        step = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        tidx = lo[owner] + step
        u = radii[tidx] - p[owner]
        if eps is None:
            k = kernel.area(u)
        else:
            k = kernel.slab(u - eps, u + eps) / (2.0 * eps)
        out += np.bincount(tidx, weights=w[owner] * k, minlength=radii.size)
    return out


def discrete_radon(F: VoxelImage, theta, t, prune=True):
    """Exact Radon transform of a voxel image.

    Parameters
    ----------
    F : VoxelImage
    theta : array_like or Direction
        Unit direction.
    t : float or array_like
        Offsets, sorted ascending when an array is given.
    prune : bool
        Skip voxels whose section at ``t`` is known to vanish.

    Returns
    -------
    float or ndarray
    """
    scalar = np.ndim(t) == 0
    vals = _row(F, theta, np.atleast_1d(np.asarray(t, dtype=float)), None, prune)
    return float(vals[0]) if scalar else vals


def discrete_radon_regularized(F: VoxelImage, theta, t, eps, prune=True):
    """Slab average ``V(t - eps, t + eps) / (2 eps)`` of the voxel image."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    scalar = np.ndim(t) == 0
    vals = _row(F, theta, np.atleast_1d(np.asarray(t, dtype=float)), float(eps), prune)
    return float(vals[0]) if scalar else vals


def discrete_slab_volume(F: VoxelImage, theta, t1, t2) -> float:
    """Integral of the image over the slab ``t1 <= <x, theta> <= t2``."""
    if not t1 < t2:
        raise ValueError(f"empty slab: t1={t1} is not below t2={t2}")
    theta = _theta_for(F, theta)
    flat = F.flat
    active = np.flatnonzero(flat)
    if active.size == 0:
        return 0.0
    proj = F.projections(theta)[active]
    kernel = CubeKernel(np.full(F.d, F.voxel_size / 2.0), theta)
    return float(np.dot(flat[active], kernel.slab(t1 - proj, t2 - proj)))


def default_radii(F: VoxelImage, count: int = DEFAULT_NUM_RADII) -> np.ndarray:
    """Equispaced offsets covering the support along every direction."""
    rmax = F.voxel_size * math.sqrt(F.d) * max(F.extents) / 2.0
    return np.linspace(-rmax, rmax, count)


def default_eps(radii) -> float:
    """Half the spacing of an equispaced radius grid."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2:
        raise ValueError("need at least two radii to derive a spacing")
    return 0.5 * (radii[-1] - radii[0]) / (radii.size - 1)


def sinogram(F: VoxelImage, directions, radii=None, eps=None, threads=None, prune=True) -> Sinogram:
    """Evaluate the discrete transform on a direction by radius grid.

    Rows are independent and may be computed concurrently; each row has a
    fixed summation order, so the result does not depend on ``threads``.

    Parameters
    ----------
    F : VoxelImage
    directions : array_like, shape (m, d), or a direction set
    radii : array_like, optional
        Sorted offsets; defaults to :func:`default_radii`.
    eps : float or "auto", optional
        Slab half-width for the regularised transform; ``"auto"`` uses half
        the radius spacing.  ``None`` gives the sharp transform.
    threads : int, optional
        Worker count; ``None`` or 1 runs serially.
    """
    dirs = _direction_array(directions, F.d)
    radii = default_radii(F) if radii is None else np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radius grid is empty")
    if np.any(np.diff(radii) < 0):
        raise ValueError("radii must be sorted ascending")
    if isinstance(eps, str):
        if eps != "auto":
            raise ValueError(f"unknown eps setting {eps!r}")
        eps = default_eps(radii)
    if eps is not None and not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")

    def one(theta):
        return _row(F, theta, radii, eps, prune)

    if threads is None or threads <= 1 or dirs.shape[0] == 1:
        rows = [one(th) for th in dirs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, dirs))
    return Sinogram(dirs, radii, np.array(rows).reshape(dirs.shape[0], radii.size))


def binned_radon(F: VoxelImage, theta, radii, bin_halfwidth) -> np.ndarray:
    """Centre-projection binning baseline.

    Sums the values of voxels whose centre projects within ``b`` of each
    radius, scaled by ``s**(d-1) * s / (2 b)`` so that the result carries the
    same units and mass as the exact transform.
    """
    b = float(bin_halfwidth)
    if not b > 0:
        raise ValueError(f"bin half-width must be positive, got {b}")
    theta = _theta_for(F, theta)
    radii = np.asarray(radii, dtype=float)
    flat = F.flat
    active = np.flatnonzero(flat)
    out = np.zeros(radii.size)
    if active.size == 0:
        return out
    proj = F.projections(theta)[active]
    order = np.argsort(proj, kind="stable")
    proj = proj[order]
    csum = np.concatenate([[0.0], np.cumsum(flat[active][order])])
    lo = np.searchsorted(proj, radii - b, side="right")
    hi = np.searchsorted(proj, radii + b, side="left")
    out = csum[hi] - csum[lo]
    s = F.voxel_size
    return out * s ** (F.d - 1) * s / (2.0 * b)


class RvoxFormatError(ValueError):
    """Malformed RVOX data; carries the file name and byte offset."""

    def __init__(self, path, offset, message):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path}: byte {offset}: {message}")


def write_rvox(path, image: VoxelImage) -> None:
    """Write ``image`` in the little-endian RVOX layout."""
    head = RVOX_MAGIC + struct.pack("<II", RVOX_VERSION, image.d)
    head += struct.pack(f"<{image.d}I", *image.extents)
    head += struct.pack("<d", image.voxel_size)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(image.values, dtype="<f8").tobytes())


def read_rvox(path) -> VoxelImage:
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise RvoxFormatError(path, pos, f"truncated while reading {what} ({len(data) - pos} of {n} bytes left)")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != RVOX_MAGIC:
        raise RvoxFormatError(path, 0, "bad magic, expected b'RVOX'")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != RVOX_VERSION:
        raise RvoxFormatError(path, 4, f"unsupported version {version}")
    (d,) = struct.unpack("<I", take(4, "dimension"))
    if d == 0:
        raise RvoxFormatError(path, 8, "dimension must be at least 1")
    extents = struct.unpack(f"<{d}I", take(4 * d, "extents"))
    if 0 in extents:
        raise RvoxFormatError(path, 12, f"zero extent in {extents}")
    s_off = pos
    (s,) = struct.unpack("<d", take(8, "voxel size"))
    if not (math.isfinite(s) and s > 0):
        raise RvoxFormatError(path, s_off, f"voxel size must be positive, got {s}")
    n = math.prod(extents)
    v_off = pos
    values = np.frombuffer(take(8 * n, "values"), dtype="<f8").astype(float)
    if pos != len(data):
        raise RvoxFormatError(path, pos, f"{len(data) - pos} trailing bytes")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise RvoxFormatError(path, v_off + 8 * int(bad[0]), "non-finite voxel value")
    return VoxelImage(values.reshape(extents), s)


def write_sinogram_csv(target, sino: Sinogram, header_line=None) -> None:
    """Write ``theta_index,t,value`` rows with 17 significant digits."""
    buf = io.StringIO()
    if header_line:
        buf.write(header_line.rstrip("\n") + "\n")
    buf.write("theta_index,t,value\n")
    for i in range(sino.values.shape[0]):
        for t, v in zip(sino.radii, sino.values[i]):
            buf.write(f"{i},{t:.17g},{v:.17g}\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w") as fh:
            fh.write(text)


def read_sinogram_csv(path):
    """Read a sinogram CSV back as ``(theta_index, radii, values)``."""
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("theta_index"):
                continue
            i, t, v = line.strip().split(",")
            rows.append((int(i), float(t), float(v)))
    idx = np.array([r[0] for r in rows])
    m = int(idx.max()) + 1
    radii = np.array([r[1] for r in rows if r[0] == 0])
    values = np.array([r[2] for r in rows]).reshape(m, radii.size)
    return np.arange(m), radii, values
