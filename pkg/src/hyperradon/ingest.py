"""Mesh ingestion, voxelisation, synthetic shapes, affine maps and the
normalising preprocessing chain.

Grids produced here have ``N`` voxels per axis and voxel size ``s = 1/N``,
so they cover the centred unit cube ``[-1/2, 1/2]^d``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .voxel import VoxelImage

__all__ = [
    "AffineMap",
    "AffineRanges",
    "CLASS_AFFINE_RANGES",
    "OffParseError",
    "TriangleMesh",
    "CLASS_TEMPLATES",
    "affine_class_samples",
    "apply_affine_voxels",
    "box_mesh",
    "parse_off",
    "preprocess",
    "random_affine",
    "random_rotation",
    "read_off",
    "sample_two_cluster_cloud",
    "serialize_off",
    "symmetric_eigen",
    "synth_shape",
    "voxelize",
]

SHAPE_KINDS = ("solid_box", "solid_sphere", "hemisphere", "shell", "l_shape")
MARGIN = 0.05
FILL_FRACTION = 0.95
# keeps fill rays off mesh edges and vertices that sit on voxel-centre lines
RAY_JITTER = (math.sqrt(2.0) - 1.0) * 1e-6


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise ValueError("face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def triangles(self) -> np.ndarray:
        """Vertex coordinates per face, shape ``(m, 3, 3)``."""
        return self.vertices[self.faces]

    def translated(self, shift) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(shift, dtype=float), self.faces)


class OffParseError(ValueError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _content_lines(text):
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            yield no, body.split()


def parse_off(text: str) -> TriangleMesh:
    """Parse OFF text; polygons are fan-triangulated from their first vertex.

    The ``OFF`` keyword is optional and may be glued to the counts, as in
    ``OFF490 518 0``.  Extra tokens after a vertex or face (colours) are
    ignored.  Errors report the 1-based line number.
    """
    lines = list(_content_lines(text))
    last_line = len(text.splitlines())
    pos = 0

    def numbers(no, tokens, kind, count):
        try:
            return [kind(tok) for tok in tokens[:count]]
        except ValueError:
            bad = next(tok for tok in tokens[:count] if not _is_number(tok, kind))
            raise OffParseError(no, f"non-numeric token {bad!r}") from None

    if not lines:
        raise OffParseError(1, "empty input")
    no, tokens = lines[0]
    if tokens[0].upper().startswith("OFF"):
        rest = tokens[0][3:]
        tokens = ([rest] if rest else []) + tokens[1:]
        if not tokens:
            pos = 1
            if pos >= len(lines):
                raise OffParseError(last_line + 1, "missing counts line")
            no, tokens = lines[pos]
    if len(tokens) < 2:
        raise OffParseError(no, "counts line needs vertex and face counts")
    nv, nf = numbers(no, tokens, int, 2)
    if nv < 0 or nf < 0:
        raise OffParseError(no, "negative counts")
    pos += 1

    verts = np.empty((nv, 3))
    for k in range(nv):
        if pos >= len(lines):
            raise OffParseError(last_line + 1, f"expected vertex {k + 1} of {nv}, found end of input")
        no, tokens = lines[pos]
        if len(tokens) < 3:
            raise OffParseError(no, f"vertex needs 3 coordinates, got {len(tokens)}")
        verts[k] = numbers(no, tokens, float, 3)
        pos += 1

    tris = []
    for k in range(nf):
        if pos >= len(lines):
            raise OffParseError(last_line + 1, f"expected face {k + 1} of {nf}, found end of input")
        no, tokens = lines[pos]
        (m,) = numbers(no, tokens, int, 1)
        if m < 3 or len(tokens) < m + 1:
            raise OffParseError(no, f"face needs at least 3 indices and {m} listed")
        idx = numbers(no, tokens[1:], int, m)
        for i in idx:
            if not 0 <= i < nv:
                raise OffParseError(no, f"vertex index {i} out of range 0..{nv - 1}")
        for j in range(1, m - 1):
            tris.append((idx[0], idx[j], idx[j + 1]))
        pos += 1
    return TriangleMesh(verts, np.array(tris, dtype=np.int64).reshape(-1, 3))


def _is_number(tok, kind):
    try:
        kind(tok)
        return True
    except ValueError:
        return False


def read_off(path) -> TriangleMesh:
    with open(path) as fh:
        return parse_off(fh.read())


def serialize_off(mesh: TriangleMesh) -> str:
    out = ["OFF", f"{mesh.vertices.shape[0]} {mesh.faces.shape[0]} 0"]
    out += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    out += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    return "\n".join(out) + "\n"


def box_mesh(lo, hi) -> TriangleMesh:
    """Closed triangulated surface of the box ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corners = np.array([[(hi if (k >> j) & 1 else lo)[j] for j in range(3)] for k in range(8)])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return TriangleMesh(corners, np.array(faces))


def _project_interval(tri, axis):
    p = tri @ axis
    return p.min(axis=-1), p.max(axis=-1)


def _triangle_box_overlap(tri, centers, h):
    """Separating-axis test of one triangle against boxes of half-size ``h``.

    ``tri`` is ``(3, 3)``; ``centers`` is ``(k, 3)``.  Touching counts as
    overlap.  Degenerate triangles lose the normal axis but keep the edge
    axes, so segments and points are handled.
    """
    v = tri[None, :, :] - centers[:, None, :]
    hit = np.ones(centers.shape[0], dtype=bool)
    for j in range(3):
        hit &= (v[:, :, j].min(axis=1) <= h) & (v[:, :, j].max(axis=1) >= -h)
    edges = [tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]]
    normal = np.cross(edges[0], edges[1])
    axes = [normal] + [np.cross(e, ax) for e in edges for ax in np.eye(3)]
    for axis in axes:
        if not np.any(axis):
            continue
        p = v @ axis
        r = h * np.sum(np.abs(axis))
        hit &= (p.min(axis=1) <= r) & (p.max(axis=1) >= -r)
    return hit


def _surface_voxels(tris, n, s):
    occ = np.zeros((n, n, n), dtype=bool)
    half = s / 2.0
    centers = s * (np.arange(n) - (n - 1) / 2.0)
    for tri in tris:
        lo = np.clip(np.floor((tri.min(axis=0) + 0.5) / s - 1e-9).astype(int), 0, n - 1)
        hi = np.clip(np.floor((tri.max(axis=0) + 0.5) / s + 1e-9).astype(int), 0, n - 1)
        rng = [np.arange(lo[j], hi[j] + 1) for j in range(3)]
        gi, gj, gk = np.meshgrid(*rng, indexing="ij")
        idx = np.stack([gi.ravel(), gj.ravel(), gk.ravel()], axis=1)
        hit = _triangle_box_overlap(tri, centers[idx], half)
        occ[tuple(idx[hit].T)] = True
    return occ


def _parity_inside(tris, n, s, axis):
    """Inside test of voxel centres by crossing parity along ``axis`` rays."""
    u, w = [j for j in range(3) if j != axis]
    centers = s * (np.arange(n) - (n - 1) / 2.0)
    crossings = [[[] for _ in range(n)] for _ in range(n)]
    ru = centers + RAY_JITTER
    rw = centers + RAY_JITTER * math.sqrt(3.0)
    for tri in tris:
        a, b, c = tri[:, u], tri[:, w], tri[:, axis]
        det = (a[1] - a[0]) * (b[2] - b[0]) - (a[2] - a[0]) * (b[1] - b[0])
        if det == 0.0:
            continue
        iu = np.flatnonzero((ru >= a.min()) & (ru <= a.max()))
        iw = np.flatnonzero((rw >= b.min()) & (rw <= b.max()))
        if iu.size == 0 or iw.size == 0:
            continue
        pu, pw = np.meshgrid(ru[iu], rw[iw], indexing="ij")
        l1 = ((pu - a[0]) * (b[2] - b[0]) - (a[2] - a[0]) * (pw - b[0])) / det
        l2 = ((a[1] - a[0]) * (pw - b[0]) - (pu - a[0]) * (b[1] - b[0])) / det
        inside = (l1 >= 0) & (l2 >= 0) & (l1 + l2 <= 1)
        depth = c[0] + l1 * (c[1] - c[0]) + l2 * (c[2] - c[0])
        for x, y in zip(*np.nonzero(inside)):
            crossings[iu[x]][iw[y]].append(depth[x, y])
    out = np.zeros((n, n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            hits = np.sort(crossings[i][j])
            if hits.size == 0:
                continue
            count = np.searchsorted(hits, centers, side="left")
            line = (count % 2) == 1
            idx = [slice(None)] * 3
            idx[u], idx[w] = i, j
            out[tuple(idx)] = line
    return out


def voxelize(mesh: TriangleMesh, N: int, fill: bool = True, normalize: bool = True) -> VoxelImage:
    """Binary occupancy of a triangle mesh on an ``N^3`` grid with ``s = 1/N``.

    With ``normalize`` the mesh is centred and scaled uniformly so its
    largest extent spans the grid minus a 5% margin per side; otherwise the
    mesh coordinates are used as they are.  Voxels whose cube meets a
    triangle are set.  With ``fill`` interior voxels are added when at least
    two of the three axis-parallel parity tests call them inside, which
    tolerates small cracks in the surface.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    if mesh.faces.shape[0] == 0:
        raise ValueError("mesh has no faces")
    tris = mesh.triangles()
    if normalize:
        lo = tris.reshape(-1, 3).min(axis=0)
        hi = tris.reshape(-1, 3).max(axis=0)
        extent = float(np.max(hi - lo))
        scale = (1.0 - 2 * MARGIN) / extent if extent > 0 else 1.0
        tris = (tris - (lo + hi) / 2.0) * scale
    s = 1.0 / N
    occ = _surface_voxels(tris, N, s)
    if fill:
        votes = sum(_parity_inside(tris, N, s, ax).astype(int) for ax in range(3))
        occ |= votes >= 2
    return VoxelImage(occ.astype(float), s)


def _grid_centers(N, d):
    s = 1.0 / N
    c = s * (np.arange(N) - (N - 1) / 2.0)
    return np.meshgrid(*([c] * d), indexing="ij"), s


def _check_inside(lo, hi, kind):
    if np.any(np.asarray(lo) < -0.5 - 1e-12) or np.any(np.asarray(hi) > 0.5 + 1e-12):
        raise ValueError(f"{kind} extends outside the grid [-1/2, 1/2]")


def synth_shape(kind: str, params=None, N: int = 64, d: int = 3) -> VoxelImage:
    """Voxelised solid shape on the unit grid.

    A voxel is 1 when its centre satisfies the membership test.

    Parameters
    ----------
    kind : str
        ``solid_box`` (``center``, ``half_widths``), ``solid_sphere``
        (``center``, ``radius``), ``hemisphere`` (``center``, ``radius``,
        ``normal``; keeps the side ``<x - c, normal> >= 0``), ``shell``
        (``center``, ``radius``, ``thickness``) or ``l_shape`` (``center``,
        ``arm``, ``width``, ``depth``; two bars of length ``arm`` and
        width ``width`` joined at a corner in the first two axes).
    params : dict
    N : int
    d : int
    """
    if kind not in SHAPE_KINDS:
        raise ValueError(f"unknown shape {kind!r}; choose from {SHAPE_KINDS}")
    p = dict(params or {})
    c = np.asarray(p.get("center", np.zeros(d)), dtype=float)
    if c.shape != (d,):
        raise ValueError(f"center must have {d} entries")
    grids, s = _grid_centers(N, d)
    x = [g - c[i] for i, g in enumerate(grids)]
    if kind == "solid_box":
        h = np.broadcast_to(np.asarray(p.get("half_widths", 0.25), dtype=float), (d,))
        _check_inside(c - h, c + h, kind)
        mask = np.ones(grids[0].shape, dtype=bool)
        for i in range(d):
            mask &= np.abs(x[i]) <= h[i]
    elif kind in ("solid_sphere", "hemisphere", "shell"):
        r = float(p.get("radius", 0.25))
        if r < 0:
            raise ValueError("radius must be nonnegative")
        _check_inside(c - r, c + r, kind)
        r2 = sum(xi * xi for xi in x)
        mask = r2 <= r * r
        if kind == "hemisphere":
            nrm = np.asarray(p.get("normal", np.eye(d)[-1]), dtype=float)
            mask &= sum(nrm[i] * x[i] for i in range(d)) >= 0
        elif kind == "shell":
            thick = float(p.get("thickness", 0.05))
            mask &= r2 >= max(r - thick, 0.0) ** 2
    else:
        arm = float(p.get("arm", 0.6))
        wid = float(p.get("width", 0.2))
        depth = float(p.get("depth", 0.2))
        lo = c.copy()
        hi = c.copy()
        lo[:2] -= arm / 2
        hi[:2] += arm / 2
        if d > 2:
            lo[2:] -= depth / 2
            hi[2:] += depth / 2
        _check_inside(lo, hi, kind)
        in_span = (x[0] >= -arm / 2) & (x[0] <= arm / 2) & (x[1] >= -arm / 2) & (x[1] <= arm / 2)
        foot = x[1] <= -arm / 2 + wid
        leg = x[0] <= -arm / 2 + wid
        mask = in_span & (foot | leg)
        for i in range(2, d):
            mask &= np.abs(x[i]) <= depth / 2
    return VoxelImage(mask.astype(float), s)


def sample_two_cluster_cloud(n: int, d: int = 2, rng_seed: int = 0) -> np.ndarray:
    """``n/2`` uniform points in ``[-1, -1/2]^d`` and ``n/2`` in ``[1/2, 1]^d``."""
    if n % 2:
        raise ValueError("n must be even")
    rng = np.random.default_rng(rng_seed)
    half = n // 2
    lo = rng.uniform(-1.0, -0.5, size=(half, d))
    hi = rng.uniform(0.5, 1.0, size=(half, d))
    return np.vstack([lo, hi])


@dataclass(frozen=True)
class AffineMap:
    """``x -> A x + y``."""

    A: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if A.shape[0] != A.shape[1] or y.size != A.shape[0]:
            raise ValueError("A must be square and match the shift")
        if abs(np.linalg.det(A)) <= 1e-12:
            raise ValueError("affine matrix is not invertible")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)

    @classmethod
    def identity(cls, d=3):
        return cls(np.eye(d), np.zeros(d))

    def __call__(self, x):
        return np.asarray(x) @ self.A.T + self.y


def _resample(F: VoxelImage, source_of):
    """Nearest-neighbour pull: output voxel centre ``x`` reads ``F(source_of(x))``."""
    s = F.voxel_size
    pts = F.centers()
    src = source_of(pts)
    n = np.array(F.extents)
    idx = np.floor(src / s + (n - 1) / 2.0 + 0.5).astype(np.int64)
    ok = np.all((idx >= 0) & (idx < n), axis=1)
    out = np.zeros(pts.shape[0])
    out[ok] = F.values[tuple(idx[ok].T)]
    return out.reshape(F.extents)


def apply_affine_voxels(F: VoxelImage, amap: AffineMap) -> VoxelImage:
    """Image of ``f_{A,y}(x) = f(A^{-1}(x - y))`` by nearest-neighbour lookup."""
    if amap.A.shape[0] != F.d:
        raise ValueError("affine map dimension does not match the image")
    inv = np.linalg.inv(amap.A)
    return VoxelImage(_resample(F, lambda x: (x - amap.y) @ inv.T), F.voxel_size)


@dataclass(frozen=True)
class AffineRanges:
    """Parameter ranges of :func:`random_affine`.

    ``max_rotation_angle`` limits the rotation angle (``pi`` gives the Haar
    law on SO(d)); ``shear`` bounds the off-diagonal entries of a unit upper
    triangular matrix; ``scale`` bounds per-axis scales; ``shift`` is a
    fraction of the grid width.
    """

    max_rotation_angle: float = math.pi
    shear: float = 0.2
    scale: tuple = (0.7, 1.3)
    shift: float = 0.1

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, (1.0, 1.0), 0.0)


def _quaternion_rotation(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng, d=3, max_angle=math.pi) -> np.ndarray:
    """Haar-distributed rotation, conditioned on angle ``<= max_angle``.

    In 3D a normalised Gaussian quaternion is Haar; the conditioning is by
    rejection.  In 2D the angle is uniform on ``[-max_angle, max_angle]``.
    """
    if max_angle <= 0:
        return np.eye(d)
    if d == 2:
        a = rng.uniform(-max_angle, max_angle)
        return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    if d != 3:
        raise ValueError("random rotations are implemented for d = 2 and 3")
    while True:
        q = rng.normal(size=4)
        angle = 2.0 * math.acos(min(1.0, abs(q[0]) / np.linalg.norm(q)))
        if angle <= max_angle:
            return _quaternion_rotation(q)


def random_affine(rng_seed, ranges: AffineRanges = AffineRanges(), d: int = 3, grid_width: float = 1.0) -> AffineMap:
    """Random ``A = R Sh Sc`` and shift ``y`` drawn from ``ranges``."""
    rng = np.random.default_rng(rng_seed)
    R = random_rotation(rng, d, ranges.max_rotation_angle)
    Sh = np.eye(d)
    iu = np.triu_indices(d, 1)
    Sh[iu] = rng.uniform(-ranges.shear, ranges.shear, size=len(iu[0]))
    Sc = np.diag(rng.uniform(ranges.scale[0], ranges.scale[1], size=d))
    y = rng.uniform(-ranges.shift, ranges.shift, size=d) * grid_width
    return AffineMap(R @ Sh @ Sc, y)


def symmetric_eigen(C):
    """Eigenpairs of a symmetric matrix, eigenvalues in descending order."""
    C = np.asarray(C, dtype=float)
    w, V = np.linalg.eigh(C)
    order = np.argsort(w, kind="stable")[::-1]
    return w[order], V[:, order]


def _moment_signs(V, dx, weights):
    for k in range(V.shape[1]):
        proj = dx @ V[:, k]
        m3 = float(np.sum(weights * proj**3))
        scale = float(np.sum(weights * np.abs(proj) ** 3))
        if abs(m3) <= 1e-10 * max(scale, 1e-300):
            # symmetric along this axis: make the first nonzero entry positive
            first = V[np.flatnonzero(np.abs(V[:, k]) > 1e-12)[0], k]
            flip = first < 0
        else:
            flip = m3 < 0
        if flip:
            V[:, k] = -V[:, k]
    return V


def preprocess(F: VoxelImage) -> VoxelImage:
    """Centre, align, rescale and mass-normalise a voxel image.

    1. the mass centroid moves to the grid centre;
    2. the principal axes of the mass covariance become the coordinate
       axes, largest variance first, each oriented so the third central
       moment along it is nonnegative;
    3. a uniform scale makes the occupied region fill 95% of the grid;
    4. nearest-neighbour resampling, then division by ``s^d * sum(F)``.

    A rank-deficient covariance skips step 2 with a warning.
    """
    w = F.flat
    total = float(np.sum(w))
    if not total > 0:
        raise ValueError("preprocess needs an image with positive mass")
    pts = F.centers()
    c = (w @ pts) / total
    dx = pts - c
    cov = (dx * w[:, None]).T @ dx / total
    lam, V = symmetric_eigen(cov)
    if lam[-1] <= 1e-12 * max(lam[0], 1e-300):
        warnings.warn("mass covariance is rank deficient; skipping rotation", RuntimeWarning, stacklevel=2)
        V = np.eye(F.d)
    else:
        V = _moment_signs(V, dx, w)
    occupied = w != 0
    y = dx[occupied] @ V
    reach = float(np.max(np.abs(y))) + F.voxel_size / 2.0
    half_grid = F.voxel_size * min(F.extents) / 2.0
    sigma = FILL_FRACTION * half_grid / reach
    out = _resample(F, lambda x: c + (x / sigma) @ V.T)
    mass = F.voxel_size**F.d * float(np.sum(out))
    if not mass > 0:
        raise ValueError("resampled image is empty")
    return VoxelImage(out / mass, F.voxel_size)


# templates small enough to stay on the grid under the class affine ranges
CLASS_TEMPLATES = {
    "box": ("solid_box", {"half_widths": [0.2, 0.14, 0.09]}),
    "ball": ("solid_sphere", {"radius": 0.2}),
    "lshape": ("l_shape", {"arm": 0.36, "width": 0.12, "depth": 0.12}),
}
CLASS_AFFINE_RANGES = AffineRanges(math.pi, 0.2, (0.8, 1.25), 0.05)


def affine_class_samples(kinds, per_class: int, N: int = 32, rng_seed: int = 0, ranges=CLASS_AFFINE_RANGES):
    """Random affine copies of 3D template shapes.

    ``kinds`` entries are keys of ``CLASS_TEMPLATES`` or shape kinds of
    :func:`synth_shape` with default parameters.  Copy ``i`` of class ``c``
    uses the map drawn from ``SeedSequence([rng_seed, c, i])``.

    Returns
    -------
    labels : list of str
    images : list of VoxelImage
    sample_ids : list of str
    """
    if per_class < 1:
        raise ValueError("per_class must be positive")
    labels, images, ids = [], [], []
    for c, name in enumerate(kinds):
        if name in CLASS_TEMPLATES:
            kind, params = CLASS_TEMPLATES[name]
        elif name in SHAPE_KINDS:
            kind, params = name, {}
        else:
            raise ValueError(f"unknown class {name!r}; use {sorted(CLASS_TEMPLATES)} or {SHAPE_KINDS}")
        template = synth_shape(kind, params, N, 3)
        for i in range(per_class):
            amap = random_affine(np.random.SeedSequence([rng_seed, c, i]), ranges, 3)
            labels.append(name)
            images.append(apply_affine_voxels(template, amap))
            ids.append(f"{name}_{i:03d}")
    return labels, images, ids
