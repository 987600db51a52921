"""Command line interface.

Every file written carries the header ``# hyperradon v1 <command> <hash>``
where the hash covers all arguments except ``--threads`` and ``--out``.
JSON files store the same line under the key ``"header"``; RVOX files
carry their own magic and version instead.

Exit codes: 0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import geometry
from .classify import (
    NORMS,
    ExperimentConfig,
    LabeledFeatureSet,
    run_experiment,
    write_accuracy_csv,
    write_confusion_csv,
    write_distmap_csv,
)
from .directions import parse_direction_spec, write_directions_csv
from .ingest import (
    OffParseError,
    affine_class_samples,
    apply_affine_voxels,
    preprocess,
    random_affine,
    read_off,
    sample_two_cluster_cloud,
    synth_shape,
    voxelize,
)
from .mc_oracle import mc_comparison_report, write_report_csv
from .nrcdt import DEFAULT_LEVELS, image_max_nrcdt
from .sliced_wasserstein import (
    CubeMixture,
    EmpiricalMeasure,
    SWConfig,
    barycenter_config,
    default_init,
    fit_config,
    fit_mixture,
    mixture_sinogram,
    read_fit_json,
    sw_barycenter,
    write_fit_json,
)
from .trace_features import extract_features, trace_tensor, write_features_csv
from .voxel import RvoxFormatError, read_rvox, sinogram, write_rvox, write_sinogram_csv

FORMAT_VERSION = 1
UNHASHED = ("threads", "out")


class DataError(click.ClickException):
    exit_code = 3


# ---------------------------------------------------------------------------
# helpers


def args_hash(params: dict) -> str:
    kept = {k: v for k, v in params.items() if k not in UNHASHED}
    blob = json.dumps(kept, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_line(ctx: click.Context) -> str:
    return f"# hyperradon v{FORMAT_VERSION} {ctx.command.name} {args_hash(ctx.params)}"


def parse_vector(text, name, dim=None):
    try:
        v = np.array([float(x) for x in str(text).split(",")], dtype=float)
    except ValueError:
        raise click.BadParameter(f"{text!r} is not a comma separated list of numbers", param_hint=name) from None
    if not np.all(np.isfinite(v)):
        raise click.BadParameter("entries must be finite", param_hint=name)
    if dim is not None and v.size != dim:
        raise click.BadParameter(f"expected {dim} entries, got {v.size}", param_hint=name)
    return v


def parse_grid(text, name="grid"):
    """``lo:hi:count`` to an equispaced grid."""
    parts = str(text).split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise click.BadParameter(f"{text!r} is not of the form lo:hi:count", param_hint=name) from None
    if count < 1 or not (math.isfinite(lo) and math.isfinite(hi)):
        raise click.BadParameter("count must be positive and bounds finite", param_hint=name)
    if count > 1 and not hi > lo:
        raise click.BadParameter("hi must exceed lo", param_hint=name)
    return np.linspace(lo, hi, count)


def parse_directions(text, dim=None, name="--directions"):
    try:
        dirs = parse_direction_spec(text)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint=name) from None
    if dim is not None and dirs.d != dim:
        raise click.BadParameter(f"{text!r} gives {dirs.d}D directions, need {dim}D", param_hint=name)
    return dirs


def parse_sample_counts(text):
    out = []
    for tok in str(text).split(","):
        tok = tok.strip()
        m = re.fullmatch(r"2\^(\d+)", tok)
        try:
            n = 2 ** int(m.group(1)) if m else int(tok)
        except ValueError:
            raise click.BadParameter(f"{tok!r} is neither an integer nor 2^q", param_hint="--samples") from None
        if n < 1:
            raise click.BadParameter("sample counts must be positive", param_hint="--samples")
        out.append(n)
    return out


def resolve_threads(threads):
    return (os.cpu_count() or 1) if threads is None else threads


def load_rvox(path):
    try:
        return read_rvox(path)
    except RvoxFormatError as exc:
        raise DataError(str(exc)) from None
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def write_text(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None


def ensure_dir(path):
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    return Path(path)


def log(msg):
    click.echo(msg, err=True)


threads_option = click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker cap; default all cores.")


@click.group()
@click.version_option(package_name="artifact")
def cli():
    """Exact Radon transforms of boxes and voxel images, and their applications."""


# ---------------------------------------------------------------------------
# geometry and transforms


@cli.command("cube-area")
@click.option("--dim", type=click.IntRange(min=1), required=True)
@click.option("--a", "a_text", default=None, help="Half-widths a1,...,ad (default all ones).")
@click.option("--theta", "theta_text", required=True, help="Direction theta1,...,thetad.")
@click.option("--t", "t_value", type=float, default=None, help="Single offset.")
@click.option("--t-grid", default=None, help="Offsets lo:hi:count.")
@click.option("--eps", type=float, default=None, help="Slab half-width for the regularised value.")
@click.option("--normalize", is_flag=True, help="Scale theta to unit norm.")
@click.option("--corollary", is_flag=True, help="Use the explicit 2D or 3D evaluators.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def cube_area(ctx, dim, a_text, theta_text, t_value, t_grid, eps, normalize, corollary, out):
    """Section area of the box (-a, a] by the hyperplane <x, theta> = t."""
    a = np.ones(dim) if a_text is None else parse_vector(a_text, "--a", dim)
    if np.any(a <= 0):
        raise click.BadParameter("half-widths must be positive", param_hint="--a")
    theta = parse_vector(theta_text, "--theta", dim)
    norm = float(np.linalg.norm(theta))
    if norm == 0:
        raise click.BadParameter("theta must be nonzero", param_hint="--theta")
    if normalize:
        theta = theta / norm
    elif abs(norm - 1.0) > 1e-12:
        raise click.BadParameter(f"theta has norm {norm:.17g}; pass --normalize", param_hint="--theta")
    if (t_value is None) == (t_grid is None):
        raise click.UsageError("give exactly one of --t and --t-grid")
    if eps is not None and not eps > 0:
        raise click.BadParameter("eps must be positive", param_hint="--eps")
    if corollary and (dim not in (2, 3) or eps is not None):
        raise click.UsageError("--corollary needs --dim 2 or 3 and no --eps")
    t = np.array([t_value]) if t_grid is None else parse_grid(t_grid, "--t-grid")
    if eps is not None:
        area = geometry.cube_plane_area_regularized(a, theta, t, eps)
    elif corollary:
        area = (geometry.cube_plane_area_2d if dim == 2 else geometry.cube_plane_area_3d)(a, theta, t)
    else:
        area = geometry.cube_plane_area(a, theta, t)
    area = np.atleast_1d(area)
    if t_grid is None and out is None:
        click.echo(f"{area[0]:.17g}")
        return
    lines = [header_line(ctx), "t,area"] + [f"{x:.17g},{v:.17g}" for x, v in zip(t, area)]
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        write_text(out, text)


@cli.command("sinogram")
@click.option("--input", "input_path", type=click.Path(dir_okay=False), required=True)
@click.option("--directions", "dir_spec", required=True)
@click.option("--radii", default=None, help="lo:hi:count; default spans the image.")
@click.option("--eps", default=None, help="Slab half-width, a number or 'auto'.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@threads_option
@click.pass_context
def sinogram_cmd(ctx, input_path, dir_spec, radii, eps, out, threads):
    """Discrete Radon transform of an RVOX image."""
    F = load_rvox(input_path)
    dirs = parse_directions(dir_spec, F.d)
    grid = None if radii is None else parse_grid(radii, "--radii")
    if eps is not None and eps != "auto":
        try:
            eps = float(eps)
        except ValueError:
            raise click.BadParameter(f"{eps!r} is neither a number nor 'auto'", param_hint="--eps") from None
        if not eps > 0:
            raise click.BadParameter("eps must be positive", param_hint="--eps")
    start = time.perf_counter()
    sino = sinogram(F, dirs.points, grid, eps=eps, threads=resolve_threads(threads))
    log(f"sinogram: {sino.values.shape[0]} directions x {sino.radii.size} radii in {time.perf_counter() - start:.3f} s")
    try:
        write_sinogram_csv(out, sino, header_line(ctx))
    except OSError as exc:
        raise DataError(f"{out}: {exc.strerror or exc}") from None


@cli.command("mc-compare")
@click.option("--dim", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--directions", "dir_spec", default="sobol:8", show_default=True)
@click.option("--radii", default="-2:2:33", show_default=True)
@click.option("--samples", default="2^10,2^12,2^14", show_default=True, help="Comma list of N or 2^q.")
@click.option("--repeats", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--eps", type=float, default=1e-3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@threads_option
@click.pass_context
def mc_compare(ctx, dim, dir_spec, radii, samples, repeats, eps, seed, out, threads):
    """Monte Carlo estimates against the closed form on a direction by radius grid.

    The timing columns are wall-clock measurements; all other columns
    depend only on the arguments.
    """
    dirs = parse_directions(dir_spec, dim)
    grid = parse_grid(radii, "--radii")
    counts = parse_sample_counts(samples)
    if not eps > 0:
        raise click.BadParameter("eps must be positive", param_hint="--eps")
    rows = mc_comparison_report(dirs.points, grid, eps, counts, repeats, rng_seed=seed)
    log(f"exact: {dirs.points.shape[0]} x {grid.size} grid in {rows[0]['time_exact_sec']:.4f} s")
    for row in rows:
        log(f"N={row['N']}: mean MC time {row['mean_time_mc_sec']:.4f} s, normalised error {row['normalized_mean_abs_diff']:.4g}")
    if out is None:
        write_report_csv(sys.stdout, rows, header_line(ctx))
    else:
        try:
            write_report_csv(out, rows, header_line(ctx))
        except OSError as exc:
            raise DataError(f"{out}: {exc.strerror or exc}") from None


# ---------------------------------------------------------------------------
# shapes and directions


@cli.command("voxelize")
@click.option("--input", "input_path", type=click.Path(dir_okay=False), required=True)
@click.option("--N", "N", type=click.IntRange(min=1), default=64, show_default=True)
@click.option("--no-fill", is_flag=True, help="Keep only the surface voxels.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def voxelize_cmd(input_path, N, no_fill, out):
    """OFF mesh to an RVOX image."""
    try:
        mesh = read_off(input_path)
    except OffParseError as exc:
        raise DataError(str(exc)) from None
    except OSError as exc:
        raise DataError(f"{input_path}: {exc.strerror or exc}") from None
    try:
        write_rvox(out, voxelize(mesh, N, fill=not no_fill))
    except OSError as exc:
        raise DataError(f"{out}: {exc.strerror or exc}") from None


@cli.command("synth")
@click.option("--kind", required=True)
@click.option("--params", "params_text", default="{}", help="JSON object of shape parameters.")
@click.option("--N", "N", type=click.IntRange(min=1), default=64, show_default=True)
@click.option("--d", "d", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--affine-seed", type=int, default=None, help="Apply a random affine map drawn from this seed.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def synth_cmd(kind, params_text, N, d, affine_seed, out):
    """Voxelised synthetic shape as an RVOX image."""
    try:
        params = json.loads(params_text)
    except json.JSONDecodeError as exc:
        raise click.BadParameter(f"invalid JSON: {exc.msg}", param_hint="--params") from None
    if not isinstance(params, dict):
        raise click.BadParameter("expected a JSON object", param_hint="--params")
    try:
        F = synth_shape(kind, params, N, d)
        if affine_seed is not None:
            F = apply_affine_voxels(F, random_affine(affine_seed, d=d))
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    try:
        write_rvox(out, F)
    except OSError as exc:
        raise DataError(f"{out}: {exc.strerror or exc}") from None


@cli.command("directions")
@click.option("--spec", required=True, help="fibonacci:n | grid:n1,n2 | circle:n | sobol:n")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def directions_cmd(ctx, spec, out):
    """Write a direction set as CSV."""
    dirs = parse_directions(spec, name="--spec")
    if out is None:
        write_directions_csv(sys.stdout, dirs, header_line(ctx))
    else:
        try:
            write_directions_csv(out, dirs, header_line(ctx))
        except OSError as exc:
            raise DataError(f"{out}: {exc.strerror or exc}") from None


# ---------------------------------------------------------------------------
# classification


def parse_synthetic(text):
    """``name[,name...]:count`` to class names and samples per class."""
    try:
        names, count = str(text).rsplit(":", 1)
        count = int(count)
    except ValueError:
        raise click.BadParameter(f"{text!r} is not of the form name,name,...:count", param_hint="--synthetic") from None
    kinds = [k.strip() for k in names.split(",") if k.strip()]
    if not kinds or count < 1:
        raise click.BadParameter("need at least one class and a positive count", param_hint="--synthetic")
    return kinds, count


def load_dataset(data, synthetic, N, seed):
    """Labels, images and sample ids from a class directory tree or synthetic spec."""
    if (data is None) == (synthetic is None):
        raise click.UsageError("give exactly one of --data and --synthetic")
    if synthetic is not None:
        kinds, count = parse_synthetic(synthetic)
        try:
            return affine_class_samples(kinds, count, N=N, rng_seed=seed)
        except ValueError as exc:
            raise click.BadParameter(str(exc), param_hint="--synthetic") from None
    root = Path(data)
    if not root.is_dir():
        raise DataError(f"{data}: not a directory")
    labels, images, ids = [], [], []
    for cls_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for f in sorted(cls_dir.iterdir()):
            suffix = f.suffix.lower()
            if suffix == ".rvox":
                img = load_rvox(f)
            elif suffix == ".off":
                try:
                    img = voxelize(read_off(f), N)
                except OffParseError as exc:
                    raise DataError(str(exc)) from None
                except OSError as exc:
                    raise DataError(f"{f}: {exc.strerror or exc}") from None
            else:
                continue
            if img.d != 3:
                raise DataError(f"{f}: expected a 3D image, got {img.d}D")
            labels.append(cls_dir.name)
            images.append(img)
            ids.append(f"{cls_dir.name}/{f.stem}")
    if not images:
        raise DataError(f"{data}: no .rvox or .off files in class subdirectories")
    return labels, images, ids


def classification_options(fn):
    opts = [
        click.option("--data", type=click.Path(file_okay=False), default=None, help="Directory with one subdirectory per class."),
        click.option("--synthetic", default=None, help="Random affine copies, e.g. box,ball,lshape:10."),
        click.option("--N", "N", type=click.IntRange(min=4), default=32, show_default=True, help="Grid size for synthetic shapes and meshes."),
        click.option("--R", "R", type=click.IntRange(min=1), default=3, show_default=True, help="Training samples per class."),
        click.option("--repeats", type=click.IntRange(min=1), default=20, show_default=True),
        click.option("--norm", type=click.Choice(NORMS, case_sensitive=False), default="l2", show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--out", type=click.Path(file_okay=False), required=True),
        threads_option,
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def finish_classification(ctx, labels, vectors, ids, R, repeats, norm, seed, out):
    fs = LabeledFeatureSet.from_lists(labels, vectors, ids)
    try:
        res = run_experiment(fs, ExperimentConfig(R=R, repeats=repeats, norm=norm, rng_seed=seed))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out = ensure_dir(out)
    head = header_line(ctx)
    write_accuracy_csv(out / "accuracy.csv", res, head)
    write_confusion_csv(out / "confusion.csv", res, head)
    write_distmap_csv(out / "distmap.csv", fs.sample_ids, res.distance_map, head)
    log(f"mean accuracy {res.mean_accuracy:.4f} +- {res.std_accuracy:.4f} over {repeats} repeats")
    return out, head


@cli.command("classify-trace")
@classification_options
@click.option("--grid", "grid_text", default="16,16", show_default=True, help="Angle grid n1,n2.")
@click.option("--n-radii", type=click.IntRange(min=2), default=33, show_default=True)
@click.pass_context
def classify_trace(ctx, data, synthetic, N, R, repeats, norm, seed, out, threads, grid_text, n_radii):
    """1-NN classification with trace transform features."""
    try:
        n1, n2 = (int(x) for x in grid_text.split(","))
    except ValueError:
        raise click.BadParameter(f"{grid_text!r} is not n1,n2", param_hint="--grid") from None
    if n1 < 1 or n2 < 2:
        raise click.BadParameter("need n1 >= 1 and n2 >= 2", param_hint="--grid")
    labels, images, ids = load_dataset(data, synthetic, N, seed)
    workers = resolve_threads(threads)
    start = time.perf_counter()
    try:
        feats = np.array([extract_features(trace_tensor(preprocess(F), n1, n2, n_radii, threads=workers)) for F in images])
    except ValueError as exc:
        raise DataError(str(exc)) from None
    log(f"features for {len(images)} samples in {time.perf_counter() - start:.2f} s")
    out_dir, head = finish_classification(ctx, labels, feats, ids, R, repeats, norm, seed, out)
    write_features_csv(out_dir / "features.csv", ids, feats, head)


@cli.command("classify-nrcdt")
@classification_options
@click.option("--directions", "dir_spec", default="fibonacci:128", show_default=True)
@click.option("--n-radii", type=click.IntRange(min=2), default=129, show_default=True)
@click.option("--levels", type=click.IntRange(min=1), default=DEFAULT_LEVELS, show_default=True)
@click.pass_context
def classify_nrcdt(ctx, data, synthetic, N, R, repeats, norm, seed, out, threads, dir_spec, n_radii, levels):
    """1-NN classification with maximum normalised quantile profiles."""
    dirs = parse_directions(dir_spec, 3)
    labels, images, ids = load_dataset(data, synthetic, N, seed)
    r = math.sqrt(3.0) / 2.0
    radii = np.linspace(-r, r, n_radii)
    xi = (2.0 * np.arange(1, levels + 1) - 1.0) / (2.0 * levels)
    workers = resolve_threads(threads)
    start = time.perf_counter()
    try:
        profiles = np.array([image_max_nrcdt(preprocess(F), dirs.points, radii, levels=xi, threads=workers).values for F in images])
    except ValueError as exc:
        raise DataError(str(exc)) from None
    log(f"profiles for {len(images)} samples in {time.perf_counter() - start:.2f} s")
    out_dir, head = finish_classification(ctx, labels, profiles, ids, R, repeats, norm, seed, out)
    write_features_csv(out_dir / "profiles.csv", ids, profiles, head)


# ---------------------------------------------------------------------------
# sliced Wasserstein


FIT_DEFAULTS = {
    "n": 40,
    "d": 2,
    "k": 2,
    "seed": 0,
    "target": None,
    "epochs": 100,
    "lr": 0.05,
    "beta1": 0.9,
    "beta2": 0.99,
    "directions": None,
    "n_radii": 101,
    "levels": 256,
    "gradient": "analytic",
    "snapshot_every": 10,
}

BARYCENTER_DEFAULTS = {
    "d": 3,
    "k": 200,
    "lam": 0.5,
    "seed": 0,
    "mu1": {"shape": "solid_box", "params": {"half_widths": [0.3, 0.15, 0.1]}, "N": 24},
    "mu2": {"shape": "solid_sphere", "params": {"radius": 0.3}, "N": 24},
    "epochs": 100,
    "lr": 0.05,
    "beta1": 0.9,
    "beta2": 0.99,
    "directions": None,
    "n_radii": 31,
    "levels": 256,
    "gradient": "analytic",
    "snapshot_every": 10,
}


def merge_config(defaults, path):
    cfg = dict(defaults)
    if path is not None:
        user = load_json(path)
        if not isinstance(user, dict):
            raise DataError(f"{path}: expected a JSON object")
        unknown = sorted(set(user) - set(defaults))
        if unknown:
            raise click.UsageError(f"unknown config keys {unknown}; allowed {sorted(defaults)}")
        cfg.update(user)
    return cfg


def sw_config(cfg, base: SWConfig) -> SWConfig:
    d = cfg["d"]
    try:
        dirs = base.directions if cfg["directions"] is None else parse_direction_spec(cfg["directions"]).points
        if dirs.shape[1] != d:
            raise ValueError(f"directions are {dirs.shape[1]}D, config is {d}D")
        half = float(base.radii[-1])
        return SWConfig(
            directions=dirs,
            radii=np.linspace(-half, half, int(cfg["n_radii"])),
            levels=int(cfg["levels"]),
            lr=float(cfg["lr"]),
            beta1=float(cfg["beta1"]),
            beta2=float(cfg["beta2"]),
            epochs=int(cfg["epochs"]),
        )
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"bad config: {exc}") from None


def measure_from_spec(spec, d, name):
    """Voxel shape, RVOX file, point cloud, mixture or fit file."""
    if not isinstance(spec, dict) or len(set(spec) & {"shape", "rvox", "points", "mixture", "fit"}) != 1:
        raise click.UsageError(f"{name}: give exactly one of shape, rvox, points, mixture, fit")
    try:
        if "shape" in spec:
            m = synth_shape(spec["shape"], spec.get("params"), int(spec.get("N", 24)), d)
        elif "rvox" in spec:
            m = load_rvox(spec["rvox"])
        elif "points" in spec:
            m = EmpiricalMeasure(np.array(spec["points"], dtype=float))
        elif "mixture" in spec:
            m = CubeMixture.from_widths(np.array(spec["mixture"]["centers"], dtype=float), np.array(spec["mixture"]["widths"], dtype=float))
        else:
            try:
                m = read_fit_json(spec["fit"])[0]
            except OSError as exc:
                raise DataError(f"{spec['fit']}: {exc.strerror or exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise click.UsageError(f"{name}: {exc}") from None
    if m.d != d:
        raise click.UsageError(f"{name} is {m.d}D, config is {d}D")
    return m


def dump_iterates(out, head, res, cfg: SWConfig, init):
    trace = res.loss_trace
    snaps = res.snapshots or []
    for epoch, mix in [(0, init)] if not snaps else snaps:
        tag = f"{epoch:04d}"
        write_fit_json(out / f"snapshot_{tag}.json", mix, trace[:epoch], extra={"header": head, "epoch": epoch})
        write_sinogram_csv(out / f"sinogram_{tag}.csv", mixture_sinogram(mix, cfg.directions, cfg.radii), head)
    write_fit_json(out / "fit.json", res.mixture, trace, extra={"header": head, "final_loss": res.final_loss})
    write_sinogram_csv(out / "sinogram_final.csv", mixture_sinogram(res.mixture, cfg.directions, cfg.radii), head)
    lines = [head, "epoch,loss"] + [f"{e},{v:.17g}" for e, v in enumerate(trace)]
    write_text(out / "loss.csv", "\n".join(lines) + "\n")


def check_common(cfg):
    if cfg["gradient"] not in ("fd", "analytic"):
        raise click.UsageError("gradient must be 'fd' or 'analytic'")
    every = cfg["snapshot_every"]
    if not isinstance(every, int) or every < 0:
        raise click.UsageError("snapshot_every must be a nonnegative integer")
    if not isinstance(cfg["k"], int) or cfg["k"] < 1:
        raise click.UsageError("k must be a positive integer")


@cli.command("fit-sw")
@click.argument("config", type=click.Path(dir_okay=False), required=False)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@threads_option
@click.pass_context
def fit_sw(ctx, config, out, threads):
    """Fit a box mixture to a point cloud by minimising the sliced distance.

    Without CONFIG the default is a 40 point two-cluster cloud in 2D.
    """
    cfg = merge_config(FIT_DEFAULTS, config)
    ctx.params["resolved"] = cfg
    check_common(cfg)
    d = cfg["d"]
    if cfg["target"] is None:
        try:
            target = EmpiricalMeasure(sample_two_cluster_cloud(int(cfg["n"]), d, int(cfg["seed"])))
        except ValueError as exc:
            raise click.UsageError(f"bad config: {exc}") from None
    else:
        target = measure_from_spec(cfg["target"], d, "target")
    sw = sw_config(cfg, fit_config(d))
    init = default_init(cfg["k"], d)
    start = time.perf_counter()
    try:
        res = fit_mixture(target, cfg["k"], sw, init=init, gradient=cfg["gradient"],
                          snapshot_every=cfg["snapshot_every"] or None, threads=resolve_threads(threads))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    log(f"fit: loss {res.loss_trace[0]:.6g} -> {res.final_loss:.6g} in {time.perf_counter() - start:.2f} s")
    dump_iterates(ensure_dir(out), header_line(ctx), res, sw, init)


@cli.command("barycenter")
@click.argument("config", type=click.Path(dir_okay=False), required=False)
@click.option("--lam", type=float, default=None, help="Weight of the first measure, in (0, 1).")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@threads_option
@click.pass_context
def barycenter(ctx, config, lam, out, threads):
    """Box mixture barycenter of two measures under the sliced distance."""
    cfg = merge_config(BARYCENTER_DEFAULTS, config)
    if lam is not None:
        cfg["lam"] = lam
    ctx.params["resolved"] = cfg
    check_common(cfg)
    lam = cfg["lam"]
    if not isinstance(lam, (int, float)) or not 0.0 < lam < 1.0:
        raise click.BadParameter(f"lambda must lie in (0, 1), got {lam}", param_hint="--lam")
    d = cfg["d"]
    mu1 = measure_from_spec(cfg["mu1"], d, "mu1")
    mu2 = measure_from_spec(cfg["mu2"], d, "mu2")
    sw = sw_config(cfg, barycenter_config(d))
    init = default_init(cfg["k"], d, width=0.05, rng_seed=int(cfg["seed"]))
    start = time.perf_counter()
    try:
        res = sw_barycenter(mu1, mu2, lam, cfg["k"], sw, init=init, gradient=cfg["gradient"],
                            snapshot_every=cfg["snapshot_every"] or None, threads=resolve_threads(threads))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    log(f"barycenter: loss {res.loss_trace[0]:.6g} -> {res.final_loss:.6g} in {time.perf_counter() - start:.2f} s")
    dump_iterates(ensure_dir(out), header_line(ctx), res, sw, init)


def main(argv=None):
    cli.main(args=argv, prog_name="hyperradon")


if __name__ == "__main__":
    main()
