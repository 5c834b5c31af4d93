"""End-to-end dataset generation: basis STLs in, morphed meshes and depth images out.

Every basis mesh is voxelized on one shared isotropic grid covering the union
of their bounding boxes, filled and turned into a signed distance field once
(cached on disk as MGSF). Each design point of the sampling plan is then
interpolated, reconstructed, written as STL and rendered to a stacked depth
PNG. ``manifest.json`` is written last, atomically.
"""

import hashlib
import json
import logging
import os
import secrets
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import IntegrityError, MorphgenError, ValidationError
from .interp import interpolate, validate_weights
from .mesh_io import bounding_box, load_stl, save_stl, watertight_check
from .projector import DEFAULT_SIZE, DEFAULT_VIEWS, VIEWS, save_png, stack_views
from .reconstruct import ReconstructionConfig, reconstruct
from .sampler import (
    LATTICE,
    RANDOM,
    distance_to_vertices,
    in_incircle,
    random_plan,
    simplex_grid,
    to_cartesian,
)
from .sdf import DEFAULT_DILATION_ITERS, fill_holes, load_field, save_field, signed_distance
from .voxelizer import make_isotropic_grid, voxelize

__all__ = [
    "SamplingConfig",
    "ImageConfig",
    "PipelineConfig",
    "DatasetManifest",
    "SampleResult",
    "basis_fields",
    "run_dataset",
    "run_single",
    "inspect",
    "resolve_threads",
    "THREADS_ENV",
]

log = logging.getLogger(__name__)

THREADS_ENV = "MORPHGEN_THREADS"
MANIFEST_NAME = "manifest.json"
# padding used when none is configured, in voxel pitches
AUTO_PADDING_CELLS = 3
OK = "ok"
FAILED = "failed"


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _temp_sibling(path):
    # plain open() instead of mkstemp so the file mode follows the umask
    return path.with_name(f".{path.name}.{secrets.token_hex(6)}.tmp")


def _atomic_write(path, data=None, writer=None):
    """Write ``data`` (or call ``writer(tmp_path)``) beside ``path``, then rename."""
    path = Path(path)
    tmp = _temp_sibling(path)
    try:
        if writer is None:
            with open(tmp, "xb") as fh:
                fh.write(data)
        else:
            writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def resolve_threads(threads=None):
    """Explicit value, else ``MORPHGEN_THREADS``, else the CPU count."""
    if threads is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValidationError(f"{THREADS_ENV}={env!r} is not an integer") from None
    if threads is None:
        return os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise ValidationError(f"thread count must be >= 1, got {threads}")
    return threads


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class SamplingConfig:
    scheme: str = LATTICE
    samples_per_dim: int = 5
    count: int = None
    seed: int = 0

    def __post_init__(self):
        if self.scheme == LATTICE:
            if self.samples_per_dim is None or int(self.samples_per_dim) < 2:
                raise ValidationError("lattice sampling needs samples_per_dim >= 2")
        elif self.scheme == RANDOM:
            if self.count is None or int(self.count) < 1:
                raise ValidationError("random sampling needs count >= 1")
        else:
            raise ValidationError(f"unknown sampling scheme {self.scheme!r}")

    def plan(self, n_bases):
        if self.scheme == LATTICE:
            return simplex_grid(n_bases, int(self.samples_per_dim))
        return random_plan(n_bases, int(self.count), int(self.seed))


@dataclass(frozen=True)
class ImageConfig:
    views: tuple = DEFAULT_VIEWS
    width: int = DEFAULT_SIZE
    height: int = DEFAULT_SIZE

    def __post_init__(self):
        views = tuple(self.views)
        if len(views) != 3:
            raise ValidationError(f"need exactly 3 views, got {views}")
        for v in views:
            if v not in VIEWS:
                raise ValidationError(f"unknown view {v!r}; choose from {sorted(VIEWS)}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValidationError("image size must be positive")
        object.__setattr__(self, "views", views)


def _tuple3(v, name):
    if np.isscalar(v):
        v = (v, v, v)
    v = tuple(int(n) for n in v)
    if len(v) != 3 or min(v) < 2:
        raise ValidationError(f"{name} must be 3 integers >= 2, got {v}")
    return v


@dataclass(frozen=True)
class PipelineConfig:
    """Everything ``run_dataset`` needs.

    ``padding`` is in world units; ``None`` pads by three voxel pitches.
    ``output_dir`` and ``threads`` describe the run rather than the dataset
    and are kept out of the manifest's config echo.
    """

    basis_paths: tuple
    resolution: tuple = (64, 64, 64)
    padding: float = None
    dilation_iters: int = DEFAULT_DILATION_ITERS
    reconstruction: ReconstructionConfig = field(default_factory=ReconstructionConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    image: ImageConfig = field(default_factory=ImageConfig)
    output_dir: str = "dataset"
    threads: int = None
    cache_dir: str = None

    def __post_init__(self):
        paths = tuple(str(p) for p in self.basis_paths)
        if len(paths) < 2:
            raise ValidationError(f"need at least 2 basis meshes, got {len(paths)}")
        object.__setattr__(self, "basis_paths", paths)
        object.__setattr__(self, "resolution", _tuple3(self.resolution, "resolution"))
        if self.padding is not None and not float(self.padding) >= 0:
            raise ValidationError("padding must be non-negative")
        if int(self.dilation_iters) < 0:
            raise ValidationError("dilation_iters must be >= 0")
        for name, cls in (
            ("reconstruction", ReconstructionConfig),
            ("sampling", SamplingConfig),
            ("image", ImageConfig),
        ):
            value = getattr(self, name)
            if isinstance(value, dict):
                object.__setattr__(self, name, cls(**value))
        if self.threads is not None and int(self.threads) < 1:
            raise ValidationError("threads must be >= 1")

    @property
    def n_bases(self):
        return len(self.basis_paths)

    def validate(self):
        missing = [p for p in self.basis_paths if not Path(p).is_file()]
        if missing:
            raise ValidationError(f"basis mesh not found: {', '.join(missing)}")
        return self

    def to_dict(self):
        d = asdict(self)
        d["basis_paths"] = list(self.basis_paths)
        d["resolution"] = list(self.resolution)
        d["image"]["views"] = list(self.image.views)
        return d

    def dataset_dict(self):
        """Config fields that determine the dataset contents."""
        d = self.to_dict()
        for k in ("output_dir", "threads", "cache_dir"):
            d.pop(k)
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ValidationError(f"config must be a JSON object, got {type(d).__name__}")
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "basis_paths" not in d:
            raise ValidationError("config needs basis_paths")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(f"bad config: {exc}") from None

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        # relative paths in the file are taken relative to the file
        base = Path(path).resolve().parent
        if isinstance(d, dict):
            if isinstance(d.get("basis_paths"), list):
                d["basis_paths"] = [str(base / p) for p in d["basis_paths"]]
            for key in ("output_dir", "cache_dir"):
                if isinstance(d.get(key), str):
                    d[key] = str(base / d[key])
        return cls.from_dict(d)


# -- basis stage -------------------------------------------------------------


def _cache_key(stl_data, spec, dilation_iters):
    h = hashlib.sha256(stl_data)
    h.update(json.dumps(spec.to_dict(), sort_keys=True).encode())
    h.update(f"dilation={dilation_iters}".encode())
    return h.hexdigest()


def auto_padding(box, resolution):
    """World padding of ``AUTO_PADDING_CELLS`` pitches for a cubic-pitch grid."""
    n = max(resolution)
    if n <= 2 * AUTO_PADDING_CELLS:
        raise ValidationError(f"resolution {resolution} too small for automatic padding")
    return AUTO_PADDING_CELLS * max(box.extent) / (n - 2 * AUTO_PADDING_CELLS)


def shared_grid(meshes, resolution, padding=None):
    """Isotropic grid over the union of the meshes' bounding boxes."""
    box = bounding_box(meshes[0])
    for m in meshes[1:]:
        box = box.union(bounding_box(m))
    if padding is None:
        padding = auto_padding(box, resolution)
    return make_isotropic_grid(box, resolution, padding)


def basis_fields(config):
    """Signed distance fields of every basis on the shared grid, using the cache."""
    config.validate()
    blobs = [Path(p).read_bytes() for p in config.basis_paths]
    meshes = [load_stl(b) for b in blobs]
    spec = shared_grid(meshes, config.resolution, config.padding)
    cache = Path(config.cache_dir or Path(config.output_dir) / "cache")
    cache.mkdir(parents=True, exist_ok=True)
    fields, info = [], []
    for path, blob, mesh in zip(config.basis_paths, blobs, meshes):
        key = _cache_key(blob, spec, config.dilation_iters)
        target = cache / f"{key}.mgsf"
        if target.is_file():
            f = load_field(target)
            hit = True
        else:
            filled = fill_holes(voxelize(mesh, spec), config.dilation_iters)
            f = signed_distance(filled)
            _atomic_write(target, writer=lambda tmp, f=f: save_field(f, tmp))
            hit = False
        log.info("basis %s: %s", path, "cache hit" if hit else "computed")
        fields.append(f)
        info.append({"path": path, "sha256": hashlib.sha256(blob).hexdigest(), "field_key": key})
    return spec, fields, info


# -- per-sample stage --------------------------------------------------------


@dataclass
class SampleResult:
    record: dict
    mesh: object = None


def _process(fields, config, sample_id, weights, out_dir, write=True):
    stem = f"sample_{sample_id:05d}"
    t0 = time.perf_counter()
    record = {
        "id": sample_id,
        "weights": list(weights.w),
        "map_xy": list(to_cartesian(weights)) if len(weights) == 3 else None,
    }
    mesh = None
    try:
        mesh = reconstruct(interpolate(fields, weights), config.reconstruction)
        report = watertight_check(mesh)
        stack = stack_views(mesh, config.image.views, config.image.width, config.image.height)
        if write:
            mesh_rel = f"meshes/{stem}.stl"
            img_rel = f"images/{stem}.png"
            save_stl(mesh, out_dir / mesh_rel)
            meta = save_png(stack, out_dir / img_rel)
            meta_rel = str(Path(meta).relative_to(out_dir).as_posix())
            files = (mesh_rel, img_rel, meta_rel)
            record.update(
                status=OK,
                mesh_path=mesh_rel,
                image_paths=[img_rel],
                metadata_path=meta_rel,
                checksums={f: sha256_file(out_dir / f) for f in files},
            )
        else:
            record["status"] = OK
        record.update(
            watertight=report.watertight,
            n_triangles=int(mesh.n_triangles),
            volume=float(mesh.volume()),
        )
    except MorphgenError as exc:
        log.warning("sample %d failed: %s", sample_id, exc)
        record.update(status=FAILED, error=f"{type(exc).__name__}: {exc}")
    record["timing"] = {"seconds": time.perf_counter() - t0}
    return SampleResult(record, mesh)


# -- manifest ----------------------------------------------------------------


@dataclass
class DatasetManifest:
    path: Path
    data: dict

    @property
    def samples(self):
        return self.data["samples"]

    @property
    def count(self):
        return self.data["count"]

    @property
    def n_failed(self):
        return self.data["n_failed"]

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            with open(path) as fh:
                return cls(path, json.load(fh))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid manifest JSON ({exc})") from None


def run_dataset(config):
    """Generate the full dataset described by ``config``.

    Samples whose reconstruction or projection fails are recorded with
    ``status = "failed"``; failures while preparing the bases abort the run.
    """
    config.validate()
    out_dir = Path(config.output_dir)
    (out_dir / "meshes").mkdir(parents=True, exist_ok=True)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    spec, fields, bases = basis_fields(config)
    plan = config.sampling.plan(config.n_bases)
    threads = resolve_threads(config.threads)
    log.info("%d samples on %s grid with %d threads", len(plan), spec.dims, threads)

    def work(point):
        return _process(fields, config, point.id, point.weights, out_dir).record

    with ThreadPoolExecutor(max_workers=threads) as pool:
        records = list(pool.map(work, plan.points))
    n_failed = sum(r["status"] != OK for r in records)
    data = {
        "tool": "morphgen",
        "version": __version__,
        "config": config.dataset_dict(),
        "grid": spec.to_dict(),
        "bases": bases,
        "plan": {"scheme": plan.scheme, "seed": plan.seed, "samples_per_dim": plan.samples_per_dim},
        "count": len(records),
        "n_failed": n_failed,
        "samples": records,
        "timing": {"seconds": time.perf_counter() - started, "threads": threads},
    }
    path = out_dir / MANIFEST_NAME
    _atomic_write(path, (json.dumps(data, indent=2) + "\n").encode())
    return DatasetManifest(path, data)


def run_single(config, weights, write=False):
    """Process one design point; files go to ``output_dir/single`` if ``write``."""
    weights = validate_weights(weights)
    if len(weights) != config.n_bases:
        raise ValidationError(f"{len(weights)} weights for {config.n_bases} bases")
    _, fields, _ = basis_fields(config)
    out_dir = Path(config.output_dir) / "single"
    if write:
        (out_dir / "meshes").mkdir(parents=True, exist_ok=True)
        (out_dir / "images").mkdir(parents=True, exist_ok=True)
    return _process(fields, config, 0, weights, out_dir, write=write)


# -- inspection --------------------------------------------------------------


def _split_summary(records):
    d = np.array([distance_to_vertices(r["weights"]) for r in records])
    if not len(d):
        return {"count": 0}
    out = {"count": len(d)}
    for k in range(3):
        col = d[:, k]
        out[f"basis_{k + 1}"] = {"min": col.min(), "mean": col.mean(), "max": col.max()}
    near = d.min(axis=1)
    out["nearest"] = {"min": near.min(), "mean": near.mean(), "max": near.max()}
    return json.loads(json.dumps(out, default=float))


def inspect(manifest_path, check_watertight=False):
    """Verify every file of a dataset and summarize it.

    Raises :class:`IntegrityError` naming every missing or modified file.
    For three bases the report includes distance-to-corner statistics of the
    incircle train and test splits.
    """
    manifest = DatasetManifest.load(manifest_path)
    root = manifest.path.parent
    samples = manifest.samples
    bad = []
    for r in samples:
        for rel, digest in r.get("checksums", {}).items():
            p = root / rel
            if not p.is_file() or sha256_file(p) != digest:
                bad.append(str(p))
    if bad:
        raise IntegrityError(f"{len(bad)} file(s) missing or modified: {', '.join(bad)}", bad)
    if len(samples) != manifest.count:
        raise IntegrityError(f"manifest lists {len(samples)} samples but count is {manifest.count}")
    report = {
        "manifest": str(manifest.path),
        "count": manifest.count,
        "ok": sum(r["status"] == OK for r in samples),
        "failed": sum(r["status"] != OK for r in samples),
        "files_verified": sum(len(r.get("checksums", {})) for r in samples),
    }
    if check_watertight:
        leaky = []
        for r in samples:
            if r["status"] == OK and not watertight_check(load_stl(root / r["mesh_path"], weld=True)).watertight:
                leaky.append(r["mesh_path"])
        report["not_watertight"] = leaky
    ok = [r for r in samples if r["status"] == OK]
    if ok and len(ok[0]["weights"]) == 3:
        train = [r for r in ok if in_incircle(r["map_xy"])]
        test = [r for r in ok if not in_incircle(r["map_xy"])]
        report["distance_to_corners"] = {"train": _split_summary(train), "test": _split_summary(test)}
    return report


def override(config, **changes):
    """Return ``config`` with the non-None ``changes`` applied."""
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
