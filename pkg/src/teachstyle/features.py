"""Utterance-level features: LLD functionals, path grouping and synthetic data."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import PACoordinate

MODALITIES = ("acoustic", "visual", "textual")
FUNCTIONAL_NAMES = (
    "mean", "std", "disp", "max", "min", "range",
    "q1", "q2", "q3", "iqr12", "iqr23", "iqr13",
    "skewness", "kurtosis",
)
PAPER_DIMS = {"acoustic": 1582, "visual": 14, "textual": 4200}
SYNTH_DIMS = {"acoustic": 60, "visual": 14, "textual": 28}


@dataclass(frozen=True)
class LLDSequence:
    frames: np.ndarray
    modality: str

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 1:
            frames = frames[:, None]
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError("LLD sequence needs at least one frame")
        if not np.all(np.isfinite(frames)):
            raise ValueError("LLD sequence contains non-finite values")
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        object.__setattr__(self, "frames", frames)


def functionals(seq: LLDSequence | np.ndarray) -> np.ndarray:
    """Summarize a (T x d) frame matrix into 14 statistics per dimension.

    Output is laid out dimension-major: the 14 values of dimension 0, then
    dimension 1, and so on. ``disp`` is the mean absolute deviation from the
    mean; quartiles use linear interpolation; skewness and excess kurtosis
    are the biased moment ratios and read 0 for a constant dimension.
    """
    if not isinstance(seq, LLDSequence):
        arr = np.asarray(seq, dtype=np.float64)
        if arr.size == 0:
            raise ValueError("empty LLD sequence")
        seq = LLDSequence(arr, "acoustic")
    x = seq.frames
    mean = x.mean(axis=0)
    dev = x - mean
    var = np.mean(dev**2, axis=0)
    std = np.sqrt(var)
    disp = np.mean(np.abs(dev), axis=0)
    hi, lo = x.max(axis=0), x.min(axis=0)
    q1, q2, q3 = np.percentile(x, [25, 50, 75], axis=0)
    m3 = np.mean(dev**3, axis=0)
    m4 = np.mean(dev**4, axis=0)
    flat = var == 0.0
    safe_var = np.where(flat, 1.0, var)
    skew = np.where(flat, 0.0, m3 / safe_var**1.5)
    kurt = np.where(flat, 0.0, m4 / safe_var**2 - 3.0)
    stats = np.stack([mean, std, disp, hi, lo, hi - lo, q1, q2, q3, q2 - q1, q3 - q2, q3 - q1, skew, kurt], axis=1)
    return stats.reshape(-1)


@dataclass(frozen=True)
class Slice:
    modality: str
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class GroupingConfig:
    """How modality vectors are cut into model paths.

    ``dims`` gives the expected length of every modality the config uses;
    modalities left out of ``dims`` are ignored by :func:`group_features`.
    """

    dims: Mapping[str, int]
    paths: tuple[tuple[Slice, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", dict(self.dims))
        object.__setattr__(self, "paths", tuple(tuple(p) for p in self.paths))
        if not self.paths:
            raise ValueError("grouping needs at least one path")
        covered = {m: np.zeros(d, dtype=int) for m, d in self.dims.items()}
        for i, path in enumerate(self.paths):
            if not path:
                raise ValueError(f"path {i} is empty")
            for s in path:
                if s.modality not in covered:
                    raise ValueError(f"path {i} uses modality {s.modality!r} missing from dims")
                if not 0 <= s.start < s.stop <= self.dims[s.modality]:
                    raise ValueError(f"path {i} has bad range {s.modality}[{s.start}:{s.stop}]")
                covered[s.modality][s.start : s.stop] += 1
        for m, count in covered.items():
            if np.any(count > 1):
                raise ValueError(f"overlapping paths on {m}")
            if np.any(count == 0):
                raise ValueError(f"incomplete grouping: {m} dimensions {np.flatnonzero(count == 0)[:5].tolist()}... uncovered")

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def path_modality(self, i: int) -> str:
        """The single modality of path ``i``, or ``"mixed"``."""
        mods = {s.modality for s in self.paths[i]}
        return mods.pop() if len(mods) == 1 else "mixed"

    def path_dims(self) -> list[int]:
        return [sum(s.size for s in p) for p in self.paths]

    def to_json(self) -> dict:
        return {
            "dims": {m: self.dims[m] for m in MODALITIES if m in self.dims},
            "paths": [[[s.modality, s.start, s.stop] for s in p] for p in self.paths],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroupingConfig":
        if set(obj) != {"dims", "paths"}:
            raise ValueError("grouping config needs exactly the fields 'dims' and 'paths'")
        paths = tuple(tuple(Slice(str(m), int(a), int(b)) for m, a, b in p) for p in obj["paths"])
        return cls({str(k): int(v) for k, v in obj["dims"].items()}, paths)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "GroupingConfig":
        return cls.from_json(json.loads(Path(path).read_text()))

    def restrict(self, modalities: Sequence[str]) -> "GroupingConfig":
        """Drop every path and dimension of modalities not listed."""
        keep = set(modalities)
        paths = [p for p in self.paths if {s.modality for s in p} <= keep]
        if any({s.modality for s in p} & keep and not {s.modality for s in p} <= keep for p in self.paths):
            raise ValueError("cannot restrict a grouping whose paths mix modalities")
        return GroupingConfig({m: d for m, d in self.dims.items() if m in keep}, tuple(paths))

    def single_path(self) -> "GroupingConfig":
        """One path spanning every dimension (the plain DNN input)."""
        path = tuple(Slice(m, 0, d) for m, d in self.dims.items())
        return GroupingConfig(self.dims, (path,))


def _even_ranges(total: int, parts: int) -> list[tuple[int, int]]:
    # the first (total % parts) ranges get one extra element
    sizes = [len(c) for c in np.array_split(np.arange(total), parts)]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    return [(int(a), int(b)) for a, b in zip(starts[:-1], starts[1:])]


def default_grouping(dims: Mapping[str, int] | None = None, acoustic_paths: int = 5) -> GroupingConfig:
    """Seven paths by default: acoustic cut into contiguous equal ranges, then visual, then textual."""
    dims = dict(PAPER_DIMS if dims is None else dims)
    if dims.get("acoustic", 0) < acoustic_paths:
        raise ValueError("fewer acoustic dimensions than acoustic paths")
    paths = [(Slice("acoustic", a, b),) for a, b in _even_ranges(dims["acoustic"], acoustic_paths)]
    for m in ("visual", "textual"):
        if dims.get(m):
            paths.append((Slice(m, 0, dims[m]),))
    return GroupingConfig(dims, tuple(paths))


def group_features(features: Mapping[str, np.ndarray], cfg: GroupingConfig) -> list[np.ndarray]:
    """Cut modality vectors into the configured paths.

    Works on single vectors or on row-stacked batches (leading axis = samples).
    """
    arrays = {}
    for m, d in cfg.dims.items():
        if m not in features:
            raise ValueError(f"missing modality {m!r}")
        arr = np.asarray(features[m], dtype=np.float64)
        if arr.shape[-1] != d:
            raise ValueError(f"{m} has {arr.shape[-1]} dimensions, grouping expects {d}")
        arrays[m] = arr
    return [np.concatenate([arrays[s.modality][..., s.start : s.stop] for s in path], axis=-1) for path in cfg.paths]


def ungroup_features(groups: Sequence[np.ndarray], cfg: GroupingConfig) -> dict[str, np.ndarray]:
    """Inverse of :func:`group_features`."""
    if len(groups) != cfg.n_paths:
        raise ValueError(f"expected {cfg.n_paths} groups, got {len(groups)}")
    lead = np.asarray(groups[0]).shape[:-1]
    out = {m: np.empty(lead + (d,)) for m, d in cfg.dims.items()}
    for g, path in zip(groups, cfg.paths):
        g = np.asarray(g, dtype=np.float64)
        off = 0
        for s in path:
            out[s.modality][..., s.start : s.stop] = g[..., off : off + s.size]
            off += s.size
        if off != g.shape[-1]:
            raise ValueError("group width does not match its path")
    return out


@dataclass
class UtteranceRecord:
    """One utterance: modality feature vectors, optional label and context.

    Vectors are kept per modality so a record can be regrouped (e.g. with
    modalities masked out); :meth:`groups` yields the per-path model input.
    """

    id: str
    features: dict[str, np.ndarray]
    label: PACoordinate | None = None
    teacher: str | None = None
    course: str | None = None
    time: float | None = None

    def groups(self, cfg: GroupingConfig) -> list[np.ndarray]:
        return group_features(self.features, cfg)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "features": {m: self.features[m].tolist() for m in MODALITIES if m in self.features},
            "label": None if self.label is None else {"pleasure": self.label.pleasure, "arousal": self.label.arousal},
            "teacher": self.teacher,
            "course": self.course,
            "time": self.time,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "UtteranceRecord":
        allowed = {"id", "features", "label", "teacher", "course", "time"}
        unknown = set(obj) - allowed
        if unknown:
            raise ValueError(f"unknown record fields {sorted(unknown)}")
        feats = {}
        for m, value in obj["features"].items():
            if m not in MODALITIES:
                raise ValueError(f"unknown modality {m!r}")
            arr = np.asarray(value, dtype=np.float64)
            # a frame matrix is summarized on load
            feats[m] = functionals(LLDSequence(arr, m)) if arr.ndim == 2 else arr
            if not np.all(np.isfinite(feats[m])):
                raise ValueError(f"record {obj['id']!r} has non-finite {m} features")
        label = obj.get("label")
        return cls(
            id=str(obj["id"]),
            features=feats,
            label=None if label is None else PACoordinate(float(label["pleasure"]), float(label["arousal"])),
            teacher=obj.get("teacher"),
            course=obj.get("course"),
            time=None if obj.get("time") is None else float(obj["time"]),
        )


def load_records(path: str | Path) -> list[UtteranceRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    records.append(UtteranceRecord.from_json(json.loads(line)))
                except (KeyError, ValueError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate utterance ids")
    return records


def save_records(records: Sequence[UtteranceRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def stack_groups(records: Sequence[UtteranceRecord], cfg: GroupingConfig) -> list[np.ndarray]:
    """Per-path (n x d_path) matrices for a list of records."""
    feats = {m: np.stack([r.features[m] for r in records]) for m in cfg.dims}
    return group_features(feats, cfg)


def stack_labels(records: Sequence[UtteranceRecord]) -> np.ndarray:
    missing = [r.id for r in records if r.label is None]
    if missing:
        raise ValueError(f"unlabeled records: {missing[:5]}")
    return np.array([[r.label.pleasure, r.label.arousal] for r in records])


@dataclass
class GroundTruthMap:
    """Planted label map: labels = tanh(x @ projection) @ readout (+ noise).

    ``x`` is the concatenation of the modality vectors listed in
    ``modalities`` (in that order). Pleasure and arousal share the tanh
    layer, so the two tasks are related by construction.
    """

    modalities: tuple[str, ...]
    projection: np.ndarray
    readout: np.ndarray
    extra: dict = field(default_factory=dict)

    def __call__(self, features: Mapping[str, np.ndarray]) -> np.ndarray:
        x = np.concatenate([np.asarray(features[m], dtype=np.float64) for m in self.modalities], axis=-1)
        return np.tanh(x @ self.projection) @ self.readout

    def to_json(self) -> dict:
        return {
            "modalities": list(self.modalities),
            "projection": self.projection.tolist(),
            "readout": self.readout.tolist(),
            **self.extra,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruthMap":
        extra = {k: v for k, v in obj.items() if k not in ("modalities", "projection", "readout")}
        return cls(tuple(obj["modalities"]), np.array(obj["projection"]), np.array(obj["readout"]), extra)


def synth_dataset(
    n: int,
    cfg: GroupingConfig | None = None,
    noise_sd: float = 0.0,
    seed: int = 0,
    label_modalities: Sequence[str] = MODALITIES,
    shared_factors: bool = True,
    rank: int = 4,
    n_factors: int = 6,
    specific_sd: float = 0.1,
    gain: float = 0.5,
    return_truth: bool = False,
):
    """Seeded synthetic utterances with labels from a planted smooth map.

    Features follow a factor model: each modality is a random linear image of
    latent factors plus idiosyncratic noise of sd ``specific_sd``. With ``shared_factors``
    all modalities load on the same factors (so any one modality carries the
    label signal); otherwise every modality has its own factors. Labels are
    ``tanh(x @ P) @ R`` over the ``label_modalities`` part of ``x``, with
    ``P`` of rank ``rank`` scaled so the tanh inputs have sd about ``gain``,
    plus Gaussian noise of sd ``noise_sd``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    cfg = cfg or default_grouping(SYNTH_DIMS)
    mods = [m for m in MODALITIES if m in cfg.dims]
    label_modalities = tuple(m for m in MODALITIES if m in label_modalities)
    if not label_modalities or not set(label_modalities) <= set(mods):
        raise ValueError(f"label modalities {label_modalities} not covered by grouping {mods}")

    root = np.random.SeedSequence(seed)
    map_rng, feat_rng, noise_rng, meta_rng = (np.random.default_rng(s) for s in root.spawn(4))

    loadings = {m: map_rng.normal(size=(n_factors, cfg.dims[m])) for m in mods}
    label_dim = sum(cfg.dims[m] for m in label_modalities)
    # pre-activations get roughly unit variance whatever the input width
    projection = gain * map_rng.normal(size=(label_dim, rank)) / np.sqrt(label_dim * (1.0 + specific_sd**2))
    readout = map_rng.normal(size=(rank, 2))
    readout /= gain * np.linalg.norm(readout, axis=0, keepdims=True)

    shared = feat_rng.normal(size=(n, n_factors))
    feats = {}
    for m in mods:
        z = shared if shared_factors else feat_rng.normal(size=(n, n_factors))
        feats[m] = z @ loadings[m] / np.sqrt(n_factors) + specific_sd * feat_rng.normal(size=(n, cfg.dims[m]))

    truth = GroundTruthMap(label_modalities, projection, readout, {"seed": seed, "noise_sd": noise_sd})
    clean = truth(feats)
    labels = clean + noise_rng.normal(0.0, noise_sd, size=clean.shape) if noise_sd > 0 else clean

    teachers = meta_rng.integers(0, max(1, n // 50) + 1, size=n)
    times = meta_rng.uniform(0.0, 2400.0, size=n)
    records = [
        UtteranceRecord(
            id=f"s{i:05d}",
            features={m: feats[m][i] for m in mods},
            label=PACoordinate(float(labels[i, 0]), float(labels[i, 1])),
            teacher=f"t{teachers[i]:02d}",
            course=("physics", "chinese")[int(teachers[i]) % 2],
            time=float(np.round(times[i], 3)),
        )
        for i in range(n)
    ]
    return (records, truth) if return_truth else records
