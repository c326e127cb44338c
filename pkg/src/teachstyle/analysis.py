"""Case-study analytics: style summaries, time segments and gaze-based attention."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import AdjectiveEntry, AdjectiveLexicon, PACoordinate, centroid, nearest_adjectives

PARALLEL_TOL = 1e-12


def teacher_style(predictions: Sequence[PACoordinate], lexicon: AdjectiveLexicon,
                  k: int = 3) -> tuple[PACoordinate, list[tuple[AdjectiveEntry, float]]]:
    """Centroid of a teacher's (or course's) utterance predictions and its nearest adjectives."""
    if not predictions:
        raise ValueError("no predictions to summarize")
    c = centroid(predictions)
    return c, nearest_adjectives(c, lexicon, min(k, len(lexicon)))


def style_summary_json(center: PACoordinate, top: Sequence[tuple[AdjectiveEntry, float]]) -> dict:
    return {
        "centroid": {"pleasure": center.pleasure, "arousal": center.arousal},
        "top3": [{"id": e.id, "label": e.label, "distance": d} for e, d in top],
    }


def group_styles(keys: Sequence[str], predictions: Sequence[PACoordinate], lexicon: AdjectiveLexicon,
                 k: int = 3) -> dict[str, dict]:
    """Style summary per group key (teacher id, course id, ...)."""
    groups: dict[str, list[PACoordinate]] = defaultdict(list)
    for key, p in zip(keys, predictions, strict=True):
        groups[key].append(p)
    return {key: style_summary_json(*teacher_style(ps, lexicon, k)) for key, ps in sorted(groups.items())}


@dataclass
class Segment:
    index: int
    start: float
    stop: float
    members: list[str]
    centroid: PACoordinate | None


def segment_course(ids: Sequence[str], times: Sequence[float | None], predictions: Sequence[PACoordinate],
                   segments: int = 5, start: float | None = None, end: float | None = None) -> list[Segment]:
    """Split a class into equal time segments and average the predictions in each.

    Intervals are half-open ``[t0 + i*d, t0 + (i+1)*d)`` except the last,
    which is closed at ``end``. ``start``/``end`` default to the earliest and
    latest timestamps. Empty segments get a ``None`` centroid.
    """
    if not (len(ids) == len(times) == len(predictions)):
        raise ValueError("ids, times and predictions differ in length")
    if not ids:
        raise ValueError("no utterances")
    if any(t is None for t in times):
        raise ValueError("missing timestamps")
    if segments < 1:
        raise ValueError("segments must be positive")
    t = np.asarray(times, dtype=np.float64)
    t0 = float(t.min()) if start is None else float(start)
    t1 = float(t.max()) if end is None else float(end)
    if not t1 > t0:
        raise ValueError("class duration must be positive")
    if t.min() < t0 or t.max() > t1:
        raise ValueError("timestamps outside the class interval")
    width = (t1 - t0) / segments
    bounds = [t0 + i * width for i in range(segments)] + [t1]
    members: list[list[int]] = [[] for _ in range(segments)]
    for j, tj in enumerate(t):
        i = min(int((tj - t0) // width), segments - 1)
        # guard against rounding at the boundaries
        while i > 0 and tj < bounds[i]:
            i -= 1
        while i < segments - 1 and tj >= bounds[i + 1]:
            i += 1
        members[i].append(j)
    return [
        Segment(i, bounds[i], bounds[i + 1], [ids[j] for j in m], centroid([predictions[j] for j in m]) if m else None)
        for i, m in enumerate(members)
    ]


# -- gaze ------------------------------------------------------------------------


@dataclass(frozen=True)
class StudentGaze:
    student_id: str
    x: float
    y: float
    dx: float
    dy: float


@dataclass(frozen=True)
class GazeFrame:
    """Head positions and sight directions of the students in one video frame,
    projected on the floor plane."""

    students: tuple[StudentGaze, ...]

    @property
    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.students], dtype=np.float64)

    @property
    def directions(self) -> np.ndarray:
        return np.array([[s.dx, s.dy] for s in self.students], dtype=np.float64)

    @classmethod
    def from_json(cls, items: list) -> "GazeFrame":
        students = []
        for it in items:
            if set(it) != {"student_id", "x", "y", "dx", "dy"}:
                raise ValueError(f"gaze entry needs student_id, x, y, dx, dy; got {sorted(it)}")
            students.append(StudentGaze(str(it["student_id"]), float(it["x"]), float(it["y"]),
                                        float(it["dx"]), float(it["dy"])))
        return cls(tuple(students))


class AttentionCategory(Enum):
    I = "I"  # low attention
    II = "II"  # high attention
    III = "III"  # in between


def line_intersections(positions: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Intersection points of every pair of (infinite) sight lines; parallel pairs are skipped."""
    pts = []
    n = len(positions)
    for i in range(n):
        for j in range(i + 1, n):
            d1, d2 = directions[i], directions[j]
            cross = d1[0] * d2[1] - d1[1] * d2[0]
            if abs(cross) < PARALLEL_TOL:
                continue
            diff = positions[j] - positions[i]
            s = (diff[0] * d2[1] - diff[1] * d2[0]) / cross
            pts.append(positions[i] + s * d1)
    return np.array(pts, dtype=np.float64).reshape(-1, 2)


def trimmed_mean(values: np.ndarray) -> float:
    """Mean after dropping the floor(n/4) largest and floor(n/4) smallest values."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    cut = len(v) // 4
    return float(v[cut : len(v) - cut].mean())


def estimate_teacher_position(frame: GazeFrame) -> tuple[float, float]:
    if len(frame.students) < 2:
        raise ValueError("need at least two students")
    pts = line_intersections(frame.positions, frame.directions)
    if len(pts) == 0:
        raise ValueError("no intersections")
    return trimmed_mean(pts[:, 0]), trimmed_mean(pts[:, 1])


def attention_scores(frame: GazeFrame, teacher: tuple[float, float]) -> np.ndarray:
    """Perpendicular distance from the teacher to each student's sight line."""
    d = frame.directions
    norms = np.hypot(d[:, 0], d[:, 1])
    bad = [s.student_id for s, n in zip(frame.students, norms) if n == 0.0]
    if bad:
        raise ValueError(f"zero sight direction for students {bad}")
    rel = np.asarray(teacher, dtype=np.float64) - frame.positions
    return np.abs(rel[:, 0] * d[:, 1] - rel[:, 1] * d[:, 0]) / norms


def categorize_attention(distances: Sequence[float], polarity: str = "geometric") -> list[AttentionCategory]:
    """Three-way split of distances around half and twice their mean.

    ``geometric`` (default): a sight line passing close to the teacher means
    high attention, so d <= mean/2 -> II, d >= 2*mean -> I, otherwise III.
    ``literal`` swaps I and II.
    """
    if polarity not in ("geometric", "literal"):
        raise ValueError(f"unknown polarity {polarity!r}")
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise ValueError("no distances")
    mean = d.mean()
    near, far = (AttentionCategory.II, AttentionCategory.I)
    if polarity == "literal":
        near, far = far, near
    out = []
    for x in d:
        if x <= 0.5 * mean:
            out.append(near)
        elif x >= 2.0 * mean:
            out.append(far)
        else:
            out.append(AttentionCategory.III)
    return out


def attention_report(frames: Iterable[GazeFrame], polarity: str = "geometric") -> list[dict]:
    """Mean sight-line distance per student over a window of frames, then categories.

    Frames where the teacher cannot be located (all lines parallel) are skipped.
    """
    sums: dict[str, float] = defaultdict(float)
    counts: dict[str, int] = defaultdict(int)
    for frame in frames:
        try:
            teacher = estimate_teacher_position(frame)
        except ValueError:
            continue
        for s, dist in zip(frame.students, attention_scores(frame, teacher)):
            sums[s.student_id] += float(dist)
            counts[s.student_id] += 1
    if not counts:
        raise ValueError("no frame allowed a teacher estimate")
    ids = sorted(counts)
    means = [sums[i] / counts[i] for i in ids]
    cats = categorize_attention(means, polarity)
    return [{"student_id": i, "mean_distance": m, "category": c.value} for i, m, c in zip(ids, means, cats)]


def load_gaze(path: str | Path) -> list[GazeFrame]:
    frames = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    frames.append(GazeFrame.from_json(json.loads(line)))
                except (ValueError, TypeError, KeyError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return frames


def synth_gaze_scene(n_students: int, teacher: tuple[float, float], angle_sd: float,
                     rng: np.random.Generator, radius: tuple[float, float] = (1.0, 3.0),
                     span: float = 1.3) -> GazeFrame:
    """Students fanned out in front of a teacher, looking at them with angular noise.

    Each student sits at a distance drawn from ``radius`` and a bearing within
    ``span`` radians either side of the teacher's facing direction (-y).
    """
    tx, ty = teacher
    students = []
    for i in range(n_students):
        r = rng.uniform(*radius)
        bearing = rng.uniform(-span, span) - math.pi / 2
        x, y = tx + r * math.cos(bearing), ty + r * math.sin(bearing)
        ang = math.atan2(ty - y, tx - x) + rng.normal(0.0, angle_sd)
        students.append(StudentGaze(f"st{i:02d}", x, y, math.cos(ang), math.sin(ang)))
    return GazeFrame(tuple(students))
