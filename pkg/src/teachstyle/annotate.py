"""Questionnaire scoring, label normalization, rater reliability and lexicon construction.

All variances in this module are population variances (divide by n).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import AdjectiveEntry, AdjectiveLexicon, PACoordinate, centroid

ANSWER_RANGE = (-2, 2)


@dataclass(frozen=True)
class QuestionnaireResponse:
    """Answers to the four bipolar items, each on the -2..2 scale.

    q1: wide awake .. sleepy, q2: friendly .. strict,
    q3: harsh sound .. comfortable sound, q4: cautious .. surprising.
    """

    q1: int
    q2: int
    q3: int
    q4: int

    def __post_init__(self):
        for name in ("q1", "q2", "q3", "q4"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if not ANSWER_RANGE[0] <= value <= ANSWER_RANGE[1]:
                raise ValueError(f"{name}={value} outside [-2, 2]")


@dataclass(frozen=True)
class AnnotationRecord:
    utterance_id: str
    annotator_id: str
    response: QuestionnaireResponse
    adjective_votes: frozenset[int] = field(default_factory=frozenset)

    def to_json(self) -> dict:
        r = self.response
        return {
            "utterance_id": self.utterance_id,
            "annotator_id": self.annotator_id,
            "response": [r.q1, r.q2, r.q3, r.q4],
            "adjective_votes": sorted(self.adjective_votes),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationRecord":
        expected = {"utterance_id", "annotator_id", "response", "adjective_votes"}
        if set(obj) != expected:
            raise ValueError(f"annotation fields must be {sorted(expected)}, got {sorted(obj)}")
        q = obj["response"]
        if not isinstance(q, list) or len(q) != 4:
            raise ValueError(f"response must be a list of four answers, got {q!r}")
        return cls(
            utterance_id=str(obj["utterance_id"]),
            annotator_id=str(obj["annotator_id"]),
            response=QuestionnaireResponse(*q),
            adjective_votes=frozenset(int(v) for v in obj["adjective_votes"]),
        )


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(AnnotationRecord.from_json(json.loads(line)))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    _check_unique_pairs(records)
    return records


def save_annotations(records: Iterable[AnnotationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def _check_unique_pairs(records: Sequence[AnnotationRecord]) -> None:
    seen = set()
    for rec in records:
        key = (rec.utterance_id, rec.annotator_id)
        if key in seen:
            raise ValueError(f"duplicate annotation for utterance {key[0]!r} by annotator {key[1]!r}")
        seen.add(key)


def score_response(r: QuestionnaireResponse) -> tuple[float, float]:
    """Raw (pleasure, arousal) scores, each in [-4, 4]."""
    return float(-r.q2 + r.q3), float(-r.q1 + r.q4)


def zscore_normalize(values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("zscore_normalize needs at least two values")
    if not np.all(np.isfinite(x)):
        raise ValueError("zscore_normalize got non-finite values")
    mean = x.mean()
    sd = np.sqrt(np.mean((x - mean) ** 2))
    if sd == 0.0:
        raise ValueError("zero variance")
    return (x - mean) / sd


def aggregate_labels(records: Sequence[AnnotationRecord]) -> dict[str, PACoordinate]:
    """Average each utterance's annotator scores, then z-score P and A over the dataset."""
    if not records:
        raise ValueError("no annotation records")
    _check_unique_pairs(records)
    per_utt: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for rec in records:
        per_utt[rec.utterance_id].append(score_response(rec.response))
    ids = sorted(per_utt)
    raw = np.array([np.mean(per_utt[u], axis=0) for u in ids])
    p = zscore_normalize(raw[:, 0])
    a = zscore_normalize(raw[:, 1])
    return {u: PACoordinate(float(pi), float(ai)) for u, pi, ai in zip(ids, p, a)}


def cronbach_alpha(ratings) -> float:
    """Cronbach's alpha for an (items x raters) matrix.

    Raters play the role of "items" in the classical formula: alpha measures
    how consistently the raters score the same utterances.
    """
    x = np.asarray(ratings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError(f"need at least 2 items and 2 raters, got shape {x.shape}")
    k = x.shape[1]
    rater_var = x.var(axis=0).sum()
    total_var = x.sum(axis=1).var()
    if total_var == 0.0:
        raise ValueError("zero total-score variance")
    return float(k / (k - 1) * (1.0 - rater_var / total_var))


def rating_matrix(records: Sequence[AnnotationRecord], dimension: str = "pleasure") -> np.ndarray:
    """Arrange raw scores of one dimension as (utterances x annotators).

    Only utterances rated by every annotator are kept, so the matrix is dense.
    """
    col = {"pleasure": 0, "arousal": 1}[dimension]
    annotators = sorted({r.annotator_id for r in records})
    table: dict[str, dict[str, float]] = defaultdict(dict)
    for rec in records:
        table[rec.utterance_id][rec.annotator_id] = score_response(rec.response)[col]
    rows = [[row[a] for a in annotators] for _, row in sorted(table.items()) if len(row) == len(annotators)]
    return np.array(rows, dtype=np.float64)


def build_lexicon(
    records: Sequence[AnnotationRecord],
    labels: Mapping[str, PACoordinate],
    agreement_threshold: int = 3,
    annotators_per_utterance: int = 5,
    adjective_info: Mapping[int, tuple[str, str]] | None = None,
) -> AdjectiveLexicon:
    """Place each adjective at the centroid of the utterances mapped to it.

    An utterance maps to adjective ``j`` when at least ``agreement_threshold``
    of its annotators voted for ``j``. Use ``agreement_threshold=4`` for the
    strict "more than three of five" reading. ``adjective_info`` supplies
    ``(label, category)`` per id; without it labels default to ``adj<id>``.
    """
    if agreement_threshold < 1:
        raise ValueError("agreement_threshold must be positive")
    if agreement_threshold > annotators_per_utterance:
        raise ValueError("agreement_threshold exceeds annotators_per_utterance")
    _check_unique_pairs(records)
    votes: dict[tuple[str, int], int] = defaultdict(int)
    for rec in records:
        for adj in rec.adjective_votes:
            votes[rec.utterance_id, adj] += 1

    members: dict[int, list[str]] = defaultdict(list)
    for (utt, adj), count in sorted(votes.items()):
        if count >= agreement_threshold:
            if utt not in labels:
                raise KeyError(f"no label for utterance {utt!r}")
            members[adj].append(utt)
    if not members:
        raise ValueError("empty lexicon")

    entries = []
    for adj in sorted(members):
        label, category = (adjective_info or {}).get(adj, (f"adj{adj}", "vivid"))
        entries.append(AdjectiveEntry(adj, label, category, centroid([labels[u] for u in members[adj]])))
    return AdjectiveLexicon(entries)


def synth_annotations(
    anchors: Mapping[int, PACoordinate],
    utterances_per_adjective: int = 6,
    annotators: int = 5,
    spread: float = 0.35,
    seed: int = 0,
) -> tuple[list[AnnotationRecord], dict[str, PACoordinate]]:
    """Planted vote set: utterances scattered around each adjective's anchor.

    Each utterance gets a random number of agreeing votes for its own
    adjective (some below threshold) plus sparse stray votes. Returns the
    records and the utterance labels; questionnaire answers are random and
    do not drive the labels.
    """
    rng = np.random.default_rng(seed)
    ids = sorted(anchors)
    records: list[AnnotationRecord] = []
    labels: dict[str, PACoordinate] = {}
    for adj in ids:
        anchor = anchors[adj]
        for j in range(utterances_per_adjective):
            utt = f"u{adj:03d}_{j:02d}"
            offset = rng.normal(0.0, spread, size=2)
            labels[utt] = PACoordinate(anchor.pleasure + offset[0], anchor.arousal + offset[1])
            # the first utterance of every adjective is unanimous so no adjective drops out
            agree = annotators if j == 0 else int(rng.integers(1, annotators + 1))
            voters = set(rng.permutation(annotators)[:agree].tolist())
            for ann in range(annotators):
                chosen = {adj} if ann in voters else set()
                if rng.random() < 0.15:
                    chosen.add(int(rng.choice(ids)))
                q = rng.integers(-2, 3, size=4).tolist()
                records.append(AnnotationRecord(utt, f"a{ann}", QuestionnaireResponse(*q), frozenset(chosen)))
    return records, labels


# (label, category, anchor pleasure, anchor arousal). Only the placement of a
# handful of adjectives is known qualitatively; anchors are placeholders.
DEFAULT_ADJECTIVES: tuple[tuple[str, str, float, float], ...] = (
    ("humorous", "vivid", 1.3, 1.1),
    ("lively", "vivid", 1.1, 1.4),
    ("enthusiastic", "vivid", 0.9, 1.5),
    ("energetic", "vivid", 0.6, 1.6),
    ("cheerful", "vivid", 1.5, 0.9),
    ("expressive", "vivid", 0.8, 1.1),
    ("vigorous", "vivid", 0.4, 1.3),
    ("inspiring", "vivid", 1.0, 0.8),
    ("eloquent", "vivid", 0.5, 0.9),
    ("confident", "vivid", 0.3, 0.7),
    ("friendly", "amiable", 1.4, 0.4),
    ("sincere", "amiable", 0.9, 0.3),
    ("gentle", "amiable", 1.2, -0.3),
    ("patient", "amiable", 0.8, -0.5),
    ("kind", "amiable", 1.5, 0.0),
    ("warm", "amiable", 1.6, 0.5),
    ("encouraging", "amiable", 1.1, 0.6),
    ("relaxed", "amiable", 1.0, -0.8),
    ("calm", "amiable", 0.5, -0.9),
    ("approachable", "amiable", 1.3, 0.2),
    ("serious", "rigorous", -0.9, 0.8),
    ("resonant", "rigorous", -0.4, 1.2),
    ("unrestrained", "rigorous", -0.2, 1.5),
    ("passionate", "rigorous", -0.5, 1.7),
    ("severe", "rigorous", -1.3, 1.0),
    ("strict", "rigorous", -1.1, 0.6),
    ("stern", "rigorous", -1.5, 0.7),
    ("loud", "rigorous", -0.7, 1.4),
    ("hurried", "rigorous", -0.8, 1.1),
    ("meticulous", "rigorous", -0.3, 0.4),
    ("rigorous", "rigorous", -0.6, 0.5),
    ("impatient", "flat", -1.4, -0.6),
    ("rigid", "flat", -1.2, -1.0),
    ("stiff", "flat", -0.9, -1.3),
    ("insipid", "flat", 0.7, -1.4),
    ("dull", "flat", 0.4, -1.6),
    ("quiet", "flat", 0.9, -1.2),
    ("monotonous", "flat", -0.2, -1.5),
    ("tedious", "flat", -0.5, -1.1),
    ("indifferent", "flat", -1.0, -0.4),
    ("mechanical", "flat", -0.6, -0.8),
)


def regenerate_default_lexicon(seed: int = 2019) -> AdjectiveLexicon:
    """Rebuild the shipped lexicon from a planted vote set around the anchors."""
    info = {i: (label, cat) for i, (label, cat, _, _) in enumerate(DEFAULT_ADJECTIVES, 1)}
    anchors = {i: PACoordinate(p, a) for i, (_, _, p, a) in enumerate(DEFAULT_ADJECTIVES, 1)}
    records, labels = synth_annotations(anchors, spread=0.15, seed=seed)
    return build_lexicon(records, labels, adjective_info=info)
