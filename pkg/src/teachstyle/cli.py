"""Command-line pipelines: synth, train, eval, predict, map, styles, ablate, gaze, lexicon.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Progress goes to stderr; artifacts only to the paths given.
"""

from __future__ import annotations

import csv
import functools
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
from threadpoolctl import threadpool_limits

from . import analysis, annotate, evaluation, features, model as mdl
from .core import AdjectiveLexicon, PACoordinate, default_lexicon, nearest_adjectives


def _say(msg: str) -> None:
    click.echo(msg, err=True)


def _writable(ctx, param, value):
    if value is None:
        return value
    path = Path(value)
    parent = path.parent if path.suffix else path
    probe = parent if parent.exists() else parent.parent
    if not probe.exists() or not os.access(probe, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise click.BadParameter(f"cannot write to {value}")
    return path


def _runtime(fn):
    """Map uncaught failures to exit code 1 with a one-line diagnostic."""

    @functools.wraps(fn)
    def wrapper(*args, threads=None, **kwargs):
        try:
            with threadpool_limits(limits=threads):
                return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:  # noqa: BLE001 - CLI boundary
            _say(f"error: {exc}")
            sys.exit(1)

    return wrapper


def _common(fn):
    fn = click.option("--threads", type=click.IntRange(min=1), default=None, help="Cap on BLAS worker threads.")(fn)
    return fn


def _model_options(fn):
    for opt in reversed([
        click.option("--variant", type=click.Choice(["dnn", "mdnn", "amdnn", "ammdnn"]), default="ammdnn", show_default=True),
        click.option("--lambda", "lam", type=click.FloatRange(0.0, 1.0), default=0.5, show_default=True,
                     help="Weight of the local-regressor losses."),
        click.option("--paths", type=click.IntRange(min=3), default=7, show_default=True,
                     help="Path count N when no --grouping is given (acoustic gets N-2 paths)."),
        click.option("--epochs", type=click.IntRange(min=0), default=mdl.ModelConfig.epochs, show_default=True),
        click.option("--batch", type=click.IntRange(min=1), default=mdl.ModelConfig.batch_size, show_default=True),
        click.option("--lr", type=click.FloatRange(min=0.0, min_open=True), default=1e-4, show_default=True),
        click.option("--dropout", type=click.FloatRange(0.0, 1.0, max_open=True), default=0.5, show_default=True),
        click.option("--hidden", type=click.IntRange(min=1), default=400, show_default=True,
                     help="Units per hidden layer (two layers)."),
    ]):
        fn = opt(fn)
    return fn


def _model_config(variant, lam, epochs, batch, lr, dropout, hidden) -> mdl.ModelConfig:
    return mdl.ModelConfig(variant=variant, hidden=(hidden, hidden), global_hidden=(hidden, hidden), dropout=dropout,
                           lam=lam, lr=lr, epochs=epochs, batch_size=batch)


def _load_grouping(grouping: Path | None, records, paths: int) -> features.GroupingConfig:
    if grouping is not None:
        return features.GroupingConfig.load(grouping)
    dims = {m: len(v) for m, v in records[0].features.items()}
    return features.default_grouping(dims, acoustic_paths=paths - (len(dims) - 1))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


existing = click.Path(exists=True, dir_okay=False, path_type=Path)
out_file = click.Path(dir_okay=False, path_type=Path)


@click.group()
@click.version_option(package_name="teachstyle")
def cli():
    """Teaching-style modelling in the pleasure-arousal plane."""


@cli.command()
@click.option("--n", type=click.IntRange(min=1), required=True, help="Number of utterances.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise", type=click.FloatRange(min=0.0), default=0.0, show_default=True, help="Label noise sd.")
@click.option("--label-modalities", default="acoustic,visual,textual", show_default=True)
@click.option("--independent-modalities", is_flag=True, help="Give every modality its own latent factors.")
@click.option("--out", type=out_file, callback=_writable, default="synth.jsonl", show_default=True)
@_common
@_runtime
def synth(n, seed, noise, label_modalities, independent_modalities, out):
    """Write a seeded synthetic dataset plus ground-truth and grouping sidecars."""
    grouping = features.default_grouping(features.SYNTH_DIMS)
    records, truth = features.synth_dataset(
        n, grouping, noise, seed, label_modalities=label_modalities.split(","),
        shared_factors=not independent_modalities, return_truth=True,
    )
    features.save_records(records, out)
    _write_json(out.with_suffix(".truth.json"), truth.to_json())
    grouping.save(out.with_suffix(".grouping.json"))
    _say(f"wrote {n} utterances to {out}")


@cli.command()
@click.option("--data", type=existing, required=True)
@click.option("--grouping", type=existing, default=None)
@click.option("--out", type=out_file, callback=_writable, default="model.json", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_model_options
@_common
@_runtime
def train(data, grouping, out, seed, variant, lam, paths, epochs, batch, lr, dropout, hidden):
    """Train a model; writes the checkpoint and a per-epoch CSV log next to it."""
    records = features.load_records(data)
    grouping = _load_grouping(grouping, records, paths)
    config = _model_config(variant, lam, epochs, batch, lr, dropout, hidden)
    model, log = mdl.train(records, config, grouping, seed,
                           progress=lambda r: _say(f"epoch {r['epoch']}: loss {r['train_loss']:.5f}"))
    mdl.save_checkpoint(model, out)
    log.to_csv(out.with_suffix(".log.csv"))
    _say(f"checkpoint written to {out} (grouping {model.grouping_hash})")


@cli.command("eval")
@click.option("--data", type=existing, required=True)
@click.option("--grouping", type=existing, default=None)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), callback=_writable, default="report",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--folds", type=click.IntRange(min=2), default=5, show_default=True)
@_model_options
@_common
@_runtime
def eval_(data, grouping, out, seed, folds, variant, lam, paths, epochs, batch, lr, dropout, hidden):
    """K-fold cross-validation; writes report.json and report.csv."""
    records = features.load_records(data)
    grouping = _load_grouping(grouping, records, paths)
    config = _model_config(variant, lam, epochs, batch, lr, dropout, hidden)
    report = evaluation.cross_validate(records, config, grouping, folds, seed, progress=_say)
    report.write(out)
    m = report.mean
    _say(f"mean CCC: pleasure {m['pleasure_ccc']:.4f}, arousal {m['arousal_ccc']:.4f}")


@cli.command()
@click.option("--model", "model_path", type=existing, required=True)
@click.option("--data", type=existing, required=True)
@click.option("--grouping", type=existing, default=None, help="Checked against the checkpoint's grouping hash.")
@click.option("--out", type=out_file, callback=_writable, default="predictions.csv", show_default=True)
@_common
@_runtime
def predict(model_path, data, grouping, out):
    """Predict (pleasure, arousal) for every utterance."""
    model = mdl.load_checkpoint(model_path)
    records = features.load_records(data)
    pred = mdl.predict_batch(model, records, features.GroupingConfig.load(grouping) if grouping else None)
    _write_csv(out, ["utterance_id", "pleasure", "arousal"],
               ((r.id, float(p), float(a)) for r, (p, a) in zip(records, pred)))
    _say(f"wrote {len(records)} predictions to {out}")


def _read_predictions(path: Path) -> list[tuple[str, PACoordinate]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"utterance_id", "pleasure", "arousal"}:
            raise ValueError(f"{path}: expected columns utterance_id, pleasure, arousal")
        return [(row["utterance_id"], PACoordinate(float(row["pleasure"]), float(row["arousal"]))) for row in reader]


def _lexicon(path: Path | None) -> AdjectiveLexicon:
    return AdjectiveLexicon.load(path) if path else default_lexicon()


@cli.command("map")
@click.option("--predictions", type=existing, default=None, help="CSV from `predict`.")
@click.option("--point", type=(float, float), default=None, help="A single (pleasure, arousal) coordinate.")
@click.option("--lexicon", type=existing, default=None, help="Lexicon JSON (default: shipped lexicon).")
@click.option("--k", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--out", type=out_file, callback=_writable, default="adjectives.json", show_default=True)
@_common
@_runtime
def map_(predictions, point, lexicon, k, out):
    """Nearest adjectives for each predicted coordinate."""
    if (predictions is None) == (point is None):
        raise click.UsageError("give exactly one of --predictions or --point")
    lex = _lexicon(lexicon)
    items = _read_predictions(predictions) if predictions else [("point", PACoordinate(*point))]
    result = []
    for uid, coord in items:
        top = nearest_adjectives(coord, lex, min(k, len(lex)))
        result.append({
            "utterance_id": uid,
            "pleasure": coord.pleasure,
            "arousal": coord.arousal,
            "adjectives": [{"id": e.id, "label": e.label, "distance": d} for e, d in top],
        })
    _write_json(out, result)
    _say(f"mapped {len(result)} coordinates")


@cli.command()
@click.option("--predictions", type=existing, required=True, help="CSV from `predict`.")
@click.option("--data", type=existing, required=True, help="Records carrying teacher, course and time metadata.")
@click.option("--lexicon", type=existing, default=None)
@click.option("--segments", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--out", type=out_file, callback=_writable, default="styles.json", show_default=True)
@_common
@_runtime
def styles(predictions, data, lexicon, segments, out):
    """Per-teacher and per-course style summaries plus in-class time segments."""
    lex = _lexicon(lexicon)
    preds = dict(_read_predictions(predictions))
    records = [r for r in features.load_records(data) if r.id in preds]
    if not records:
        raise ValueError("no record matches a prediction")
    coords = [preds[r.id] for r in records]
    result = {
        "teachers": analysis.group_styles([r.teacher or "unknown" for r in records], coords, lex),
        "courses": analysis.group_styles([r.course or "unknown" for r in records], coords, lex),
        "segments": {},
    }
    by_course: dict[str, list[int]] = {}
    for i, r in enumerate(records):
        by_course.setdefault(r.course or "unknown", []).append(i)
    for course, idx in sorted(by_course.items()):
        times = [records[i].time for i in idx]
        if any(t is None for t in times) or len(set(times)) < 2:
            continue
        segs = analysis.segment_course([records[i].id for i in idx], times, [coords[i] for i in idx], segments)
        result["segments"][course] = [
            {"index": s.index, "start": s.start, "stop": s.stop, "count": len(s.members),
             "centroid": None if s.centroid is None else {"pleasure": s.centroid.pleasure, "arousal": s.centroid.arousal}}
            for s in segs
        ]
    _write_json(out, result)
    _say(f"summarized {len(result['teachers'])} teachers and {len(result['courses'])} courses")


@cli.command()
@click.option("--data", type=existing, required=True)
@click.option("--grouping", type=existing, default=None)
@click.option("--out", type=out_file, callback=_writable, default="ablation.csv", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--folds", type=click.IntRange(min=2), default=5, show_default=True)
@_model_options
@_common
@_runtime
def ablate(data, grouping, out, seed, folds, variant, lam, paths, epochs, batch, lr, dropout, hidden):
    """Feature-contribution table: A, A+V, A+V+T and A+V+T with attention."""
    records = features.load_records(data)
    grouping = _load_grouping(grouping, records, paths)
    config = _model_config(variant, lam, epochs, batch, lr, dropout, hidden)
    rows = evaluation.ablation(records, grouping, config, folds, seed, progress=_say)
    evaluation.write_ablation_csv(rows, out)


@cli.command()
@click.option("--data", type=existing, required=True, help="Gaze JSONL, one frame per line.")
@click.option("--polarity", type=click.Choice(["geometric", "literal"]), default="geometric", show_default=True)
@click.option("--out", type=out_file, callback=_writable, default="attention.csv", show_default=True)
@_common
@_runtime
def gaze(data, polarity, out):
    """Per-student attention report from sight lines over a window of frames."""
    report = analysis.attention_report(analysis.load_gaze(data), polarity)
    _write_csv(out, ["student_id", "mean_distance", "category"],
               ((r["student_id"], r["mean_distance"], r["category"]) for r in report))
    counts = {c: sum(r["category"] == c for r in report) for c in ("I", "II", "III")}
    _say(f"{len(report)} students: " + ", ".join(f"{c}={n}" for c, n in counts.items()))


@cli.command()
@click.option("--data", type=existing, required=True, help="Annotation JSONL.")
@click.option("--threshold", type=click.IntRange(min=1), default=3, show_default=True,
              help="Votes needed to map an utterance to an adjective.")
@click.option("--annotators", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--names", type=existing, default=None,
              help="Lexicon JSON whose labels and categories are reused by id (default: shipped lexicon).")
@click.option("--out", type=out_file, callback=_writable, default="lexicon.json", show_default=True)
@click.option("--labels-out", type=out_file, callback=_writable, default=None, help="Also export normalized labels CSV.")
@_common
@_runtime
def lexicon(data, threshold, annotators, names, out, labels_out):
    """Build the adjective lexicon (and normalized PA labels) from annotations."""
    records = annotate.load_annotations(data)
    labels = annotate.aggregate_labels(records)
    info = {e.id: (e.label, e.major_category) for e in _lexicon(names)}
    lex = annotate.build_lexicon(records, labels, threshold, annotators, info)
    lex.save(out)
    if labels_out is not None:
        _write_csv(labels_out, ["utterance_id", "pleasure", "arousal"],
                   ((u, c.pleasure, c.arousal) for u, c in sorted(labels.items())))
    for dim in ("pleasure", "arousal"):
        mat = annotate.rating_matrix(records, dim)
        if mat.shape[0] >= 2 and mat.shape[1] >= 2:
            try:
                _say(f"Cronbach alpha ({dim}): {annotate.cronbach_alpha(mat):.3f}")
            except ValueError as exc:
                _say(f"Cronbach alpha ({dim}): n/a ({exc})")
    _say(f"lexicon with {len(lex)} adjectives written to {out}")


def main(argv=None):
    cli.main(args=argv, prog_name="teachstyle")


if __name__ == "__main__":
    main()
