"""Multi-path regressors with acoustic-guided attention fusion.

A network has one *local regressor* per feature path (MLP trunk plus linear
task heads), fuses the trunks' top hidden layers into one representation and
feeds it to a *global regressor*. Variants:

========  ==========  =========  ==========
variant   multi-path  attention  multi-task
========  ==========  =========  ==========
dnn       no          no         no
mdnn      yes         no         no
amdnn     yes         yes        no
mmdnn     yes         no         yes
ammdnn    yes         yes        yes
========  ==========  =========  ==========

Single-task variants are realised as one network per task.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import nn
from .core import PACoordinate
from .features import GroupingConfig, UtteranceRecord, group_features, stack_labels

log = logging.getLogger(__name__)

TASKS = ("pleasure", "arousal")
VARIANTS = {
    "dnn": dict(multipath=False, attention=False, multitask=False),
    "mdnn": dict(multipath=True, attention=False, multitask=False),
    "amdnn": dict(multipath=True, attention=True, multitask=False),
    "mmdnn": dict(multipath=True, attention=False, multitask=True),
    "ammdnn": dict(multipath=True, attention=True, multitask=True),
}
CHECKPOINT_FORMAT = "teachstyle-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.5
    n_tasks: int = 2
    n_paths: int = 7

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.n_tasks < 1 or self.n_paths < 1:
            raise ValueError("need at least one task and one path")


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "ammdnn"
    hidden: tuple[int, ...] = (400, 400)
    global_hidden: tuple[int, ...] = (400, 400)
    dropout: float = 0.5
    lam: float = 0.5
    lr: float = 1e-4
    epochs: int = 40
    batch_size: int = 32
    standardize: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "global_hidden", tuple(int(h) for h in self.global_hidden))
        if not self.hidden or not self.global_hidden or min(self.hidden + self.global_hidden) < 1:
            raise ValueError("hidden layer sizes must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.lr <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("lr > 0, epochs >= 0 and batch_size >= 1 required")

    @property
    def flags(self) -> dict:
        return VARIANTS[self.variant]

    def to_json(self) -> dict:
        d = asdict(self)
        d["hidden"], d["global_hidden"] = list(self.hidden), list(self.global_hidden)
        return d


@dataclass
class LocalRegressor:
    trunk: nn.Mlp
    head: nn.DenseLayer  # one output row per task
    modality: str

    def params(self) -> list[np.ndarray]:
        return self.trunk.params() + self.head.params()


@dataclass
class AttentionFusion:
    """Scores each dimension of ``w`` from ``[w_i, a]`` with one shared ELU unit.

    ``scorer.weights[0, 0]`` multiplies ``w_i``; ``scorer.weights[0, 1:]``
    multiplies ``a``.
    """

    scorer: nn.DenseLayer

    @property
    def dim_a(self) -> int:
        return self.scorer.n_in - 1

    def params(self) -> list[np.ndarray]:
        return self.scorer.params()


@dataclass
class FusionCache:
    a: np.ndarray
    w: np.ndarray
    pre: np.ndarray
    u: np.ndarray
    alpha: np.ndarray
    v: np.ndarray
    x: np.ndarray


def _softmax(u: np.ndarray) -> np.ndarray:
    e = np.exp(u - u.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def attention_fuse(a, w, fusion: AttentionFusion) -> FusionCache:
    """Acoustic-guided attention over the visual+textual feature ``w``.

    Returns the full cache; ``alpha``, ``v`` and ``x = [a, v]`` are the
    quantities of interest. Accepts single vectors or batches.
    """
    a = np.asarray(a, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    single = a.ndim == 1
    a2, w2 = np.atleast_2d(a), np.atleast_2d(w)
    if a2.shape[1] != fusion.dim_a:
        raise ValueError(f"acoustic feature has {a2.shape[1]} dims, fusion expects {fusion.dim_a}")
    if w2.shape[1] < 1 or w2.shape[0] != a2.shape[0]:
        raise ValueError(f"bad visual/textual feature shape {w2.shape}")
    coef = fusion.scorer.weights[0, 0]
    guide = a2 @ fusion.scorer.weights[0, 1:] + fusion.scorer.bias[0]
    pre = coef * w2 + guide[:, None]
    u = nn.elu(pre)
    alpha = _softmax(u)
    v = alpha * w2
    x = np.concatenate([a2, v], axis=1)
    if single:
        return FusionCache(a, w, pre[0], u[0], alpha[0], v[0], x[0])
    return FusionCache(a2, w2, pre, u, alpha, v, x)


def attention_backward(fusion: AttentionFusion, cache: FusionCache, dx: np.ndarray):
    """Returns ``([dW, db], da, dw)`` for a batched cache."""
    dim_a = cache.a.shape[1]
    da = dx[:, :dim_a].copy()
    dv = dx[:, dim_a:]
    dalpha = dv * cache.w
    dw = dv * cache.alpha
    du = cache.alpha * (dalpha - np.sum(dalpha * cache.alpha, axis=1, keepdims=True))
    dpre = du * nn.elu_grad(cache.pre)
    s = dpre.sum(axis=1)
    dW = np.empty_like(fusion.scorer.weights)
    dW[0, 0] = np.sum(dpre * cache.w)
    dW[0, 1:] = s @ cache.a
    db = np.array([s.sum()])
    dw += dpre * fusion.scorer.weights[0, 0]
    da += s[:, None] * fusion.scorer.weights[0, 1:]
    return [dW, db], da, dw


def _head_forward(head: nn.DenseLayer, h: np.ndarray) -> np.ndarray:
    # one task at a time keeps results independent of the number of heads
    return np.stack([h @ head.weights[t] + head.bias[t] for t in range(head.n_out)], axis=1)


def _head_backward(head: nn.DenseLayer, h: np.ndarray, dy: np.ndarray):
    dW = np.stack([dy[:, t] @ h for t in range(head.n_out)])
    db = dy.sum(axis=0)
    dh = dy[:, 0:1] * head.weights[0]
    for t in range(1, head.n_out):
        dh = dh + dy[:, t : t + 1] * head.weights[t]
    return [dW, db], dh


@dataclass
class Network:
    """One trainable network predicting the tasks in ``tasks`` (indices into TASKS)."""

    tasks: tuple[int, ...]
    locals: list[LocalRegressor]
    fusion: AttentionFusion | None = None
    global_mlp: nn.Mlp | None = None
    global_head: nn.DenseLayer | None = None

    @property
    def acoustic_paths(self) -> list[int]:
        return [i for i, loc in enumerate(self.locals) if loc.modality == "acoustic"]

    @property
    def other_paths(self) -> list[int]:
        return [i for i, loc in enumerate(self.locals) if loc.modality != "acoustic"]

    def params(self) -> list[np.ndarray]:
        ps = [p for loc in self.locals for p in loc.params()]
        if self.fusion is not None:
            ps += self.fusion.params()
        if self.global_mlp is not None:
            ps += self.global_mlp.params() + self.global_head.params()
        return ps


@dataclass
class Predictions:
    """Batched predictions; columns follow the network's task order."""

    global_: np.ndarray
    per_local: list[np.ndarray]
    alpha: np.ndarray | None = None


@dataclass
class NetworkCache:
    locals: list[nn.ForwardCache]
    fusion: FusionCache | None
    x: np.ndarray | None
    global_: nn.ForwardCache | None


def forward_network(net: Network, groups: Sequence[np.ndarray], train: bool = False,
                    rng: np.random.Generator | None = None) -> tuple[Predictions, NetworkCache]:
    if len(groups) != len(net.locals):
        raise ValueError(f"expected {len(net.locals)} feature groups, got {len(groups)}")
    caches, local_preds = [], []
    for loc, g in zip(net.locals, groups):
        g = np.atleast_2d(np.asarray(g, dtype=np.float64))
        if g.shape[1] != loc.trunk.n_in:
            raise ValueError(f"group has {g.shape[1]} dims, local regressor expects {loc.trunk.n_in}")
        c = nn.forward(loc.trunk, g, train, rng)
        caches.append(c)
        local_preds.append(_head_forward(loc.head, c.output))
    if net.global_mlp is None:
        return Predictions(local_preds[0], []), NetworkCache(caches, None, None, None)

    a = np.concatenate([caches[i].output for i in net.acoustic_paths], axis=1) if net.acoustic_paths else None
    others = [caches[i].output for i in net.other_paths]
    fc, alpha = None, None
    if net.fusion is not None:
        if a is None or not others:
            raise ValueError("attention fusion needs acoustic and visual/textual paths")
        fc = attention_fuse(a, np.concatenate(others, axis=1), net.fusion)
        x, alpha = fc.x, fc.alpha
    else:
        x = np.concatenate(([a] if a is not None else []) + others, axis=1)
    gc = nn.forward(net.global_mlp, x, train, rng)
    preds = Predictions(_head_forward(net.global_head, gc.output), local_preds, alpha)
    return preds, NetworkCache(caches, fc, x, gc)


def backward_network(net: Network, cache: NetworkCache, d_global: np.ndarray,
                     d_locals: Sequence[np.ndarray] | None) -> list[np.ndarray]:
    """Parameter gradients in ``net.params()`` order."""
    n = len(net.locals)
    dh = [None] * n
    tail: list[np.ndarray] = []
    if net.global_mlp is None:
        dh[0] = d_global
        d_heads = [d_global]
    else:
        head_grads, dg = _head_backward(net.global_head, cache.global_.output, d_global)
        mlp_grads, dx = nn.backward(net.global_mlp, cache.global_, dg)
        if net.fusion is not None:
            fusion_grads, da, dw = attention_backward(net.fusion, cache.fusion, dx)
            tail = fusion_grads
        else:
            dim_a = sum(cache.locals[i].output.shape[1] for i in net.acoustic_paths)
            da, dw = dx[:, :dim_a], dx[:, dim_a:]
        tail = tail + mlp_grads + head_grads
        for idx, d in ((net.acoustic_paths, da), (net.other_paths, dw)):
            off = 0
            for i in idx:
                width = cache.locals[i].output.shape[1]
                dh[i] = d[:, off : off + width]
                off += width
        d_heads = list(d_locals) if d_locals is not None else [np.zeros_like(d_global)] * n

    grads: list[np.ndarray] = []
    for i, loc in enumerate(net.locals):
        top = cache.locals[i].output
        if net.global_mlp is None:
            head_grads, dtop = _head_backward(loc.head, top, d_heads[0])
        else:
            head_grads, dtop = _head_backward(loc.head, top, d_heads[i])
            dtop = dtop + dh[i]
        trunk_grads, _ = nn.backward(loc.trunk, cache.locals[i], dtop)
        grads += trunk_grads + head_grads
    return grads + tail


def total_loss(preds: Predictions, labels, cfg: LossConfig, task_mask=None) -> float:
    """Batch mean of the per-sample joint loss.

    Per sample: sum over tasks of ``(1 - lam) * global_sq_err + lam * sum_n local_sq_err``.
    """
    return loss_and_grads(preds, labels, cfg, task_mask)[0]


def loss_and_grads(preds: Predictions, labels, cfg: LossConfig, task_mask=None):
    """Loss plus its gradients w.r.t. global and local predictions.

    ``task_mask`` (one 0/1 weight per task column) silences tasks: a masked
    task contributes neither loss nor gradient.
    """
    y = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    g = np.atleast_2d(preds.global_)
    if g.shape != y.shape:
        raise ValueError(f"prediction shape {g.shape} != label shape {y.shape}")
    if g.shape[1] != cfg.n_tasks:
        raise ValueError(f"loss configured for {cfg.n_tasks} tasks, got {g.shape[1]}")
    if cfg.lam > 0 and len(preds.per_local) != cfg.n_paths:
        raise ValueError(f"expected {cfg.n_paths} local predictions, got {len(preds.per_local)}")
    mask = np.ones(cfg.n_tasks) if task_mask is None else np.asarray(task_mask, dtype=np.float64)
    batch = y.shape[0]
    r = (g - y) * mask
    loss = (1.0 - cfg.lam) * float(np.sum(r**2))
    d_global = (2.0 * (1.0 - cfg.lam) / batch) * r
    d_locals = []
    for lp in preds.per_local:
        rl = (np.atleast_2d(lp) - y) * mask
        if cfg.lam > 0:
            loss += cfg.lam * float(np.sum(rl**2))
        d_locals.append((2.0 * cfg.lam / batch) * rl)
    return loss / batch, d_global, d_locals


def build_network(groups_dims: Sequence[int], modalities: Sequence[str], tasks: tuple[int, ...],
                  config: ModelConfig, rng: np.random.Generator) -> Network:
    flags = config.flags
    n_tasks = len(tasks)
    locals_ = []
    for d, mod in zip(groups_dims, modalities):
        trunk = nn.Mlp.build([d, *config.hidden], rng, config.dropout)
        locals_.append(LocalRegressor(trunk, nn.DenseLayer.xavier(config.hidden[-1], n_tasks, rng), mod))
    if not flags["multipath"]:
        if len(locals_) != 1:
            raise ValueError("the plain DNN takes exactly one path")
        return Network(tasks, locals_)
    n_a = sum(config.hidden[-1] for m in modalities if m == "acoustic")
    n_w = sum(config.hidden[-1] for m in modalities if m != "acoustic")
    fusion = None
    if flags["attention"]:
        if n_a == 0 or n_w == 0:
            raise ValueError("attention needs both acoustic and visual/textual paths")
        fusion = AttentionFusion(nn.DenseLayer.xavier(1 + n_a, 1, rng))
    global_mlp = nn.Mlp.build([n_a + n_w, *config.global_hidden], rng, config.dropout)
    global_head = nn.DenseLayer.xavier(config.global_hidden[-1], n_tasks, rng)
    return Network(tasks, locals_, fusion, global_mlp, global_head)


@dataclass
class Standardizer:
    """Per-modality feature centring and scaling fitted on training data."""

    mean: dict[str, np.ndarray]
    scale: dict[str, np.ndarray]

    @classmethod
    def fit(cls, records: Sequence[UtteranceRecord], modalities: Sequence[str]) -> "Standardizer":
        mean, scale = {}, {}
        for m in modalities:
            x = np.stack([r.features[m] for r in records])
            mean[m] = x.mean(axis=0)
            sd = x.std(axis=0)
            scale[m] = np.where(sd > 0, sd, 1.0)
        return cls(mean, scale)

    @classmethod
    def identity(cls, dims: dict[str, int]) -> "Standardizer":
        return cls({m: np.zeros(d) for m, d in dims.items()}, {m: np.ones(d) for m, d in dims.items()})

    def apply(self, features: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        return {m: (np.asarray(features[m], dtype=np.float64) - self.mean[m]) / self.scale[m] for m in self.mean}


@dataclass
class AmmdnnModel:
    variant: str
    config: ModelConfig
    grouping: GroupingConfig
    members: list[Network]
    standardizer: Standardizer

    @property
    def grouping_hash(self) -> str:
        return self.grouping.fingerprint()

    @property
    def input_grouping(self) -> GroupingConfig:
        return self.grouping if self.config.flags["multipath"] else self.grouping.single_path()

    @property
    def loss_config(self) -> LossConfig:
        n_tasks = 2 if self.config.flags["multitask"] else 1
        if not self.config.flags["multipath"]:
            return LossConfig(0.0, n_tasks, 1)
        return LossConfig(self.config.lam, n_tasks, self.grouping.n_paths)

    def params(self) -> list[np.ndarray]:
        return [p for net in self.members for p in net.params()]

    def input_groups(self, records: Sequence[UtteranceRecord]) -> list[np.ndarray]:
        feats = {m: np.stack([r.features[m] for r in records]) for m in self.grouping.dims}
        feats = self.standardizer.apply(feats)
        return group_features(feats, self.input_grouping)


def init_model(config: ModelConfig, grouping: GroupingConfig, seed: int,
               standardizer: Standardizer | None = None) -> AmmdnnModel:
    flags = config.flags
    in_grouping = grouping if flags["multipath"] else grouping.single_path()
    dims = in_grouping.path_dims()
    mods = [in_grouping.path_modality(i) for i in range(in_grouping.n_paths)]
    task_sets = [(0, 1)] if flags["multitask"] else [(0,), (1,)]
    seeds = np.random.SeedSequence(seed).spawn(len(task_sets))
    members = [
        build_network(dims, mods, tasks, config, np.random.default_rng(s)) for tasks, s in zip(task_sets, seeds)
    ]
    return AmmdnnModel(config.variant, config, grouping, members, standardizer or Standardizer.identity(grouping.dims))


def forward_model(model: AmmdnnModel, groups: Sequence[np.ndarray], train: bool = False,
                  rng: np.random.Generator | None = None) -> Predictions:
    """Combined predictions with both task columns (pleasure, arousal).

    ``groups`` are already standardized path inputs.
    """
    batch = np.atleast_2d(groups[0]).shape[0]
    glob = np.zeros((batch, len(TASKS)))
    n_local = len(model.members[0].locals) if model.config.flags["multipath"] else 0
    per_local = [np.zeros((batch, len(TASKS))) for _ in range(n_local)]
    alpha = None
    for net in model.members:
        preds, _ = forward_network(net, groups, train, rng)
        glob[:, list(net.tasks)] = preds.global_
        for i, lp in enumerate(preds.per_local):
            per_local[i][:, list(net.tasks)] = lp
        if preds.alpha is not None and alpha is None:
            alpha = preds.alpha
    return Predictions(glob, per_local, alpha)


def train_step(net: Network, adam: nn.AdamState, groups: Sequence[np.ndarray], labels: np.ndarray,
               cfg: LossConfig, rng: np.random.Generator | None, task_mask=None) -> float:
    """One forward/backward/Adam update on a batch; returns the batch loss."""
    preds, cache = forward_network(net, groups, True, rng)
    loss, d_global, d_locals = loss_and_grads(preds, labels, cfg, task_mask)
    if not math.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss {loss}")
    grads = backward_network(net, cache, d_global, d_locals if net.global_mlp is not None else None)
    nn.adam_step(adam, net.params(), grads)
    return loss


@dataclass
class TrainLog:
    rows: list[dict] = field(default_factory=list)

    def to_csv(self, path: str | Path) -> None:
        import csv

        if not self.rows:
            Path(path).write_text("epoch,train_loss\n")
            return
        keys = list(self.rows[0])
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def train(records: Sequence[UtteranceRecord], config: ModelConfig, grouping: GroupingConfig, seed: int = 0,
          val_records: Sequence[UtteranceRecord] | None = None,
          progress: Callable[[dict], None] | None = None) -> tuple[AmmdnnModel, TrainLog]:
    """Train a model on labeled records with Adam on the joint loss.

    All randomness (initialisation, shuffling, dropout) derives from ``seed``.
    """
    if not records:
        raise ValueError("empty training set")
    labels = stack_labels(records)
    std = Standardizer.fit(records, list(grouping.dims)) if config.standardize else None
    init_seed, run_seed = np.random.SeedSequence(seed).spawn(2)
    model = init_model(config, grouping, int(init_seed.generate_state(1)[0]), std)
    groups = model.input_groups(records)
    cfg = model.loss_config
    val_groups = model.input_groups(val_records) if val_records else None
    val_labels = stack_labels(val_records) if val_records else None

    streams = run_seed.spawn(len(model.members))
    runs = []
    for net, s in zip(model.members, streams):
        shuffle_seed, dropout_seed = s.spawn(2)
        runs.append((net, nn.AdamState.for_params(net.params(), lr=config.lr),
                     np.random.default_rng(shuffle_seed), np.random.default_rng(dropout_seed)))

    n = len(records)
    history = TrainLog()
    for epoch in range(1, config.epochs + 1):
        epoch_loss = 0.0
        for net, adam, shuffle_rng, dropout_rng in runs:
            y = labels[:, list(net.tasks)]
            order = shuffle_rng.permutation(n)
            total = 0.0
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                batch = [g[idx] for g in groups]
                try:
                    loss = train_step(net, adam, batch, y[idx], cfg, dropout_rng)
                except FloatingPointError as exc:
                    raise FloatingPointError(f"epoch {epoch}: {exc}") from exc
                total += loss * len(idx)
            epoch_loss += total / n
        row = {"epoch": epoch, "train_loss": epoch_loss}
        if val_groups is not None:
            from .metrics import ccc, rmse

            pred = forward_model(model, val_groups).global_
            for t, name in enumerate(TASKS):
                row[f"val_{name}_rmse"] = rmse(val_labels[:, t], pred[:, t])
                row[f"val_{name}_ccc"] = ccc(val_labels[:, t], pred[:, t])
        history.rows.append(row)
        if progress is not None:
            progress(row)
    return model, history


def _check_grouping(model: AmmdnnModel, grouping: GroupingConfig | None) -> None:
    if grouping is not None and grouping.fingerprint() != model.grouping_hash:
        raise ValueError(
            f"grouping hash mismatch: model was trained with {model.grouping_hash}, got {grouping.fingerprint()}"
        )


def predict_batch(model: AmmdnnModel, records: Sequence[UtteranceRecord],
                  grouping: GroupingConfig | None = None) -> np.ndarray:
    """Global-head predictions (n x 2), dropout off."""
    _check_grouping(model, grouping)
    if not records:
        return np.zeros((0, len(TASKS)))
    return forward_model(model, model.input_groups(records)).global_


def predict(model: AmmdnnModel, record: UtteranceRecord, grouping: GroupingConfig | None = None) -> PACoordinate:
    p, a = predict_batch(model, [record], grouping)[0]
    return PACoordinate(float(p), float(a))


# -- checkpoints ---------------------------------------------------------------


def _layer_json(layer: nn.DenseLayer) -> dict:
    return {"shape": list(layer.weights.shape), "weights": layer.weights.ravel().tolist(), "bias": layer.bias.tolist()}


def _layer_from(obj: dict) -> nn.DenseLayer:
    shape = tuple(obj["shape"])
    w = np.array(obj["weights"], dtype=np.float64)
    if w.size != shape[0] * shape[1]:
        raise ValueError(f"layer body has {w.size} weights, header says {shape}")
    return nn.DenseLayer(w.reshape(shape), np.array(obj["bias"], dtype=np.float64))


def _mlp_json(mlp: nn.Mlp) -> dict:
    return {"activations": list(mlp.activations), "dropout_rate": mlp.dropout_rate,
            "layers": [_layer_json(layer) for layer in mlp.layers]}


def _mlp_from(obj: dict) -> nn.Mlp:
    return nn.Mlp([_layer_from(x) for x in obj["layers"]], list(obj["activations"]), float(obj["dropout_rate"]))


def checkpoint_dict(model: AmmdnnModel) -> dict:
    members = []
    for net in model.members:
        members.append({
            "tasks": list(net.tasks),
            "locals": [{"modality": loc.modality, "trunk": _mlp_json(loc.trunk), "head": _layer_json(loc.head)}
                       for loc in net.locals],
            "fusion": None if net.fusion is None else _layer_json(net.fusion.scorer),
            "global": None if net.global_mlp is None else _mlp_json(net.global_mlp),
            "global_head": None if net.global_head is None else _layer_json(net.global_head),
        })
    std = model.standardizer
    return {
        "header": {
            "format": CHECKPOINT_FORMAT,
            "schema_version": CHECKPOINT_VERSION,
            "variant": model.variant,
            "grouping_hash": model.grouping_hash,
            "hyperparameters": model.config.to_json(),
        },
        "grouping": model.grouping.to_json(),
        "standardizer": {m: {"mean": std.mean[m].tolist(), "scale": std.scale[m].tolist()} for m in std.mean},
        "members": members,
    }


def model_from_dict(obj: dict) -> AmmdnnModel:
    header = obj.get("header", {})
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a teachstyle checkpoint")
    if header.get("schema_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint schema version {header.get('schema_version')}")
    hp = dict(header["hyperparameters"])
    config = ModelConfig(**hp)
    grouping = GroupingConfig.from_json(obj["grouping"])
    if grouping.fingerprint() != header["grouping_hash"]:
        raise ValueError("checkpoint grouping does not match its recorded hash")
    std = Standardizer(
        {m: np.array(v["mean"]) for m, v in obj["standardizer"].items()},
        {m: np.array(v["scale"]) for m, v in obj["standardizer"].items()},
    )
    members = []
    for mem in obj["members"]:
        locals_ = [LocalRegressor(_mlp_from(x["trunk"]), _layer_from(x["head"]), x["modality"]) for x in mem["locals"]]
        members.append(Network(
            tuple(mem["tasks"]),
            locals_,
            None if mem["fusion"] is None else AttentionFusion(_layer_from(mem["fusion"])),
            None if mem["global"] is None else _mlp_from(mem["global"]),
            None if mem["global_head"] is None else _layer_from(mem["global_head"]),
        ))
    return AmmdnnModel(header["variant"], config, grouping, members, std)


def save_checkpoint(model: AmmdnnModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(model), fh, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str | Path) -> AmmdnnModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
