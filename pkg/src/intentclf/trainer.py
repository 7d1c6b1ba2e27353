"""Projection head, sigmoid classifier, two-stage training and persistence.

Stage one pretrains a two-layer projection over frozen external embeddings
with a contrastive objective on mined pairs. Stage two fine-tunes projection
and classifier jointly under per-label binary cross-entropy. Both stages run
plain SGD with momentum, single-threaded, and are bit-reproducible from
(dataset, config, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import LabelSet, LabelVocabulary, encode_labels
from .embedding import EmbeddedSample, ProviderConfig
from .errors import (
    DegenerateProjectionError,
    FileFormatError,
    NoPairsError,
    ValidationError,
)
from .losses import (
    LossOutput,
    OFCConfig,
    cs_loss,
    ofc_loss,
    oc_loss,
)
from .mining import (
    MinedCounts,
    MinedPairs,
    MiningConfig,
    PairSet,
    batch_similarity_table,
    build_pairs,
    mine,
)

ARTIFACT_FORMAT_VERSION = 1
_LOSS_KINDS = ("ofc", "oc", "cs")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class ProjectionHead:
    """Two-layer tanh MLP whose output is unit-normalized."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, d_in: int, d_hidden: int, d_proj: int, rng: np.random.Generator) -> "ProjectionHead":
        return cls(
            w1=_glorot(rng, d_in, d_hidden),
            b1=np.zeros(d_hidden),
            w2=_glorot(rng, d_hidden, d_proj),
            b2=np.zeros(d_proj),
        )

    @property
    def d_in(self) -> int:
        return self.w1.shape[0]

    @property
    def d_proj(self) -> int:
        return self.w2.shape[1]

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class ClassifierHead:
    """Per-label logits over the projected space."""

    w: np.ndarray
    b: np.ndarray

    @classmethod
    def init(cls, d_proj: int, n_labels: int, rng: np.random.Generator) -> "ClassifierHead":
        return cls(w=_glorot(rng, d_proj, n_labels), b=np.zeros(n_labels))

    def copy(self) -> "ClassifierHead":
        return ClassifierHead(self.w.copy(), self.b.copy())

    def params(self) -> list[np.ndarray]:
        return [self.w, self.b]


@dataclass(frozen=True)
class TrainConfig:
    lr_pretrain: float = 0.05
    lr_finetune: float = 0.2
    momentum: float = 0.9
    epochs_pretrain: int = 30
    epochs_finetune: int = 50
    batch_size: int = 32
    seed: int = 0
    decision_threshold: float = 0.5
    loss_kind: str = "ofc"
    d_hidden: int = 128
    d_proj: int = 128
    grad_clip_norm: float | None = 1.0
    mining: MiningConfig = field(default_factory=MiningConfig)
    ofc: OFCConfig = field(default_factory=OFCConfig)

    def __post_init__(self):
        if self.lr_pretrain <= 0 or self.lr_finetune <= 0:
            raise ValidationError("learning rates must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError(f"momentum must be in [0,1), got {self.momentum}")
        if self.epochs_pretrain < 0 or self.epochs_finetune < 0:
            raise ValidationError("epoch counts must be >= 0")
        if self.batch_size < 2:
            raise ValidationError(f"batch_size must be >= 2, got {self.batch_size}")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValidationError("decision_threshold must be in (0,1)")
        if self.loss_kind not in _LOSS_KINDS:
            raise ValidationError(f"loss_kind must be one of {_LOSS_KINDS}")
        if self.d_hidden < 1 or self.d_proj < 1:
            raise ValidationError("head dims must be >= 1")
        if self.grad_clip_norm is not None and self.grad_clip_norm <= 0:
            raise ValidationError("grad_clip_norm must be > 0 or None")

    def to_json(self) -> dict:
        return {
            "lr_pretrain": self.lr_pretrain,
            "lr_finetune": self.lr_finetune,
            "momentum": self.momentum,
            "epochs_pretrain": self.epochs_pretrain,
            "epochs_finetune": self.epochs_finetune,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "decision_threshold": self.decision_threshold,
            "loss_kind": self.loss_kind,
            "d_hidden": self.d_hidden,
            "d_proj": self.d_proj,
            "grad_clip_norm": self.grad_clip_norm,
            "mining": self.mining.to_json(),
            "ofc": self.ofc.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(
            lr_pretrain=float(obj.get("lr_pretrain", 0.05)),
            lr_finetune=float(obj.get("lr_finetune", 0.2)),
            momentum=float(obj.get("momentum", 0.9)),
            epochs_pretrain=int(obj.get("epochs_pretrain", 30)),
            epochs_finetune=int(obj.get("epochs_finetune", 50)),
            batch_size=int(obj.get("batch_size", 32)),
            seed=int(obj.get("seed", 0)),
            decision_threshold=float(obj.get("decision_threshold", 0.5)),
            loss_kind=obj.get("loss_kind", "ofc"),
            d_hidden=int(obj.get("d_hidden", 128)),
            d_proj=int(obj.get("d_proj", 128)),
            grad_clip_norm=(
                (float(obj["grad_clip_norm"]) if obj["grad_clip_norm"] is not None else None)
                if "grad_clip_norm" in obj
                else 1.0
            ),
            mining=MiningConfig.from_json(obj.get("mining", {})),
            ofc=OFCConfig.from_json(obj.get("ofc", {})),
        )


@dataclass
class ModelArtifact:
    """Everything needed to score a query: heads, vocabulary and config."""

    vocabulary: LabelVocabulary
    embed_dim: int
    projection: ProjectionHead
    classifier: ClassifierHead
    decision_threshold: float
    train_config: TrainConfig
    provider: ProviderConfig | None = None
    format_version: int = ARTIFACT_FORMAT_VERSION


# ---------------------------------------------------------------------------
# forward / backward primitives


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _project_batch(x: np.ndarray, head: ProjectionHead):
    a1 = x @ head.w1 + head.b1
    h = np.tanh(a1)
    a2 = h @ head.w2 + head.b2
    norms = np.linalg.norm(a2, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateProjectionError("projection collapsed to a zero vector")
    z = a2 / norms[:, None]
    return z, (x, h, z, norms)


def _projection_backward(d_z: np.ndarray, cache, head: ProjectionHead) -> list[np.ndarray]:
    """Gradients [dw1, db1, dw2, db2] given dL/dZ and a cached forward."""
    x, h, z, norms = cache
    inner = np.sum(d_z * z, axis=1, keepdims=True)
    d_a2 = (d_z - z * inner) / norms[:, None]
    d_w2 = h.T @ d_a2
    d_b2 = d_a2.sum(axis=0)
    d_h = d_a2 @ head.w2.T
    d_a1 = d_h * (1.0 - h * h)
    d_w1 = x.T @ d_a1
    d_b1 = d_a1.sum(axis=0)
    return [d_w1, d_b1, d_w2, d_b2]


def project(x: np.ndarray, head: ProjectionHead) -> np.ndarray:
    """Project a single embedding into the unit-norm contrastive space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (head.d_in,):
        raise ValidationError(f"expected embedding of dim {head.d_in}, got shape {x.shape}")
    z, _ = _project_batch(x[None, :], head)
    return z[0]


def classify(z: np.ndarray, head: ClassifierHead) -> np.ndarray:
    """Per-label probabilities sigmoid(w^T z + b)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (head.w.shape[0],):
        raise ValidationError(f"expected projection of dim {head.w.shape[0]}, got {z.shape}")
    return _sigmoid(z @ head.w + head.b)


BCE_EPSILON = 1e-12


def bce_loss(probs: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over all cells, plus dL/dprobs.

    Probabilities are clamped to [eps, 1-eps] inside the log; the gradient is
    zero where the clamp is active.
    """
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise ValidationError(f"shape mismatch: probs {p.shape} vs targets {y.shape}")
    clamped = np.clip(p, BCE_EPSILON, 1.0 - BCE_EPSILON)
    value = float(np.mean(-(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped))))
    active = (p > BCE_EPSILON) & (p < 1.0 - BCE_EPSILON)
    grad = np.where(active, -y / clamped + (1.0 - y) / (1.0 - clamped), 0.0) / p.size
    return value, grad


def _clip_global_norm(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return [g * scale for g in grads]


def _sgd_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    velocity: list[np.ndarray],
    lr: float,
    momentum: float,
    clip_norm: float | None,
) -> None:
    if clip_norm is not None:
        grads = _clip_global_norm(grads, clip_norm)
    for p, g, v in zip(params, grads, velocity):
        v *= momentum
        v += g
        p -= lr * v


# ---------------------------------------------------------------------------
# pair-loss dispatch


def _mining_for_loss(config: TrainConfig) -> MiningConfig:
    if config.loss_kind == "oc":
        # hinge baseline trains on hard pairs only, standard convention
        return MiningConfig(p=0.0, mode="standard", positive_rule=config.mining.positive_rule)
    return config.mining


def _pair_loss(table, config: TrainConfig) -> LossOutput:
    if config.loss_kind == "cs":
        return cs_loss(table.d_pos, table.d_neg)
    mined = mine(table, _mining_for_loss(config))
    if config.loss_kind == "oc":
        return oc_loss(mined, config.ofc.margin)
    return ofc_loss(mined, config.ofc)


def _sim_grads_to_z(out: LossOutput, pair_set: PairSet, z: np.ndarray) -> np.ndarray:
    """Chain dL/ds through s = z_a . z_b to the pair endpoints."""
    d_z = np.zeros_like(z)
    for pair_index, g in out.grad_wrt_sim:
        pair = pair_set.pairs[pair_index]
        d_z[pair.a] += g * z[pair.b]
        d_z[pair.b] += g * z[pair.a]
    return d_z


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


# ---------------------------------------------------------------------------
# training stages


def pretrain(
    samples: Sequence[EmbeddedSample], config: TrainConfig
) -> tuple[ProjectionHead, list[float]]:
    """Contrastive pretraining of the projection head.

    Each epoch reshuffles with the seeded generator, mines pairs per batch
    and steps SGD on the configured pair loss. Returns the head and the
    per-epoch mean batch loss. Batches without usable pairs are skipped; an
    epoch in which every batch was skipped raises :class:`NoPairsError`.
    """
    if len(samples) < 2:
        raise ValidationError("pretraining needs at least 2 samples")
    if len({s.labels for s in samples}) < 2:
        raise ValidationError("pretraining needs at least 2 distinct label sets")
    x = np.stack([s.vector for s in samples])
    labels = [s.labels for s in samples]
    init_rng = np.random.default_rng([config.seed, 101])
    shuffle_rng = np.random.default_rng([config.seed, 102])
    head = ProjectionHead.init(x.shape[1], config.d_hidden, config.d_proj, init_rng)
    velocity = [np.zeros_like(p) for p in head.params()]
    history: list[float] = []
    for epoch in range(config.epochs_pretrain):
        order = shuffle_rng.permutation(len(samples))
        batch_losses: list[float] = []
        for chunk in _batches(order, config.batch_size):
            if len(chunk) < 2:
                continue
            z, cache = _project_batch(x[chunk], head)
            pair_set = build_pairs([labels[i] for i in chunk], config.mining.positive_rule)
            table = batch_similarity_table(z, pair_set)
            try:
                out = _pair_loss(table, config)
            except NoPairsError:
                continue
            d_z = _sim_grads_to_z(out, pair_set, z)
            grads = _projection_backward(d_z, cache, head)
            _sgd_step(head.params(), grads, velocity, config.lr_pretrain, config.momentum, config.grad_clip_norm)
            batch_losses.append(out.value)
        if not batch_losses:
            raise NoPairsError(f"epoch {epoch}: no batch produced a contrastive pair")
        history.append(float(np.mean(batch_losses)))
    return head, history


def finetune(
    samples: Sequence[EmbeddedSample],
    vocabulary: LabelVocabulary,
    projection: ProjectionHead,
    config: TrainConfig,
    provider: ProviderConfig | None = None,
) -> tuple[ModelArtifact, list[float]]:
    """Joint projection+classifier training under per-label BCE.

    The given projection is copied, not mutated. Returns the packaged
    artifact and the per-epoch mean batch loss.
    """
    if not samples:
        raise ValidationError("finetuning needs at least 1 sample")
    x = np.stack([s.vector for s in samples])
    if x.shape[1] != projection.d_in:
        raise ValidationError(
            f"projection expects dim {projection.d_in}, embeddings have {x.shape[1]}"
        )
    y = np.stack([encode_labels(s.labels, vocabulary) for s in samples])
    head = projection.copy()
    init_rng = np.random.default_rng([config.seed, 201])
    shuffle_rng = np.random.default_rng([config.seed, 202])
    classifier = ClassifierHead.init(head.d_proj, len(vocabulary), init_rng)
    velocity_p = [np.zeros_like(p) for p in head.params()]
    velocity_c = [np.zeros_like(p) for p in classifier.params()]
    history: list[float] = []
    for _ in range(config.epochs_finetune):
        order = shuffle_rng.permutation(len(samples))
        batch_losses: list[float] = []
        for chunk in _batches(order, config.batch_size):
            z, cache = _project_batch(x[chunk], head)
            logits = z @ classifier.w + classifier.b
            probs = _sigmoid(logits)
            value, d_probs = bce_loss(probs, y[chunk])
            d_logits = d_probs * probs * (1.0 - probs)
            d_w = z.T @ d_logits
            d_b = d_logits.sum(axis=0)
            d_z = d_logits @ classifier.w.T
            grads_p = _projection_backward(d_z, cache, head)
            _sgd_step(head.params(), grads_p, velocity_p, config.lr_finetune, config.momentum, config.grad_clip_norm)
            _sgd_step(classifier.params(), [d_w, d_b], velocity_c, config.lr_finetune, config.momentum, config.grad_clip_norm)
            batch_losses.append(value)
        history.append(float(np.mean(batch_losses)))
    artifact = ModelArtifact(
        vocabulary=vocabulary,
        embed_dim=head.d_in,
        projection=head,
        classifier=classifier,
        decision_threshold=config.decision_threshold,
        train_config=config,
        provider=provider,
    )
    return artifact, history


def predict(embedding: np.ndarray, artifact: ModelArtifact) -> tuple[LabelSet, dict[str, float]]:
    """Labels above the decision threshold, falling back to the argmax label.

    The returned label set is never empty: a router must always route. The
    score map covers the full vocabulary in vocabulary order.
    """
    x = np.asarray(embedding, dtype=np.float64)
    if x.shape != (artifact.embed_dim,):
        raise ValidationError(
            f"expected embedding of dim {artifact.embed_dim}, got shape {x.shape}"
        )
    z = project(x, artifact.projection)
    probs = classify(z, artifact.classifier)
    chosen = [i for i, p in enumerate(probs) if p > artifact.decision_threshold]
    if not chosen:
        chosen = [int(np.argmax(probs))]
    labels = frozenset(artifact.vocabulary.labels[i] for i in chosen)
    scores = {
        label: float(probs[i]) for i, label in enumerate(artifact.vocabulary.labels)
    }
    return labels, scores


def score_samples(samples: Sequence[EmbeddedSample], artifact: ModelArtifact) -> np.ndarray:
    """Per-label probability matrix (n x m) for a batch of embedded samples."""
    if not samples:
        return np.zeros((0, len(artifact.vocabulary)))
    x = np.stack([s.vector for s in samples])
    if x.shape[1] != artifact.embed_dim:
        raise ValidationError(
            f"expected embeddings of dim {artifact.embed_dim}, got {x.shape[1]}"
        )
    z, _ = _project_batch(x, artifact.projection)
    return _sigmoid(z @ artifact.classifier.w + artifact.classifier.b)


def projection_margin_gap(
    samples: Sequence[EmbeddedSample], head: ProjectionHead, rule: str = "exact"
) -> float:
    """Mean positive-pair similarity minus mean negative-pair similarity.

    Measured in projection space over all pairs of ``samples``. Raises
    :class:`NoPairsError` if either polarity is absent.
    """
    if len(samples) < 2:
        raise ValidationError("need at least 2 samples")
    z, _ = _project_batch(np.stack([s.vector for s in samples]), head)
    pair_set = build_pairs([s.labels for s in samples], rule)
    table = batch_similarity_table(z, pair_set)
    if not table.d_pos or not table.d_neg:
        raise NoPairsError("margin gap needs both pair polarities")
    pos = np.mean([s for _, s in table.d_pos])
    neg = np.mean([s for _, s in table.d_neg])
    return float(pos - neg)


# ---------------------------------------------------------------------------
# persistence


def _matrix(obj, name: str, shape_hint: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"field {name!r} is not a numeric array") from exc
    if not np.all(np.isfinite(arr)):
        raise FileFormatError(f"field {name!r} has non-finite entries")
    if arr.ndim != len(shape_hint):
        raise FileFormatError(f"field {name!r} must be {len(shape_hint)}-dimensional")
    return arr


def save_artifact(artifact: ModelArtifact, path: str | Path) -> None:
    """Serialize the artifact as one JSON object with row-major float arrays."""
    obj = {
        "format_version": artifact.format_version,
        "vocabulary": artifact.vocabulary.to_json(),
        "embed_dim": artifact.embed_dim,
        "projection": {
            "w1": artifact.projection.w1.tolist(),
            "b1": artifact.projection.b1.tolist(),
            "w2": artifact.projection.w2.tolist(),
            "b2": artifact.projection.b2.tolist(),
        },
        "classifier": {
            "w": artifact.classifier.w.tolist(),
            "b": artifact.classifier.b.tolist(),
        },
        "decision_threshold": artifact.decision_threshold,
        "config": {
            "train": artifact.train_config.to_json(),
            "provider": artifact.provider.to_json() if artifact.provider else None,
        },
    }
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def load_artifact(path: str | Path) -> ModelArtifact:
    """Load and validate a model artifact file."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"artifact is not valid JSON: {exc}", path=str(path)) from exc
    if not isinstance(obj, dict):
        raise FileFormatError("artifact must be a JSON object", path=str(path))
    version = obj.get("format_version")
    if version != ARTIFACT_FORMAT_VERSION:
        raise FileFormatError(
            f"unknown artifact format_version {version!r} (supported: {ARTIFACT_FORMAT_VERSION})",
            path=str(path),
        )
    try:
        vocabulary = LabelVocabulary.from_json(obj["vocabulary"])
        embed_dim = int(obj["embed_dim"])
        proj_obj = obj["projection"]
        cls_obj = obj["classifier"]
        projection = ProjectionHead(
            w1=_matrix(proj_obj["w1"], "projection.w1", "rc"),
            b1=_matrix(proj_obj["b1"], "projection.b1", "r"),
            w2=_matrix(proj_obj["w2"], "projection.w2", "rc"),
            b2=_matrix(proj_obj["b2"], "projection.b2", "r"),
        )
        classifier = ClassifierHead(
            w=_matrix(cls_obj["w"], "classifier.w", "rc"),
            b=_matrix(cls_obj["b"], "classifier.b", "r"),
        )
        decision_threshold = float(obj["decision_threshold"])
        config_obj = obj["config"]
        train_config = TrainConfig.from_json(config_obj["train"])
        provider_obj = config_obj.get("provider")
        provider = ProviderConfig.from_json(provider_obj) if provider_obj else None
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FileFormatError):
            raise
        raise FileFormatError(f"artifact is missing or mistypes a field: {exc}", path=str(path)) from exc
    if projection.w1.shape[0] != embed_dim:
        raise FileFormatError(
            f"projection expects input dim {projection.w1.shape[0]} but embed_dim is {embed_dim}",
            path=str(path),
        )
    if projection.w1.shape[1] != projection.b1.shape[0] or projection.w2.shape[0] != projection.w1.shape[1]:
        raise FileFormatError("projection layer dims are inconsistent", path=str(path))
    if projection.w2.shape[1] != projection.b2.shape[0]:
        raise FileFormatError("projection output dims are inconsistent", path=str(path))
    if classifier.w.shape[0] != projection.w2.shape[1]:
        raise FileFormatError("classifier input dim does not match projection output", path=str(path))
    if classifier.w.shape[1] != len(vocabulary) or classifier.b.shape[0] != len(vocabulary):
        raise FileFormatError("classifier output dim does not match vocabulary size", path=str(path))
    return ModelArtifact(
        vocabulary=vocabulary,
        embed_dim=embed_dim,
        projection=projection,
        classifier=classifier,
        decision_threshold=decision_threshold,
        train_config=train_config,
        provider=provider,
        format_version=version,
    )


# ---------------------------------------------------------------------------
# gradient checking


@dataclass(frozen=True)
class GradCheckReport:
    component: str
    points: int
    tolerance: float
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Elementwise |a-b| / max(|a|+|b|, 1e-3), maximized.

    The floor makes the comparison quasi-absolute for near-zero gradients,
    where finite differences are dominated by roundoff.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-3)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def _central_difference(f, params: list[np.ndarray], step_scale: float = 1e-5) -> list[np.ndarray]:
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat_p = p.ravel()
        flat_g = g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            h = step_scale * max(1.0, abs(orig))
            flat_p[i] = orig + h
            f_plus = f()
            flat_p[i] = orig - h
            f_minus = f()
            flat_p[i] = orig
            flat_g[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g)
    return grads


_GRAD_COMPONENTS = ("projection+ofc", "projection+oc", "projection+cs", "classifier+bce", "classifier")


def _fixed_mined(pos, neg) -> MinedPairs:
    return MinedPairs(
        pos_final=tuple(pos),
        neg_final=tuple(neg),
        t_neg=None,
        t_pos=None,
        counts=MinedCounts(len(pos), len(neg), 0, 0, 0, 0),
    )


def _away_from_kinks(table_entries, loss_kind: str, margin: float, delta: float = 1e-3) -> bool:
    pos, neg = table_entries
    for _, s in pos:
        if abs(s) < delta or abs(abs(s) - 1.0) < 1e-9:
            return False
    for _, s in neg:
        if abs(s - margin) < delta or abs(s - (margin - 1.0)) < delta:
            return False
    return True


def _grad_point_projection(loss_kind: str, rng: np.random.Generator):
    """A random batch, head, and frozen mined pair sets away from kinks."""
    d_in, d_hidden, d_proj, batch = 10, 7, 5, 6
    base_config = TrainConfig(
        loss_kind=loss_kind,
        d_hidden=d_hidden,
        d_proj=d_proj,
        mining=MiningConfig(p=50.0, mode="literal"),
    )
    pool = [frozenset({"a"}), frozenset({"b"}), frozenset({"c"}), frozenset({"a", "b"})]
    x = rng.normal(size=(batch, d_in))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    labels = [pool[int(k)] for k in rng.integers(0, len(pool), size=batch)]
    head = ProjectionHead.init(d_in, d_hidden, d_proj, rng)
    z, _ = _project_batch(x, head)
    pair_set = build_pairs(labels, "exact")
    table = batch_similarity_table(z, pair_set)
    if not table.d_pos or not table.d_neg:
        return None
    if loss_kind == "cs":
        pos_idx = [i for i, _ in table.d_pos]
        neg_idx = [i for i, _ in table.d_neg]
    else:
        mined = mine(table, _mining_for_loss(base_config))
        pos_idx = [i for i, _ in mined.pos_final]
        neg_idx = [i for i, _ in mined.neg_final]
        if not pos_idx and not neg_idx:
            return None
    frozen_pos = [e for e in table.d_pos if e[0] in set(pos_idx)]
    frozen_neg = [e for e in table.d_neg if e[0] in set(neg_idx)]
    if not _away_from_kinks((frozen_pos, frozen_neg), loss_kind, base_config.ofc.margin):
        return None
    return x, head, pair_set, [i for i, _ in frozen_pos], [i for i, _ in frozen_neg], base_config


def _projection_loss_on_fixed(x, head, pair_set, pos_idx, neg_idx, config) -> tuple[float, LossOutput, np.ndarray, tuple]:
    z, cache = _project_batch(x, head)
    gram = z @ z.T
    pos = [(i, float(gram[pair_set.pairs[i].a, pair_set.pairs[i].b])) for i in pos_idx]
    neg = [(i, float(gram[pair_set.pairs[i].a, pair_set.pairs[i].b])) for i in neg_idx]
    if config.loss_kind == "cs":
        out = cs_loss(pos, neg)
    elif config.loss_kind == "oc":
        out = oc_loss(_fixed_mined(pos, neg), config.ofc.margin)
    else:
        out = ofc_loss(_fixed_mined(pos, neg), config.ofc)
    return out.value, out, z, cache


def _check_projection_point(loss_kind: str, rng: np.random.Generator) -> float | None:
    point = _grad_point_projection(loss_kind, rng)
    if point is None:
        return None
    x, head, pair_set, pos_idx, neg_idx, config = point
    value, out, z, cache = _projection_loss_on_fixed(x, head, pair_set, pos_idx, neg_idx, config)
    d_z = _sim_grads_to_z(out, pair_set, z)
    analytic = _projection_backward(d_z, cache, head)

    def f() -> float:
        v, _, _, _ = _projection_loss_on_fixed(x, head, pair_set, pos_idx, neg_idx, config)
        return v

    numeric = _central_difference(f, head.params())
    return max(
        max_relative_error(a, n) for a, n in zip(analytic, numeric)
    )


def _check_classifier_point(rng: np.random.Generator) -> float:
    batch, d_proj, n_labels = 6, 5, 4
    z = rng.normal(size=(batch, d_proj))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    y = (rng.random(size=(batch, n_labels)) < 0.4).astype(np.float64)
    head = ClassifierHead.init(d_proj, n_labels, rng)

    def forward() -> tuple[float, np.ndarray, np.ndarray]:
        probs = _sigmoid(z @ head.w + head.b)
        value, d_probs = bce_loss(probs, y)
        return value, probs, d_probs

    value, probs, d_probs = forward()
    d_logits = d_probs * probs * (1.0 - probs)
    analytic = [z.T @ d_logits, d_logits.sum(axis=0)]
    numeric = _central_difference(lambda: forward()[0], head.params())
    return max(max_relative_error(a, n) for a, n in zip(analytic, numeric))


def grad_check(
    component: str, seed: int = 0, tolerance: float = 1e-4, points: int = 10
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``component`` is ``classifier`` (BCE head) or ``projection+<loss_kind>``
    for the full contrastive chain. Random points that land too close to a
    clamp or hinge are redrawn, since no gradient is defined there.
    """
    comp = component.lower()
    if comp == "classifier+bce":
        comp = "classifier"
    if comp not in _GRAD_COMPONENTS:
        raise ValidationError(f"component must be one of {_GRAD_COMPONENTS}, got {component!r}")
    worst = 0.0
    for point in range(points):
        if comp == "classifier":
            err = _check_classifier_point(np.random.default_rng([seed, point]))
        else:
            loss_kind = comp.split("+", 1)[1]
            err = None
            for attempt in range(200):
                err = _check_projection_point(loss_kind, np.random.default_rng([seed, point, attempt]))
                if err is not None:
                    break
            if err is None:
                raise ValidationError("could not draw a valid gradient-check point")
        worst = max(worst, err)
    return GradCheckReport(component=comp, points=points, tolerance=tolerance, max_rel_error=worst)
