"""Label taxonomy, sample records, multi-hot encoding, JSONL I/O and splitting.

A dataset file is UTF-8 JSON Lines: each line is an object with ``text``
(string) and ``labels`` (array of strings). A taxonomy file is a JSON object
with ``labels`` (array of strings, order significant) and ``descriptions``
(object mapping label to a one-sentence description).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import FileFormatError, ValidationError

# A label set is simply a subset of a vocabulary's labels.
LabelSet = frozenset[str]


@dataclass(frozen=True)
class LabelVocabulary:
    """The ordered intent taxonomy.

    ``labels`` fixes the class order used for multi-hot encoding and for any
    file that persists per-label values. ``descriptions`` maps a label to the
    one-sentence description used when generating synthetic queries.
    """

    labels: tuple[str, ...]
    descriptions: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.labels:
            raise ValidationError("vocabulary needs at least one label")
        object.__setattr__(self, "labels", tuple(self.labels))
        seen: set[str] = set()
        for label in self.labels:
            if not isinstance(label, str) or not label.strip():
                raise ValidationError(f"label must be a non-empty string, got {label!r}")
            if label in seen:
                raise ValidationError(f"duplicate label {label!r}")
            seen.add(label)
        for key in self.descriptions:
            if key not in seen:
                raise ValidationError(f"description key {key!r} is not a vocabulary label")

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown label {label!r}") from None

    def sorted_members(self, labels: Iterable[str]) -> list[str]:
        """Return ``labels`` ordered by vocabulary position."""
        members = set(labels)
        return [lab for lab in self.labels if lab in members]

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "descriptions": dict(self.descriptions)}

    @classmethod
    def from_json(cls, obj: dict) -> "LabelVocabulary":
        if not isinstance(obj, dict) or "labels" not in obj:
            raise FileFormatError("taxonomy must be an object with a 'labels' array")
        descriptions = obj.get("descriptions", {})
        if not isinstance(descriptions, dict):
            raise FileFormatError("taxonomy 'descriptions' must be an object")
        return cls(labels=tuple(obj["labels"]), descriptions=dict(descriptions))


def load_vocabulary(path: str | Path) -> LabelVocabulary:
    """Read a taxonomy file (JSON object with labels and descriptions)."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"taxonomy is not valid JSON: {exc}", path=str(path)) from exc
    return LabelVocabulary.from_json(obj)


def save_vocabulary(vocabulary: LabelVocabulary, path: str | Path) -> None:
    Path(path).write_text(json.dumps(vocabulary.to_json(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class TextSample:
    """A query string with its (non-empty) label subset."""

    text: str
    labels: LabelSet

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError("sample text is empty")
        object.__setattr__(self, "labels", frozenset(self.labels))
        if not self.labels:
            raise ValidationError("sample needs at least one label")


@dataclass(frozen=True)
class Dataset:
    """A vocabulary plus samples, each validated against that vocabulary."""

    vocabulary: LabelVocabulary
    samples: tuple[TextSample, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        known = set(self.vocabulary.labels)
        for pos, sample in enumerate(self.samples):
            unknown = sample.labels - known
            if unknown:
                raise ValidationError(
                    f"sample {pos} has unknown label(s) {sorted(unknown)!r}"
                )

    def __len__(self) -> int:
        return len(self.samples)


def validate_labels(labels: Iterable[str], vocabulary: LabelVocabulary) -> LabelSet:
    """Return ``labels`` as a frozenset after checking membership."""
    members = frozenset(labels)
    unknown = members - set(vocabulary.labels)
    if unknown:
        raise ValidationError(f"unknown label(s) {sorted(unknown)!r}")
    return members


def encode_labels(labels: Iterable[str], vocabulary: LabelVocabulary) -> np.ndarray:
    """Multi-hot encode a label subset as a float vector of length ``len(vocabulary)``.

    Position ``i`` is 1.0 iff vocabulary label ``i`` is a member.
    """
    members = validate_labels(labels, vocabulary)
    vec = np.zeros(len(vocabulary), dtype=np.float64)
    for label in members:
        vec[vocabulary.index_of(label)] = 1.0
    return vec


def decode_labels(vector: np.ndarray, vocabulary: LabelVocabulary) -> LabelSet:
    """Inverse of :func:`encode_labels`."""
    vec = np.asarray(vector)
    if vec.shape != (len(vocabulary),):
        raise ValidationError(
            f"expected vector of length {len(vocabulary)}, got shape {vec.shape}"
        )
    return frozenset(lab for lab, bit in zip(vocabulary.labels, vec) if bit > 0.5)


def _sample_to_record(sample: TextSample, vocabulary: LabelVocabulary) -> dict:
    return {"text": sample.text, "labels": vocabulary.sorted_members(sample.labels)}


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write one JSON record per line; labels serialized in vocabulary order."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for sample in dataset.samples:
            fh.write(json.dumps(_sample_to_record(sample, dataset.vocabulary)) + "\n")


def load_dataset(path: str | Path, vocabulary: LabelVocabulary) -> Dataset:
    """Read a JSONL dataset, validating every record against ``vocabulary``.

    Errors carry the 1-based line number of the offending record.
    """
    samples: list[TextSample] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FileFormatError(
                    f"malformed JSON record: {exc.msg}", path=str(path), line=lineno
                ) from exc
            if not isinstance(record, dict) or "text" not in record or "labels" not in record:
                raise FileFormatError(
                    "record must be an object with 'text' and 'labels'",
                    path=str(path),
                    line=lineno,
                )
            text = record["text"]
            labels = record["labels"]
            if not isinstance(text, str) or not text.strip():
                raise ValidationError(f"line {lineno}: empty text")
            if not isinstance(labels, list) or not labels:
                raise ValidationError(f"line {lineno}: 'labels' must be a non-empty array")
            unknown = set(labels) - set(vocabulary.labels)
            if unknown:
                raise ValidationError(
                    f"line {lineno}: unknown label(s) {sorted(unknown)!r}"
                )
            samples.append(TextSample(text=text, labels=frozenset(labels)))
    return Dataset(vocabulary=vocabulary, samples=tuple(samples))


def _holdout_size(n: int, fraction: float) -> int:
    # round-half-up, at least 1, and never the whole dataset
    size = int(math.floor(fraction * n + 0.5))
    return min(max(size, 1), n - 1)


def split_indices(n: int, holdout_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Deterministically partition ``range(n)`` into (train, holdout) index lists.

    Membership is a pure function of ``(n, holdout_fraction, seed)``; both
    halves keep ascending original order so they stay aligned with any
    row-indexed sidecar file.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValidationError(f"holdout_fraction must be in (0,1), got {holdout_fraction}")
    if n < 2:
        raise ValidationError("need at least 2 samples to split")
    perm = np.random.default_rng(seed).permutation(n)
    size = _holdout_size(n, holdout_fraction)
    holdout = sorted(int(i) for i in perm[:size])
    chosen = set(holdout)
    train = [i for i in range(n) if i not in chosen]
    return train, holdout


def split(dataset: Dataset, holdout_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split a dataset into (train, holdout) with a seeded shuffle."""
    train_idx, holdout_idx = split_indices(len(dataset), holdout_fraction, seed)
    voc = dataset.vocabulary
    return (
        Dataset(voc, tuple(dataset.samples[i] for i in train_idx)),
        Dataset(voc, tuple(dataset.samples[i] for i in holdout_idx)),
    )
