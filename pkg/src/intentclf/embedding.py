"""Interchangeable text-embedding providers emitting unit-norm vectors.

Three provider kinds exist:

* ``toy``  - deterministic signed-hash bag of character trigrams, for tests
  and offline runs;
* ``http`` - a remote encoder speaking ``POST {"texts": [..]} ->
  {"vectors": [[..], ..]}``;
* ``file`` - precomputed vectors aligned row-for-row with a dataset, stored
  as JSON Lines ``{"index": <int>, "vector": [..]}`` with ``index`` ascending
  from 0.

Every provider normalizes at the boundary, so cosine similarity downstream is
a plain dot product.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, LabelSet
from .errors import (
    DegenerateEmbeddingError,
    FileFormatError,
    ValidationError,
)
from .httpclient import post_json

# An embedding is a 1-D float64 numpy array of unit Euclidean norm.
EmbeddingVector = np.ndarray

_PROVIDER_KINDS = ("file", "http", "toy")
_TEXT_START = "\x02"
_TEXT_END = "\x03"


@dataclass(frozen=True)
class EmbeddedSample:
    """A unit-norm embedding plus the labels of the sample it came from."""

    vector: EmbeddingVector
    labels: LabelSet
    source_index: int


@dataclass(frozen=True)
class ProviderConfig:
    """Which embedding provider to use and how to reach it."""

    kind: str
    dim: int
    path: str | None = None
    endpoint: str | None = None
    seed: int = 0
    timeout: float = 30.0
    max_retries: int = 2

    def __post_init__(self):
        if self.kind not in _PROVIDER_KINDS:
            raise ValidationError(f"provider kind must be one of {_PROVIDER_KINDS}, got {self.kind!r}")
        if self.dim < 2:
            raise ValidationError(f"embedding dim must be >= 2, got {self.dim}")
        if self.kind == "http" and not self.endpoint:
            raise ValidationError("http provider needs an endpoint")
        if self.kind == "file" and not self.path:
            raise ValidationError("file provider needs a path")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "path": self.path,
            "endpoint": self.endpoint,
            "seed": self.seed,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProviderConfig":
        return cls(
            kind=obj["kind"],
            dim=int(obj["dim"]),
            path=obj.get("path"),
            endpoint=obj.get("endpoint"),
            seed=int(obj.get("seed", 0)),
            timeout=float(obj.get("timeout", 30.0)),
            max_retries=int(obj.get("max_retries", 2)),
        )


def l2_normalize(v: Sequence[float] | np.ndarray) -> EmbeddingVector:
    """Scale ``v`` to unit Euclidean norm, preserving direction.

    Raises :class:`DegenerateEmbeddingError` for the zero vector and
    :class:`ValidationError` for non-finite entries.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("vector has non-finite entries")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise DegenerateEmbeddingError("cannot normalize a zero vector")
    return arr / norm


def _trigrams(text: str) -> list[str]:
    padded = _TEXT_START + text + _TEXT_END
    while len(padded) < 3:
        padded += _TEXT_END
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


def _hash_trigram(trigram: str, seed: int) -> tuple[int, float]:
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    digest = hashlib.blake2b(trigram.encode("utf-8"), key=key, digest_size=9).digest()
    bucket = int.from_bytes(digest[:8], "little")
    sign = 1.0 if digest[8] & 1 else -1.0
    return bucket, sign


def toy_embed(text: str, dim: int, seed: int = 0) -> EmbeddingVector:
    """Deterministic signed-hash bag of character trigrams, unit-normalized.

    The text is wrapped in boundary markers, so inputs shorter than three
    characters still produce at least one trigram. The map (text, dim, seed)
    -> vector is a pure function, stable across processes.
    """
    if dim < 2:
        raise ValidationError(f"embedding dim must be >= 2, got {dim}")
    acc = np.zeros(dim, dtype=np.float64)
    for trigram in _trigrams(text):
        bucket, sign = _hash_trigram(trigram, seed)
        acc[bucket % dim] += sign
    if not acc.any():
        # All buckets cancelled (vanishingly rare); fall back to a one-hot
        # bucket derived from the whole text so the map stays total.
        bucket, sign = _hash_trigram(_TEXT_START + text + _TEXT_END, seed)
        acc[bucket % dim] = sign
    return l2_normalize(acc)


def embed_remote(texts: Sequence[str], config: ProviderConfig) -> list[EmbeddingVector]:
    """Encode a batch through the configured HTTP endpoint, order-preserving."""
    if config.kind != "http":
        raise ValidationError(f"embed_remote needs an http provider, got {config.kind!r}")
    if not texts:
        return []
    body = post_json(
        config.endpoint,
        {"texts": list(texts)},
        timeout=config.timeout,
        max_retries=config.max_retries,
    )
    vectors = body.get("vectors")
    if not isinstance(vectors, list) or len(vectors) != len(texts):
        got = len(vectors) if isinstance(vectors, list) else "none"
        raise ValidationError(
            f"encoder returned {got} vectors for {len(texts)} texts"
        )
    out: list[EmbeddingVector] = []
    for row, vec in enumerate(vectors):
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != config.dim:
            raise ValidationError(
                f"encoder row {row} has dim {arr.shape} but config.dim={config.dim}"
            )
        out.append(l2_normalize(arr))
    return out


def embed_texts(texts: Sequence[str], config: ProviderConfig) -> list[EmbeddingVector]:
    """Embed arbitrary texts with a provider able to do so (toy or http)."""
    if config.kind == "toy":
        return [toy_embed(t, config.dim, config.seed) for t in texts]
    if config.kind == "http":
        return embed_remote(texts, config)
    raise ValidationError("the file provider holds precomputed rows and cannot embed new text")


def embed_dataset(dataset: Dataset, config: ProviderConfig) -> list[EmbeddedSample]:
    """Embed every sample of a dataset (toy/http) or load the aligned file."""
    if config.kind == "file":
        return load_embeddings(config.path, dataset)
    vectors = embed_texts([s.text for s in dataset.samples], config)
    return [
        EmbeddedSample(vector=vec, labels=sample.labels, source_index=i)
        for i, (vec, sample) in enumerate(zip(vectors, dataset.samples))
    ]


def save_embeddings(vectors: Sequence[np.ndarray], path: str | Path) -> None:
    """Write vectors as JSON Lines with ascending ``index`` starting at 0."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for index, vec in enumerate(vectors):
            record = {"index": index, "vector": [float(x) for x in np.asarray(vec)]}
            fh.write(json.dumps(record) + "\n")


def load_embeddings(path: str | Path, dataset: Dataset) -> list[EmbeddedSample]:
    """Read an embedding file aligned row-for-row with ``dataset``.

    Vectors are normalized on load. Rows must carry ``index`` equal to their
    0-based position, share one dimension, and match the dataset row count.
    """
    rows: list[np.ndarray] = []
    dim: int | None = None
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = len(rows)
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FileFormatError(
                    f"malformed JSON record: {exc.msg}", path=str(path), line=lineno
                ) from exc
            if not isinstance(record, dict) or "index" not in record or "vector" not in record:
                raise FileFormatError(
                    "record must be an object with 'index' and 'vector'",
                    path=str(path),
                    line=lineno,
                )
            if record["index"] != row:
                raise FileFormatError(
                    f"expected index {row}, got {record['index']}",
                    path=str(path),
                    line=lineno,
                )
            vec = np.asarray(record["vector"], dtype=np.float64)
            if dim is None:
                dim = int(vec.shape[0])
            elif vec.shape[0] != dim:
                raise FileFormatError(
                    f"dimension mismatch at row {row}: expected {dim}, got {vec.shape[0]}",
                    path=str(path),
                )
            rows.append(vec)
    if len(rows) != len(dataset):
        raise ValidationError(
            f"embedding file has {len(rows)} rows but dataset has {len(dataset)} samples"
        )
    return [
        EmbeddedSample(vector=l2_normalize(vec), labels=sample.labels, source_index=i)
        for i, (vec, sample) in enumerate(zip(rows, dataset.samples))
    ]
