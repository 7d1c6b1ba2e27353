"""Command-line entry points for the full pipeline.

Subcommands: ``generate``, ``embed``, ``train``, ``eval``, ``predict``,
``serve``. Every subcommand accepts ``--config cfg.json`` supplying defaults
for its flags (explicit flags win). Exit codes: 0 success, 2 validation,
3 file/I-O, 4 remote service.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataset import (
    encode_labels,
    load_dataset,
    load_vocabulary,
    save_dataset,
    split_indices,
)
from .datagen import (
    LLMClientConfig,
    llm_generate,
    offline_generate,
)
from .embedding import (
    ProviderConfig,
    embed_texts,
    load_embeddings,
    save_embeddings,
)
from .errors import (
    FileFormatError,
    GenerationError,
    PipelineError,
    RemoteServiceError,
    ValidationError,
)
from .losses import OFCConfig
from .metrics import EvalReport, evaluate, save_report
from .mining import MiningConfig
from .service import classification_body, serve_forever
from .trainer import (
    TrainConfig,
    finetune,
    load_artifact,
    pretrain,
    save_artifact,
    score_samples,
)

_EXIT_OK = 0
_EXIT_VALIDATION = 2
_EXIT_IO = 3
_EXIT_REMOTE = 4

_TABLE_COLUMNS = (
    ("Accuracy", "subset_accuracy"),
    ("Hamming Loss", "hamming_loss"),
    ("Jaccard", "jaccard"),
    ("F1", "f1"),
    ("Precision", "precision"),
    ("Recall", "recall"),
    ("MCC", "mcc"),
    ("AUC", "auc"),
)


class _Cfg:
    """Optional JSON config file backing flag defaults."""

    def __init__(self, path: str | None):
        self.data: dict = {}
        if path:
            try:
                self.data = json.loads(Path(path).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise FileFormatError(f"config is not valid JSON: {exc}", path=path) from exc
            if not isinstance(self.data, dict):
                raise FileFormatError("config must be a JSON object", path=path)

    def get(self, *keys, default=None):
        node = self.data
        for key in keys:
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node


def _pick(cli_value, cfg: _Cfg, keys: tuple, default):
    if cli_value is not None:
        return cli_value
    return cfg.get(*keys, default=default)


def _require(value, what: str):
    if value is None:
        raise ValidationError(f"missing required value: {what}")
    return value


def _load_combos(path: str | None) -> list[frozenset[str]]:
    if not path:
        return []
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"combos file is not valid JSON: {exc}", path=path) from exc
    if not isinstance(obj, list) or not all(isinstance(c, list) for c in obj):
        raise FileFormatError("combos file must be a JSON array of label arrays", path=path)
    return [frozenset(c) for c in obj]


def _provider_from(args, cfg: _Cfg) -> ProviderConfig:
    return ProviderConfig(
        kind=_pick(getattr(args, "provider", None), cfg, ("provider", "kind"), "toy"),
        dim=int(_pick(getattr(args, "dim", None), cfg, ("provider", "dim"), 256)),
        path=_pick(getattr(args, "embeddings_path", None), cfg, ("provider", "path"), None),
        endpoint=_pick(getattr(args, "endpoint", None), cfg, ("provider", "endpoint"), None),
        seed=int(_pick(getattr(args, "embed_seed", None), cfg, ("provider", "seed"), 0)),
    )


# ---------------------------------------------------------------------------
# subcommands


def run_generate(args) -> int:
    cfg = _Cfg(args.config)
    taxonomy_path = _require(_pick(args.taxonomy, cfg, ("taxonomy",), None), "--taxonomy")
    out_path = _require(_pick(args.out, cfg, ("dataset",), None), "--out")
    per_class = int(_pick(args.per_class, cfg, ("generate", "per_class"), 40))
    seed = int(_pick(args.seed, cfg, ("generate", "seed"), 0))
    offline = args.offline or bool(cfg.get("generate", "offline", default=False))
    vocabulary = load_vocabulary(taxonomy_path)
    combos = _load_combos(_pick(args.combos, cfg, ("generate", "combos"), None))
    if offline:
        dataset = offline_generate(vocabulary, per_class, combos, seed)
    else:
        client = LLMClientConfig(
            endpoint_url=_require(_pick(args.endpoint, cfg, ("llm", "endpoint_url"), None), "--endpoint"),
            model_name=_require(_pick(args.model_name, cfg, ("llm", "model_name"), None), "--model-name"),
            auth_token_env=_pick(args.auth_token_env, cfg, ("llm", "auth_token_env"), "LLM_API_TOKEN"),
            timeout=float(_pick(args.timeout, cfg, ("llm", "timeout"), 30.0)),
            max_retries=int(_pick(args.max_retries, cfg, ("llm", "max_retries"), 2)),
            temperature=float(_pick(args.temperature, cfg, ("llm", "temperature"), 0.7)),
        )
        dataset = llm_generate(vocabulary, per_class, combos, client, seed)
    save_dataset(dataset, out_path)
    for label in vocabulary.labels:
        count = sum(1 for s in dataset.samples if label in s.labels)
        print(f"{label}: {count}")
    print(f"total: {len(dataset)} samples -> {out_path}")
    return _EXIT_OK


def run_embed(args) -> int:
    cfg = _Cfg(args.config)
    taxonomy_path = _require(_pick(args.taxonomy, cfg, ("taxonomy",), None), "--taxonomy")
    dataset_path = _require(_pick(args.dataset, cfg, ("dataset",), None), "--dataset")
    out_path = _require(_pick(args.out, cfg, ("embeddings",), None), "--out")
    vocabulary = load_vocabulary(taxonomy_path)
    dataset = load_dataset(dataset_path, vocabulary)
    provider = _provider_from(args, cfg)
    if provider.kind == "file":
        vectors = [e.vector for e in load_embeddings(provider.path, dataset)]
    else:
        vectors = embed_texts([s.text for s in dataset.samples], provider)
    save_embeddings(vectors, out_path)
    print(f"embedded {len(vectors)} samples at dim {provider.dim} -> {out_path}")
    return _EXIT_OK


def _load_embedded(cfg: _Cfg, args):
    taxonomy_path = _require(_pick(args.taxonomy, cfg, ("taxonomy",), None), "--taxonomy")
    dataset_path = _require(_pick(args.dataset, cfg, ("dataset",), None), "--dataset")
    embeddings_path = _require(_pick(args.embeddings, cfg, ("embeddings",), None), "--embeddings")
    vocabulary = load_vocabulary(taxonomy_path)
    dataset = load_dataset(dataset_path, vocabulary)
    embedded = load_embeddings(embeddings_path, dataset)
    return vocabulary, dataset, embedded


def _split_config(args, cfg: _Cfg) -> tuple[float, int]:
    fraction = float(_pick(args.holdout_fraction, cfg, ("split", "holdout_fraction"), 0.2))
    seed = int(_pick(args.split_seed, cfg, ("split", "seed"), 0))
    return fraction, seed


def run_train(args) -> int:
    cfg = _Cfg(args.config)
    vocabulary, dataset, embedded = _load_embedded(cfg, args)
    out_path = _require(_pick(args.out, cfg, ("model",), None), "--out")
    fraction, split_seed = _split_config(args, cfg)
    train_idx, _ = split_indices(len(dataset), fraction, split_seed)
    train_part = [embedded[i] for i in train_idx]

    mining = MiningConfig(
        p=float(_pick(args.mining_p, cfg, ("mining", "p"), 10.0)),
        mode=_pick(args.mining_mode, cfg, ("mining", "mode"), "literal"),
        positive_rule=_pick(args.positive_rule, cfg, ("mining", "positive_rule"), "exact"),
    )
    ofc = OFCConfig(
        alpha=float(_pick(args.alpha, cfg, ("ofc", "alpha"), 1.0)),
        gamma=float(_pick(args.gamma, cfg, ("ofc", "gamma"), 2.0)),
        margin=float(_pick(args.margin, cfg, ("ofc", "margin"), 0.5)),
    )
    config = TrainConfig(
        lr_pretrain=float(_pick(args.lr_pretrain, cfg, ("train", "lr_pretrain"), 0.05)),
        lr_finetune=float(_pick(args.lr_finetune, cfg, ("train", "lr_finetune"), 0.2)),
        momentum=float(_pick(args.momentum, cfg, ("train", "momentum"), 0.9)),
        epochs_pretrain=int(_pick(args.epochs_pretrain, cfg, ("train", "epochs_pretrain"), 30)),
        epochs_finetune=int(_pick(args.epochs_finetune, cfg, ("train", "epochs_finetune"), 50)),
        batch_size=int(_pick(args.batch_size, cfg, ("train", "batch_size"), 32)),
        seed=int(_pick(args.seed, cfg, ("train", "seed"), 0)),
        decision_threshold=float(
            _pick(args.decision_threshold, cfg, ("train", "decision_threshold"), 0.5)
        ),
        loss_kind=_pick(args.loss, cfg, ("train", "loss_kind"), "ofc"),
        d_hidden=int(_pick(args.d_hidden, cfg, ("train", "d_hidden"), 128)),
        d_proj=int(_pick(args.d_proj, cfg, ("train", "d_proj"), 128)),
        mining=mining,
        ofc=ofc,
    )
    provider = _provider_from(args, cfg)
    embed_dim = train_part[0].vector.shape[0] if train_part else 0
    if provider.kind != "file" and provider.dim != embed_dim:
        raise ValidationError(
            f"provider dim {provider.dim} does not match embedding file dim {embed_dim}"
        )

    head, pretrain_losses = pretrain(train_part, config)
    for epoch, value in enumerate(pretrain_losses):
        print(f"pretrain epoch {epoch}: loss {value:.6f}")
    artifact, finetune_losses = finetune(train_part, vocabulary, head, config, provider)
    for epoch, value in enumerate(finetune_losses):
        print(f"finetune epoch {epoch}: loss {value:.6f}")
    save_artifact(artifact, out_path)
    loss_log = _pick(args.loss_log, cfg, ("loss_log",), None)
    if loss_log:
        Path(loss_log).write_text(
            json.dumps({"pretrain": pretrain_losses, "finetune": finetune_losses}, indent=2)
            + "\n",
            encoding="utf-8",
        )
    print(f"model -> {out_path}")
    return _EXIT_OK


def run_eval(args) -> int:
    cfg = _Cfg(args.config)
    vocabulary, dataset, embedded = _load_embedded(cfg, args)
    model_path = _require(_pick(args.model, cfg, ("model",), None), "--model")
    out_path = _require(_pick(args.out, cfg, ("report",), None), "--out")
    artifact = load_artifact(model_path)
    if artifact.vocabulary.labels != vocabulary.labels:
        raise ValidationError("model vocabulary does not match the taxonomy file")
    fraction, split_seed = _split_config(args, cfg)
    _, holdout_idx = split_indices(len(dataset), fraction, split_seed)
    holdout = [embedded[i] for i in holdout_idx]
    truth = np.stack([encode_labels(e.labels, vocabulary) for e in holdout])
    scores = score_samples(holdout, artifact)
    report = evaluate(scores, artifact.decision_threshold, truth)
    save_report(report, out_path)
    _print_report_table(report)
    print(f"report -> {out_path}")
    return _EXIT_OK


def _print_report_table(report: EvalReport) -> None:
    values = {name: getattr(report, attr) for name, attr in _TABLE_COLUMNS}
    header = " | ".join(name for name, _ in _TABLE_COLUMNS)
    row = " | ".join(f"{values[name] * 100:.2f}" for name, _ in _TABLE_COLUMNS)
    print(header)
    print(row)


def run_predict(args) -> int:
    artifact = load_artifact(args.model)
    print(classification_body(artifact, args.text))
    return _EXIT_OK


def run_serve(args) -> int:
    artifact = load_artifact(args.model)
    serve_forever(artifact, args.host, args.port)
    return _EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file supplying flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intentclf", description="Multi-label intent classification pipeline"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("generate", help="synthesize a labelled dataset")
    _add_common(p)
    p.add_argument("--taxonomy")
    p.add_argument("--out")
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--offline", action="store_true", help="use the deterministic offline generator")
    p.add_argument("--combos", help="JSON file: array of label arrays")
    p.add_argument("--endpoint", help="chat-completion endpoint URL")
    p.add_argument("--model-name", dest="model_name")
    p.add_argument("--auth-token-env", dest="auth_token_env")
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-retries", dest="max_retries", type=int)
    p.add_argument("--temperature", type=float)
    p.set_defaults(handler=run_generate)

    p = subparsers.add_parser("embed", help="embed a dataset into vectors")
    _add_common(p)
    p.add_argument("--taxonomy")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--provider", choices=["toy", "http", "file"])
    p.add_argument("--dim", type=int)
    p.add_argument("--embed-seed", dest="embed_seed", type=int)
    p.add_argument("--endpoint")
    p.add_argument("--path", dest="embeddings_path", help="precomputed vectors (file provider)")
    p.set_defaults(handler=run_embed)

    p = subparsers.add_parser("train", help="pretrain and fine-tune a model")
    _add_common(p)
    p.add_argument("--taxonomy")
    p.add_argument("--dataset")
    p.add_argument("--embeddings")
    p.add_argument("--out")
    p.add_argument("--loss", choices=["ofc", "oc", "cs"])
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs-pretrain", dest="epochs_pretrain", type=int)
    p.add_argument("--epochs-finetune", dest="epochs_finetune", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr-pretrain", dest="lr_pretrain", type=float)
    p.add_argument("--lr-finetune", dest="lr_finetune", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--decision-threshold", dest="decision_threshold", type=float)
    p.add_argument("--d-hidden", dest="d_hidden", type=int)
    p.add_argument("--d-proj", dest="d_proj", type=int)
    p.add_argument("--mining-p", dest="mining_p", type=float)
    p.add_argument("--mining-mode", dest="mining_mode", choices=["literal", "standard"])
    p.add_argument("--positive-rule", dest="positive_rule", choices=["exact", "overlap"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--holdout-fraction", dest="holdout_fraction", type=float)
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--provider", choices=["toy", "http", "file"])
    p.add_argument("--dim", type=int)
    p.add_argument("--embed-seed", dest="embed_seed", type=int)
    p.add_argument("--endpoint")
    p.add_argument("--path", dest="embeddings_path")
    p.add_argument("--loss-log", dest="loss_log")
    p.set_defaults(handler=run_train)

    p = subparsers.add_parser("eval", help="score the holdout and write a report")
    _add_common(p)
    p.add_argument("--taxonomy")
    p.add_argument("--dataset")
    p.add_argument("--embeddings")
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--holdout-fraction", dest="holdout_fraction", type=float)
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.set_defaults(handler=run_eval)

    p = subparsers.add_parser("predict", help="classify one text on stdout")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(handler=run_predict)

    p = subparsers.add_parser("serve", help="run the HTTP classify service")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(handler=run_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (RemoteServiceError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_REMOTE
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
