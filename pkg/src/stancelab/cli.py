"""Command line interface.

Verbs: preprocess, pretrain, finetune, cross-target, ablate, similarity,
report, gradcheck. Every run writes only inside its run directory (set with
--rundir or the STANCELAB_RUNDIR environment variable) and emits a
manifest.tsv with the resolved config, seeds, input-file hashes and the
package version, so a run can be reproduced byte-for-byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace

import numpy as np

from . import __version__
from .datasets import load_sarcasm_dataset, load_stance_dataset
from .exceptions import DataError, NumericError, UsageError
from .metrics import (
    confusion_to_tsv,
    failure_report_to_tsv,
    similarity_to_tsv,
    target_similarity,
)
from .network import ModelConfig, build_model, forward, load_checkpoint
from .preprocessing import build_vocab, load_vocab, normalize, save_vocab
from .training import (
    ExperimentSpec,
    TrainConfig,
    build_experiment_spec,
    build_experiment_vocab,
    encode_samples,
    parse_spec_file,
    pretrain_intermediate,
    results_to_tsv,
    run_ablation,
    run_experiment,
    table_ablation,
)

VERBS = ("preprocess", "pretrain", "finetune", "cross-target", "ablate", "similarity", "report", "gradcheck")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def emit_run_manifest(rundir: str, verb: str, config: dict, input_files: list[str], status: str) -> str:
    """Write manifest.tsv listing the resolved config, input hashes and the
    tool version. No timestamps: identical runs produce identical manifests."""
    os.makedirs(rundir, exist_ok=True)
    lines = [f"verb\t{verb}", f"version\t{__version__}", f"status\t{status}"]
    for key in sorted(config):
        lines.append(f"config.{key}\t{config[key]}")
    for path in input_files:
        lines.append(f"input.{os.path.basename(path)}.sha256\t{_sha256(path)}")
    path = os.path.join(rundir, "manifest.tsv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _resolve_config(args) -> dict[str, str]:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(parse_spec_file(args.config))
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set needs key=value, got {item!r}")
        raw[key] = value
    return raw


def _rundir(args, verb: str, raw: dict) -> str:
    root = args.rundir or os.environ.get("STANCELAB_RUNDIR") or "runs"
    if args.name:
        return os.path.join(root, args.name)
    fingerprint = hashlib.sha256(repr(sorted(raw.items())).encode()).hexdigest()[:8]
    return os.path.join(root, f"{verb}-{fingerprint}")


def _write(rundir: str, name: str, content: str) -> None:
    with open(os.path.join(rundir, name), "w", encoding="utf-8") as fh:
        fh.write(content)


def _spec_inputs(spec: ExperimentSpec) -> list[str]:
    return [p for p in (spec.data, spec.sarcasm) if p]


def _run_one_seed(payload):
    spec, seed = payload
    result = run_experiment(replace(spec, seeds=(seed,)), flag_sarcasm=bool(spec.sarcasm))
    return seed, result


def _cmd_experiment(args, task: str) -> int:
    raw = _resolve_config(args)
    raw.setdefault("task", task)
    if raw["task"] != task:
        raise UsageError(f"config task {raw['task']!r} conflicts with the {task} verb")
    spec = build_experiment_spec(raw)
    rundir = _rundir(args, task, raw)
    os.makedirs(rundir, exist_ok=True)
    try:
        variant = "sarc+encoder+conv+bilstm" if spec.sarcasm else "encoder+conv+bilstm"
        if args.jobs > 1 and len(spec.seeds) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                partials = dict(pool.map(_run_one_seed, [(spec, s) for s in spec.seeds]))
            rows = [(variant, spec.target, s, partials[s].per_seed[0][1]) for s in spec.seeds]
            evals = [partials[s].evals[0] for s in spec.seeds]
        else:
            result = run_experiment(spec, flag_sarcasm=bool(spec.sarcasm))
            rows = [(variant, spec.target, s, score) for s, score in result.per_seed]
            evals = result.evals
        _write(rundir, "results.tsv", results_to_tsv(rows))
        last = evals[-1]
        _write(rundir, "confusion.tsv", confusion_to_tsv(last.confusion))
        _write(rundir, "failures.tsv", failure_report_to_tsv(last))
        pred_lines = ["id\tgold\tpredicted\tsarcastic"]
        for r in last.records:
            flag = "" if r.sarcastic_flag is None else str(int(r.sarcastic_flag))
            pred_lines.append(f"{r.id}\t{r.gold.value}\t{r.predicted.value}\t{flag}")
        _write(rundir, "predictions.tsv", "\n".join(pred_lines) + "\n")
    except BaseException:
        emit_run_manifest(rundir, task, raw, _spec_inputs(spec), "aborted")
        raise
    emit_run_manifest(rundir, task, raw, _spec_inputs(spec), "completed")
    print(f"{task}: wrote {rundir}/results.tsv")
    return 0


def _cmd_preprocess(args) -> int:
    raw = _resolve_config(args)
    rundir = _rundir(args, "preprocess", raw)
    os.makedirs(rundir, exist_ok=True)
    inputs = []
    try:
        texts = []
        if "data" in raw:
            ds = load_stance_dataset(raw["data"])
            inputs.append(raw["data"])
            texts.extend(normalize(s.text) for s in ds.all_samples())
        if "sarcasm" in raw:
            sds = load_sarcasm_dataset(raw["sarcasm"])
            inputs.append(raw["sarcasm"])
            texts.extend(normalize(s.text) for s in sds.samples)
        if not texts:
            raise UsageError("preprocess needs a data and/or sarcasm file in its config")
        vocab = build_vocab(
            texts,
            max_size=int(raw.get("vocab_max_size", 20000)),
            min_count=int(raw.get("vocab_min_count", 1)),
        )
        save_vocab(vocab, os.path.join(rundir, "vocab.tsv"))
        _write(rundir, "normalized.tsv", "\n".join(texts) + "\n")
    except BaseException:
        emit_run_manifest(rundir, "preprocess", raw, inputs, "aborted")
        raise
    emit_run_manifest(rundir, "preprocess", raw, inputs, "completed")
    print(f"preprocess: wrote {rundir}/vocab.tsv ({len(vocab)} entries)")
    return 0


def _cmd_pretrain(args) -> int:
    raw = _resolve_config(args)
    raw.setdefault("task", "in_domain")
    raw.setdefault("target", "-")
    if "sarcasm" not in raw:
        raise UsageError("pretrain needs a sarcasm dataset in its config")
    raw.setdefault("data", raw["sarcasm"])  # spec plumbing; only sarcasm is read
    spec = build_experiment_spec(raw)
    rundir = _rundir(args, "pretrain", raw)
    os.makedirs(rundir, exist_ok=True)
    try:
        sds = load_sarcasm_dataset(spec.sarcasm)
        if args.vocab:
            vocab = load_vocab(args.vocab)
        else:
            vocab = build_vocab(
                [normalize(s.text) for s in sds.samples],
                max_size=spec.vocab_max_size, min_count=spec.vocab_min_count,
            )
        save_vocab(vocab, os.path.join(rundir, "vocab.tsv"))
        model_cfg = ModelConfig(vocab_size=len(vocab), num_classes=2, **spec.model)
        cfg = replace(spec.train, seed=spec.seeds[0])
        result = pretrain_intermediate(sds, vocab, model_cfg, cfg,
                                       checkpoint_dir=os.path.join(rundir, "checkpoint"))
        lines = ["fold\tbest_val_accuracy"]
        lines += [f"{i}\t{acc:.12g}" for i, acc in enumerate(result.val_accuracies)]
        _write(rundir, "pretrain.tsv", "\n".join(lines) + "\n")
    except BaseException:
        emit_run_manifest(rundir, "pretrain", raw, [spec.sarcasm], "aborted")
        raise
    emit_run_manifest(rundir, "pretrain", raw, [spec.sarcasm], "completed")
    print(f"pretrain: wrote {rundir}/checkpoint")
    return 0


def _cmd_ablate(args) -> int:
    raw = _resolve_config(args)
    raw.setdefault("task", "in_domain")
    raw.setdefault("target", "-")
    spec = build_experiment_spec(raw)
    rundir = _rundir(args, "ablate", raw)
    os.makedirs(rundir, exist_ok=True)
    grid = [v for v in (args.variants or "").split(",") if v] or None
    try:
        if grid is None:
            table = table_ablation(spec.data, spec.sarcasm, spec.seeds, spec.train, spec.model)
            _write(rundir, "table_ablation.tsv", table.to_tsv())
            result = None
        else:
            result = run_ablation(spec.data, spec.sarcasm, grid, spec.task, None,
                                  spec.seeds, spec.train, spec.model)
            _write(rundir, "table_ablation.tsv", result.table().to_tsv())
        if result is not None:
            _write(rundir, "results.tsv", results_to_tsv(result.raw_rows))
    except BaseException:
        emit_run_manifest(rundir, "ablate", raw, _spec_inputs(spec), "aborted")
        raise
    emit_run_manifest(rundir, "ablate", raw, _spec_inputs(spec), "completed")
    print(f"ablate: wrote {rundir}/table_ablation.tsv")
    return 0


def _cmd_similarity(args) -> int:
    raw = _resolve_config(args)
    if "data" not in raw:
        raise UsageError("similarity needs a stance data file in its config")
    rundir = _rundir(args, "similarity", raw)
    os.makedirs(rundir, exist_ok=True)
    try:
        ds = load_stance_dataset(raw["data"])
        texts_by_target = {
            t: [normalize(s.text) for s in ds.samples(t, "train") + ds.samples(t, "test")]
            for t in ds.targets
        }
        vocab = build_vocab([x for texts in texts_by_target.values() for x in texts],
                            max_size=int(raw.get("vocab_max_size", 20000)))
        if args.checkpoint:
            model = load_checkpoint(args.checkpoint)
        else:
            model_cfg = ModelConfig(vocab_size=len(vocab), num_classes=3)
            model = build_model(model_cfg, seed=int(raw.get("encoder_seed", 0)))
        table = model.params["embed.table"].data
        groups = []
        for target, texts in texts_by_target.items():
            vectors = []
            for text in texts:
                ids = [vocab.id(tok) for tok in text.split()] or [0]
                vectors.append(table[ids].mean(axis=0))
            groups.append((target, np.stack(vectors)))
        report = target_similarity(groups)
        _write(rundir, "similarity.tsv", similarity_to_tsv(report))
        matrix_lines = ["target\t" + "\t".join(report.targets)]
        for i, t in enumerate(report.targets):
            matrix_lines.append(t + "\t" + "\t".join(f"{v:.6f}" for v in report.cosine[i]))
        _write(rundir, "similarity_matrix.tsv", "\n".join(matrix_lines) + "\n")
    except BaseException:
        emit_run_manifest(rundir, "similarity", raw, [raw["data"]], "aborted")
        raise
    emit_run_manifest(rundir, "similarity", raw, [raw["data"]], "completed")
    print(f"similarity: wrote {rundir}/similarity.tsv")
    return 0


def _cmd_report(args) -> int:
    raw = _resolve_config(args)
    source = raw.get("results") or args.results
    if not source:
        raise UsageError("report needs a results.tsv path (--results or config key results)")
    if not os.path.isfile(source):
        raise DataError(f"no such file: {source}")
    rundir = _rundir(args, "report", raw)
    os.makedirs(rundir, exist_ok=True)
    rows = []
    with open(source, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "variant\ttarget\tseed\tmacro_f1":
            raise DataError(f"{source}: not a per-seed results file")
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                break
            variant, target, seed, score = line.split("\t")
            rows.append((variant, target, int(seed), float(score)))
    _write(rundir, "report.tsv", results_to_tsv(rows))
    emit_run_manifest(rundir, "report", raw, [source], "completed")
    print(f"report: wrote {rundir}/report.tsv")
    return 0


def _cmd_gradcheck(args) -> int:
    from .autograd import grad_check, weighted_cross_entropy
    from .preprocessing import EncodedText

    raw = _resolve_config(args)
    rundir = _rundir(args, "gradcheck", raw)
    os.makedirs(rundir, exist_ok=True)
    cfg = ModelConfig(
        vocab_size=int(raw.get("vocab_size", 12)), num_classes=3,
        embed_dim=int(raw.get("embed_dim", 8)), conv_filters=int(raw.get("conv_filters", 4)),
        lstm_hidden=int(raw.get("lstm_hidden", 5)), max_len=int(raw.get("max_len", 7)),
        dropout=0.0, dtype="f64",
    )
    seeds = [int(s) for s in str(raw.get("seeds", "0")).split(",")]
    worst = 0.0
    for seed in seeds:
        model = build_model(cfg, seed)
        rng = np.random.default_rng(seed)
        batch = [
            EncodedText(rng.integers(0, cfg.vocab_size, size=cfg.max_len), int(rng.integers(1, cfg.max_len + 1)))
            for _ in range(2)
        ]
        gold = rng.integers(0, 3, size=len(batch))

        def loss():
            return weighted_cross_entropy(forward(model, batch, mode="eval"), gold)

        worst = max(worst, grad_check(loss, model.params, delta=1e-5))
    _write(rundir, "gradcheck.tsv", f"max_relative_error\t{worst:.3e}\n")
    emit_run_manifest(rundir, "gradcheck", raw, [], "completed")
    print(f"gradcheck: max relative error {worst:.3e}")
    if worst > 1e-4:
        raise NumericError(f"gradient check failed: {worst:.3e} > 1e-4")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2; the spec wants 1 for usage
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stancelab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb")
    for verb in VERBS:
        p = sub.add_parser(verb, add_help=True)
        p.add_argument("--config", help="key<TAB>value experiment spec file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (last wins)")
        p.add_argument("--rundir", help="output root (default $STANCELAB_RUNDIR or ./runs)")
        p.add_argument("--name", help="run directory name (default derived from the config hash)")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers across seeds")
        if verb == "pretrain":
            p.add_argument("--vocab", help="existing vocab.tsv to reuse")
        if verb == "similarity":
            p.add_argument("--checkpoint", help="checkpoint whose embedding table supplies vectors")
        if verb == "report":
            p.add_argument("--results", help="per-seed results.tsv to aggregate")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.verb:
            raise UsageError("missing verb; expected one of " + ", ".join(VERBS))
        handler = {
            "preprocess": _cmd_preprocess,
            "pretrain": _cmd_pretrain,
            "finetune": lambda a: _cmd_experiment(a, "in_domain"),
            "cross-target": lambda a: _cmd_experiment(a, "cross_target"),
            "ablate": _cmd_ablate,
            "similarity": _cmd_similarity,
            "report": _cmd_report,
            "gradcheck": _cmd_gradcheck,
        }[args.verb]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 1
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
