"""Command-line entry point exposing the pipeline as subcommands.

Every subcommand takes --seed and --config (a flat key=value file whose
entries fill in flags the user did not pass; explicit flags win). Each
output artifact gets a sibling <name>.manifest.json recording the resolved
configuration, input content hashes, seed, version, and wall-clock time, so
a run can be audited and reproduced. Exit codes: 0 success, 2 bad usage or
validation, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from . import __version__, access, corpus, lm, metrics, mine, tune
from . import embed as embed_mod
from . import index as index_mod

log = logging.getLogger("paramine")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    pass


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        fp.write(text)
    os.replace(tmp, path)


def write_manifest(
    output: str,
    subcommand: str,
    config: dict,
    inputs: list[str],
    seed: int | None,
    started: float,
) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": {k: config[k] for k in sorted(config)},
        "inputs": {path: _sha256(path) for path in sorted(set(inputs))},
        "output": output,
        "seed": seed,
        "tool_version": __version__,
        "duration_s": round(time.time() - started, 3),
    }
    _atomic_write_text(
        f"{output}.manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    cfg: dict[str, str] = {}
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            cfg[key.replace("-", "_")] = value
    return cfg


def _resolve(args: argparse.Namespace, config: dict[str, str], defaults: dict) -> dict:
    """Fill unset flags from the config file, then from defaults."""
    resolved = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None and key in config:
            raw = config[key]
            if isinstance(default, bool):
                value = raw.lower() in ("1", "true", "yes", "on")
            elif default is None:
                value = raw
            else:
                value = type(default)(raw)
        if value is None:
            value = default
        resolved[key] = value
    return resolved


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fp:
        return [line.rstrip("\n") for line in fp]


def _emit_json(report: dict, output: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if output:
        _atomic_write_text(output, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_extract(args, config) -> int:
    opts = _resolve(args, config, {"max_chars": corpus.DEFAULT_MAX_CHARS, "threads": 1})
    started = time.time()
    with open(args.input, encoding="utf-8") as fp:
        docs = list(corpus.read_documents(fp))
    extract = lambda doc: corpus.extract_sequences(doc, max_chars=opts["max_chars"])
    if opts["threads"] > 1:
        with ThreadPoolExecutor(max_workers=opts["threads"]) as pool:
            per_doc = list(pool.map(extract, docs))
    else:
        per_doc = [extract(doc) for doc in docs]
    seqs = [s for chunk in per_doc for s in chunk]
    seqs.sort(key=lambda s: (s.doc_id, s.sent_start, s.sent_end))
    tmp = f"{args.output}.tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        n = corpus.write_sequences(seqs, fp)
    os.replace(tmp, args.output)
    write_manifest(args.output, "extract", opts, [args.input], args.seed, started)
    log.info("extracted %d sequences from %d documents", n, len(docs))
    return EXIT_OK


def cmd_train_lm(args, config) -> int:
    opts = _resolve(args, config, {"order": 3})
    started = time.time()
    model = lm.train_from_lines(_read_lines(args.input), order=opts["order"])
    tmp = f"{args.output}.tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        lm.write_arpa(model, fp)
    os.replace(tmp, args.output)
    write_manifest(args.output, "train-lm", opts, [args.input], args.seed, started)
    return EXIT_OK


def cmd_filter(args, config) -> int:
    opts = _resolve(
        args,
        config,
        {
            "punct_max": corpus.DEFAULT_PUNCT_MAX,
            "logprob_min": None,
            "calibrate": None,
            "percentile": 10.0,
        },
    )
    started = time.time()
    with open(args.lm, encoding="utf-8") as fp:
        model = lm.read_arpa(fp)
    inputs = [args.sequences, args.lm]
    if opts["logprob_min"] is not None:
        threshold = float(opts["logprob_min"])
    elif opts["calibrate"]:
        inputs.append(opts["calibrate"])
        threshold = lm.calibrate_logprob_threshold(
            model, _read_lines(opts["calibrate"]), percentile=opts["percentile"]
        )
        log.info("calibrated log-probability threshold: %.4f", threshold)
    else:
        raise UsageError("provide --logprob-min or --calibrate")
    with open(args.sequences, encoding="utf-8") as fp:
        seqs = corpus.read_sequences(fp)
    kept = corpus.filter_sequences(
        seqs, model.score, punct_max=opts["punct_max"], logprob_min=threshold
    )
    tmp = f"{args.output}.tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        corpus.write_sequences(kept, fp)
    os.replace(tmp, args.output)
    opts["resolved_logprob_min"] = threshold
    write_manifest(args.output, "filter", opts, inputs, args.seed, started)
    log.info("kept %d of %d sequences", len(kept), len(seqs))
    return EXIT_OK


def cmd_transform(args, config) -> int:
    opts = _resolve(
        args,
        config,
        {"out_dim": 512, "normalize": True, "quantize": True, "sample_rows": 100000},
    )
    started = time.time()
    seed = args.seed if args.seed is not None else 0
    store = embed_mod.read_store_path(args.input)
    vectors = store.vectors()
    if opts["normalize"]:
        vectors = embed_mod.l2_normalize(vectors)
    out_dim = min(opts["out_dim"], store.d, store.n)
    pca = embed_mod.fit_pca(vectors, out_dim)
    rotation = embed_mod.make_rotation(out_dim, seed=seed)
    transformed = embed_mod.apply_transform(pca, rotation, vectors)
    if opts["quantize"]:
        sample = transformed[: opts["sample_rows"]]
        quantizer = embed_mod.fit_quantizer(sample)
        out_store = embed_mod.EmbeddingStore(
            ids=list(store.ids),
            data=embed_mod.quantize(quantizer, transformed),
            dtype=embed_mod.DTYPE_U8,
            quantizer=quantizer,
        )
    else:
        out_store = embed_mod.EmbeddingStore(ids=list(store.ids), data=transformed)
    tmp = f"{args.output}.tmp"
    with open(tmp, "wb") as fp:
        embed_mod.write_store(out_store, fp)
    os.replace(tmp, args.output)
    write_manifest(args.output, "transform", opts, [args.input], seed, started)
    return EXIT_OK


def cmd_build_index(args, config) -> int:
    opts = _resolve(args, config, {"cells": None, "max_iters": 25})
    started = time.time()
    seed = args.seed if args.seed is not None else 0
    store = embed_mod.read_store_path(args.input)
    k = int(opts["cells"]) if opts["cells"] is not None else None
    idx = index_mod.build_index(store, k=k, seed=seed, max_iters=opts["max_iters"])
    tmp = f"{args.output}.tmp"
    with open(tmp, "wb") as fp:
        index_mod.write_index(idx, fp)
    os.replace(tmp, args.output)
    opts["resolved_cells"] = idx.k
    write_manifest(args.output, "build-index", opts, [args.input], seed, started)
    return EXIT_OK


def cmd_mine(args, config) -> int:
    opts = _resolve(
        args,
        config,
        {
            "mode": "paraphrase",
            "dist_max": 0.05,
            "margin_max": 0.6,
            "top_k": 8,
            "lev_min": 0.20,
            "margin_denominator": "mean",
            "nprobe": 16,
            "freq_table": None,
            "threads": 1,
        },
    )
    started = time.time()
    cfg = mine.MiningConfig(
        dist_max=opts["dist_max"],
        margin_max=opts["margin_max"],
        top_k=opts["top_k"],
        lev_min=opts["lev_min"],
        margin_denominator=opts["margin_denominator"],
    )
    with open(args.sequences, encoding="utf-8") as fp:
        seqs = corpus.read_sequences(fp)
    store = embed_mod.read_store_path(args.store)
    idx = index_mod.read_index_path(args.index)
    by_id = {s.seq_id: s for s in seqs}
    try:
        ordered = [by_id[sid] for sid in store.ids]
    except KeyError as exc:
        raise UsageError(f"store row id {exc} missing from the sequence file") from exc
    inputs = [args.sequences, args.store, args.index]
    eval_sets = []
    for path in args.decontaminate or []:
        eval_sets.append(_read_lines(path))
        inputs.append(path)
    table = None
    if opts["freq_table"]:
        inputs.append(opts["freq_table"])
        with open(opts["freq_table"], encoding="utf-8") as fp:
            table = access.FrequencyTable.read(fp, source=opts["freq_table"])
    pairs = mine.mine_pairs(
        ordered,
        store,
        idx,
        cfg=cfg,
        nprobe=opts["nprobe"],
        mode=opts["mode"],
        freq_table=table,
        eval_sets=eval_sets,
        threads=opts["threads"],
    )
    tmp = f"{args.output}.tmp"
    with open(tmp, "w", encoding="utf-8") as fp:
        n = mine.write_pairs(pairs, fp)
    os.replace(tmp, args.output)
    write_manifest(args.output, "mine", opts, inputs, args.seed, started)
    log.info("mined %d pairs", n)
    return EXIT_OK


def cmd_preprocess_access(args, config) -> int:
    opts = _resolve(args, config, {"freq_table": None, "bin_width": access.TOKEN_BIN})
    started = time.time()
    with open(args.pairs, encoding="utf-8") as fp:
        pairs = mine.read_pairs(fp)
    inputs = [args.pairs]
    if opts["freq_table"]:
        inputs.append(opts["freq_table"])
        with open(opts["freq_table"], encoding="utf-8") as fp:
            table = access.FrequencyTable.read(fp, source=opts["freq_table"])
    else:
        table = access.FrequencyTable.from_texts(
            [p.query.text for p in pairs] + [p.candidate.text for p in pairs]
        )
    src_path = f"{args.output_prefix}.src"
    tgt_path = f"{args.output_prefix}.tgt"
    lines = list(
        access.preprocess_corpus(
            ((p.query.text, p.candidate.text) for p in pairs),
            table,
            bin_width=opts["bin_width"],
        )
    )
    _atomic_write_text(src_path, "".join(src + "\n" for src, _ in lines))
    _atomic_write_text(tgt_path, "".join(tgt + "\n" for _, tgt in lines))
    for out in (src_path, tgt_path):
        write_manifest(out, "preprocess-access", opts, inputs, args.seed, started)
    return EXIT_OK


def _load_eval_corpus(sources_path: str, ref_paths: list[str]):
    sources = _read_lines(sources_path)
    ref_columns = [_read_lines(p) for p in ref_paths]
    for path, col in zip(ref_paths, ref_columns):
        if len(col) != len(sources):
            raise UsageError(
                f"reference file {path} has {len(col)} lines, expected {len(sources)}"
            )
    references = [[col[i] for col in ref_columns] for i in range(len(sources))]
    return sources, references


def cmd_evaluate(args, config) -> int:
    started = time.time()
    sources, references = _load_eval_corpus(args.sources, args.refs)
    predictions = _read_lines(args.predictions)
    if len(predictions) != len(sources):
        raise UsageError("predictions are not line-aligned with sources")
    report = metrics.evaluate(sources, predictions, references)
    _emit_json(report.as_dict(), args.output)
    if args.output:
        write_manifest(
            args.output,
            "evaluate",
            {},
            [args.sources, args.predictions, *args.refs],
            args.seed,
            started,
        )
    return EXIT_OK


def cmd_baseline(args, config) -> int:
    opts = _resolve(args, config, {"keep_ratio": 0.8})
    started = time.time()
    sources = _read_lines(args.input)
    if args.truncate:
        preds = [metrics.truncate_baseline(s, opts["keep_ratio"]) for s in sources]
    else:
        preds = [metrics.identity_baseline(s) for s in sources]
    text = "".join(p + "\n" for p in preds)
    if args.output:
        _atomic_write_text(args.output, text)
        write_manifest(args.output, "baseline", opts, [args.input], args.seed, started)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gold_loo(args, config) -> int:
    started = time.time()
    seed = args.seed if args.seed is not None else 0
    sources, references = _load_eval_corpus(args.sources, args.refs)
    report = metrics.gold_reference_loo(sources, references, seed=seed)
    _emit_json(report.as_dict(), args.output)
    if args.output:
        write_manifest(
            args.output, "gold-loo", {}, [args.sources, *args.refs], seed, started
        )
    return EXIT_OK


def cmd_tune(args, config) -> int:
    opts = _resolve(args, config, {"budget": 64, "model_cmd": None, "toy": False})
    started = time.time()
    seed = args.seed if args.seed is not None else 0
    sources, references = _load_eval_corpus(args.sources, args.refs)
    if opts["model_cmd"]:
        model = tune.SubprocessModelClient(shlex.split(str(opts["model_cmd"])))
    elif opts["toy"]:
        table = access.FrequencyTable.from_texts(sources)
        model = tune.InProcessModelClient(tune.ToySimplifier(table))
    else:
        raise UsageError("provide --model-cmd or --toy")
    result = tune.tune_controls(
        model, sources, references, budget=opts["budget"], seed=seed
    )
    report = {
        "controls": {
            "NumChars": result.controls.num_chars,
            "LevSim": result.controls.lev_sim,
            "WordFreq": result.controls.word_freq,
            "DepTreeDepth": result.controls.dep_tree_depth,
        },
        "tokens": result.controls.tokens(),
        "sari": result.sari,
        "evaluations": result.evaluations,
    }
    _emit_json(report, args.output)
    if args.output:
        write_manifest(
            args.output, "tune", opts, [args.sources, *args.refs], seed, started
        )
    return EXIT_OK


def cmd_stats(args, config) -> int:
    opts = _resolve(args, config, {"freq_table": None})
    started = time.time()
    with open(args.pairs, encoding="utf-8") as fp:
        pairs = mine.read_pairs(fp)
    inputs = [args.pairs]
    table = None
    if opts["freq_table"]:
        inputs.append(opts["freq_table"])
        with open(opts["freq_table"], encoding="utf-8") as fp:
            table = access.FrequencyTable.read(fp)
    report = mine.corpus_stats(pairs, table)
    _emit_json(report, args.output)
    if args.output:
        write_manifest(args.output, "stats", opts, inputs, args.seed, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paramine",
        description="Mine paraphrases, prepare control tokens, evaluate simplification",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="flat key=value defaults file")
        p.add_argument(
            "--threads", type=int, default=None,
            help="worker threads where supported; never changes results",
        )

    p = sub.add_parser("extract", help="documents (ndjson) -> sequences (tsv)")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-chars", dest="max_chars", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-lm", help="train the filtering language model")
    p.add_argument("--input", required=True, help="text file, one sentence per line")
    p.add_argument("--output", required=True, help="ARPA output path")
    p.add_argument("--order", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("filter", help="drop noisy sequences")
    p.add_argument("--sequences", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--punct-max", dest="punct_max", type=float, default=None)
    p.add_argument("--logprob-min", dest="logprob_min", type=float, default=None)
    p.add_argument("--calibrate", default=None, help="clean sample for threshold")
    p.add_argument("--percentile", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("transform", help="PCA + rotation + quantization")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--out-dim", dest="out_dim", type=int, default=None)
    p.add_argument("--normalize", dest="normalize", action="store_const", const=True, default=None)
    p.add_argument("--no-normalize", dest="normalize", action="store_const", const=False)
    p.add_argument("--quantize", dest="quantize", action="store_const", const=True, default=None)
    p.add_argument("--no-quantize", dest="quantize", action="store_const", const=False)
    p.add_argument("--sample-rows", dest="sample_rows", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("build-index", help="train cells and add all vectors")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("mine", help="nearest neighbors -> filtered pairs")
    p.add_argument("--sequences", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", choices=("paraphrase", "simplification"), default=None)
    p.add_argument("--dist-max", dest="dist_max", type=float, default=None)
    p.add_argument("--margin-max", dest="margin_max", type=float, default=None)
    p.add_argument("--top-k", dest="top_k", type=int, default=None)
    p.add_argument("--lev-min", dest="lev_min", type=float, default=None)
    p.add_argument(
        "--margin-denominator",
        dest="margin_denominator",
        choices=("mean", "max"),
        default=None,
    )
    p.add_argument("--nprobe", type=int, default=None)
    p.add_argument("--freq-table", dest="freq_table", default=None)
    p.add_argument("--decontaminate", nargs="*", default=None, help="eval text files")
    common(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("preprocess-access", help="pairs -> control-token corpus")
    p.add_argument("--pairs", required=True)
    p.add_argument("--output-prefix", dest="output_prefix", required=True)
    p.add_argument("--freq-table", dest="freq_table", default=None)
    p.add_argument("--bin-width", dest="bin_width", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_preprocess_access)

    p = sub.add_parser("evaluate", help="score predictions against references")
    p.add_argument("--sources", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--refs", nargs="+", required=True)
    p.add_argument("--output", default=None)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="identity or truncation predictions")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--identity", action="store_true")
    group.add_argument("--truncate", action="store_true")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--keep-ratio", dest="keep_ratio", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("gold-loo", help="leave-one-out gold reference scores")
    p.add_argument("--sources", required=True)
    p.add_argument("--refs", nargs="+", required=True)
    p.add_argument("--output", default=None)
    common(p)
    p.set_defaults(func=cmd_gold_loo)

    p = sub.add_parser("tune", help="search control values against a simplifier")
    p.add_argument("--sources", required=True)
    p.add_argument("--refs", nargs="+", required=True)
    p.add_argument("--model-cmd", dest="model_cmd", default=None)
    p.add_argument("--toy", action="store_const", const=True, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--output", default=None)
    common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("stats", help="mined-corpus statistics report")
    p.add_argument("--pairs", required=True)
    p.add_argument("--freq-table", dest="freq_table", default=None)
    p.add_argument("--output", default=None)
    common(p)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except (UsageError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        log.error("missing input: %s", exc)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
