"""Command line interface.

Subcommands: synth (generate a corpus), label (bridge index from line
tables), pairs (sample training/eval pairs), train (fit one pattern model,
finalizing the detector bundle when all its models exist), detect (score one
query/target pair), eval (per-pattern reports for a pair file), sweep
(re-threshold an existing score file).

Every option can also come from a flat key=value config file (--config);
explicit flags win. All randomness derives from --seed. Exit codes: 0 ok,
2 validation error, 3 numeric/runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import acfg, detector, evaluation, gnn, labeling, pairgen, synth
from .errors import NumericError, ValidationError

logger = logging.getLogger(__name__)

_SEED_VOCAB_SPLIT = 5  # split tag; one --seed drives every derived stream
_SEED_PAIRS = {"leaf": 101, "root": 102, "internal": 103, "mixed": 104}
_SEED_VAL = 211
_SEED_THRESH = 223


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi)


def _parse_hidden(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


@dataclass(frozen=True)
class Opt:
    name: str
    convert: Callable[[str], object]
    default: object
    help: str
    required: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


def _add_options(parser: argparse.ArgumentParser, opts: Sequence[Opt]) -> None:
    for opt in opts:
        parser.add_argument(
            f"--{opt.name}", dest=opt.dest, type=str, default=None, help=opt.help
        )


def _resolve(args: argparse.Namespace, opts: Sequence[Opt]) -> dict:
    """Merge precedence: explicit flag, then config file, then default."""
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        file_values = _read_config_file(Path(args.config))
    known = {opt.name for opt in opts}
    for key in file_values:
        if key not in known:
            raise ValidationError(f"unknown config key {key!r}")
    resolved = {}
    for opt in opts:
        raw = getattr(args, opt.dest)
        if raw is None:
            raw = file_values.get(opt.name)
        if raw is None:
            if opt.required:
                raise ValidationError(f"missing required option --{opt.name}")
            resolved[opt.dest] = opt.default
        else:
            try:
                resolved[opt.dest] = opt.convert(raw)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"bad value for --{opt.name}: {exc}") from exc
    return resolved


def _read_config_file(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        values[key.strip()] = value.strip()
    return values


def _pattern_arg(text: str) -> str:
    if text not in ("leaf", "root", "internal", "mixed"):
        raise ValueError("pattern must be leaf, root, internal or mixed")
    return text


def _grid_arg(text: str) -> str:
    if text not in detector.GRIDS:
        raise ValueError(f"grid must be one of {sorted(detector.GRIDS)}")
    return text


# ---------------------------------------------------------------------------
# synth

_SYNTH_OPTS = [
    Opt("out", Path, None, "corpus output directory", required=True),
    Opt("seed", int, 0, "generator seed"),
    Opt("projects", int, 10, "number of projects"),
    Opt("functions", int, 10, "functions per project"),
    Opt("alphabet-size", int, 24, "opcode alphabet size"),
    Opt("block-count", _parse_range, (3, 8), "blocks per function, lo:hi"),
    Opt("block-size", _parse_range, (3, 8), "instructions per block, lo:hi"),
    Opt("call-density", float, 1.2, "expected outgoing calls per function"),
    Opt("extra-edge-prob", float, 0.15, "extra CFG edge probability"),
    Opt("preferred-opcodes", int, 6, "per-function biased opcode subset size"),
    Opt("preferred-weight", float, 0.85, "weight of the biased subset"),
    Opt("inline-budget", int, 400, "instruction budget for inlined callees"),
    Opt("inline-probability", float, 1.0, "per-call inline probability"),
    Opt("mutation-rate", float, 0.0, "opcode perturbation rate, inline side"),
]


def cmd_synth(args: argparse.Namespace) -> int:
    opts = _resolve(args, _SYNTH_OPTS)
    config = synth.SynthConfig(
        n_projects=opts["projects"],
        functions_per_project=opts["functions"],
        opcode_alphabet_size=opts["alphabet_size"],
        block_count_range=opts["block_count"],
        block_size_range=opts["block_size"],
        call_density=opts["call_density"],
        extra_edge_prob=opts["extra_edge_prob"],
        preferred_opcodes=opts["preferred_opcodes"],
        preferred_weight=opts["preferred_weight"],
        inline_budget=opts["inline_budget"],
        inline_probability=opts["inline_probability"],
        mutation_rate=opts["mutation_rate"],
        seed=opts["seed"],
    )
    corpus = synth.generate_corpus(config)
    synth.write_corpus(corpus, opts["out"])
    dist = labeling.pattern_distribution(corpus.ground_truth)
    print(
        f"wrote corpus to {opts['out']}: "
        f"{len(corpus.world.functions)} source functions, "
        + ", ".join(f"{p.value}={dist[p]}" for p in labeling.Pattern)
    )
    return 0


# ---------------------------------------------------------------------------
# label

_LABEL_OPTS = [
    Opt("corpus", Path, None, "corpus directory", required=True),
    Opt("out", Path, None, "bridge index JSON path", required=True),
]


def _split_rows_by_dataset(corpus_dir: Path):
    manifest_path = corpus_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ValidationError(f"no manifest.json under {corpus_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    noinline_ids = set()
    inline_ids = set()
    for project in manifest["projects"].values():
        noinline_ids.add(project["binaries"]["noinline"])
        inline_ids.add(project["binaries"]["inline"])
    tables = corpus_dir / "tables"
    for name in ("addr2line.tsv", "binfuncs.tsv", "srcfuncs.tsv", "fcg.tsv"):
        if not (tables / name).is_file():
            raise ValidationError(f"missing table {tables / name}")
    addr2line = labeling.read_addr2line(tables / "addr2line.tsv")
    binfuncs = labeling.read_binfuncs(tables / "binfuncs.tsv")
    srcfuncs = labeling.read_srcfuncs(tables / "srcfuncs.tsv")
    fcg_edges = labeling.read_fcg(tables / "fcg.tsv")
    split = {}
    for dataset, ids in (("noinline", noinline_ids), ("inline", inline_ids)):
        split[dataset] = (
            [row for row in addr2line if row[0] in ids],
            [row for row in binfuncs if row[0] in ids],
        )
    return split, srcfuncs, fcg_edges


def build_index_from_corpus(corpus_dir: Path) -> labeling.BridgeIndex:
    split, srcfuncs, fcg_edges = _split_rows_by_dataset(corpus_dir)
    results = {}
    for dataset, (addr_rows, bin_rows) in split.items():
        result = labeling.construct_mapping(addr_rows, bin_rows, srcfuncs)
        for message in result.inconsistencies:
            logger.warning("%s: %s", dataset, message)
        results[dataset] = result.mappings
    fcg = labeling.build_fcg(fcg_edges)
    return labeling.build_bridge_index(
        results["noinline"], results["inline"], fcg
    )


def cmd_label(args: argparse.Namespace) -> int:
    opts = _resolve(args, _LABEL_OPTS)
    index = build_index_from_corpus(opts["corpus"])
    labeling.save_index(index, opts["out"])
    dist = labeling.pattern_distribution(index)
    print(
        f"wrote {opts['out']}: {len(index.entries)} bridges, "
        + ", ".join(f"{p.value}={dist[p]}" for p in labeling.Pattern)
    )
    return 0


# ---------------------------------------------------------------------------
# pairs

_PAIRS_OPTS = [
    Opt("corpus", Path, None, "corpus directory", required=True),
    Opt("index", Path, None, "bridge index JSON (default: relabel corpus)"),
    Opt("pattern", _pattern_arg, None, "leaf, root, internal or mixed", required=True),
    Opt("num-pos", int, 100, "positive pairs"),
    Opt("num-neg", int, 100, "negative pairs"),
    Opt("seed", int, 0, "sampling seed"),
    Opt("projects", str, "", "comma list restricting bridge projects"),
    Opt("out", Path, None, "pairs JSONL path", required=True),
]


def _load_index_for(
    corpus: synth.LoadedCorpus, index_path: Path | None
) -> labeling.BridgeIndex:
    if index_path is not None:
        if not index_path.is_file():
            raise ValidationError(f"index file not found: {index_path}")
        return labeling.load_index(index_path)
    return build_index_from_corpus(corpus.root)


def _sample_pairs(
    index: labeling.BridgeIndex,
    graphs: pairgen.GraphStore,
    pattern: str,
    n_pos: int,
    n_neg: int,
    seed_seq: list[int],
) -> list[pairgen.FunctionPair]:
    """Positive and negative pairs, shuffled together deterministically."""
    if pattern == "mixed":
        patterns = [labeling.Pattern.LEAF, labeling.Pattern.ROOT, labeling.Pattern.INTERNAL]
    else:
        patterns = [labeling.Pattern(pattern)]
    pairs: list[pairgen.FunctionPair] = []
    for i, pat in enumerate(patterns):
        pos_share = n_pos // len(patterns) + (1 if i < n_pos % len(patterns) else 0)
        neg_share = n_neg // len(patterns) + (1 if i < n_neg % len(patterns) else 0)
        if pos_share:
            pairs.extend(
                pairgen.generate_positive_pairs(
                    index, pat, pos_share, seed_seq + [1, i], graphs
                )
            )
        if neg_share:
            pairs.extend(
                pairgen.generate_negative_pairs(
                    index, pat, neg_share, seed_seq + [2, i], graphs
                )
            )
    rng = np.random.default_rng(seed_seq + [3])
    return [pairs[i] for i in rng.permutation(len(pairs))]


def cmd_pairs(args: argparse.Namespace) -> int:
    opts = _resolve(args, _PAIRS_OPTS)
    corpus = synth.load_corpus(opts["corpus"])
    index = _load_index_for(corpus, opts["index"])
    if opts["projects"]:
        wanted = {p.strip() for p in opts["projects"].split(",") if p.strip()}
        unknown = wanted - set(corpus.project_ids())
        if unknown:
            raise ValidationError(f"unknown projects: {sorted(unknown)}")
        index = pairgen.filter_index(index, corpus.source_functions(wanted))
    pairs = _sample_pairs(
        index,
        corpus.graphs,
        opts["pattern"],
        opts["num_pos"],
        opts["num_neg"],
        [opts["seed"], _SEED_PAIRS[opts["pattern"]]],
    )
    pairgen.write_pairs(pairs, opts["out"])
    print(f"wrote {len(pairs)} pairs to {opts['out']}")
    return 0


# ---------------------------------------------------------------------------
# train

_TRAIN_OPTS = [
    Opt("corpus", Path, None, "corpus directory", required=True),
    Opt("index", Path, None, "bridge index JSON (default: relabel corpus)"),
    Opt("pattern", _pattern_arg, None, "leaf, root, internal or mixed", required=True),
    Opt("out", Path, None, "bundle output directory", required=True),
    Opt("seed", int, 0, "master seed"),
    Opt("epochs", int, 30, "training epochs"),
    Opt("epoch-size", int, 2000, "positive pairs per epoch (negatives match)"),
    Opt("val-pairs", int, 200, "validation pairs per label"),
    Opt("thresh-pairs", int, 300, "threshold-selection pairs per label per pattern"),
    Opt("grid", _grid_arg, "paper", "threshold grid preset"),
    Opt("vocab-size", int, 256, "opcode vocabulary cap"),
    Opt("node-dim", int, 32, "node state width"),
    Opt("embed-dim", int, 128, "graph embedding width"),
    Opt("layers", int, 5, "propagation layers"),
    Opt("encoder-hidden", _parse_hidden, (64,), "encoder hidden widths"),
    Opt("update-hidden", _parse_hidden, (64,), "update hidden widths"),
    Opt("output-hidden", _parse_hidden, (128,), "aggregator hidden widths"),
    Opt("margin", float, 0.1, "loss margin"),
    Opt("lr", float, 1e-3, "learning rate"),
    Opt("batch-size", int, 32, "pairs per optimizer step"),
    Opt("max-nodes", int, 2000, "reject graphs above this many blocks"),
]


def _train_setup(opts: dict):
    corpus = synth.load_corpus(opts["corpus"])
    index = _load_index_for(corpus, opts["index"])
    split = pairgen.split_projects(
        corpus.project_ids(), [opts["seed"], _SEED_VOCAB_SPLIT]
    )
    train_index = pairgen.filter_index(
        index, corpus.source_functions(split.train)
    )
    val_index = pairgen.filter_index(
        index, corpus.source_functions(split.validation)
    )
    train_binaries = {
        corpus.manifest["projects"][p]["binaries"][ds]
        for p in split.train
        for ds in ("noinline", "inline")
    }
    vocab_graphs = [
        corpus.graphs[key]
        for key in sorted(corpus.graphs)
        if key[1] in train_binaries
    ]
    vocab = acfg.build_vocabulary(vocab_graphs, max_size=opts["vocab_size"])
    config = gnn.ModelConfig(
        feature_dim=vocab.feature_dim,
        node_state_dim=opts["node_dim"],
        graph_embedding_dim=opts["embed_dim"],
        propagation_layers=opts["layers"],
        encoder_hidden=opts["encoder_hidden"],
        update_hidden=opts["update_hidden"],
        output_hidden=opts["output_hidden"],
        margin=opts["margin"],
        learning_rate=opts["lr"],
        batch_size=opts["batch_size"],
        max_nodes=opts["max_nodes"],
        seed=opts["seed"],
    )
    return corpus, split, train_index, val_index, vocab, config


def cmd_train(args: argparse.Namespace) -> int:
    opts = _resolve(args, _TRAIN_OPTS)
    corpus, split, train_index, val_index, vocab, config = _train_setup(opts)
    pattern = opts["pattern"]
    seed = opts["seed"]
    out_dir: Path = opts["out"]
    out_dir.mkdir(parents=True, exist_ok=True)

    def source(epoch: int) -> list[pairgen.FunctionPair]:
        return _sample_pairs(
            train_index,
            corpus.graphs,
            pattern,
            opts["epoch_size"],
            opts["epoch_size"],
            [seed, _SEED_PAIRS[pattern], epoch],
        )

    val_pairs = _sample_pairs(
        val_index,
        corpus.graphs,
        pattern,
        opts["val_pairs"],
        opts["val_pairs"],
        [seed, _SEED_PAIRS[pattern], _SEED_VAL],
    )
    logger.info(
        "training %s model: %d epochs x %d+%d pairs, %d/%d/%d projects",
        pattern, opts["epochs"], opts["epoch_size"], opts["epoch_size"],
        len(split.train), len(split.validation), len(split.test),
    )
    params, history = gnn.train_model(
        source, val_pairs, vocab, config, opts["epochs"], opts["epoch_size"]
    )
    for row in history:
        logger.info(
            "epoch %d: loss %.6f, val auc %.4f",
            row["epoch"], row["train_loss"], row["val_auc"],
        )
    gnn.save_checkpoint(out_dir / f"model-{pattern}.ckpt", params, config)
    (out_dir / f"history-{pattern}.json").write_text(
        json.dumps(history, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    (out_dir / "vocab.json").write_text(
        json.dumps(acfg.vocabulary_to_json(vocab), sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {out_dir / f'model-{pattern}.ckpt'}")

    if pattern == "mixed":
        models = {"mixed": params}
    else:
        paths = {
            key: out_dir / f"model-{key}.ckpt" for key in detector.PATTERN_KEYS
        }
        if not all(path.is_file() for path in paths.values()):
            missing = [k for k, p in paths.items() if not p.is_file()]
            print(f"bundle incomplete, still missing: {', '.join(missing)}")
            return 0
        models = {}
        for key, path in paths.items():
            loaded_params, loaded_config = gnn.load_checkpoint(path)
            if loaded_config != config:
                raise ValidationError(
                    f"{path} was trained with a different model config"
                )
            models[key] = loaded_params

    # thresholds are picked on a mixed-pattern pool either way
    thresh_pairs = _sample_pairs(
        train_index,
        corpus.graphs,
        "mixed",
        3 * opts["thresh_pairs"],
        3 * opts["thresh_pairs"],
        [seed, _SEED_THRESH],
    )
    # provisional threshold, replaced by the selected one below
    det = detector.EnsembleDetector(
        models=models, vocab=vocab, config=config, threshold=1.0
    )
    scored = list(
        zip(detector.score_pairs(det, thresh_pairs), (p.label for p in thresh_pairs))
    )
    threshold = detector.select_threshold(scored, detector.GRIDS[opts["grid"]]())
    det = detector.EnsembleDetector(
        models=models, vocab=vocab, config=config, threshold=threshold
    )
    detector.save_bundle(
        det,
        out_dir,
        provenance={"corpus": str(opts["corpus"]), "seed": str(seed)},
    )
    print(f"finalized bundle at {out_dir} (threshold {threshold})")
    return 0


# ---------------------------------------------------------------------------
# detect

_DETECT_OPTS = [
    Opt("bundle", Path, None, "detector bundle directory", required=True),
    Opt("query", Path, None, "query function JSONL (no inlining)", required=True),
    Opt("target", Path, None, "target function JSONL", required=True),
    Opt("query-name", str, "", "function name if the file has several"),
    Opt("target-name", str, "", "function name if the file has several"),
    Opt("out", Path, None, "verdict JSON path (default: stdout)"),
]


def _load_single_graph(path: Path, name: str):
    if not path.is_file():
        raise ValidationError(f"graph file not found: {path}")
    graphs = [acfg.build_acfg(r) for r in acfg.iter_function_records(path)]
    if name:
        matches = [g for g in graphs if g.function_name == name]
        if not matches:
            raise ValidationError(f"{path} has no function named {name!r}")
        return matches[0]
    if len(graphs) != 1:
        raise ValidationError(
            f"{path} holds {len(graphs)} functions; pick one by name"
        )
    return graphs[0]


def cmd_detect(args: argparse.Namespace) -> int:
    opts = _resolve(args, _DETECT_OPTS)
    det = detector.load_bundle(opts["bundle"])
    query = _load_single_graph(opts["query"], opts["query_name"])
    target = _load_single_graph(opts["target"], opts["target_name"])
    verdict = detector.detect(query, target, det)
    payload = {
        "similarities": verdict.similarities,
        "final": verdict.final,
        "label": verdict.label,
        "threshold": det.threshold,
    }
    text = json.dumps(payload, sort_keys=True, indent=1) + "\n"
    if opts["out"] is None:
        sys.stdout.write(text)
    else:
        opts["out"].write_text(text, encoding="utf-8")
        print(f"wrote {opts['out']}")
    return 0


# ---------------------------------------------------------------------------
# eval

_EVAL_OPTS = [
    Opt("bundle", Path, None, "detector bundle directory", required=True),
    Opt("corpus", Path, None, "corpus directory resolving pair refs", required=True),
    Opt("pairs", Path, None, "pairs JSONL", required=True),
    Opt("out", Path, None, "report output directory", required=True),
    Opt("grid", _grid_arg, "extended", "sweep grid preset"),
    Opt("jobs", int, 1, "embedding worker threads"),
]


def cmd_eval(args: argparse.Namespace) -> int:
    opts = _resolve(args, _EVAL_OPTS)
    det = detector.load_bundle(opts["bundle"])
    corpus = synth.load_corpus(opts["corpus"])
    if not opts["pairs"].is_file():
        raise ValidationError(f"pairs file not found: {opts['pairs']}")
    pairs = pairgen.read_pairs(opts["pairs"], corpus.graphs)
    if not pairs:
        raise ValidationError(f"{opts['pairs']} holds no pairs")
    out_dir: Path = opts["out"]
    out_dir.mkdir(parents=True, exist_ok=True)

    finals = detector.score_pairs(det, pairs, jobs=opts["jobs"])
    scored = list(zip(finals, (p.label for p in pairs)))
    if not all(np.isfinite(s) for s, _ in scored):
        raise NumericError("non-finite similarity while scoring pairs")
    reports = evaluation.evaluate_detector(det, pairs)
    evaluation.write_reports(reports, out_dir / "reports.json")
    sweep = evaluation.threshold_sweep(scored, detector.GRIDS[opts["grid"]]())
    evaluation.write_sweep_csv(sweep, out_dir / "sweep.csv")
    with (out_dir / "scores.jsonl").open("w", encoding="utf-8") as handle:
        for pair, final in zip(pairs, finals):
            handle.write(
                json.dumps(
                    {
                        "score": final,
                        "label": pair.label,
                        "pattern": pair.pattern.value,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    print(evaluation.format_report_table(reports))
    print(f"wrote {out_dir / 'reports.json'}")
    return 0


# ---------------------------------------------------------------------------
# sweep

_SWEEP_OPTS = [
    Opt("scores", Path, None, "scores JSONL from eval", required=True),
    Opt("grid", _grid_arg, "extended", "threshold grid preset"),
    Opt("out", Path, None, "sweep CSV path", required=True),
]


def cmd_sweep(args: argparse.Namespace) -> int:
    opts = _resolve(args, _SWEEP_OPTS)
    if not opts["scores"].is_file():
        raise ValidationError(f"scores file not found: {opts['scores']}")
    scored = []
    with opts["scores"].open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            scored.append((float(record["score"]), int(record["label"])))
    if not scored:
        raise ValidationError(f"{opts['scores']} holds no scores")
    sweep = evaluation.threshold_sweep(scored, detector.GRIDS[opts["grid"]]())
    evaluation.write_sweep_csv(sweep, opts["out"])
    best = sweep.best
    print(
        f"wrote {opts['out']}: best threshold {best.threshold} "
        f"(f1 {best.f1:.4f})"
    )
    return 0


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "synth": (cmd_synth, _SYNTH_OPTS, "generate a synthetic corpus"),
    "label": (cmd_label, _LABEL_OPTS, "build the bridge index from line tables"),
    "pairs": (cmd_pairs, _PAIRS_OPTS, "sample pairs from a bridge index"),
    "train": (cmd_train, _TRAIN_OPTS, "train one pattern model"),
    "detect": (cmd_detect, _DETECT_OPTS, "score one query/target pair"),
    "eval": (cmd_eval, _EVAL_OPTS, "evaluate a bundle on a pair file"),
    "sweep": (cmd_sweep, _SWEEP_OPTS, "re-threshold an existing score file"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cidetect",
        description="cross-inlining binary function similarity detection",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (func, opts, help_text) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", type=str, default=None,
                         help="key=value config file (flags win)")
        _add_options(sub, opts)
        sub.set_defaults(func=func)
    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("CIDETECT_LOG", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        logger.error("%s", exc)
        return 2
    except NumericError as exc:
        logger.error("numeric failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
