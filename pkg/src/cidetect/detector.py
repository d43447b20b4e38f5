"""Max-similarity ensemble over pattern-specific embedding models.

Each pattern (leaf, root, internal) gets its own model; a query/target pair
is scored by every model, similarity = 1 / (1 + distance), and the ensemble
keeps the maximum. The pair is flagged as inlined when that maximum reaches
the decision threshold. A single mixed model trained on all patterns at once
is supported as an ablation configuration.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .acfg import (
    AttributedCFG,
    OpcodeVocabulary,
    vocabulary_from_json,
    vocabulary_to_json,
)
from .errors import DegenerateLabels, NegativeDistance
from .evaluation import Scored, confusion, precision_recall_f1
from .gnn import (
    ModelConfig,
    ModelParams,
    config_to_json,
    embed_prepared,
    euclidean_distance,
    load_checkpoint,
    prepare_graph,
    save_checkpoint,
)
from .pairgen import FunctionPair

PATTERN_KEYS = ("leaf", "root", "internal")
MIXED_KEY = "mixed"


def similarity(distance: float) -> float:
    """Map a distance to (0, 1]; identical embeddings score exactly 1."""
    if distance < 0:
        raise NegativeDistance(f"distance must be >= 0, got {distance}")
    return 1.0 / (1.0 + distance)


@dataclass(frozen=True)
class EnsembleDetector:
    """Pattern models sharing one vocabulary, config, and threshold."""

    models: Mapping[str, ModelParams]
    vocab: OpcodeVocabulary
    config: ModelConfig
    threshold: float

    def __post_init__(self) -> None:
        keys = tuple(sorted(self.models))
        if keys != tuple(sorted(PATTERN_KEYS)) and keys != (MIXED_KEY,):
            raise ValueError(
                f"models must be {set(PATTERN_KEYS)} or {{{MIXED_KEY!r}}}, "
                f"got {set(keys)}"
            )
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.vocab.feature_dim != self.config.feature_dim:
            raise ValueError(
                f"vocabulary dim {self.vocab.feature_dim} != "
                f"config feature dim {self.config.feature_dim}"
            )

    @property
    def mode(self) -> str:
        return MIXED_KEY if MIXED_KEY in self.models else "ensemble"

    def detect(self, query: AttributedCFG, target: AttributedCFG) -> "Verdict":
        return detect(query, target, self)


@dataclass(frozen=True)
class Verdict:
    similarities: dict[str, float]
    final: float
    label: bool


def detect(
    query: AttributedCFG, target: AttributedCFG, detector: EnsembleDetector
) -> Verdict:
    """Score one pair with every model and keep the maximum similarity."""
    query_prep = prepare_graph(query, detector.vocab, detector.config)
    target_prep = prepare_graph(target, detector.vocab, detector.config)
    sims: dict[str, float] = {}
    for key in sorted(detector.models):
        params = detector.models[key]
        d = euclidean_distance(
            embed_prepared(query_prep, params, detector.config),
            embed_prepared(target_prep, params, detector.config),
        )
        sims[key] = similarity(d)
    final = max(sims.values())
    return Verdict(similarities=sims, final=final, label=final >= detector.threshold)


def score_pairs(
    detector: EnsembleDetector, pairs: Sequence[FunctionPair], jobs: int = 1
) -> list[float]:
    """Ensemble similarity per pair; each distinct graph embeds once per
    model. jobs > 1 fans the embedding work over threads."""
    prep_cache: dict = {}
    for pair in pairs:
        for ref, graph in ((pair.query_ref, pair.query), (pair.target_ref, pair.target)):
            if ref not in prep_cache:
                prep_cache[ref] = prepare_graph(graph, detector.vocab, detector.config)
    refs = sorted(prep_cache)
    finals = np.full(len(pairs), -np.inf)
    for key in sorted(detector.models):
        params = detector.models[key]

        def embed_ref(ref, params=params):
            return embed_prepared(prep_cache[ref], params, detector.config)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                embeddings = dict(zip(refs, pool.map(embed_ref, refs)))
        else:
            embeddings = {ref: embed_ref(ref) for ref in refs}
        for i, pair in enumerate(pairs):
            d = euclidean_distance(
                embeddings[pair.query_ref], embeddings[pair.target_ref]
            )
            finals[i] = max(finals[i], similarity(d))
    return [float(v) for v in finals]


# ---------------------------------------------------------------------------
# Threshold selection

def paper_grid() -> list[float]:
    """Ten thresholds from 0.50 to 0.95 in steps of 0.05."""
    return [i / 20 for i in range(10, 20)]


def extended_grid() -> list[float]:
    """Nineteen thresholds from 0.05 to 0.95 in steps of 0.05."""
    return [i / 20 for i in range(1, 20)]


GRIDS = {"paper": paper_grid, "extended": extended_grid}


def select_threshold(scored: Sequence[Scored], grid: Sequence[float]) -> float:
    """Grid threshold with the best F1; ties resolve to the smallest one."""
    if not grid:
        raise ValueError("empty threshold grid")
    labels = {label for _, label in scored}
    if 1 not in labels or -1 not in labels:
        raise DegenerateLabels("threshold selection needs both labels")
    best_threshold = None
    best_f1 = -1.0
    for threshold in sorted(grid):
        tp, fp, tn, fn = confusion(scored, threshold)
        _, _, f1 = precision_recall_f1(tp, fp, tn, fn)
        if f1 > best_f1:
            best_f1 = f1
            best_threshold = threshold
    return float(best_threshold)


# ---------------------------------------------------------------------------
# Bundle persistence

_BUNDLE_VERSION = 1


def config_hash(config: ModelConfig) -> str:
    canon = json.dumps(config_to_json(config), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def save_bundle(
    detector: EnsembleDetector,
    directory: Path | str,
    provenance: Mapping[str, str] | None = None,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    model_files = {}
    for key in sorted(detector.models):
        filename = f"model-{key}.ckpt"
        save_checkpoint(directory / filename, detector.models[key], detector.config)
        model_files[key] = filename
    (directory / "vocab.json").write_text(
        json.dumps(vocabulary_to_json(detector.vocab), sort_keys=True) + "\n",
        encoding="utf-8",
    )
    manifest = {
        "format_version": _BUNDLE_VERSION,
        "mode": detector.mode,
        "threshold": detector.threshold,
        "models": model_files,
        "config": config_to_json(detector.config),
        "config_sha256": config_hash(detector.config),
        "provenance": dict(provenance or {}),
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_bundle(directory: Path | str) -> EnsembleDetector:
    directory = Path(directory)
    manifest = json.loads(
        (directory / "manifest.json").read_text(encoding="utf-8")
    )
    if manifest["format_version"] != _BUNDLE_VERSION:
        raise ValueError(
            f"unsupported bundle version {manifest['format_version']}"
        )
    vocab = vocabulary_from_json(
        json.loads((directory / "vocab.json").read_text(encoding="utf-8"))
    )
    models: dict[str, ModelParams] = {}
    config = None
    for key, filename in manifest["models"].items():
        params, ckpt_config = load_checkpoint(directory / filename)
        if config is None:
            config = ckpt_config
        elif ckpt_config != config:
            raise ValueError(f"checkpoint {filename} disagrees on model config")
        models[key] = params
    if config is None:
        raise ValueError("bundle has no models")
    if config_hash(config) != manifest["config_sha256"]:
        raise ValueError("bundle manifest config hash mismatch")
    return EnsembleDetector(
        models=models,
        vocab=vocab,
        config=config,
        threshold=float(manifest["threshold"]),
    )
