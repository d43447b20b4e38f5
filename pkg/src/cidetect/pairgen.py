"""Training pair generation from a bridge index.

Positives pair an equal-form binary of a bridge (query, compiled without
inlining) with a cross-inlining binary whose code embeds that bridge
(target). Negatives pair the same kind of query with a cross-inlining binary
that does not embed the bridge. Queries and targets are stripped of symbol
names before they reach a model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .acfg import AttributedCFG, strip_name
from .errors import Exhausted, TooFewProjects
from .labeling import BridgeIndex, Pattern

DATASET_NOINLINE = "noinline"
DATASET_INLINE = "inline"

GraphRef = tuple[str, str, str]  # (dataset_id, binary_id, func_name)
GraphStore = Mapping[GraphRef, AttributedCFG]


@dataclass(frozen=True)
class FunctionPair:
    query: AttributedCFG
    target: AttributedCFG
    label: int
    pattern: Pattern
    query_ref: GraphRef
    target_ref: GraphRef
    bridge: str | None = None

    def __post_init__(self) -> None:
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        if self.pattern == Pattern.EQUAL:
            raise ValueError("pairs are generated for cross-inlining patterns")
        if self.label == 1 and self.bridge is None:
            raise ValueError("positive pair needs its bridge")
        if self.label == -1 and self.bridge is not None:
            raise ValueError("negative pair must not carry a bridge")


def _lookup(graphs: GraphStore, ref: GraphRef) -> AttributedCFG:
    try:
        return strip_name(graphs[ref])
    except KeyError:
        raise KeyError(f"graph store has no entry for {ref}") from None


def generate_positive_pairs(
    index: BridgeIndex,
    pattern: Pattern,
    count: int,
    seed: int | Sequence[int],
    graphs: GraphStore,
) -> list[FunctionPair]:
    """Sample `count` positive pairs of one pattern, with replacement."""
    eligible = [
        (bridge, entry)
        for bridge, entry in sorted(index.entries.items())
        if entry.equal
        and any(p == pattern for _, p in entry.cross_inlining)
    ]
    if not eligible:
        raise Exhausted(f"no bridge offers {pattern.value} positives")
    rng = np.random.default_rng(seed)
    pairs: list[FunctionPair] = []
    for _ in range(count):
        bridge, entry = eligible[rng.integers(len(eligible))]
        query = entry.equal[rng.integers(len(entry.equal))]
        targets = [ref for ref, p in entry.cross_inlining if p == pattern]
        target = targets[rng.integers(len(targets))]
        query_ref = (DATASET_NOINLINE, query.binary_id, query.name)
        target_ref = (DATASET_INLINE, target.binary_id, target.name)
        pairs.append(
            FunctionPair(
                query=_lookup(graphs, query_ref),
                target=_lookup(graphs, target_ref),
                label=1,
                pattern=pattern,
                query_ref=query_ref,
                target_ref=target_ref,
                bridge=bridge,
            )
        )
    return pairs


def generate_negative_pairs(
    index: BridgeIndex,
    pattern: Pattern,
    count: int,
    seed: int | Sequence[int],
    graphs: GraphStore,
) -> list[FunctionPair]:
    """Sample negatives: query from a bridge, target embedding other bridges.

    Targets are drawn from the corpus-wide pool of cross-inlining binaries
    minus the ones on the query bridge's own list. The pattern argument only
    tags the produced pairs (negatives accompany a per-pattern training run).
    """
    universe: set[tuple[str, str]] = set()
    for entry in index.entries.values():
        for ref, _ in entry.cross_inlining:
            universe.add((ref.binary_id, ref.name))
    ref_by_key = {
        (ref.binary_id, ref.name): ref
        for entry in index.entries.values()
        for ref, _ in entry.cross_inlining
    }
    eligible: list[tuple[str, tuple, list]] = []
    for bridge, entry in sorted(index.entries.items()):
        if not entry.equal:
            continue
        own = {(ref.binary_id, ref.name) for ref, _ in entry.cross_inlining}
        complement = sorted(universe - own)
        if complement:
            eligible.append((bridge, entry.equal, complement))
    if not eligible:
        raise Exhausted("no bridge has out-of-bridge targets for negatives")
    rng = np.random.default_rng(seed)
    pairs: list[FunctionPair] = []
    for _ in range(count):
        _, equal_pool, complement = eligible[rng.integers(len(eligible))]
        query = equal_pool[rng.integers(len(equal_pool))]
        target = ref_by_key[complement[rng.integers(len(complement))]]
        query_ref = (DATASET_NOINLINE, query.binary_id, query.name)
        target_ref = (DATASET_INLINE, target.binary_id, target.name)
        pairs.append(
            FunctionPair(
                query=_lookup(graphs, query_ref),
                target=_lookup(graphs, target_ref),
                label=-1,
                pattern=pattern,
                query_ref=query_ref,
                target_ref=target_ref,
            )
        )
    return pairs


# ---------------------------------------------------------------------------
# Project split

@dataclass(frozen=True)
class SplitSpec:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]


def split_projects(
    project_ids: Sequence[str],
    seed: int | Sequence[int],
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> SplitSpec:
    """Disjoint project-level split, validation/test floored but never empty
    while their fraction is positive."""
    if len(set(project_ids)) != len(project_ids):
        raise ValueError("duplicate project ids")
    if len(project_ids) < 3:
        raise TooFewProjects(f"need at least 3 projects, got {len(project_ids)}")
    if abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError("fractions must be non-negative and sum to 1")
    total = len(project_ids)
    n_val = int(total * fractions[1])
    n_test = int(total * fractions[2])
    if fractions[1] > 0 and n_val == 0:
        n_val = 1
    if fractions[2] > 0 and n_test == 0:
        n_test = 1
    n_train = total - n_val - n_test
    if n_train < 1:
        raise TooFewProjects(
            f"{total} projects leave no training projects after the split"
        )
    rng = np.random.default_rng(seed)
    order = [project_ids[i] for i in rng.permutation(total)]
    return SplitSpec(
        train=tuple(sorted(order[:n_train])),
        validation=tuple(sorted(order[n_train : n_train + n_val])),
        test=tuple(sorted(order[n_train + n_val :])),
    )


def filter_index(index: BridgeIndex, bridges: Iterable[str]) -> BridgeIndex:
    """Restrict a bridge index to the given bridge names."""
    keep = set(bridges)
    return BridgeIndex(
        entries={b: e for b, e in index.entries.items() if b in keep},
        excluded_no_inline=index.excluded_no_inline,
        isolated_bridges=index.isolated_bridges,
    )


# ---------------------------------------------------------------------------
# Pair file exchange (refs only; graphs resolve against a corpus)

def write_pairs(pairs: Sequence[FunctionPair], path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for pair in pairs:
            record = {
                "query_ref": list(pair.query_ref),
                "target_ref": list(pair.target_ref),
                "label": pair.label,
                "pattern": pair.pattern.value,
            }
            if pair.bridge is not None:
                record["bridge"] = pair.bridge
            handle.write(json.dumps(record, sort_keys=True))
            handle.write("\n")


def read_pairs(path: Path | str, graphs: GraphStore) -> list[FunctionPair]:
    pairs = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            query_ref = tuple(record["query_ref"])
            target_ref = tuple(record["target_ref"])
            pairs.append(
                FunctionPair(
                    query=_lookup(graphs, query_ref),
                    target=_lookup(graphs, target_ref),
                    label=int(record["label"]),
                    pattern=Pattern(record["pattern"]),
                    query_ref=query_ref,
                    target_ref=target_ref,
                    bridge=record.get("bridge"),
                )
            )
    return pairs
