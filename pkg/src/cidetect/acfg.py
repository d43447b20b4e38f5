"""Attributed control-flow graphs and bag-of-words node features.

A function is an attributed CFG: basic blocks carrying instruction sequences,
directed edges for control flow, a single entry block. Node features are
opcode count vectors over a corpus-level vocabulary with a trailing
out-of-vocabulary slot.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import EmptyCorpus, MalformedGraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Instruction:
    address: int
    opcode: str
    operands: tuple[str, ...] = ()


@dataclass(frozen=True)
class BasicBlock:
    id: int
    instructions: tuple[Instruction, ...]

    @property
    def opcodes(self) -> tuple[str, ...]:
        return tuple(ins.opcode for ins in self.instructions)


@dataclass(frozen=True)
class AttributedCFG:
    """Immutable function graph. Nodes are stored sorted by block id."""

    function_name: str
    nodes: tuple[BasicBlock, ...]
    edges: tuple[tuple[int, int], ...]
    entry: int

    @cached_property
    def node_index(self) -> dict[int, int]:
        return {block.id: pos for pos, block in enumerate(self.nodes)}

    def block(self, block_id: int) -> BasicBlock:
        return self.nodes[self.node_index[block_id]]

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(block.id for block in self.nodes)

    @property
    def instruction_count(self) -> int:
        return sum(len(block.instructions) for block in self.nodes)

    def opcode_counts(self) -> Counter[str]:
        counts: Counter[str] = Counter()
        for block in self.nodes:
            counts.update(block.opcodes)
        return counts

    def validate(self) -> None:
        """Raise MalformedGraph unless every structural invariant holds."""
        if not self.nodes:
            raise MalformedGraph(f"{self.function_name!r}: no basic blocks")
        ids = [block.id for block in self.nodes]
        if len(set(ids)) != len(ids):
            raise MalformedGraph(f"{self.function_name!r}: duplicate block ids")
        if ids != sorted(ids):
            raise MalformedGraph(f"{self.function_name!r}: nodes not sorted by id")
        id_set = set(ids)
        if self.entry not in id_set:
            raise MalformedGraph(
                f"{self.function_name!r}: entry {self.entry} is not a block"
            )
        seen_addrs: set[int] = set()
        for block in self.nodes:
            if not block.instructions:
                raise MalformedGraph(
                    f"{self.function_name!r}: block {block.id} is empty"
                )
            prev = None
            for ins in block.instructions:
                if not ins.opcode:
                    raise MalformedGraph(
                        f"{self.function_name!r}: empty opcode in block {block.id}"
                    )
                if prev is not None and ins.address <= prev:
                    raise MalformedGraph(
                        f"{self.function_name!r}: addresses not strictly "
                        f"increasing in block {block.id}"
                    )
                if ins.address in seen_addrs:
                    raise MalformedGraph(
                        f"{self.function_name!r}: duplicate address "
                        f"{ins.address:#x}"
                    )
                seen_addrs.add(ins.address)
                prev = ins.address
        for src, dst in self.edges:
            if src not in id_set or dst not in id_set:
                raise MalformedGraph(
                    f"{self.function_name!r}: dangling edge ({src}, {dst})"
                )
        if not _reachable(id_set, self.edges, self.entry) == id_set:
            raise MalformedGraph(
                f"{self.function_name!r}: unreachable blocks present"
            )


def _reachable(
    ids: set[int], edges: Iterable[tuple[int, int]], entry: int
) -> set[int]:
    succ: dict[int, list[int]] = {i: [] for i in ids}
    for src, dst in edges:
        succ[src].append(dst)
    seen = {entry}
    stack = [entry]
    while stack:
        node = stack.pop()
        for nxt in succ[node]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def build_acfg(record: dict) -> AttributedCFG:
    """Construct a validated graph from one ingestion record.

    Record shape:
      {"name": str, "entry": int,
       "blocks": [{"id": int, "insns": [{"addr": int, "op": str, "args": [...]}]}],
       "edges": [[int, int], ...]}

    Opcodes are lowercased, operands kept verbatim. Blocks unreachable from
    the entry are dropped (with a warning); an entry or edge referencing a
    missing block is an error.
    """
    try:
        name = str(record["name"])
        raw_blocks = record["blocks"]
        raw_edges = record["edges"]
        entry = int(record["entry"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedGraph(f"bad record: {exc}") from exc
    if not raw_blocks:
        raise MalformedGraph(f"{name!r}: no basic blocks")

    blocks: dict[int, BasicBlock] = {}
    for raw in raw_blocks:
        block_id = int(raw["id"])
        if block_id in blocks:
            raise MalformedGraph(f"{name!r}: duplicate block id {block_id}")
        insns = tuple(
            Instruction(
                address=int(ins["addr"]),
                opcode=str(ins["op"]).lower(),
                operands=tuple(str(a) for a in ins.get("args", ())),
            )
            for ins in raw["insns"]
        )
        if not insns:
            raise MalformedGraph(f"{name!r}: block {block_id} is empty")
        blocks[block_id] = BasicBlock(id=block_id, instructions=insns)

    if entry not in blocks:
        raise MalformedGraph(f"{name!r}: entry {entry} is not a block")
    edge_set: set[tuple[int, int]] = set()
    for raw_edge in raw_edges:
        src, dst = int(raw_edge[0]), int(raw_edge[1])
        if src not in blocks or dst not in blocks:
            raise MalformedGraph(f"{name!r}: dangling edge ({src}, {dst})")
        edge_set.add((src, dst))

    keep = _reachable(set(blocks), edge_set, entry)
    dropped = len(blocks) - len(keep)
    if dropped:
        logger.warning("%s: dropped %d unreachable block(s)", name, dropped)
    nodes = tuple(blocks[i] for i in sorted(keep))
    edges = tuple(sorted(e for e in edge_set if e[0] in keep and e[1] in keep))
    graph = AttributedCFG(function_name=name, nodes=nodes, edges=edges, entry=entry)
    graph.validate()
    return graph


def acfg_to_record(graph: AttributedCFG) -> dict:
    return {
        "name": graph.function_name,
        "entry": graph.entry,
        "blocks": [
            {
                "id": block.id,
                "insns": [
                    {"addr": ins.address, "op": ins.opcode, "args": list(ins.operands)}
                    for ins in block.instructions
                ],
            }
            for block in graph.nodes
        ],
        "edges": [list(e) for e in graph.edges],
    }


def strip_name(graph: AttributedCFG) -> AttributedCFG:
    """Drop the symbol name (model inputs must not see names)."""
    return replace(graph, function_name="")


def iter_function_records(path: Path | str) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_function_records(path: Path | str, graphs: Iterable[AttributedCFG]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for graph in graphs:
            handle.write(json.dumps(acfg_to_record(graph), sort_keys=True))
            handle.write("\n")


@dataclass(frozen=True)
class OpcodeVocabulary:
    """Opcode to feature-slot mapping; the last slot is out-of-vocabulary."""

    key_sequence: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.key_sequence)) != len(self.key_sequence):
            raise ValueError("vocabulary keys must be unique")

    @cached_property
    def index(self) -> dict[str, int]:
        return {op: i for i, op in enumerate(self.key_sequence)}

    @property
    def unk_index(self) -> int:
        return len(self.key_sequence)

    @property
    def feature_dim(self) -> int:
        return len(self.key_sequence) + 1

    def slot(self, opcode: str) -> int:
        return self.index.get(opcode, self.unk_index)


def build_vocabulary(
    corpus: Iterable[AttributedCFG], max_size: int = 256
) -> OpcodeVocabulary:
    """Most frequent opcodes first; frequency ties break lexicographically."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    counts: Counter[str] = Counter()
    for graph in corpus:
        counts.update(graph.opcode_counts())
    if not counts:
        raise EmptyCorpus("no opcodes in corpus")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return OpcodeVocabulary(key_sequence=tuple(op for op, _ in ranked[:max_size]))


def featurize_node(block: BasicBlock, vocab: OpcodeVocabulary) -> np.ndarray:
    """Opcode count vector of length len(vocab)+1 (last slot collects UNK)."""
    vec = np.zeros(vocab.feature_dim, dtype=np.int64)
    for opcode in block.opcodes:
        vec[vocab.slot(opcode)] += 1
    return vec


def featurize_graph(graph: AttributedCFG, vocab: OpcodeVocabulary) -> np.ndarray:
    """Node feature matrix (n_nodes, feature_dim), rows in node-id order."""
    out = np.zeros((len(graph.nodes), vocab.feature_dim), dtype=np.float64)
    for row, block in enumerate(graph.nodes):
        out[row] = featurize_node(block, vocab)
    return out


def vocabulary_to_json(vocab: OpcodeVocabulary) -> dict:
    return {"key_sequence": list(vocab.key_sequence)}


def vocabulary_from_json(payload: dict) -> OpcodeVocabulary:
    return OpcodeVocabulary(key_sequence=tuple(payload["key_sequence"]))
