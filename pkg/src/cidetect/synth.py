"""Synthetic corpus generator with exact inlining ground truth.

Builds small source "projects": an acyclic per-project call graph whose
functions each get a connected DAG-shaped control-flow graph, designated
call-site blocks (one call per block, call last), and per-instruction
provenance tags (source function, source line). Two binaries are derived per
project: one that keeps every call, and one where calls are transitively
spliced away under a budgeted random policy. Line tables emitted from the
provenance tags let the labeling pipeline be checked against the generator's
own ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .acfg import (
    AttributedCFG,
    BasicBlock,
    Instruction,
    build_acfg,
    iter_function_records,
    write_function_records,
)
from .errors import MalformedGraph, PatternStarvation, SiteNotFound
from .labeling import (
    BinaryFunctionRef,
    BridgeEntry,
    BridgeIndex,
    Pattern,
    index_to_json,
)

CALL_OPCODE = "call"

_OPCODE_POOL = (
    "mov", "push", "pop", "add", "sub", "xor", "cmp", "test", "jmp", "je",
    "jne", "lea", "and", "or", "shl", "shr", "imul", "not", "neg", "inc",
    "dec", "movzx", "movsx", "xchg", "sete", "setne", "cmovz", "adc", "sbb",
    "mul", "div", "rol", "ror", "bt", "bts", "bsf", "bsr", "nop",
)

_ARG_POOL = (
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "r8", "r9",
    "0x0", "0x8", "0x10", "[rbp-0x8]", "[rbp-0x10]",
)

_SEED_WORLD = 11
_SEED_POLICY = 23
_SEED_MUTATE = 37


@dataclass(frozen=True)
class SynthConfig:
    n_projects: int = 10
    functions_per_project: int = 10
    opcode_alphabet_size: int = 24
    block_count_range: tuple[int, int] = (3, 8)
    block_size_range: tuple[int, int] = (3, 8)
    call_density: float = 1.2
    extra_edge_prob: float = 0.15
    preferred_opcodes: int = 6
    preferred_weight: float = 0.85
    inline_budget: int = 400
    inline_probability: float = 1.0
    mutation_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_projects < 1 or self.functions_per_project < 1:
            raise ValueError("need at least one project and one function")
        if self.opcode_alphabet_size < 2:
            raise ValueError("alphabet needs at least 2 opcodes")
        for lo, hi in (self.block_count_range, self.block_size_range):
            if lo < 1 or hi < lo:
                raise ValueError("ranges must be 1 <= lo <= hi")
        if self.call_density < 0 or self.extra_edge_prob < 0:
            raise ValueError("densities must be non-negative")
        if not 0.0 <= self.inline_probability <= 1.0:
            raise ValueError("inline_probability must be in [0, 1]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if not 0.0 <= self.preferred_weight <= 1.0:
            raise ValueError("preferred_weight must be in [0, 1]")
        if self.preferred_opcodes < 1 or self.inline_budget < 1:
            raise ValueError("preferred_opcodes and inline_budget must be >= 1")


def synth_config_to_json(config: SynthConfig) -> dict:
    payload = asdict(config)
    payload["block_count_range"] = list(config.block_count_range)
    payload["block_size_range"] = list(config.block_size_range)
    return payload


def synth_config_from_json(payload: dict) -> SynthConfig:
    kwargs = dict(payload)
    kwargs["block_count_range"] = tuple(kwargs["block_count_range"])
    kwargs["block_size_range"] = tuple(kwargs["block_size_range"])
    return SynthConfig(**kwargs)


def opcode_alphabet(config: SynthConfig) -> tuple[str, ...]:
    """Deterministic alphabet; the call opcode stays reserved outside it."""
    n = config.opcode_alphabet_size
    pool = list(_OPCODE_POOL)
    while len(pool) < n:
        pool.append(f"op{len(pool):02d}")
    return tuple(pool[:n])


# Provenance: per-node tuples of per-instruction tags. The generator tags
# every instruction with (source function, source line).
Prov = dict[int, tuple]


@dataclass(frozen=True)
class SourceFunction:
    name: str
    project: str
    file: str
    line_start: int
    line_end: int
    graph: AttributedCFG
    provenance: Prov
    callees: tuple[str, ...]
    call_sites: Mapping[str, int]


@dataclass(frozen=True)
class SourceWorld:
    config: SynthConfig
    functions: Mapping[str, SourceFunction]
    projects: Mapping[str, tuple[str, ...]]  # names in call-graph topo order
    fcg_edges: tuple[tuple[str, str], ...]


def _materialize(
    name: str,
    line_start: int,
    block_ops: list[list[tuple[str, tuple[str, ...]]]],
    edges: set[tuple[int, int]],
) -> tuple[AttributedCFG, Prov, int]:
    """Turn opcode lists into a validated graph with addresses and lines."""
    nodes = []
    prov: Prov = {}
    cursor = 0
    for block_id, ops in enumerate(block_ops):
        insns = []
        tags = []
        for opcode, args in ops:
            insns.append(
                Instruction(address=4 * cursor, opcode=opcode, operands=args)
            )
            tags.append((name, line_start + cursor))
            cursor += 1
        nodes.append(BasicBlock(id=block_id, instructions=tuple(insns)))
        prov[block_id] = tuple(tags)
    graph = AttributedCFG(
        function_name=name,
        nodes=tuple(nodes),
        edges=tuple(sorted(edges)),
        entry=0,
    )
    graph.validate()
    return graph, prov, line_start + cursor - 1


def gen_source_world(config: SynthConfig) -> SourceWorld:
    """Random projects: acyclic call graphs over DAG-bodied functions."""
    rng = np.random.default_rng([config.seed, _SEED_WORLD])
    alphabet = opcode_alphabet(config)
    functions: dict[str, SourceFunction] = {}
    projects: dict[str, tuple[str, ...]] = {}
    fcg_edges: list[tuple[str, str]] = []

    for pi in range(config.n_projects):
        project = f"p{pi:03d}"
        file = f"{project}.c"
        m = config.functions_per_project
        names = [f"{project}_f{j:02d}" for j in range(m)]
        topo = [names[i] for i in rng.permutation(m)]
        projects[project] = tuple(topo)
        line_cursor = 1

        for pos, name in enumerate(topo):
            lo, hi = config.block_count_range
            n_blocks = int(rng.integers(lo, hi + 1))
            later = topo[pos + 1 :]
            max_callees = min(len(later), n_blocks)
            n_callees = min(int(rng.poisson(config.call_density)), max_callees)
            callee_idx = (
                sorted(rng.choice(len(later), size=n_callees, replace=False))
                if n_callees
                else []
            )
            callees = tuple(later[i] for i in callee_idx)
            site_blocks = (
                [int(b) for b in rng.choice(n_blocks, size=n_callees, replace=False)]
                if n_callees
                else []
            )
            call_sites = dict(zip(callees, site_blocks))

            edges: set[tuple[int, int]] = set()
            for i in range(1, n_blocks):
                edges.add((int(rng.integers(0, i)), i))
            for i in range(n_blocks):
                for j in range(i + 1, n_blocks):
                    if rng.random() < config.extra_edge_prob:
                        edges.add((i, j))

            preferred = [
                alphabet[i]
                for i in rng.choice(
                    len(alphabet),
                    size=min(config.preferred_opcodes, len(alphabet)),
                    replace=False,
                )
            ]

            def draw_op() -> tuple[str, tuple[str, ...]]:
                if rng.random() < config.preferred_weight:
                    opcode = preferred[int(rng.integers(len(preferred)))]
                else:
                    opcode = alphabet[int(rng.integers(len(alphabet)))]
                n_args = int(rng.integers(0, 3))
                args = tuple(
                    _ARG_POOL[int(rng.integers(len(_ARG_POOL)))]
                    for _ in range(n_args)
                )
                return opcode, args

            slo, shi = config.block_size_range
            block_ops: list[list[tuple[str, tuple[str, ...]]]] = []
            for block_id in range(n_blocks):
                size = int(rng.integers(slo, shi + 1))
                block_ops.append([draw_op() for _ in range(size)])
            for callee, site in call_sites.items():
                block_ops[site].append((CALL_OPCODE, (callee,)))

            graph, prov, line_end = _materialize(
                name, line_cursor, block_ops, edges
            )
            functions[name] = SourceFunction(
                name=name,
                project=project,
                file=file,
                line_start=line_cursor,
                line_end=line_end,
                graph=graph,
                provenance=prov,
                callees=callees,
                call_sites=call_sites,
            )
            fcg_edges.extend((name, callee) for callee in callees)
            line_cursor = line_end + 2

    return SourceWorld(
        config=config,
        functions=functions,
        projects=projects,
        fcg_edges=tuple(sorted(fcg_edges)),
    )


# ---------------------------------------------------------------------------
# Splicing

def _default_prov(graph: AttributedCFG) -> Prov:
    return {
        block.id: tuple(graph.function_name for _ in block.instructions)
        for block in graph.nodes
    }


def inline_transform(
    caller: AttributedCFG,
    callee: AttributedCFG,
    call_site: int,
    caller_prov: Prov | None = None,
    callee_prov: Prov | None = None,
) -> tuple[AttributedCFG, Prov]:
    """Splice the callee body into the caller at one call site.

    The call site block must end with a call instruction naming the callee
    and carry at least one instruction before it. The call goes away, the
    prefix jumps to the (renumbered) callee entry, and every callee exit
    inherits the call site's original successors. Addresses are reassigned
    sequentially afterwards; provenance tags follow their instructions.
    """
    caller_prov = _default_prov(caller) if caller_prov is None else caller_prov
    callee_prov = _default_prov(callee) if callee_prov is None else callee_prov
    if call_site not in caller.node_index:
        raise SiteNotFound(f"no block {call_site} in {caller.function_name!r}")
    site_block = caller.block(call_site)
    last = site_block.instructions[-1]
    if last.opcode != CALL_OPCODE or not last.operands or (
        last.operands[0] != callee.function_name
    ):
        raise SiteNotFound(
            f"block {call_site} of {caller.function_name!r} does not end "
            f"with a call to {callee.function_name!r}"
        )
    if len(site_block.instructions) < 2:
        raise MalformedGraph(
            f"call site {call_site} has no instructions besides the call"
        )

    offset = max(caller.node_ids) + 1
    remap = {
        old: offset + rank for rank, old in enumerate(sorted(callee.node_ids))
    }
    callee_exits = sorted(
        set(callee.node_ids) - {src for src, _ in callee.edges}
    )
    site_successors = sorted(
        dst for src, dst in caller.edges if src == call_site
    )

    blocks: dict[int, tuple[tuple[str, tuple[str, ...]], ...]] = {}
    prov: Prov = {}
    for block in caller.nodes:
        ops = tuple((i.opcode, i.operands) for i in block.instructions)
        tags = tuple(caller_prov[block.id])
        if block.id == call_site:
            ops = ops[:-1]
            tags = tags[:-1]
        blocks[block.id] = ops
        prov[block.id] = tags
    for block in callee.nodes:
        new_id = remap[block.id]
        blocks[new_id] = tuple((i.opcode, i.operands) for i in block.instructions)
        prov[new_id] = tuple(callee_prov[block.id])

    edges: set[tuple[int, int]] = set()
    for src, dst in caller.edges:
        if src != call_site:
            edges.add((src, dst))
    edges.add((call_site, remap[callee.entry]))
    for src, dst in callee.edges:
        edges.add((remap[src], remap[dst]))
    for exit_id in callee_exits:
        for successor in site_successors:
            edges.add((remap[exit_id], successor))

    nodes = []
    cursor = 0
    for block_id in sorted(blocks):
        insns = tuple(
            Instruction(address=4 * (cursor + i), opcode=op, operands=args)
            for i, (op, args) in enumerate(blocks[block_id])
        )
        cursor += len(insns)
        nodes.append(BasicBlock(id=block_id, instructions=insns))
    graph = AttributedCFG(
        function_name=caller.function_name,
        nodes=tuple(nodes),
        edges=tuple(sorted(edges)),
        entry=caller.entry,
    )
    graph.validate()
    return graph, prov


def apply_inlining_policy(
    world: SourceWorld, config: SynthConfig | None = None
) -> dict[str, tuple[AttributedCFG, Prov]]:
    """Transitive bottom-up splicing: each call edge is inlined with the
    configured probability when the callee's already-inlined body fits the
    instruction budget. Optionally perturbs opcodes afterwards (never the
    remaining calls, never the provenance tags)."""
    config = world.config if config is None else config
    rng = np.random.default_rng([config.seed, _SEED_POLICY])
    alphabet = opcode_alphabet(config)
    bodies: dict[str, tuple[AttributedCFG, Prov]] = {}
    for project in sorted(world.projects):
        for name in reversed(world.projects[project]):
            info = world.functions[name]
            graph, prov = info.graph, info.provenance
            for callee in info.callees:
                callee_graph, callee_prov = bodies[callee]
                coin = rng.random()
                if (
                    coin < config.inline_probability
                    and callee_graph.instruction_count <= config.inline_budget
                ):
                    graph, prov = inline_transform(
                        graph,
                        callee_graph,
                        info.call_sites[callee],
                        caller_prov=prov,
                        callee_prov=callee_prov,
                    )
            bodies[name] = (graph, prov)

    if config.mutation_rate > 0:
        mrng = np.random.default_rng([config.seed, _SEED_MUTATE])
        for name in sorted(bodies):
            graph, prov = bodies[name]
            new_nodes = []
            for block in graph.nodes:
                insns = []
                for ins in block.instructions:
                    opcode = ins.opcode
                    if opcode != CALL_OPCODE and mrng.random() < config.mutation_rate:
                        opcode = alphabet[int(mrng.integers(len(alphabet)))]
                    insns.append(replace(ins, opcode=opcode))
                new_nodes.append(replace(block, instructions=tuple(insns)))
            bodies[name] = (replace(graph, nodes=tuple(new_nodes)), prov)
    return bodies


# ---------------------------------------------------------------------------
# Corpus assembly

@dataclass
class SynthCorpus:
    config: SynthConfig
    world: SourceWorld
    graphs: dict[tuple[str, str, str], AttributedCFG]
    addr2line: list[tuple[str, int, str, int]]
    binfuncs: list[tuple[str, str, int, int]]
    srcfuncs: list[tuple[str, str, int, int]]
    fcg_edges: list[tuple[str, str]]
    ground_truth: BridgeIndex
    projects: dict[str, dict]


def _ground_pattern(
    bridge: str, mapped: set[str], edges: Iterable[tuple[str, str]]
) -> Pattern:
    # intentionally a second, direct degree computation (round-trip oracle)
    out_deg = sum(1 for u, v in edges if u == bridge and v in mapped)
    in_deg = sum(1 for u, v in edges if v == bridge and u in mapped)
    if out_deg == 0:
        return Pattern.LEAF
    if in_deg == 0:
        return Pattern.ROOT
    return Pattern.INTERNAL


def _layout_binary(
    binary_id: str,
    names: Sequence[str],
    bodies: Mapping[str, tuple[AttributedCFG, Prov]],
    world: SourceWorld,
    corpus: SynthCorpus,
    dataset: str,
) -> dict[str, BinaryFunctionRef]:
    refs: dict[str, BinaryFunctionRef] = {}
    cursor = 0x1000
    for name in sorted(names):
        graph, prov = bodies[name]
        length = 4 * graph.instruction_count
        base = cursor
        cursor = base + length + 16
        refs[name] = BinaryFunctionRef(
            binary_id=binary_id, name=name, addr_start=base, addr_end=base + length
        )
        corpus.binfuncs.append((binary_id, name, base, base + length))
        rebased_nodes = []
        for block in graph.nodes:
            insns = tuple(
                replace(ins, address=ins.address + base)
                for ins in block.instructions
            )
            rebased_nodes.append(replace(block, instructions=tuple(insns)))
            for ins, (src, line) in zip(insns, prov[block.id]):
                corpus.addr2line.append(
                    (binary_id, ins.address, world.functions[src].file, line)
                )
        corpus.graphs[(dataset, binary_id, name)] = replace(
            graph, nodes=tuple(rebased_nodes)
        )
    return refs


def generate_corpus(config: SynthConfig) -> SynthCorpus:
    """World, both binaries per project, tables, and ground-truth index."""
    world = gen_source_world(config)
    inline_bodies = apply_inlining_policy(world, config)
    corpus = SynthCorpus(
        config=config,
        world=world,
        graphs={},
        addr2line=[],
        binfuncs=[],
        srcfuncs=[],
        fcg_edges=sorted(world.fcg_edges),
        ground_truth=BridgeIndex(entries={}),
        projects={},
    )
    for name in sorted(world.functions):
        info = world.functions[name]
        corpus.srcfuncs.append((info.file, name, info.line_start, info.line_end))

    equal_refs: dict[str, BinaryFunctionRef] = {}
    cross: dict[str, list[tuple[BinaryFunctionRef, Pattern]]] = {}
    for project in sorted(world.projects):
        names = world.projects[project]
        noinline_id = f"{project}-noinline"
        inline_id = f"{project}-inline"
        base_bodies = {
            n: (world.functions[n].graph, world.functions[n].provenance)
            for n in names
        }
        refs_no = _layout_binary(
            noinline_id, names, base_bodies, world, corpus, "noinline"
        )
        refs_in = _layout_binary(
            inline_id, names, inline_bodies, world, corpus, "inline"
        )
        equal_refs.update(refs_no)
        for name in sorted(names):
            _, prov = inline_bodies[name]
            mapped = {src for tags in prov.values() for src, _ in tags}
            if len(mapped) <= 1:
                continue
            for bridge in sorted(mapped):
                pattern = _ground_pattern(bridge, mapped, world.fcg_edges)
                cross.setdefault(bridge, []).append((refs_in[name], pattern))

    corpus.ground_truth = BridgeIndex(
        entries={
            name: BridgeEntry(
                equal=(equal_refs[name],),
                cross_inlining=tuple(
                    sorted(cross.get(name, ()), key=lambda it: (it[0], it[1].value))
                ),
            )
            for name in sorted(world.functions)
        }
    )
    corpus.addr2line.sort()
    corpus.binfuncs.sort()
    corpus.srcfuncs.sort()
    corpus.projects = {
        project: {
            "source_functions": sorted(world.projects[project]),
            "binaries": {
                "noinline": f"{project}-noinline",
                "inline": f"{project}-inline",
            },
        }
        for project in sorted(world.projects)
    }

    if config.inline_probability > 0 and config.call_density > 0:
        present = {
            pattern
            for entry in corpus.ground_truth.entries.values()
            for _, pattern in entry.cross_inlining
        }
        missing = [
            p.value
            for p in (Pattern.LEAF, Pattern.ROOT, Pattern.INTERNAL)
            if p not in present
        ]
        if missing:
            raise PatternStarvation(
                f"config permits all patterns but none of: {', '.join(missing)}"
            )
    return corpus


# ---------------------------------------------------------------------------
# On-disk corpus

def write_corpus(corpus: SynthCorpus, directory: Path | str) -> None:
    directory = Path(directory)
    for dataset in ("noinline", "inline"):
        (directory / "graphs" / dataset).mkdir(parents=True, exist_ok=True)
    (directory / "tables").mkdir(parents=True, exist_ok=True)

    by_binary: dict[tuple[str, str], list[AttributedCFG]] = {}
    for (dataset, binary_id, name), graph in sorted(corpus.graphs.items()):
        by_binary.setdefault((dataset, binary_id), []).append(graph)
    for (dataset, binary_id), graphs in by_binary.items():
        write_function_records(
            directory / "graphs" / dataset / f"{binary_id}.jsonl",
            sorted(graphs, key=lambda g: g.function_name),
        )

    tables = directory / "tables"
    with (tables / "addr2line.tsv").open("w", encoding="utf-8") as handle:
        for bid, addr, file, line in corpus.addr2line:
            handle.write(f"{bid}\t0x{addr:x}\t{file}\t{line}\n")
    with (tables / "binfuncs.tsv").open("w", encoding="utf-8") as handle:
        for bid, name, start, end in corpus.binfuncs:
            handle.write(f"{bid}\t{name}\t0x{start:x}\t0x{end:x}\n")
    with (tables / "srcfuncs.tsv").open("w", encoding="utf-8") as handle:
        for file, name, start, end in corpus.srcfuncs:
            handle.write(f"{file}\t{name}\t{start}\t{end}\n")
    with (tables / "fcg.tsv").open("w", encoding="utf-8") as handle:
        for caller, callee in corpus.fcg_edges:
            handle.write(f"{caller}\t{callee}\n")

    (directory / "ground_truth.json").write_text(
        json.dumps(index_to_json(corpus.ground_truth), sort_keys=True, indent=1)
        + "\n",
        encoding="utf-8",
    )
    manifest = {
        "format_version": 1,
        "config": synth_config_to_json(corpus.config),
        "projects": corpus.projects,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


@dataclass
class LoadedCorpus:
    root: Path
    manifest: dict
    graphs: dict[tuple[str, str, str], AttributedCFG]

    @property
    def tables_dir(self) -> Path:
        return self.root / "tables"

    def project_ids(self) -> list[str]:
        return sorted(self.manifest["projects"])

    def source_functions(self, projects: Iterable[str]) -> set[str]:
        return {
            name
            for project in projects
            for name in self.manifest["projects"][project]["source_functions"]
        }


def load_corpus(directory: Path | str) -> LoadedCorpus:
    directory = Path(directory)
    manifest = json.loads(
        (directory / "manifest.json").read_text(encoding="utf-8")
    )
    graphs: dict[tuple[str, str, str], AttributedCFG] = {}
    for dataset in ("noinline", "inline"):
        dataset_dir = directory / "graphs" / dataset
        if not dataset_dir.is_dir():
            continue
        for path in sorted(dataset_dir.glob("*.jsonl")):
            binary_id = path.stem
            for record in iter_function_records(path):
                graph = build_acfg(record)
                graphs[(dataset, binary_id, graph.function_name)] = graph
    return LoadedCorpus(root=directory, manifest=manifest, graphs=graphs)
