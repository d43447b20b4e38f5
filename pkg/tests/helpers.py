"""Shared builders for the test suite.

Everything here constructs small, fully valid graphs by hand so the tests
can state expected values independently of the library's own plumbing.
"""

from __future__ import annotations

import numpy as np

from cidetect.acfg import AttributedCFG, BasicBlock, Instruction, OpcodeVocabulary


def make_block(block_id: int, opcodes, base_addr: int) -> BasicBlock:
    instructions = tuple(
        Instruction(address=base_addr + 4 * i, opcode=op)
        for i, op in enumerate(opcodes)
    )
    return BasicBlock(id=block_id, instructions=instructions)


def make_graph(name, blocks, edges, entry=0) -> AttributedCFG:
    """blocks: list of (block_id, [opcodes]); addresses assigned block by
    block with non-overlapping ranges."""
    nodes = []
    cursor = 0x1000
    for block_id, opcodes in sorted(blocks):
        nodes.append(make_block(block_id, opcodes, cursor))
        cursor += 4 * len(opcodes)
    graph = AttributedCFG(
        function_name=name,
        nodes=tuple(nodes),
        edges=tuple(sorted(set(edges))),
        entry=entry,
    )
    graph.validate()
    return graph


def diamond() -> AttributedCFG:
    """Entry branching to two arms that rejoin; known opcode counts."""
    return make_graph(
        "diamond",
        [
            (0, ["push", "push", "cmp", "je"]),
            (1, ["mov", "add"]),
            (2, ["mov", "sub", "xor"]),
            (3, ["pop", "ret"]),
        ],
        [(0, 1), (0, 2), (1, 3), (2, 3)],
    )


DIAMOND_OPCODE_COUNTS = {
    "push": 2,
    "cmp": 1,
    "je": 1,
    "mov": 2,
    "add": 1,
    "sub": 1,
    "xor": 1,
    "pop": 1,
    "ret": 1,
}


def tiny_vocab(keys) -> OpcodeVocabulary:
    return OpcodeVocabulary(key_sequence=tuple(keys))


def random_acfg(rng: np.random.Generator, name: str, opcodes, max_nodes: int = 6) -> AttributedCFG:
    """Random DAG-shaped function over the given opcode pool."""
    n = int(rng.integers(1, max_nodes + 1))
    blocks = []
    for i in range(n):
        size = int(rng.integers(1, 5))
        ops = [opcodes[int(rng.integers(len(opcodes)))] for _ in range(size)]
        blocks.append((i, ops))
    edges = set()
    for i in range(1, n):
        edges.add((int(rng.integers(i)), i))
    for _ in range(n):
        a = int(rng.integers(n))
        b = int(rng.integers(n))
        if a < b:
            edges.add((a, b))
    return make_graph(name, blocks, sorted(edges))


def call_pair(rng: np.random.Generator, opcodes, tag: str):
    """A (caller, callee, call_site) triple ready for splicing.

    The caller gets one dedicated block whose last instruction is a call to
    the callee, with at least one instruction in front of it.
    """
    from cidetect.synth import CALL_OPCODE

    callee = random_acfg(rng, f"callee_{tag}", opcodes)
    caller_base = random_acfg(rng, f"caller_{tag}", opcodes)
    call_site = int(rng.integers(len(caller_base.nodes)))
    nodes = []
    cursor = 0x1000
    for block in caller_base.nodes:
        ops = list(block.opcodes)
        if block.id == call_site:
            ops.append(CALL_OPCODE)
        instructions = []
        for i, op in enumerate(ops):
            operands = (callee.function_name,) if op == CALL_OPCODE else ()
            instructions.append(
                Instruction(address=cursor + 4 * i, opcode=op, operands=operands)
            )
        cursor += 4 * len(ops)
        nodes.append(BasicBlock(id=block.id, instructions=tuple(instructions)))
    caller = AttributedCFG(
        function_name=f"caller_{tag}",
        nodes=tuple(nodes),
        edges=caller_base.edges,
        entry=caller_base.entry,
    )
    caller.validate()
    return caller, callee, call_site


OPCODE_POOL = ("mov", "add", "sub", "xor", "cmp", "push", "pop", "test", "lea", "shl")
