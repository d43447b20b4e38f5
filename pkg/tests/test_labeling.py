import numpy as np
import pytest

from cidetect.errors import InconsistentTables
from cidetect.labeling import (
    Binary2Source,
    BinaryFunctionRef,
    Pattern,
    build_bridge_index,
    build_fcg,
    classify_pattern,
    construct_mapping,
    has_inlining,
    index_from_json,
    index_to_json,
    load_index,
    pattern_distribution,
    read_addr2line,
    read_binfuncs,
    read_fcg,
    read_srcfuncs,
    save_index,
)


def _ref(bid, name, start=0x1000, end=0x1100):
    return BinaryFunctionRef(binary_id=bid, name=name, addr_start=start, addr_end=end)


def test_has_inlining():
    single = Binary2Source(function=_ref("b", "f"), source_functions=frozenset({"f"}))
    multi = Binary2Source(function=_ref("b", "f"), source_functions=frozenset({"f", "g"}))
    assert not has_inlining(single)
    assert has_inlining(multi)


def test_binary2source_rejects_empty_set():
    with pytest.raises(ValueError):
        Binary2Source(function=_ref("b", "f"), source_functions=frozenset())


def test_build_fcg_drops_self_loops():
    fcg = build_fcg([("a", "b"), ("b", "b"), ("a", "b")])
    assert fcg.edges == frozenset({("a", "b")})
    assert fcg.self_loops_dropped == 1
    assert set(fcg.nodes) == {"a", "b"}


def test_classify_pattern_chain():
    """a calls b calls c; the whole chain inlined into one target makes a the
    root, b internal and c the leaf."""
    fcg = build_fcg([("a", "b"), ("b", "c")])
    mapped = frozenset({"a", "b", "c"})
    assert classify_pattern("a", mapped, fcg) is Pattern.ROOT
    assert classify_pattern("b", mapped, fcg) is Pattern.INTERNAL
    assert classify_pattern("c", mapped, fcg) is Pattern.LEAF


def test_classify_pattern_singleton_is_equal():
    fcg = build_fcg([("a", "b")])
    assert classify_pattern("a", frozenset({"a"}), fcg) is Pattern.EQUAL


def test_classify_pattern_ignores_edges_outside_set():
    # b calls d, but d is not part of the mapped set, so b stays a leaf
    fcg = build_fcg([("a", "b"), ("b", "d")])
    assert classify_pattern("b", frozenset({"a", "b"}), fcg) is Pattern.LEAF


def test_classify_pattern_isolated_bridge_is_leaf():
    fcg = build_fcg([("a", "b")])
    assert classify_pattern("x", frozenset({"a", "b", "x"}), fcg) is Pattern.LEAF


def test_classify_pattern_unknown_bridge():
    fcg = build_fcg([])
    with pytest.raises(ValueError):
        classify_pattern("z", frozenset({"a"}), fcg)


def test_classify_pattern_against_degree_oracle():
    """Seeded sweep: classification must match a direct induced-degree count."""
    rng = np.random.default_rng(17)
    names = [f"n{i}" for i in range(14)]
    for _ in range(300):
        edges = set()
        for _ in range(int(rng.integers(0, 25))):
            a, b = rng.choice(len(names), size=2, replace=False)
            edges.add((names[int(a)], names[int(b)]))
        fcg = build_fcg(sorted(edges))
        k = int(rng.integers(1, 9))
        mapped = frozenset(
            names[int(i)] for i in rng.choice(len(names), size=k, replace=False)
        )
        bridge = sorted(mapped)[int(rng.integers(len(mapped)))]
        outs = sum(
            1 for a, b in edges if a == bridge and b in mapped and b != bridge
        )
        ins = sum(
            1 for a, b in edges if b == bridge and a in mapped and a != bridge
        )
        if len(mapped) == 1:
            expected = Pattern.EQUAL
        elif outs == 0:
            expected = Pattern.LEAF
        elif ins == 0:
            expected = Pattern.ROOT
        else:
            expected = Pattern.INTERNAL
        assert classify_pattern(bridge, mapped, fcg) is expected


def test_tsv_readers(tmp_path):
    a2l = tmp_path / "addr2line.tsv"
    a2l.write_text(
        "# binary\taddr\tfile\tline\n"
        "bin1\t0x1000\tmain.c\t10\n"
        "bin1\t0x1004\tmain.c\t11\n",
        encoding="utf-8",
    )
    assert read_addr2line(a2l) == [
        ("bin1", 0x1000, "main.c", 10),
        ("bin1", 0x1004, "main.c", 11),
    ]

    bf = tmp_path / "binfuncs.tsv"
    bf.write_text("bin1\tmain\t0x1000\t0x1020\n", encoding="utf-8")
    assert read_binfuncs(bf) == [("bin1", "main", 0x1000, 0x1020)]

    sf = tmp_path / "srcfuncs.tsv"
    sf.write_text("main.c\tmain\t8\t20\n", encoding="utf-8")
    assert read_srcfuncs(sf) == [("main.c", "main", 8, 20)]

    fcg = tmp_path / "fcg.tsv"
    fcg.write_text("main\thelper\n", encoding="utf-8")
    assert read_fcg(fcg) == [("main", "helper")]


def test_tsv_reader_rejects_bad_column_count(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("bin1\t0x1000\tmain.c\n", encoding="utf-8")
    with pytest.raises(InconsistentTables):
        read_addr2line(bad)


def _mapping_oracle(addr2line, binfuncs, srcfuncs):
    """Nested-loop reference for construct_mapping: binfuncs are half-open
    address ranges, srcfuncs closed line ranges."""
    out = {}
    for bid, addr, file, line in addr2line:
        owner = None
        for fbid, name, start, end in binfuncs:
            if fbid == bid and start <= addr < end:
                owner = name
                break
        if owner is None:
            continue
        src = None
        for sfile, sname, lstart, lend in srcfuncs:
            if sfile == file and lstart <= line <= lend:
                src = sname
                break
        if src is None:
            continue
        out.setdefault((bid, owner), set()).add(src)
    return out


def test_construct_mapping_against_nested_loop_oracle():
    rng = np.random.default_rng(23)
    for _ in range(30):
        n_bin = int(rng.integers(2, 6))
        binfuncs = []
        cursor = 0x1000
        for i in range(n_bin):
            length = int(rng.integers(8, 40)) * 4
            binfuncs.append(("bin", f"bf{i}", cursor, cursor + length))
            cursor += length + int(rng.integers(0, 3)) * 4
        srcfuncs = []
        line = 1
        for i in range(int(rng.integers(2, 6))):
            span = int(rng.integers(3, 12))
            srcfuncs.append(("m.c", f"sf{i}", line, line + span))
            line += span + int(rng.integers(1, 4))
        addr2line = []
        for _ in range(60):
            addr = int(rng.integers(0x1000, cursor + 0x40))
            lno = int(rng.integers(1, line + 6))
            addr2line.append(("bin", addr, "m.c", lno))
        result = construct_mapping(addr2line, binfuncs, srcfuncs)
        oracle = _mapping_oracle(addr2line, binfuncs, srcfuncs)
        got = {
            (m.function.binary_id, m.function.name): set(m.source_functions)
            for m in result.mappings
        }
        assert got == oracle


def test_construct_mapping_reports_inconsistencies():
    binfuncs = [("bin", "f", 0x1000, 0x1010)]
    srcfuncs = [("m.c", "f", 1, 5)]
    addr2line = [
        ("bin", 0x1000, "m.c", 2),
        ("bin", 0x2000, "m.c", 2),  # address outside every function
        ("bin", 0x1004, "m.c", 99),  # line outside every function
    ]
    result = construct_mapping(addr2line, binfuncs, srcfuncs)
    assert len(result.inconsistencies) == 2
    assert len(result.mappings) == 1
    assert result.mappings[0].source_functions == frozenset({"f"})


def test_construct_mapping_omits_unresolved_functions():
    binfuncs = [("bin", "f", 0x1000, 0x1010), ("bin", "g", 0x1010, 0x1020)]
    srcfuncs = [("m.c", "f", 1, 5)]
    addr2line = [("bin", 0x1000, "m.c", 2)]  # nothing resolves for g
    result = construct_mapping(addr2line, binfuncs, srcfuncs)
    assert [m.function.name for m in result.mappings] == ["f"]


def _fixture_index():
    """Two source functions m and h where h got inlined into m's binary copy.

    No-inlining side: one binary function per source function, each mapping
    to exactly its own source. Inlining side: h survives alone, m's compiled
    body covers both m and h. Expected: both m and h are indexed (each has an
    equal-form binary); the combined target hangs off h as leaf (h is called
    by m) and off m as root.
    """
    fcg = build_fcg([("m", "h")])
    no_inline = [
        Binary2Source(_ref("o0", "m", 0x1000, 0x1040), frozenset({"m"})),
        Binary2Source(_ref("o0", "h", 0x1040, 0x1080), frozenset({"h"})),
    ]
    inline = [
        Binary2Source(_ref("o2", "m", 0x2000, 0x2080), frozenset({"m", "h"})),
        Binary2Source(_ref("o2", "h", 0x2080, 0x20c0), frozenset({"h"})),
    ]
    return build_bridge_index(no_inline, inline, fcg)


def test_bridge_index_fixture_distribution():
    index = _fixture_index()
    assert set(index.entries) == {"m", "h"}
    dist = pattern_distribution(index)
    assert dist[Pattern.EQUAL] == 2
    assert dist[Pattern.LEAF] == 1
    assert dist[Pattern.ROOT] == 1
    assert dist[Pattern.INTERNAL] == 0


def test_bridge_index_cross_targets_attach_to_every_bridge():
    index = _fixture_index()
    leaf_targets = [
        (ref.binary_id, ref.name, p)
        for ref, p in index.entries["h"].cross_inlining
    ]
    root_targets = [
        (ref.binary_id, ref.name, p)
        for ref, p in index.entries["m"].cross_inlining
    ]
    assert leaf_targets == [("o2", "m", Pattern.LEAF)]
    assert root_targets == [("o2", "m", Pattern.ROOT)]


def test_bridge_index_requires_equal_form():
    """A source function with no standalone binary never gets an entry, even
    when it appears inside inlined targets."""
    fcg = build_fcg([("m", "h")])
    no_inline = [
        Binary2Source(_ref("o0", "m"), frozenset({"m"})),
    ]
    inline = [
        Binary2Source(_ref("o2", "m"), frozenset({"m", "h"})),
    ]
    index = build_bridge_index(no_inline, inline, fcg)
    assert set(index.entries) == {"m"}
    assert pattern_distribution(index)[Pattern.LEAF] == 0


def test_bridge_index_filters_inlined_queries(caplog):
    fcg = build_fcg([("m", "h")])
    no_inline = [
        Binary2Source(_ref("o0", "m"), frozenset({"m", "h"})),  # inlining leaked in
        Binary2Source(_ref("o0", "h", 0x2000, 0x2040), frozenset({"h"})),
    ]
    with caplog.at_level("WARNING", logger="cidetect.labeling"):
        index = build_bridge_index(no_inline, [], fcg)
    assert index.excluded_no_inline == 1
    assert set(index.entries) == {"h"}


def test_bridge_index_counts_isolated_bridges():
    # x shares a target with m and h but has no call edges to either
    fcg = build_fcg([("m", "h")])
    no_inline = [
        Binary2Source(_ref("o0", "x"), frozenset({"x"})),
    ]
    inline = [
        Binary2Source(_ref("o2", "m"), frozenset({"m", "h", "x"})),
    ]
    index = build_bridge_index(no_inline, inline, fcg)
    assert index.isolated_bridges == 1
    assert index.entries["x"].cross_inlining[0][1] is Pattern.LEAF


def test_pattern_distribution_counts_by_summation():
    index = _fixture_index()
    dist = pattern_distribution(index)
    equal_oracle = sum(len(e.equal) for e in index.entries.values())
    cross_oracle = sum(len(e.cross_inlining) for e in index.entries.values())
    assert dist[Pattern.EQUAL] == equal_oracle
    assert sum(dist[p] for p in (Pattern.LEAF, Pattern.ROOT, Pattern.INTERNAL)) == cross_oracle


def test_index_json_round_trip(tmp_path):
    index = _fixture_index()
    rebuilt = index_from_json(index_to_json(index))
    assert rebuilt == index
    path = tmp_path / "index.json"
    save_index(index, path)
    assert load_index(path) == index
