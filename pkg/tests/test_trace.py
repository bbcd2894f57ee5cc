from __future__ import annotations

import pytest

from core.errors import CanonicalityError, ConfigError, ParseError
from core.mmu import Mmu, MmuConfig
from core.trace import (
    CODE_BASE,
    DATA_BASE,
    MAX_GENERATED_VA,
    AccessKind,
    AccessRecord,
    Conflict,
    DataAccess,
    PointerChase,
    Sequential,
    Strided,
    UniformRandom,
    generate,
    make_record,
    parse_trace_line,
    read_trace,
    render_record,
    trace_spec_from_dict,
    trace_spec_to_dict,
    write_trace,
)
from tests.conftest import geometry


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def test_parse_fetch_only_line():
    assert parse_trace_line("0x1000") == AccessRecord(0x1000)


def test_parse_load_with_separators():
    record = parse_trace_line("0x1000 L 0x8000_0000")
    assert record == AccessRecord(0x1000, DataAccess(AccessKind.LOAD, 0x8000_0000))


def test_parse_store_without_prefix():
    record = parse_trace_line("  1000 s deadbeef  ")
    assert record.data == DataAccess(AccessKind.STORE, 0xDEADBEEF)


@pytest.mark.parametrize("line", ["", "   ", "# comment", "#0x1000 L 0x2000"])
def test_comments_and_blank_lines_are_skipped(line):
    assert parse_trace_line(line) is None


@pytest.mark.parametrize("line", ["xyz", "0x1000 Q 0x2000", "0x1000 L", "0x1 L 0x2 extra", "0x1000 L zz"])
def test_malformed_lines_raise_with_line_number(line):
    with pytest.raises(ParseError) as info:
        parse_trace_line(line, line_no=17)
    assert info.value.line_no == 17
    assert "line 17" in str(info.value)


def test_non_canonical_address_is_rejected():
    with pytest.raises(CanonicalityError):
        parse_trace_line("0x1000 L 0x40_0000_0000")


def test_render_parses_back():
    records = [
        make_record(0x1000),
        make_record(0x1004, AccessKind.LOAD, 0x8000_0010),
        make_record(0xFFFF_FFFF_FFFF_F000, AccessKind.STORE, 0x20),
    ]
    assert [parse_trace_line(render_record(r)) for r in records] == records


def test_make_record_rejects_fetch_as_data_kind():
    with pytest.raises(ValueError):
        make_record(0x1000, AccessKind.FETCH, 0x2000)


@pytest.mark.parametrize("name", ["trace.txt", "trace.txt.gz"])
def test_write_then_read_file(tmp_path, name):
    path = str(tmp_path / name)
    records = list(generate(UniformRandom(working_set_pages=16, length=50, seed=9)))
    assert write_trace(path, records) == 50
    assert list(read_trace(path)) == records


def test_read_trace_reports_the_failing_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# header\n0x1000\n0x1004 L 0x2000\nnot-hex\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        list(read_trace(str(path)))
    assert info.value.line_no == 4


def test_read_trace_names_the_line_of_a_non_canonical_address(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0x1000\n0x1004 L 0x2000\n0x1008 S 0x40_0000_0000\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        list(read_trace(str(path)))
    assert info.value.line_no == 3
    assert "line 3" in str(info.value)
    assert isinstance(info.value.__cause__, CanonicalityError)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def test_sequential_touches_each_data_page_once():
    records = list(generate(Sequential(3)))
    assert [r.data.va >> 12 for r in records] == [0x40000, 0x40001, 0x40002]
    mmu = Mmu(MmuConfig(itlb=geometry(1, 4), dtlb=geometry(1, 4)))
    for record in records:
        mmu.step(record)
    assert mmu.report().dtlb.misses == 3


def test_sequential_fetch_only_walks_the_pc():
    records = list(generate(Sequential(4, fetch_only=True)))
    assert all(r.data is None for r in records)
    assert [r.pc for r in records] == [CODE_BASE + i * 4096 for i in range(4)]


def test_strided_spacing():
    records = list(generate(Strided(stride_pages=3, count=4)))
    vpns = [r.data.va >> 12 for r in records]
    assert [b - a for a, b in zip(vpns, vpns[1:])] == [3, 3, 3]


def test_conflict_vpns_share_one_index():
    spec = Conflict(l2_sets=512, distinct_tags=5, repetitions=3)
    records = list(generate(spec))
    assert len(records) == 15
    assert {(r.data.va >> 12) % 512 for r in records} == {1}
    assert len({r.pc >> 12 for r in records}) == 1


def test_conflict_set_index_must_fit():
    with pytest.raises(ConfigError):
        Conflict(l2_sets=4, distinct_tags=2, repetitions=1, set_index=4)


def _l2_data_misses(records, l2_ways):
    config = MmuConfig(itlb=geometry(1, 4), dtlb=geometry(16, 1), l2=geometry(512, l2_ways, "random", 3))
    mmu = Mmu(config)
    for record in records:
        mmu.step(record)
    return mmu.report().l2_misses_by_requester["data"]


def test_conflict_thrashes_a_direct_mapped_l2():
    records = list(generate(Conflict(l2_sets=512, distinct_tags=5, repetitions=40)))
    assert _l2_data_misses(records, 1) == 200


def test_conflict_fits_in_an_eight_way_l2():
    records = list(generate(Conflict(l2_sets=512, distinct_tags=5, repetitions=40)))
    assert _l2_data_misses(records, 8) == 5


def test_pointer_chase_visits_every_node_per_lap():
    spec = PointerChase(nodes=64, node_bytes=256, length=128, seed=4)
    records = list(generate(spec))
    first_lap = [r.data.va for r in records[:64]]
    assert len(set(first_lap)) == 64
    assert [r.data.va for r in records[64:]] == first_lap


@pytest.mark.parametrize(
    "spec",
    [
        UniformRandom(working_set_pages=128, length=200, seed=5),
        PointerChase(nodes=32, node_bytes=64, length=100, seed=5),
        Conflict(l2_sets=128, distinct_tags=4, repetitions=5),
    ],
)
def test_generation_is_deterministic(spec):
    assert [render_record(r) for r in generate(spec)] == [render_record(r) for r in generate(spec)]


def test_uniform_random_depends_on_seed():
    a = list(generate(UniformRandom(working_set_pages=128, length=50, seed=1)))
    b = list(generate(UniformRandom(working_set_pages=128, length=50, seed=2)))
    assert a != b
    assert any(r.data.kind is AccessKind.STORE for r in a)
    assert all(r.data.va % 8 == 0 for r in a)


@pytest.mark.parametrize("bad", [dict(pages=0), dict(pages=-3)])
def test_generator_counts_must_be_positive(bad):
    with pytest.raises(ConfigError):
        Sequential(**bad)


# ---------------------------------------------------------------------------
# Spec dictionaries
# ---------------------------------------------------------------------------


def test_spec_from_dict_applies_default_seed():
    spec = trace_spec_from_dict({"generator": "uniform_random", "working_set_pages": 8, "length": "0x10"}, 42)
    assert spec == UniformRandom(working_set_pages=8, length=16, seed=42)
    assert trace_spec_from_dict(trace_spec_to_dict(spec)) == spec


@pytest.mark.parametrize(
    "data, key",
    [
        ({"generator": "zipf"}, "trace.generator"),
        ({"generator": "sequential", "pages": 4, "stride": 2}, "trace.stride"),
        ({"generator": "conflict", "l2_sets": 4}, "trace"),
        ({"generator": "sequential", "pages": 4, "fetch_only": "yes"}, "trace.fetch_only"),
    ],
)
def test_spec_from_dict_errors_name_the_key(data, key):
    with pytest.raises(ConfigError) as info:
        trace_spec_from_dict(data)
    assert info.value.key == key


# ---------------------------------------------------------------------------
# Address range of generated traces
# ---------------------------------------------------------------------------

# pages from DATA_BASE up to the top of the lower canonical half
TOP_DATA_PAGES = (MAX_GENERATED_VA + 1 - DATA_BASE) // 4096


@pytest.mark.parametrize(
    "build, key",
    [
        (lambda: UniformRandom(working_set_pages=2**27, length=2000), "trace.working_set_pages"),
        (lambda: UniformRandom(working_set_pages=TOP_DATA_PAGES + 1, length=1), "trace.working_set_pages"),
        (lambda: Strided(stride_pages=2**20, count=300), "trace.count"),
        (lambda: Sequential(pages=TOP_DATA_PAGES + 1), "trace.pages"),
        (lambda: Conflict(l2_sets=2**26, distinct_tags=5, repetitions=1), "trace.distinct_tags"),
        (lambda: PointerChase(nodes=2**20, node_bytes=2**20, length=1), "trace.nodes"),
    ],
)
def test_specs_leaving_the_canonical_range_are_rejected_up_front(build, key):
    with pytest.raises(ConfigError) as info:
        build()
    assert info.value.key == key


def test_generation_reaches_the_top_page():
    spec = Strided(stride_pages=TOP_DATA_PAGES - 1, count=2)
    records = list(generate(spec))
    assert records[-1].data.va == MAX_GENERATED_VA + 1 - 4096
    assert UniformRandom(working_set_pages=TOP_DATA_PAGES, length=1).working_set_pages == TOP_DATA_PAGES


def test_out_of_range_generator_config_fails_before_simulation():
    with pytest.raises(ConfigError) as info:
        trace_spec_from_dict({"generator": "strided", "stride_pages": 2**20, "count": 300})
    assert info.value.key == "trace.count"
