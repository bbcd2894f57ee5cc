from __future__ import annotations

import pytest

from core.errors import ConfigError
from core.presets import PRESET_NAMES, PresetRegistry, get_presets, parse_geometry
from core.tlb_core import ReplacementPolicy

# (dtlb sets, ways), (itlb sets, ways), (l2 sets, ways) or None
EXPECTED = {
    "I": ((1, 32), (1, 32), None),
    "II": ((1, 32), (1, 32), (32, 4)),
    "III": ((1, 32), (1, 32), (128, 4)),
    "IV": ((8, 8), (16, 8), (128, 8)),
    "V": ((16, 8), (8, 8), (128, 8)),
}


def shape(geometry):
    return None if geometry is None else (geometry.sets, geometry.ways)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_preset_geometry(name):
    mmu = get_presets().get(name).mmu
    assert (shape(mmu.dtlb), shape(mmu.itlb), shape(mmu.l2)) == EXPECTED[name]


def test_l1_plru_and_l2_random():
    mmu = get_presets().get("IV").mmu
    assert mmu.itlb.policy is mmu.dtlb.policy is ReplacementPolicy.PSEUDO_LRU
    assert mmu.l2.policy is ReplacementPolicy.RANDOM


def test_resolve_seeds_structures_apart():
    mmu = get_presets().get("II").resolve(seed=10)
    assert (mmu.itlb.seed, mmu.dtlb.seed, mmu.l2.seed) == (10, 11, 12)


def test_table_lists_reach_values():
    table = get_presets().table().set_index("preset")
    assert list(table.index) == list(PRESET_NAMES)
    assert table.loc["I", "dtlb"] == "fully-assoc., 32 entries"
    assert table.loc["I", "l2"] == "-"
    assert table.loc["II", "l2"] == "4-way, 128 entries"
    assert [table.loc[n, "l2_reach"] for n in ("II", "III", "IV")] == ["512KB", "2MB", "4MB"]
    assert (table.loc["IV", "dtlb_reach"], table.loc["IV", "itlb_reach"]) == ("256KB", "512KB")
    assert (table.loc["V", "dtlb_reach"], table.loc["V", "itlb_reach"]) == ("512KB", "256KB")
    assert table.loc["I", "itlb_reach"] == "128KB"
    assert table.loc["IV", "description"] == "Intel Skylake-like"


def test_unknown_preset():
    with pytest.raises(ConfigError) as info:
        get_presets().get("VI")
    assert info.value.key == "preset"


def test_registry_is_shared():
    assert get_presets() is get_presets()


def test_custom_presets_file(tmp_path):
    path = tmp_path / "presets.yaml"
    path.write_text(
        "- name: tiny\n  dtlb: {sets: 2, ways: 2}\n  itlb: {entries: 4, ways: 4}\n  l2: null\n",
        encoding="utf-8",
    )
    registry = get_presets(str(path))
    assert registry is not get_presets()
    assert registry.names() == ["tiny"]
    assert shape(registry.get("tiny").mmu.itlb) == (1, 4)


def test_bad_presets_file_fails_on_load(tmp_path):
    path = tmp_path / "presets.yaml"
    path.write_text("- name: broken\n  dtlb: {sets: 3, ways: 2}\n  itlb: {sets: 1, ways: 2}\n", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        PresetRegistry(str(path))
    assert info.value.key == "preset broken.dtlb.sets"


@pytest.mark.parametrize(
    "data, key",
    [
        ({"sets": 4}, "l2.ways"),
        ({"sets": 4, "entries": 16, "ways": 4}, "l2"),
        ({"entries": 10, "ways": 4}, "l2.entries"),
        ({"sets": 4, "ways": 4, "policy": "lru"}, "l2.policy"),
        ({"sets": 4, "ways": 4, "color": "red"}, "l2.color"),
        ({"sets": 4, "ways": 12}, "l2.ways"),
        ("big", "l2"),
    ],
)
def test_parse_geometry_errors(data, key):
    with pytest.raises(ConfigError) as info:
        parse_geometry(data, "l2")
    assert info.value.key == key


def test_parse_geometry_entries_and_hex():
    g = parse_geometry({"entries": "0x400", "ways": 8, "policy": "RANDOM", "seed": 9}, "l2")
    assert (g.sets, g.ways, g.policy, g.seed) == (128, 8, ReplacementPolicy.RANDOM, 9)
