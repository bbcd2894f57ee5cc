from __future__ import annotations

import pytest

from core.errors import AlignmentError, MappingConflict, PageFault
from core.pagetable import DEFAULT_DATA_FRAME_BASE, PageTable
from core.sv39 import PPN_MASK, PageSize, Pte, Vpn


def test_first_base_page_gets_first_data_frame(page_table):
    assert page_table.map_page(Vpn(0)) == DEFAULT_DATA_FRAME_BASE
    assert page_table.map_page(Vpn(1)) == DEFAULT_DATA_FRAME_BASE + 1


def test_table_frames_come_from_the_top_of_the_ppn_space(page_table):
    page_table.map_page(Vpn(0))
    assert page_table.root_ppn == PPN_MASK
    assert sorted(page_table.tables) == [PPN_MASK - 2, PPN_MASK - 1, PPN_MASK]


def test_map_page_is_idempotent(page_table):
    first = page_table.map_page(Vpn(5))
    assert page_table.map_page(Vpn(5)) == first
    assert page_table.mapped[PageSize.BASE_4K] == 1


def test_base_page_walk_costs_three_loads(page_table):
    ppn = page_table.map_page(Vpn(0x12345))
    result = page_table.walk(0x12345_678)
    assert (result.level, result.memory_accesses, result.size) == (0, 3, PageSize.BASE_4K)
    assert result.pte.ppn == ppn


def test_megapage_leaf_sits_at_level_one_and_ignores_vpn0(page_table):
    ppn = page_table.map_page(Vpn(0x400 | 0x5), PageSize.MEGA_2M)
    assert ppn % 512 == 0
    result = page_table.walk(0x40_0000 + 0x7_6543)
    assert (result.level, result.memory_accesses, result.size) == (1, 2, PageSize.MEGA_2M)
    assert page_table.translate_oracle(0x40_0000 + 0x7_6543) == (ppn << 12) + 0x7_6543


def test_gigapage_walk_costs_one_load(page_table):
    ppn = page_table.map_page(Vpn(0x40000), PageSize.GIGA_1G)
    assert ppn % (1 << 18) == 0
    result = page_table.walk(0x4000_1234)
    assert (result.level, result.memory_accesses) == (2, 1)


def test_unmapped_address_faults(page_table):
    with pytest.raises(PageFault) as info:
        page_table.walk(0x1000)
    assert info.value.level == 2
    page_table.map_page(Vpn(0))
    with pytest.raises(PageFault) as info:
        page_table.walk(0x1000)
    assert info.value.level == 0


def test_superpage_over_existing_base_pages_conflicts(page_table):
    page_table.map_page(Vpn(0x200))
    with pytest.raises(MappingConflict):
        page_table.map_page(Vpn(0x200), PageSize.MEGA_2M)


def test_base_page_inside_superpage_conflicts(page_table):
    page_table.map_page(Vpn(0x200), PageSize.MEGA_2M)
    with pytest.raises(MappingConflict):
        page_table.map_page(Vpn(0x201))


def test_oracle_is_page_granular(page_table):
    ppn = page_table.map_page(Vpn(7))
    a = page_table.translate_oracle(0x7000)
    b = page_table.translate_oracle(0x7FF8)
    assert a >> 12 == b >> 12 == ppn
    assert b - a == 0xFF8


def test_oracle_fails_outside_the_mapped_region(page_table):
    page_table.map_page(Vpn(0x200), PageSize.MEGA_2M)
    page_table.translate_oracle(0x20_0000)
    page_table.translate_oracle(0x3F_FFFF)
    with pytest.raises(PageFault):
        page_table.translate_oracle(0x40_0000)
    with pytest.raises(PageFault):
        page_table.translate_oracle(0x1F_FFFF)


def test_walk_sets_accessed_and_dirty_bits(page_table):
    page_table.map_page(Vpn(3))
    loaded = page_table.walk(0x3000)
    assert loaded.pte.a and not loaded.pte.d
    stored = page_table.walk(0x3000, store=True)
    assert stored.pte.a and stored.pte.d


def test_repeated_walks_are_identical(page_table):
    page_table.map_page(Vpn(3))
    page_table.walk(0x3000)
    assert page_table.walk(0x3000) == page_table.walk(0x3000)


def test_misaligned_superpage_leaf_is_reported(page_table):
    page_table.install_leaf(Vpn(0x200), 1, Pte.leaf(0x1001))
    with pytest.raises(AlignmentError):
        page_table.walk(0x20_0000)


def test_map_region_maps_consecutive_superpages(page_table):
    ppns = page_table.map_region(0x4000_0000, PageSize.MEGA_2M, 3)
    assert [p - ppns[0] for p in ppns] == [0, 512, 1024]
    assert page_table.mapped[PageSize.MEGA_2M] == 3
    assert page_table.walk(0x4000_0000 + 2 * (1 << 21) + 8).level == 1


def test_custom_data_frame_base():
    table = PageTable(data_frame_base=0x8000)
    assert table.map_page(Vpn(1)) == 0x8000
