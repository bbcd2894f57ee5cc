from __future__ import annotations

import pytest

from core.errors import AlignmentError, CanonicalityError
from core.sv39 import (
    PTE_A,
    PTE_R,
    PTE_V,
    PTE_W,
    PTE_X,
    PTE_U,
    PageSize,
    Pte,
    Vpn,
    check_canonical,
    compose_pa,
    is_canonical,
    page_offset,
    rebuild_va,
    split_vpn,
)


def fields(vpn: Vpn):
    return vpn.vpn2, vpn.vpn1, vpn.vpn0


# ---------------------------------------------------------------------------
# split_vpn
# ---------------------------------------------------------------------------


def test_split_vpn_zero():
    assert fields(split_vpn(0x0)) == (0, 0, 0)


def test_split_vpn_all_bits_set_on_canonical_high_address():
    assert fields(split_vpn(0xFFFF_FFFF_FFFF_F000)) == (0x1FF, 0x1FF, 0x1FF)


def test_split_vpn_bit_30_is_vpn2():
    assert fields(split_vpn(0x4000_0000)) == (1, 0, 0)


def test_split_vpn_rejects_address_with_bits_above_38_unextended():
    # bits 46..39 set while bit 38 is also set but 63..47 are clear
    with pytest.raises(CanonicalityError):
        split_vpn(0x7FFF_FFFF_F000)


def test_vpn_value_matches_fields():
    vpn = split_vpn(0x3_5555_6000)
    assert vpn.value == (vpn.vpn2 << 18) | (vpn.vpn1 << 9) | vpn.vpn0
    assert Vpn.from_fields(*fields(vpn)) == vpn


@pytest.mark.parametrize(
    "va, ok",
    [
        (0x0, True),
        (0x3F_FFFF_FFFF, True),
        (0x40_0000_0000, False),
        (0xFFFF_FFC0_0000_0000, True),
        (0xFFFF_FF80_0000_0000, False),
        (-1, False),
    ],
)
def test_canonicality(va, ok):
    if va >= 0:
        assert is_canonical(va) is ok
    if ok:
        assert check_canonical(va) == va
    else:
        with pytest.raises(CanonicalityError):
            check_canonical(va)


# ---------------------------------------------------------------------------
# page_offset / rebuild
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "va, size, expected",
    [
        (0x1234, PageSize.BASE_4K, 0x234),
        (0x0, PageSize.GIGA_1G, 0),
        (0x0030_0FFF, PageSize.MEGA_2M, 0x10_0FFF),
    ],
)
def test_page_offset(va, size, expected):
    assert page_offset(va, size) == expected


@pytest.mark.parametrize(
    "va", [0x0, 0x1234, 0x4000_0ABC, 0x3F_FFFF_FFFF, 0xFFFF_FFC0_0000_0010, 0xFFFF_FFFF_FFFF_FFF8]
)
def test_rebuild_inverts_split_and_offset(va):
    assert rebuild_va(split_vpn(va), page_offset(va, PageSize.BASE_4K)) == va


def test_page_size_geometry():
    assert [s.byte_size for s in PageSize] == [4096, 2097152, 1073741824]
    assert PageSize.MEGA_2M.base_pages == 512
    assert PageSize.from_label("2MB") is PageSize.MEGA_2M
    assert PageSize.from_label("1g") is PageSize.GIGA_1G
    assert PageSize.from_level(0) is PageSize.BASE_4K
    with pytest.raises(ValueError):
        PageSize.from_label("8K")


# ---------------------------------------------------------------------------
# PTE
# ---------------------------------------------------------------------------


def test_pte_encoding_layout():
    pte = Pte.leaf(0x123)
    assert pte.encode() == (0x123 << 10) | PTE_V | PTE_R | PTE_W | PTE_X | PTE_U
    assert Pte.decode(pte.encode()) == pte
    assert Pte.decode((0x55 << 10) | PTE_V | PTE_A).a


def test_pte_leaf_and_pointer_are_exclusive():
    assert Pte.leaf(1).is_leaf and not Pte.leaf(1).is_pointer
    assert Pte.pointer(1).is_pointer and not Pte.pointer(1).is_leaf
    invalid = Pte(ppn=1, r=True)
    assert not invalid.is_leaf and not invalid.is_pointer


# ---------------------------------------------------------------------------
# compose_pa
# ---------------------------------------------------------------------------


def test_compose_pa_base_page():
    assert compose_pa(Pte.leaf(0x80), 0x10, 0) == 0x80010


def test_compose_pa_gigapage_takes_low_ppn_bits_from_va():
    assert compose_pa(Pte.leaf(0x40000), 0x10, 2) == 0x40000 * 4096 + 0x10
    assert compose_pa(Pte.leaf(0x40000), 0x1234_5678, 2) == (0x40000 << 12) + 0x1234_5678


def test_compose_pa_megapage():
    va = 0x0030_0FFF
    assert compose_pa(Pte.leaf(0x200), va, 1) == (0x200 << 12) | (va & 0x1F_FFFF)


def test_compose_pa_rejects_misaligned_superpage():
    with pytest.raises(AlignmentError) as info:
        compose_pa(Pte.leaf(0x201), 0x0, 1)
    assert info.value.level == 1
