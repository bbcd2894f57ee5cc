"""
Sv39 Address Arithmetic
TLB Hierarchy Simulator
--------------------------------------------------------

RV64 Sv39 geometry: 39-bit canonical virtual addresses, a 3-level radix
page table with 9 VPN bits per level, 4KB base pages and 2MB/1GB
superpages, 56-bit physical addresses and 44-bit PPNs.

Addresses are plain Python ints. VirtAddr and PhysAddr are NewType aliases
that document intent; Vpn and Pte are small frozen value types.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NewType

from core.errors import AlignmentError, CanonicalityError

VirtAddr = NewType("VirtAddr", int)
PhysAddr = NewType("PhysAddr", int)

PAGE_SHIFT = 12
LEVELS = 3
VPN_LEVEL_BITS = 9
VPN_BITS = VPN_LEVEL_BITS * LEVELS
VA_BITS = 39
PPN_BITS = 44
PA_BITS = 56
PTE_PPN_SHIFT = 10
PTES_PER_TABLE = 1 << VPN_LEVEL_BITS

PAGE_OFFSET_MASK = (1 << PAGE_SHIFT) - 1
VPN_LEVEL_MASK = (1 << VPN_LEVEL_BITS) - 1
VPN_MASK = (1 << VPN_BITS) - 1
PPN_MASK = (1 << PPN_BITS) - 1
PA_MASK = (1 << PA_BITS) - 1
U64_MASK = (1 << 64) - 1


class PageSize(Enum):
    """Sv39 page sizes. The value is the walk level at which the leaf sits."""

    BASE_4K = 0
    MEGA_2M = 1
    GIGA_1G = 2

    @property
    def level(self) -> int:
        return self.value

    @property
    def offset_bits(self) -> int:
        return PAGE_SHIFT + VPN_LEVEL_BITS * self.value

    @property
    def byte_size(self) -> int:
        return 1 << self.offset_bits

    @property
    def base_pages(self) -> int:
        """Number of 4KB pages covered by one page of this size."""
        return 1 << (VPN_LEVEL_BITS * self.value)

    @property
    def label(self) -> str:
        return _SIZE_LABELS[self]

    @classmethod
    def from_level(cls, level: int) -> "PageSize":
        return cls(level)

    @classmethod
    def from_label(cls, label: str) -> "PageSize":
        key = label.strip().upper().rstrip("B")
        for size, name in _SIZE_LABELS.items():
            if name.rstrip("B") == key:
                return size
        raise ValueError(f"unknown page size {label!r} (expected 4K, 2M or 1G)")


_SIZE_LABELS = {
    PageSize.BASE_4K: "4K",
    PageSize.MEGA_2M: "2M",
    PageSize.GIGA_1G: "1G",
}


@dataclass(frozen=True)
class Vpn:
    """A 27-bit virtual page number for 4KB pages."""

    value: int

    @property
    def vpn2(self) -> int:
        return (self.value >> (2 * VPN_LEVEL_BITS)) & VPN_LEVEL_MASK

    @property
    def vpn1(self) -> int:
        return (self.value >> VPN_LEVEL_BITS) & VPN_LEVEL_MASK

    @property
    def vpn0(self) -> int:
        return self.value & VPN_LEVEL_MASK

    def index_at(self, level: int) -> int:
        """The 9-bit table index used at walk `level` (2 = root)."""
        return (self.value >> (VPN_LEVEL_BITS * level)) & VPN_LEVEL_MASK

    def aligned_to(self, size: PageSize) -> "Vpn":
        """The VPN of the first 4KB page of the `size` region containing this one."""
        return Vpn(self.value & ~(size.base_pages - 1) & VPN_MASK)

    @classmethod
    def from_fields(cls, vpn2: int, vpn1: int, vpn0: int) -> "Vpn":
        return cls(
            ((vpn2 & VPN_LEVEL_MASK) << (2 * VPN_LEVEL_BITS))
            | ((vpn1 & VPN_LEVEL_MASK) << VPN_LEVEL_BITS)
            | (vpn0 & VPN_LEVEL_MASK)
        )


# PTE flag bit positions
PTE_V = 1 << 0
PTE_R = 1 << 1
PTE_W = 1 << 2
PTE_X = 1 << 3
PTE_U = 1 << 4
PTE_G = 1 << 5
PTE_A = 1 << 6
PTE_D = 1 << 7
PTE_FLAG_MASK = 0xFF


@dataclass(frozen=True)
class Pte:
    """
    A decoded Sv39 page-table entry.

    A leaf has any of R/W/X set. A pointer to the next level has V set and
    R=W=X=0.
    """

    ppn: int = 0
    v: bool = False
    r: bool = False
    w: bool = False
    x: bool = False
    u: bool = False
    g: bool = False
    a: bool = False
    d: bool = False

    @property
    def is_leaf(self) -> bool:
        return self.v and (self.r or self.w or self.x)

    @property
    def is_pointer(self) -> bool:
        return self.v and not (self.r or self.w or self.x)

    @property
    def flags(self) -> int:
        return (
            (PTE_V if self.v else 0)
            | (PTE_R if self.r else 0)
            | (PTE_W if self.w else 0)
            | (PTE_X if self.x else 0)
            | (PTE_U if self.u else 0)
            | (PTE_G if self.g else 0)
            | (PTE_A if self.a else 0)
            | (PTE_D if self.d else 0)
        )

    def encode(self) -> int:
        """The 64-bit in-memory form: PPN at bits 53..10, flags at bits 7..0."""
        return ((self.ppn & PPN_MASK) << PTE_PPN_SHIFT) | self.flags

    @classmethod
    def decode(cls, raw: int) -> "Pte":
        return cls.from_flags((raw >> PTE_PPN_SHIFT) & PPN_MASK, raw & PTE_FLAG_MASK)

    @classmethod
    def from_flags(cls, ppn: int, flags: int) -> "Pte":
        return cls(
            ppn=ppn,
            v=bool(flags & PTE_V),
            r=bool(flags & PTE_R),
            w=bool(flags & PTE_W),
            x=bool(flags & PTE_X),
            u=bool(flags & PTE_U),
            g=bool(flags & PTE_G),
            a=bool(flags & PTE_A),
            d=bool(flags & PTE_D),
        )

    @classmethod
    def pointer(cls, ppn: int) -> "Pte":
        return cls(ppn=ppn, v=True)

    @classmethod
    def leaf(cls, ppn: int) -> "Pte":
        """A user-accessible RWX leaf with A/D clear."""
        return cls(ppn=ppn, v=True, r=True, w=True, x=True, u=True)


# -------------------------------------------------------------------
# Address operations
# -------------------------------------------------------------------


def is_canonical(va: int) -> bool:
    """Bits 63..39 all equal bit 38."""
    upper = (va & U64_MASK) >> (VA_BITS - 1)
    return upper == 0 or upper == (U64_MASK >> (VA_BITS - 1))


def check_canonical(va: int) -> VirtAddr:
    if va < 0 or va > U64_MASK or not is_canonical(va):
        raise CanonicalityError(va)
    return VirtAddr(va)


def split_vpn(va: int) -> Vpn:
    """
    Slice a canonical virtual address into its VPN.

    vpn0 = bits 20..12, vpn1 = bits 29..21, vpn2 = bits 38..30.
    """
    check_canonical(va)
    return Vpn((va >> PAGE_SHIFT) & VPN_MASK)


def page_offset(va: int, size: PageSize) -> int:
    """Low 12/21/30 bits of `va` for 4KB/2MB/1GB pages."""
    check_canonical(va)
    return va & (size.byte_size - 1)


def rebuild_va(vpn: Vpn, offset: int) -> VirtAddr:
    """Inverse of split_vpn + page_offset(BASE_4K): sign-extends bit 38."""
    va = ((vpn.value & VPN_MASK) << PAGE_SHIFT) | (offset & PAGE_OFFSET_MASK)
    if va >> (VA_BITS - 1):
        va |= U64_MASK ^ ((1 << VA_BITS) - 1)
    return VirtAddr(va)


def check_alignment(pte: Pte, level: int) -> None:
    """A leaf at `level` must have its low 9*level PPN bits clear."""
    low_mask = (1 << (VPN_LEVEL_BITS * level)) - 1
    if pte.ppn & low_mask:
        raise AlignmentError(pte.ppn, level)


def compose_pa(pte: Pte, va: int, level: int) -> PhysAddr:
    """
    Build the physical address for `va` from a leaf found at walk `level`.

    At superpage levels the low PPN bits come from the virtual address.
    """
    check_alignment(pte, level)
    low_mask = (1 << (VPN_LEVEL_BITS * level)) - 1
    ppn = pte.ppn | ((va >> PAGE_SHIFT) & low_mask)
    return PhysAddr(((ppn << PAGE_SHIFT) | (va & PAGE_OFFSET_MASK)) & PA_MASK)
