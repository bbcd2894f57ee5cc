"""
Sv39 Page Table Model
TLB Hierarchy Simulator
--------------------------------------------------------

An in-simulator stand-in for the OS-managed radix page table:

1) demand allocation of intermediate tables and data frames
2) the authoritative walk used by the MMU on a TLB miss
3) translate_oracle, a TLB-bypassing reference translation

Tables hold encoded 64-bit PTEs exactly as memory would, 512 per table,
keyed by the PPN of the frame that holds them. The root PPN plays the
role of SATP.PPN.

Frame allocation uses two monotone pools: data frames grow upward from
`data_frame_base`, table frames grow downward from the top of the PPN
space. Neither pool ever hands out a frame twice.

The page table never:
- evicts or swaps pages
- enforces permissions beyond leaf detection
- caches non-leaf entries (no PTW cache)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Union

from core.errors import MappingConflict, PageFault, SimulatorError
from core.sv39 import (
    LEVELS,
    PPN_MASK,
    PTE_A,
    PTE_D,
    PTES_PER_TABLE,
    PageSize,
    PhysAddr,
    Pte,
    Vpn,
    check_alignment,
    compose_pa,
    split_vpn,
)

logger = logging.getLogger(__name__)

DEFAULT_DATA_FRAME_BASE = 0x1000


@dataclass(frozen=True)
class WalkResult:
    """Outcome of a successful walk: the leaf, where it sat, and what it cost."""

    pte: Pte
    level: int
    memory_accesses: int
    size: PageSize


class PageTable:
    """
    A demand-allocated Sv39 page table.

    Parameters
    ----------
    data_frame_base : int, optional
        First PPN handed out for data pages, by default 0x1000.
    """

    def __init__(self, data_frame_base: int = DEFAULT_DATA_FRAME_BASE):
        if not 0 <= data_frame_base <= PPN_MASK:
            raise ValueError(f"data_frame_base 0x{data_frame_base:x} outside the PPN space")
        self.data_frame_base = data_frame_base
        self._next_data_frame = data_frame_base
        self._next_table_frame = PPN_MASK
        self.tables: Dict[int, List[int]] = {}
        self.mapped: Dict[PageSize, int] = {size: 0 for size in PageSize}
        self.root_ppn = self._allocate_table()

    # --------------------------------------------------------------
    # Frame allocation
    # --------------------------------------------------------------
    def _allocate_table(self) -> int:
        ppn = self._next_table_frame
        if ppn < self._next_data_frame:
            raise SimulatorError("page-table frame pool ran into the data frame pool")
        self._next_table_frame -= 1
        self.tables[ppn] = [0] * PTES_PER_TABLE
        return ppn

    def _allocate_data(self, size: PageSize) -> int:
        align = size.base_pages
        ppn = (self._next_data_frame + align - 1) & ~(align - 1)
        if ppn + align - 1 > self._next_table_frame:
            raise SimulatorError("data frame pool ran into the page-table frame pool")
        self._next_data_frame = ppn + align
        return ppn

    @property
    def table_count(self) -> int:
        return len(self.tables)

    # --------------------------------------------------------------
    # Mapping
    # --------------------------------------------------------------
    def map_page(self, vpn: Union[Vpn, int], size: PageSize = PageSize.BASE_4K) -> int:
        """
        Map the `size` region containing `vpn`, allocating tables on demand.

        VPN bits below the region's alignment are ignored. Mapping an
        already-mapped region of the same size returns its existing PPN.

        Returns
        -------
        int
            The leaf PPN of the region.

        Raises
        ------
        MappingConflict
            If the region overlaps a mapping of a different size.
        """
        vpn = vpn if isinstance(vpn, Vpn) else Vpn(vpn)
        table = self.root_ppn
        for level in range(LEVELS - 1, size.level, -1):
            entries = self.tables[table]
            index = vpn.index_at(level)
            pte = Pte.decode(entries[index])
            if pte.is_leaf:
                raise MappingConflict(
                    f"vpn 0x{vpn.value:x} already covered by a {PageSize(level).label} page"
                )
            if not pte.v:
                child = self._allocate_table()
                entries[index] = Pte.pointer(child).encode()
                pte = Pte.pointer(child)
            table = pte.ppn

        entries = self.tables[table]
        index = vpn.index_at(size.level)
        pte = Pte.decode(entries[index])
        if pte.is_leaf:
            return pte.ppn
        if pte.is_pointer:
            raise MappingConflict(
                f"{size.label} region at vpn 0x{vpn.aligned_to(size).value:x} "
                "overlaps smaller mappings"
            )
        ppn = self._allocate_data(size)
        entries[index] = Pte.leaf(ppn).encode()
        self.mapped[size] += 1
        logger.debug("mapped vpn 0x%x as %s -> ppn 0x%x", vpn.value, size.label, ppn)
        return ppn

    def map_region(self, base_va: int, size: PageSize, count: int) -> List[int]:
        """Map `count` consecutive `size` pages starting at `base_va`."""
        base = split_vpn(base_va).aligned_to(size)
        return [
            self.map_page(Vpn(base.value + i * size.base_pages), size)
            for i in range(count)
        ]

    def install_leaf(self, vpn: Union[Vpn, int], level: int, pte: Pte) -> None:
        """
        Write a raw leaf at `level`, creating intermediate tables.

        No alignment or overlap checks are made; the walk reports what it
        finds.
        """
        vpn = vpn if isinstance(vpn, Vpn) else Vpn(vpn)
        table = self.root_ppn
        for lvl in range(LEVELS - 1, level, -1):
            entries = self.tables[table]
            index = vpn.index_at(lvl)
            current = Pte.decode(entries[index])
            if not current.is_pointer:
                child = self._allocate_table()
                entries[index] = Pte.pointer(child).encode()
                current = Pte.pointer(child)
            table = current.ppn
        self.tables[table][vpn.index_at(level)] = pte.encode()

    # --------------------------------------------------------------
    # Walk
    # --------------------------------------------------------------
    def walk(self, va: int, *, store: bool = False) -> WalkResult:
        """
        Traverse from the root using vpn2, vpn1, vpn0; stop at the first leaf.

        The Accessed bit (and Dirty, for stores) is set on the leaf in
        place without extra memory traffic.

        Raises
        ------
        PageFault
            On an invalid PTE.
        AlignmentError
            On a misaligned superpage leaf.
        """
        vpn = split_vpn(va)
        table = self.root_ppn
        accesses = 0
        for level in range(LEVELS - 1, -1, -1):
            entries = self.tables[table]
            index = vpn.index_at(level)
            raw = entries[index]
            accesses += 1
            pte = Pte.decode(raw)
            if not pte.v:
                raise PageFault(va, level)
            if pte.is_leaf:
                check_alignment(pte, level)
                updated = raw | PTE_A | (PTE_D if store else 0)
                if updated != raw:
                    entries[index] = updated
                    pte = Pte.decode(updated)
                return WalkResult(pte, level, accesses, PageSize.from_level(level))
            if level == 0:
                # pointer at the last level
                raise PageFault(va, level)
            table = pte.ppn
        raise PageFault(va, 0)  # unreachable: the loop returns or raises

    def translate_oracle(self, va: int) -> PhysAddr:
        """TLB-bypassing reference translation."""
        result = self.walk_readonly(va)
        return compose_pa(result.pte, va, result.level)

    def walk_readonly(self, va: int) -> WalkResult:
        """Like walk, but leaves the A/D bits untouched."""
        vpn = split_vpn(va)
        table = self.root_ppn
        for level in range(LEVELS - 1, -1, -1):
            pte = Pte.decode(self.tables[table][vpn.index_at(level)])
            if not pte.v or (level == 0 and pte.is_pointer):
                raise PageFault(va, level)
            if pte.is_leaf:
                check_alignment(pte, level)
                return WalkResult(pte, level, LEVELS - level, PageSize.from_level(level))
            table = pte.ppn
        raise PageFault(va, 0)
