"""
MMU Hierarchy
TLB Hierarchy Simulator
--------------------------------------------------------

Composes the translation hierarchy:

    ITLB (set-assoc, 4KB) ─┐                      ┌─ L2 TLB (set-assoc, 4KB, shared)
    DTLB (set-assoc, 4KB) ─┼─ round-robin arbiter ┤
    superpage TLB (FA)   ──┘                      └─ page-table walker

Probe order for one access:
  1) the requester's L1 base-page TLB and the superpage TLB, same cycle
  2) on a miss in both, the L2 TLB (when configured)
  3) on an L2 miss, a page-table walk

Refill rules:
  - 4KB walk result  -> L2 (when present) and the requesting L1
  - superpage result -> superpage TLB only
  - L2 hit           -> the requesting L1 only

Cycle accounting follows LatencyModel: an L1 hit costs l1_hit_cycles, an
L2 probe adds l2_extra_cycles, every page-table load adds
mem_access_cycles. A trace step adds one base execution cycle.

One Mmu belongs to one simulation and is stepped strictly in order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Set

from core.errors import ConfigError, PageFault
from core.pagetable import PageTable, WalkResult
from core.stats import StatsReport, StructureCounters, reach
from core.sv39 import (
    PAGE_OFFSET_MASK,
    PAGE_SHIFT,
    VPN_MASK,
    PageSize,
    PhysAddr,
    check_canonical,
    compose_pa,
    split_vpn,
)
from core.tlb_core import SetAssocTlb, SuperpageTlb, TlbEntry, TlbGeometry, tag_of
from core.trace import AccessKind, AccessRecord

logger = logging.getLogger(__name__)

BASE_STEP_CYCLES = 1


class Requester(str, Enum):
    INSTRUCTION = "instruction"
    DATA = "data"


class TranslationSource(str, Enum):
    L1 = "L1"
    SUPERPAGE = "Superpage"
    L2 = "L2"
    WALK = "Walk"


@dataclass(frozen=True)
class LatencyModel:
    """Cycle costs of the hierarchy. The defaults are modelling choices."""

    l1_hit_cycles: int = 1
    l2_extra_cycles: int = 2
    mem_access_cycles: int = 20

    def __post_init__(self) -> None:
        for key in ("l1_hit_cycles", "l2_extra_cycles", "mem_access_cycles"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ConfigError(f"latencies.{key}", f"must be an integer >= 0, got {value!r}")
        if self.l1_hit_cycles < 1:
            raise ConfigError("latencies.l1_hit_cycles", "must be >= 1")


@dataclass(frozen=True)
class MmuConfig:
    """The whole hierarchy. `l2=None` removes the L2 TLB; 0 superpage entries removes that TLB."""

    itlb: TlbGeometry
    dtlb: TlbGeometry
    l2: Optional[TlbGeometry] = None
    superpage_entries: int = 4
    latencies: LatencyModel = field(default_factory=LatencyModel)
    demand_paging: bool = True

    def __post_init__(self) -> None:
        n = self.superpage_entries
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise ConfigError("superpage_entries", f"must be an integer >= 0, got {n!r}")
        if n and n & (n - 1):
            raise ConfigError("superpage_entries", f"{n} is not 0 or a power of two")


@dataclass(frozen=True)
class TranslationResult:
    pa: PhysAddr
    source: TranslationSource
    cycles: int
    walk_accesses: int = 0


@dataclass(frozen=True)
class StepOutcome:
    fetch: TranslationResult
    data: Optional[TranslationResult]
    cycles: int


class Arbiter:
    """Round-robin grant between the instruction and data walk requests."""

    def __init__(self, last_granted: Requester = Requester.DATA):
        self.last_granted = last_granted
        self.grants: Dict[Requester, int] = {Requester.INSTRUCTION: 0, Requester.DATA: 0}

    def arbitrate(self, pending: Set[Requester]) -> Requester:
        if not pending:
            raise ValueError("arbitrate needs at least one pending requester")
        if len(pending) == 1:
            granted = next(iter(pending))
        else:
            granted = (
                Requester.DATA
                if self.last_granted is Requester.INSTRUCTION
                else Requester.INSTRUCTION
            )
        self.last_granted = granted
        self.grants[granted] += 1
        return granted


_REQUESTER = {
    AccessKind.FETCH: Requester.INSTRUCTION,
    AccessKind.LOAD: Requester.DATA,
    AccessKind.STORE: Requester.DATA,
}


class Mmu:
    """
    Runtime state of one hierarchy instance.

    Parameters
    ----------
    config : MmuConfig
        Structure geometries and latencies.
    page_table : PageTable, optional
        The table walked on misses; a fresh one is created when omitted.
    """

    def __init__(self, config: MmuConfig, page_table: Optional[PageTable] = None):
        self.config = config
        self.latencies = config.latencies
        self.page_table = page_table if page_table is not None else PageTable()
        self.itlb = SetAssocTlb(config.itlb, name="itlb")
        self.dtlb = SetAssocTlb(config.dtlb, name="dtlb")
        self.l2: Optional[SetAssocTlb] = (
            SetAssocTlb(config.l2, name="l2") if config.l2 is not None else None
        )
        self.superpage: Optional[SuperpageTlb] = (
            SuperpageTlb(config.superpage_entries) if config.superpage_entries else None
        )
        self.arbiter = Arbiter()

        self.side: Dict[Requester, StructureCounters] = {
            Requester.INSTRUCTION: StructureCounters(),
            Requester.DATA: StructureCounters(),
        }
        self.l2_misses_by_requester: Dict[Requester, int] = {
            Requester.INSTRUCTION: 0,
            Requester.DATA: 0,
        }
        self.walks = 0
        self.walk_memory_accesses = 0
        self.instructions = 0
        self.total_cycles = 0
        self.arbiter_contended = 0
        self.sfences = 0
        self._dropped_superpage_warned = False

    # --------------------------------------------------------------
    # Translation
    # --------------------------------------------------------------
    def _l1_for(self, requester: Requester) -> SetAssocTlb:
        return self.itlb if requester is Requester.INSTRUCTION else self.dtlb

    def _probe_l1(self, va: int, requester: Requester) -> Optional[TranslationResult]:
        """Probe the requester's L1 and the superpage TLB; None on a miss in both."""
        vpn = (va >> PAGE_SHIFT) & VPN_MASK
        side = self.side[requester]
        side.lookups += 1
        sp_hit = self.superpage.lookup(vpn) if self.superpage is not None else None
        base_hit = self._l1_for(requester).lookup(vpn)
        if sp_hit is not None:
            side.hits += 1
            return TranslationResult(
                sp_hit.physical_address(va), TranslationSource.SUPERPAGE,
                self.latencies.l1_hit_cycles,
            )
        if base_hit is not None:
            side.hits += 1
            return TranslationResult(
                PhysAddr((base_hit.ppn << PAGE_SHIFT) | (va & PAGE_OFFSET_MASK)),
                TranslationSource.L1,
                self.latencies.l1_hit_cycles,
            )
        side.misses += 1
        return None

    def _refill_l1(self, requester: Requester, vpn: int, ppn: int, perms: int) -> None:
        l1 = self._l1_for(requester)
        l1.refill(vpn, TlbEntry(tag_of(vpn, l1.geometry), ppn, perms))

    def _walk(self, va: int, store: bool) -> WalkResult:
        try:
            return self.page_table.walk(va, store=store)
        except PageFault:
            if not self.config.demand_paging:
                raise
        self.page_table.map_page(split_vpn(va), PageSize.BASE_4K)
        logger.debug("demand-mapped page for va 0x%x", va)
        return self.page_table.walk(va, store=store)

    def _resolve_miss(self, va: int, kind: AccessKind) -> TranslationResult:
        """L2 probe, then a walk; applies the refill rules."""
        requester = _REQUESTER[kind]
        vpn = (va >> PAGE_SHIFT) & VPN_MASK
        lat = self.latencies
        cycles = lat.l1_hit_cycles

        if self.l2 is not None:
            cycles += lat.l2_extra_cycles
            hit = self.l2.lookup(vpn)
            if hit is not None:
                self._refill_l1(requester, vpn, hit.ppn, hit.perms)
                return TranslationResult(
                    PhysAddr((hit.ppn << PAGE_SHIFT) | (va & PAGE_OFFSET_MASK)),
                    TranslationSource.L2,
                    cycles,
                )
            self.l2_misses_by_requester[requester] += 1

        result = self._walk(va, store=kind is AccessKind.STORE)
        self.walks += 1
        self.walk_memory_accesses += result.memory_accesses
        cycles += result.memory_accesses * lat.mem_access_cycles
        perms = result.pte.flags

        if result.size is PageSize.BASE_4K:
            if self.l2 is not None:
                self.l2.refill(vpn, TlbEntry(tag_of(vpn, self.l2.geometry), result.pte.ppn, perms))
            self._refill_l1(requester, vpn, result.pte.ppn, perms)
        elif self.superpage is not None:
            self.superpage.refill(vpn, result.pte.ppn, perms, result.size)
        elif not self._dropped_superpage_warned:
            logger.warning("superpage TLB disabled: %s walk results are not cached", result.size.label)
            self._dropped_superpage_warned = True

        return TranslationResult(
            compose_pa(result.pte, va, result.level),
            TranslationSource.WALK,
            cycles,
            result.memory_accesses,
        )

    def translate(self, va: int, kind: AccessKind) -> TranslationResult:
        """Translate one access through the hierarchy."""
        check_canonical(va)
        hit = self._probe_l1(va, _REQUESTER[kind])
        if hit is not None:
            return hit
        return self._resolve_miss(va, kind)

    # --------------------------------------------------------------
    # Trace stepping
    # --------------------------------------------------------------
    def step(self, record: AccessRecord) -> StepOutcome:
        """
        Translate one trace record: the fetch address, then the data address.

        Both L1 probes happen first. Sides that missed go to the walker in
        arbiter order; the second one probes the L2 only after the first has
        refilled.
        """
        self.instructions += 1
        data = record.data
        fetch_result = self._probe_l1(record.pc, Requester.INSTRUCTION)
        data_result = self._probe_l1(data.va, Requester.DATA) if data is not None else None

        pending: Set[Requester] = set()
        if fetch_result is None:
            pending.add(Requester.INSTRUCTION)
        if data is not None and data_result is None:
            pending.add(Requester.DATA)
        if len(pending) == 2:
            self.arbiter_contended += 1

        while pending:
            granted = self.arbiter.arbitrate(pending)
            pending.discard(granted)
            if granted is Requester.INSTRUCTION:
                fetch_result = self._resolve_miss(record.pc, AccessKind.FETCH)
            else:
                data_result = self._resolve_miss(data.va, data.kind)

        assert fetch_result is not None
        cycles = BASE_STEP_CYCLES + fetch_result.cycles + (data_result.cycles if data_result else 0)
        self.total_cycles += cycles
        return StepOutcome(fetch_result, data_result, cycles)

    # --------------------------------------------------------------
    # Flush
    # --------------------------------------------------------------
    def sfence(self, va: Optional[int] = None) -> None:
        """
        sfence.vma: with an address, flush that entry from the L1s and the
        superpage TLB and the whole indexed set from the L2; without one,
        flush everything.
        """
        self.sfences += 1
        if va is None:
            self.itlb.flush_all()
            self.dtlb.flush_all()
            if self.superpage is not None:
                self.superpage.flush_all()
            if self.l2 is not None:
                self.l2.flush_all()
            logger.debug("sfence: global flush")
            return
        check_canonical(va)
        vpn = (va >> PAGE_SHIFT) & VPN_MASK
        self.itlb.flush_entry(vpn)
        self.dtlb.flush_entry(vpn)
        if self.superpage is not None:
            self.superpage.flush_containing(vpn)
        if self.l2 is not None:
            self.l2.flush_set(vpn)
        logger.debug("sfence: va 0x%x", va)

    # --------------------------------------------------------------
    # Reporting
    # --------------------------------------------------------------
    def occupancy(self) -> Dict[str, int]:
        return {
            "itlb": self.itlb.occupancy,
            "dtlb": self.dtlb.occupancy,
            "superpage": self.superpage.occupancy if self.superpage is not None else 0,
            "l2": self.l2.occupancy if self.l2 is not None else 0,
        }

    def report(self) -> StatsReport:
        """Snapshot the counters into a StatsReport."""

        def l1_view(requester: Requester, tlb: SetAssocTlb) -> StructureCounters:
            side = self.side[requester]
            return StructureCounters(
                lookups=side.lookups,
                hits=side.hits,
                misses=side.misses,
                refills=tlb.counters.refills,
                evictions=tlb.counters.evictions,
                flushed_entries=tlb.counters.flushed_entries,
            )

        def copy(counters: Optional[StructureCounters]) -> StructureCounters:
            return StructureCounters(**vars(counters)) if counters is not None else StructureCounters()

        return StatsReport(
            itlb=l1_view(Requester.INSTRUCTION, self.itlb),
            dtlb=l1_view(Requester.DATA, self.dtlb),
            superpage=copy(self.superpage.counters if self.superpage is not None else None),
            l2=copy(self.l2.counters if self.l2 is not None else None),
            l2_present=self.l2 is not None,
            walks=self.walks,
            walk_memory_accesses=self.walk_memory_accesses,
            instructions=self.instructions,
            total_cycles=self.total_cycles,
            l2_misses_by_requester={
                "instruction": self.l2_misses_by_requester[Requester.INSTRUCTION],
                "data": self.l2_misses_by_requester[Requester.DATA],
            },
            arbiter_contended=self.arbiter_contended,
            arbiter_grants={r.value: n for r, n in self.arbiter.grants.items()},
            sfences=self.sfences,
            page_tables=self.page_table.table_count,
            occupancy=self.occupancy(),
            reach_bytes=reach_by_structure(self.config),
        )


def reach_by_structure(config: MmuConfig) -> Dict[str, int]:
    """Entries x page size per structure; superpage entries counted at 2MB."""
    return {
        "itlb": reach(config.itlb.entries, PageSize.BASE_4K),
        "dtlb": reach(config.dtlb.entries, PageSize.BASE_4K),
        "superpage": reach(config.superpage_entries, PageSize.MEGA_2M),
        "l2": reach(config.l2.entries, PageSize.BASE_4K) if config.l2 is not None else 0,
    }

