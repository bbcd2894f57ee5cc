"""Shared fixtures: small geometries, a fresh page table, hierarchy builders."""

from __future__ import annotations

from typing import Callable, Optional

import pytest

from core.mmu import LatencyModel, Mmu, MmuConfig
from core.pagetable import PageTable
from core.tlb_core import ReplacementPolicy, TlbGeometry


def geometry(sets: int, ways: int, policy: str = "plru", seed: int = 1) -> TlbGeometry:
    return TlbGeometry(sets=sets, ways=ways, policy=ReplacementPolicy(policy), seed=seed)


@pytest.fixture
def page_table() -> PageTable:
    return PageTable()


@pytest.fixture
def make_mmu() -> Callable[..., Mmu]:
    """Factory for an Mmu with 4-entry fully-associative L1s unless told otherwise."""

    def _make(
        itlb: Optional[TlbGeometry] = None,
        dtlb: Optional[TlbGeometry] = None,
        l2: Optional[TlbGeometry] = geometry(4, 4, "random", 3),
        superpage_entries: int = 4,
        latencies: Optional[LatencyModel] = None,
        demand_paging: bool = True,
        table: Optional[PageTable] = None,
    ) -> Mmu:
        config = MmuConfig(
            itlb=itlb or geometry(1, 4),
            dtlb=dtlb or geometry(1, 4),
            l2=l2,
            superpage_entries=superpage_entries,
            latencies=latencies or LatencyModel(),
            demand_paging=demand_paging,
        )
        return Mmu(config, table)

    return _make
