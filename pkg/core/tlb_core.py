"""
Configurable Set-Associative TLB
TLB Hierarchy Simulator
--------------------------------------------------------

The generic sets x ways translation cache used for every TLB in the
hierarchy. One template covers every organization from direct-mapped
(ways == 1) to fully-associative (sets == 1).

Lookup splits the VPN into an index (low log2(sets) bits) and a tag (the
rest), then searches only the indexed set. Refill takes the lowest free
way, otherwise asks the replacement policy for a victim. Flushes clear
valid bits either for one entry, for one whole set, or globally.

Valid bits are kept in their own per-set array, separate from the entry
payloads. A per-set tag -> way map mirrors the valid bits so that a
lookup does not scan the ways.

Replacement:
- PseudoLru: a binary tree of (ways - 1) bits per set. Node i has
  children 2i+1 and 2i+2; bit 0 sends the victim search to the lower
  subtree. Touching a way points every node on its path away from it.
- Random: one xorshift64* generator per structure; the victim is the
  upper 32 bits of the next output modulo ways.

SuperpageTlb is the small fully-associative structure for 2MB/1GB
leaves; entries match by containment rather than by exact tag.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from core.errors import ConfigError
from core.sv39 import PAGE_SHIFT, PageSize, PhysAddr, Vpn, VPN_LEVEL_BITS
from core.stats import StructureCounters

logger = logging.getLogger(__name__)

U64_MASK = (1 << 64) - 1
XORSHIFT_MULTIPLIER = 0x2545F4914F6CDD1D
XORSHIFT_ZERO_SEED = 0x9E3779B97F4A7C15


class ReplacementPolicy(str, Enum):
    PSEUDO_LRU = "plru"
    RANDOM = "random"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class TlbGeometry:
    """Sets, ways and replacement policy of one structure."""

    sets: int
    ways: int
    policy: ReplacementPolicy = ReplacementPolicy.PSEUDO_LRU
    seed: int = 1

    def __post_init__(self) -> None:
        for key in ("sets", "ways"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(key, f"expected an integer, got {value!r}")
            if not _is_power_of_two(value):
                raise ConfigError(key, f"{value} is not a positive power of two")
        if not isinstance(self.policy, ReplacementPolicy):
            object.__setattr__(self, "policy", ReplacementPolicy(self.policy))
        object.__setattr__(self, "seed", self.seed & U64_MASK)

    @property
    def entries(self) -> int:
        return self.sets * self.ways

    @property
    def index_bits(self) -> int:
        return self.sets.bit_length() - 1

    @property
    def organization(self) -> str:
        if self.sets == 1 and self.ways == 1:
            return "single-entry"
        if self.sets == 1:
            return "fully-assoc."
        if self.ways == 1:
            return "direct-mapped"
        return f"{self.ways}-way"

    def describe(self) -> str:
        return f"{self.organization}, {self.entries} entries"


def index_of(vpn: int, geometry: TlbGeometry) -> int:
    return vpn & (geometry.sets - 1)


def tag_of(vpn: int, geometry: TlbGeometry) -> int:
    return vpn >> geometry.index_bits


@dataclass(frozen=True)
class TlbEntry:
    """One cached translation."""

    tag: int
    ppn: int
    perms: int
    size: PageSize = PageSize.BASE_4K


@dataclass(frozen=True)
class RefillOutcome:
    placed_way: int
    evicted: Optional[Union[TlbEntry, "SuperpageEntry"]] = None


# -------------------------------------------------------------------
# Replacement state
# -------------------------------------------------------------------


class PlruState:
    """Tree pseudo-LRU bits for one set."""

    __slots__ = ("ways", "bits")

    def __init__(self, ways: int):
        if not _is_power_of_two(ways):
            raise ValueError(f"PLRU needs a power-of-two way count, got {ways}")
        self.ways = ways
        self.bits: List[int] = [0] * (ways - 1)

    def touch(self, way: int) -> None:
        node = (self.ways - 1) + way
        while node > 0:
            parent = (node - 1) >> 1
            # left child -> point right, right child -> point left
            self.bits[parent] = 1 if node == 2 * parent + 1 else 0
            node = parent

    def victim(self) -> int:
        node = 0
        internal = self.ways - 1
        while node < internal:
            node = 2 * node + 1 + self.bits[node]
        return node - internal

    def copy(self) -> "PlruState":
        clone = PlruState(self.ways)
        clone.bits = list(self.bits)
        return clone


def plru_touch(state: PlruState, way: int) -> None:
    state.touch(way)


def plru_victim(state: PlruState) -> int:
    return state.victim()


class XorShift64Star:
    """
    xorshift64* generator.

    x ^= x >> 12; x ^= x << 25; x ^= x >> 27; output = x * 0x2545F4914F6CDD1D.
    A zero seed is replaced by a fixed nonzero constant.
    """

    __slots__ = ("x",)

    def __init__(self, seed: int):
        seed &= U64_MASK
        self.x = seed if seed else XORSHIFT_ZERO_SEED

    def next(self) -> int:
        x = self.x
        x ^= x >> 12
        x ^= (x << 25) & U64_MASK
        x ^= x >> 27
        self.x = x
        return (x * XORSHIFT_MULTIPLIER) & U64_MASK

    def next_upper32(self) -> int:
        return self.next() >> 32

    def below(self, bound: int) -> int:
        """Upper 32 bits of the next output modulo `bound`."""
        return self.next_upper32() % bound


# -------------------------------------------------------------------
# Set-associative TLB
# -------------------------------------------------------------------


class SetAssocTlb:
    """
    A sets x ways TLB for 4KB translations.

    Parameters
    ----------
    geometry : TlbGeometry
        Sets, ways, policy and (for Random) the generator seed.
    name : str, optional
        Label used in logs and reports.
    """

    def __init__(self, geometry: TlbGeometry, name: str = "tlb"):
        self.geometry = geometry
        self.name = name
        sets, ways = geometry.sets, geometry.ways
        self._index_mask = sets - 1
        self._index_bits = geometry.index_bits
        self.slots: List[List[Optional[TlbEntry]]] = [[None] * ways for _ in range(sets)]
        self.valid: List[List[bool]] = [[False] * ways for _ in range(sets)]
        self._where: List[Dict[int, int]] = [{} for _ in range(sets)]
        self.plru: Optional[List[PlruState]] = (
            [PlruState(ways) for _ in range(sets)]
            if geometry.policy is ReplacementPolicy.PSEUDO_LRU and ways > 1
            else None
        )
        self.rng = XorShift64Star(geometry.seed)
        self.counters = StructureCounters()

    # --------------------------------------------------------------
    # Lookup
    # --------------------------------------------------------------
    def lookup(self, vpn: int) -> Optional[TlbEntry]:
        """
        Search the indexed set. Returns the entry on a hit, None on a miss.

        A hit touches the set's PLRU state; a miss changes nothing but the
        counters.
        """
        index = vpn & self._index_mask
        way = self._where[index].get(vpn >> self._index_bits)
        self.counters.lookups += 1
        if way is None:
            self.counters.misses += 1
            return None
        self.counters.hits += 1
        if self.plru is not None:
            self.plru[index].touch(way)
        return self.slots[index][way]

    def contains(self, vpn: int) -> bool:
        """Presence check without counters or replacement side effects."""
        return (vpn >> self._index_bits) in self._where[vpn & self._index_mask]

    # --------------------------------------------------------------
    # Refill
    # --------------------------------------------------------------
    def refill(self, vpn: int, entry: TlbEntry) -> RefillOutcome:
        """
        Install `entry` for `vpn`.

        The lowest invalid way is used when the set is not full; otherwise
        the policy picks a victim. An entry already valid for the same tag
        is overwritten in place.
        """
        if entry.size is not PageSize.BASE_4K:
            raise ValueError(f"{self.name} holds 4KB translations only, got {entry.size.label}")
        index = vpn & self._index_mask
        tag = vpn >> self._index_bits
        if entry.tag != tag:
            entry = TlbEntry(tag, entry.ppn, entry.perms, entry.size)
        where = self._where[index]
        valid = self.valid[index]
        evicted: Optional[TlbEntry] = None

        way = where.get(tag)
        if way is None:
            for candidate, bit in enumerate(valid):
                if not bit:
                    way = candidate
                    break
            else:
                way = self._victim(index)
                evicted = self.slots[index][way]
                if evicted is not None:
                    del where[evicted.tag]
                self.counters.evictions += 1
                logger.debug(
                    "%s: evict set %d way %d tag 0x%x", self.name, index, way,
                    evicted.tag if evicted is not None else -1,
                )

        self.slots[index][way] = entry
        valid[way] = True
        where[tag] = way
        if self.plru is not None:
            self.plru[index].touch(way)
        self.counters.refills += 1
        return RefillOutcome(placed_way=way, evicted=evicted)

    def _victim(self, index: int) -> int:
        if self.plru is not None:
            return self.plru[index].victim()
        if self.geometry.policy is ReplacementPolicy.RANDOM:
            return self.random_victim(index)
        return 0

    def random_victim(self, index: int) -> int:
        """Advance the generator once and map it onto a way of set `index`."""
        return self.rng.below(self.geometry.ways)

    # --------------------------------------------------------------
    # Flush
    # --------------------------------------------------------------
    def flush_entry(self, vpn: int) -> bool:
        """Clear the valid bit of exactly the matching entry, if present."""
        index = vpn & self._index_mask
        way = self._where[index].pop(vpn >> self._index_bits, None)
        if way is None:
            return False
        self.valid[index][way] = False
        self.counters.flushed_entries += 1
        return True

    def flush_set(self, vpn: int) -> int:
        """Clear every valid bit in the set `vpn` indexes; return how many were set."""
        index = vpn & self._index_mask
        valid = self.valid[index]
        count = sum(valid)
        for way in range(len(valid)):
            valid[way] = False
        self._where[index].clear()
        self.counters.flushed_entries += count
        return count

    def flush_all(self) -> None:
        """Clear all valid bits. Replacement and generator state are kept."""
        for index, valid in enumerate(self.valid):
            self.counters.flushed_entries += sum(valid)
            for way in range(len(valid)):
                valid[way] = False
            self._where[index].clear()

    # --------------------------------------------------------------
    # Introspection
    # --------------------------------------------------------------
    @property
    def occupancy(self) -> int:
        return sum(len(where) for where in self._where)

    def valid_entries(self) -> List[Tuple[int, int, TlbEntry]]:
        """(set, way, entry) for every valid slot, in set/way order."""
        return [
            (index, way, self.slots[index][way])
            for index in range(self.geometry.sets)
            for way in range(self.geometry.ways)
            if self.valid[index][way]
        ]


# -------------------------------------------------------------------
# Superpage TLB
# -------------------------------------------------------------------


@dataclass(frozen=True)
class SuperpageEntry:
    """A cached 2MB/1GB leaf. `base_vpn` and `ppn` are size-aligned."""

    base_vpn: int
    ppn: int
    perms: int
    size: PageSize

    def covers(self, vpn: int) -> bool:
        shift = VPN_LEVEL_BITS * self.size.level
        return (vpn >> shift) == (self.base_vpn >> shift)

    def physical_address(self, va: int) -> PhysAddr:
        return PhysAddr((self.ppn << PAGE_SHIFT) | (va & (self.size.byte_size - 1)))


class SuperpageTlb:
    """
    Fully-associative PLRU structure for superpage translations.

    Entries match by containment: a lookup hits when the VPN falls inside
    the entry's 2MB/1GB range.
    """

    def __init__(self, capacity: int, name: str = "superpage"):
        if not _is_power_of_two(capacity):
            raise ConfigError("superpage_entries", f"{capacity} is not a positive power of two")
        self.capacity = capacity
        self.name = name
        self.entries: List[Optional[SuperpageEntry]] = [None] * capacity
        self.plru = PlruState(capacity) if capacity > 1 else None
        self.counters = StructureCounters()

    def lookup(self, vpn: int) -> Optional[SuperpageEntry]:
        self.counters.lookups += 1
        for way, entry in enumerate(self.entries):
            if entry is not None and entry.covers(vpn):
                self.counters.hits += 1
                if self.plru is not None:
                    self.plru.touch(way)
                return entry
        self.counters.misses += 1
        return None

    def refill(self, vpn: int, ppn: int, perms: int, size: PageSize) -> RefillOutcome:
        if size is PageSize.BASE_4K:
            raise ValueError(f"{self.name} holds 2MB/1GB translations only")
        entry = SuperpageEntry(Vpn(vpn).aligned_to(size).value, ppn, perms, size)
        evicted: Optional[SuperpageEntry] = None
        way = next(
            (w for w, e in enumerate(self.entries) if e is not None and e.size is size and e.covers(vpn)),
            None,
        )
        if way is None:
            way = next((w for w, e in enumerate(self.entries) if e is None), None)
        if way is None:
            way = self.plru.victim() if self.plru is not None else 0
            evicted = self.entries[way]
            self.counters.evictions += 1
        self.entries[way] = entry
        if self.plru is not None:
            self.plru.touch(way)
        self.counters.refills += 1
        return RefillOutcome(placed_way=way, evicted=evicted)

    def flush_containing(self, vpn: int) -> int:
        """Invalidate every entry whose mapped range contains `vpn`."""
        count = 0
        for way, entry in enumerate(self.entries):
            if entry is not None and entry.covers(vpn):
                self.entries[way] = None
                count += 1
        self.counters.flushed_entries += count
        return count

    def flush_all(self) -> None:
        self.counters.flushed_entries += self.occupancy
        self.entries = [None] * self.capacity

    @property
    def occupancy(self) -> int:
        return sum(1 for e in self.entries if e is not None)
