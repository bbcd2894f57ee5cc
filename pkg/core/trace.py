"""
Trace Ingestion & Synthetic Workloads
TLB Hierarchy Simulator
--------------------------------------------------------

A trace is one access record per line:

    PC_HEX [ (L|S) VA_HEX ]

Hex values may carry a 0x prefix and `_` separators. Lines starting with
`#` and blank lines are skipped. Files ending in `.gz` are read and
written gzip-compressed.

Generators stand in for real workloads at desk scale:

- Sequential     each page touched once (compulsory misses)
- Strided        fixed page stride
- UniformRandom  seeded uniform choice over a working set
- Conflict       T data pages sharing one L2 set index, R rounds
- PointerChase   a seeded random cycle over nodes (mcf-like traversal)

Every generator is deterministic for a given spec. Seeded generators use
the same xorshift64* as the Random replacement policy.
"""

from __future__ import annotations

import logging
import re
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Union

from core.errors import CanonicalityError, ConfigError, ParseError
from core.helpers import open_text, parse_int
from core.sv39 import PAGE_SHIFT, VA_BITS, VirtAddr, check_canonical
from core.tlb_core import XorShift64Star

logger = logging.getLogger(__name__)

CODE_BASE = 0x1000_0000
DATA_BASE = 0x4000_0000
PAGE_BYTES = 1 << PAGE_SHIFT
INSTRUCTION_BYTES = 4
RANDOM_CODE_PAGES = 4
# highest address in the lower canonical half
MAX_GENERATED_VA = (1 << (VA_BITS - 1)) - 1

_HEX = re.compile(r"^(0[xX])?[0-9a-fA-F][0-9a-fA-F_]*$")


class AccessKind(str, Enum):
    FETCH = "fetch"
    LOAD = "load"
    STORE = "store"


_KIND_TOKENS = {"L": AccessKind.LOAD, "S": AccessKind.STORE}
_TOKEN_FOR_KIND = {AccessKind.LOAD: "L", AccessKind.STORE: "S"}


@dataclass(frozen=True)
class DataAccess:
    kind: AccessKind
    va: VirtAddr


@dataclass(frozen=True)
class AccessRecord:
    """One executed instruction: its fetch address and an optional data access."""

    pc: VirtAddr
    data: Optional[DataAccess] = None


def make_record(pc: int, kind: Optional[AccessKind] = None, va: Optional[int] = None) -> AccessRecord:
    """Build a record, checking both addresses for canonicality."""
    data = None
    if kind is not None:
        if kind is AccessKind.FETCH or va is None:
            raise ValueError("a data access needs kind Load/Store and an address")
        data = DataAccess(kind, check_canonical(va))
    return AccessRecord(check_canonical(pc), data)


# -------------------------------------------------------------------
# Text format
# -------------------------------------------------------------------


def _parse_hex(token: str, line_no: Optional[int]) -> int:
    if not _HEX.match(token):
        raise ParseError(f"not a hex value: {token!r}", line_no)
    return int(token.replace("_", ""), 16)


def parse_trace_line(line: str, line_no: Optional[int] = None) -> Optional[AccessRecord]:
    """
    Parse one trace line. Returns None for comments and blank lines.

    Raises
    ------
    ParseError
        If the line does not match the grammar.
    CanonicalityError
        If an address is not a canonical Sv39 address.
    """
    text = line.strip()
    if not text or text.startswith("#"):
        return None
    tokens = text.split()
    if len(tokens) == 1:
        return make_record(_parse_hex(tokens[0], line_no))
    if len(tokens) == 3:
        kind = _KIND_TOKENS.get(tokens[1].upper())
        if kind is None:
            raise ParseError(f"access kind must be L or S, got {tokens[1]!r}", line_no)
        return make_record(_parse_hex(tokens[0], line_no), kind, _parse_hex(tokens[2], line_no))
    raise ParseError(f"expected 'PC [L|S VA]', got {len(tokens)} fields", line_no)


def render_record(record: AccessRecord) -> str:
    if record.data is None:
        return f"0x{record.pc:x}"
    return f"0x{record.pc:x} {_TOKEN_FOR_KIND[record.data.kind]} 0x{record.data.va:x}"


def read_trace(path: str) -> Iterator[AccessRecord]:
    """
    Stream records from a trace file (plain or `.gz`).

    Raises
    ------
    ParseError
        For a malformed line or a non-canonical address, naming the line.
    """
    logger.info("reading trace %s", path)
    with open_text(path) as f:
        for line_no, line in enumerate(f, start=1):
            try:
                record = parse_trace_line(line, line_no)
            except CanonicalityError as exc:
                raise ParseError(str(exc), line_no) from exc
            if record is not None:
                yield record


def write_trace(path: str, records: Iterable[AccessRecord]) -> int:
    """Write records one per line; returns the number written."""
    count = 0
    with open_text(path, "w") as f:
        for record in records:
            f.write(render_record(record))
            f.write("\n")
            count += 1
    logger.info("wrote %d records to %s", count, path)
    return count


# -------------------------------------------------------------------
# Generator specs
# -------------------------------------------------------------------


def _require_positive(spec: Any, *names: str) -> None:
    for name in names:
        value = getattr(spec, name)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f"trace.{name}", f"must be an integer >= 1, got {value!r}")


def _require_in_range(key: str, highest_va: int) -> None:
    if highest_va > MAX_GENERATED_VA:
        raise ConfigError(
            f"trace.{key}",
            f"generated addresses reach 0x{highest_va:x}, above 0x{MAX_GENERATED_VA:x}",
        )


@dataclass(frozen=True)
class Sequential:
    pages: int
    fetch_only: bool = False

    def __post_init__(self) -> None:
        _require_positive(self, "pages")
        base = CODE_BASE if self.fetch_only else DATA_BASE
        _require_in_range("pages", base + self.pages * PAGE_BYTES - 1)


@dataclass(frozen=True)
class Strided:
    stride_pages: int
    count: int

    def __post_init__(self) -> None:
        _require_positive(self, "stride_pages", "count")
        _require_in_range("count", DATA_BASE + (self.count - 1) * self.stride_pages * PAGE_BYTES)


@dataclass(frozen=True)
class UniformRandom:
    working_set_pages: int
    length: int
    seed: int = 1

    def __post_init__(self) -> None:
        _require_positive(self, "working_set_pages", "length")
        _require_in_range("working_set_pages", DATA_BASE + self.working_set_pages * PAGE_BYTES - 1)


@dataclass(frozen=True)
class Conflict:
    l2_sets: int
    distinct_tags: int
    repetitions: int
    set_index: int = 1

    def __post_init__(self) -> None:
        _require_positive(self, "l2_sets", "distinct_tags", "repetitions")
        if not 0 <= self.set_index < self.l2_sets:
            raise ConfigError("trace.set_index", f"must be in [0, {self.l2_sets}), got {self.set_index}")
        _require_in_range("distinct_tags", self.data_vpns()[-1] << PAGE_SHIFT)

    def data_vpns(self) -> List[int]:
        return [self.set_index + k * self.l2_sets for k in range(self.distinct_tags)]


@dataclass(frozen=True)
class PointerChase:
    nodes: int
    node_bytes: int
    length: int
    seed: int = 1

    def __post_init__(self) -> None:
        _require_positive(self, "nodes", "node_bytes", "length")
        _require_in_range("nodes", DATA_BASE + (self.nodes - 1) * self.node_bytes)


TraceSpec = Union[Sequential, Strided, UniformRandom, Conflict, PointerChase]

GENERATORS: Dict[str, type] = {
    "sequential": Sequential,
    "strided": Strided,
    "uniform_random": UniformRandom,
    "conflict": Conflict,
    "pointer_chase": PointerChase,
}
_NAME_FOR_TYPE = {cls: name for name, cls in GENERATORS.items()}


def trace_spec_from_dict(data: Mapping[str, Any], default_seed: int = 1) -> TraceSpec:
    """
    Build a TraceSpec from `{"generator": name, ...params}`.

    Seeded generators without a `seed` take `default_seed`.
    """
    params = dict(data)
    name = params.pop("generator", None)
    if name not in GENERATORS:
        raise ConfigError("trace.generator", f"expected one of {sorted(GENERATORS)}, got {name!r}")
    cls = GENERATORS[name]
    allowed = {f.name: f for f in fields(cls)}
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise ConfigError(f"trace.{unknown[0]}", f"unknown key for generator {name!r}")
    kwargs: Dict[str, Any] = {}
    for key, value in params.items():
        if key == "fetch_only":
            if not isinstance(value, bool):
                raise ConfigError("trace.fetch_only", "must be true or false")
            kwargs[key] = value
        else:
            kwargs[key] = parse_int(value, f"trace.{key}")
    if "seed" in allowed and "seed" not in kwargs:
        kwargs["seed"] = default_seed
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError("trace", f"incomplete {name!r} generator ({exc})") from exc


def trace_spec_to_dict(spec: TraceSpec) -> Dict[str, Any]:
    return {"generator": _NAME_FOR_TYPE[type(spec)], **asdict(spec)}


# -------------------------------------------------------------------
# Generation
# -------------------------------------------------------------------


def _code_pc(i: int, code_pages: int = 1) -> int:
    return CODE_BASE + (i * INSTRUCTION_BYTES) % (code_pages * PAGE_BYTES)


def generate(spec: TraceSpec) -> Iterator[AccessRecord]:
    """Yield the deterministic record sequence described by `spec`."""
    if isinstance(spec, Sequential):
        for i in range(spec.pages):
            if spec.fetch_only:
                yield make_record(CODE_BASE + i * PAGE_BYTES)
            else:
                yield make_record(_code_pc(i), AccessKind.LOAD, DATA_BASE + i * PAGE_BYTES)

    elif isinstance(spec, Strided):
        for i in range(spec.count):
            va = DATA_BASE + i * spec.stride_pages * PAGE_BYTES
            yield make_record(_code_pc(i), AccessKind.LOAD, va)

    elif isinstance(spec, UniformRandom):
        rng = XorShift64Star(spec.seed)
        for i in range(spec.length):
            page = rng.below(spec.working_set_pages)
            offset = rng.below(PAGE_BYTES) & ~0x7
            kind = AccessKind.STORE if rng.below(4) == 0 else AccessKind.LOAD
            yield make_record(
                _code_pc(i, RANDOM_CODE_PAGES), kind, DATA_BASE + page * PAGE_BYTES + offset
            )

    elif isinstance(spec, Conflict):
        vpns = spec.data_vpns()
        i = 0
        for _ in range(spec.repetitions):
            for vpn in vpns:
                yield make_record(_code_pc(i), AccessKind.LOAD, vpn << PAGE_SHIFT)
                i += 1

    elif isinstance(spec, PointerChase):
        rng = XorShift64Star(spec.seed)
        order = list(range(spec.nodes))
        for i in range(spec.nodes - 1, 0, -1):
            j = rng.below(i + 1)
            order[i], order[j] = order[j], order[i]
        for i in range(spec.length):
            va = DATA_BASE + order[i % spec.nodes] * spec.node_bytes
            yield make_record(_code_pc(i), AccessKind.LOAD, va)

    else:
        raise TypeError(f"unknown trace spec {spec!r}")
