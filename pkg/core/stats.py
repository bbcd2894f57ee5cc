"""
Simulator Statistics
TLB Hierarchy Simulator
--------------------------------------------------------

Event counters, derived metrics and report emission.

- StructureCounters: lookups / hits / misses / refills / evictions /
  flushed entries for one structure
- StatsReport: the per-run counter tree plus derived metrics (MPKI, hit
  rates, latency-model CPI)
- emit_report: JSON (stable key order) or CSV (one header row, one data
  row, dotted column names)
- comparison_frame: side-by-side table of several named reports with
  miss reduction relative to the first

Emission always re-checks the counter conservation invariants and refuses
to write an inconsistent report. CPI here is a latency-model figure, not
hardware IPC.

This module never touches simulator state; the MMU fills the counters.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from core.errors import InternalConsistencyError, UndefinedMetric

logger = logging.getLogger(__name__)

STRUCTURES = ("itlb", "dtlb", "superpage", "l2")
CPI_BASIS = "latency-model CPI (not hardware IPC)"
MPKI_DECIMALS = 3


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


@dataclass
class StructureCounters:
    lookups: int = 0
    hits: int = 0
    misses: int = 0
    refills: int = 0
    evictions: int = 0
    flushed_entries: int = 0

    def hit_rate(self) -> Optional[float]:
        if self.lookups == 0:
            return None
        return round(self.hits / self.lookups, 6)


# -------------------------------------------------------------------
# Metrics
# -------------------------------------------------------------------


def mpki(misses: int, instructions: int) -> float:
    """
    Misses per thousand instructions, rounded to 3 decimal places.

    Raises
    ------
    UndefinedMetric
        If `instructions` is zero.
    """
    if instructions <= 0:
        raise UndefinedMetric("MPKI is undefined for a run with no instructions")
    return round(misses * 1000 / instructions, MPKI_DECIMALS)


def reach(entries: int, page: Any) -> int:
    """TLB reach in bytes: entries x page size. `page` is a PageSize."""
    if entries < 0:
        raise ValueError(f"entry count must be >= 0, got {entries}")
    return entries * page.byte_size


def format_bytes(n: int) -> str:
    """128KB / 4MB style rendering used by the preset table."""
    if n == 0:
        return "0"
    for unit, shift in (("GB", 30), ("MB", 20), ("KB", 10)):
        if n >= 1 << shift and n % (1 << shift) == 0:
            return f"{n >> shift}{unit}"
    return f"{n}B"


def reduction_pct(baseline: int, value: int) -> float:
    if baseline == 0:
        return 0.0
    return round((baseline - value) * 100 / baseline, 1)


# -------------------------------------------------------------------
# Report
# -------------------------------------------------------------------


@dataclass
class StatsReport:
    """Counters of one simulation run."""

    itlb: StructureCounters = field(default_factory=StructureCounters)
    dtlb: StructureCounters = field(default_factory=StructureCounters)
    superpage: StructureCounters = field(default_factory=StructureCounters)
    l2: StructureCounters = field(default_factory=StructureCounters)
    l2_present: bool = True
    walks: int = 0
    walk_memory_accesses: int = 0
    instructions: int = 0
    total_cycles: int = 0
    l2_misses_by_requester: Dict[str, int] = field(
        default_factory=lambda: {"instruction": 0, "data": 0}
    )
    arbiter_contended: int = 0
    arbiter_grants: Dict[str, int] = field(
        default_factory=lambda: {"instruction": 0, "data": 0}
    )
    sfences: int = 0
    page_tables: int = 0
    occupancy: Dict[str, int] = field(default_factory=lambda: {s: 0 for s in STRUCTURES})
    reach_bytes: Dict[str, int] = field(default_factory=lambda: {s: 0 for s in STRUCTURES})

    def structure(self, name: str) -> StructureCounters:
        return getattr(self, name)

    def derived(self) -> Dict[str, Any]:
        """Derived metrics. Raises UndefinedMetric on an empty run."""
        n = self.instructions
        return {
            "itlb_mpki": mpki(self.itlb.misses, n),
            "dtlb_mpki": mpki(self.dtlb.misses, n),
            "l1_combined_mpki": mpki(self.itlb.misses + self.dtlb.misses, n),
            "l2_mpki": mpki(self.l2.misses, n),
            "walks_pki": mpki(self.walks, n),
            "itlb_hit_rate": self.itlb.hit_rate(),
            "dtlb_hit_rate": self.dtlb.hit_rate(),
            "superpage_hit_rate": self.superpage.hit_rate(),
            "l2_hit_rate": self.l2.hit_rate(),
            "cpi": round(self.total_cycles / n, 6),
            "cpi_basis": CPI_BASIS,
        }

    def counters_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {name: asdict(self.structure(name)) for name in STRUCTURES}
        out.update(
            {
                "l2_present": self.l2_present,
                "walks": self.walks,
                "walk_memory_accesses": self.walk_memory_accesses,
                "instructions": self.instructions,
                "total_cycles": self.total_cycles,
                "l2_misses_by_requester": dict(self.l2_misses_by_requester),
                "arbiter_contended": self.arbiter_contended,
                "arbiter_grants": dict(self.arbiter_grants),
                "sfences": self.sfences,
                "page_tables": self.page_tables,
                "occupancy": dict(self.occupancy),
                "reach_bytes": dict(self.reach_bytes),
            }
        )
        return out

    def to_dict(self) -> Dict[str, Any]:
        out = self.counters_dict()
        out["derived"] = self.derived()
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "StatsReport":
        """Rebuild a report from `to_dict` output; derived values are recomputed."""
        names = {f.name for f in fields(StructureCounters)}
        kwargs: Dict[str, Any] = {
            s: StructureCounters(**{k: v for k, v in data[s].items() if k in names})
            for s in STRUCTURES
        }
        for key in (
            "l2_present", "walks", "walk_memory_accesses", "instructions",
            "total_cycles", "arbiter_contended", "sfences", "page_tables",
        ):
            kwargs[key] = data[key]
        for key in ("l2_misses_by_requester", "arbiter_grants", "occupancy", "reach_bytes"):
            kwargs[key] = dict(data[key])
        return cls(**kwargs)


def check_consistency(report: StatsReport) -> None:
    """
    Verify the counter conservation invariants.

    Raises
    ------
    InternalConsistencyError
        Naming every violated invariant.
    """
    problems: List[str] = []
    for name in STRUCTURES:
        c = report.structure(name)
        if c.hits + c.misses != c.lookups:
            problems.append(f"{name}: hits {c.hits} + misses {c.misses} != lookups {c.lookups}")
    l1_misses = report.itlb.misses + report.dtlb.misses
    if report.l2_present:
        if report.l2.lookups != l1_misses:
            problems.append(f"l2.lookups {report.l2.lookups} != L1 misses {l1_misses}")
        if report.l2.misses != report.walks:
            problems.append(f"l2.misses {report.l2.misses} != walks {report.walks}")
        by_side = sum(report.l2_misses_by_requester.values())
        if by_side != report.l2.misses:
            problems.append(f"l2 misses by requester {by_side} != l2.misses {report.l2.misses}")
    else:
        if any(asdict(report.l2).values()):
            problems.append("l2 counters nonzero without an L2 TLB")
        if report.walks != l1_misses:
            problems.append(f"walks {report.walks} != L1 misses {l1_misses} without an L2 TLB")
    sp = report.superpage.lookups
    if sp and sp != report.itlb.lookups + report.dtlb.lookups:
        problems.append(
            f"superpage.lookups {sp} != L1 lookups {report.itlb.lookups + report.dtlb.lookups}"
        )
    if report.instructions <= 0:
        problems.append("no instructions simulated; derived metrics are undefined")
    if problems:
        raise InternalConsistencyError("; ".join(problems))


def emit_report(report: StatsReport, fmt: Union[ReportFormat, str] = ReportFormat.JSON) -> str:
    """
    Render a report as JSON or CSV after checking its invariants.

    JSON is one object with sorted keys. CSV is one header row and one data
    row with dotted column names.
    """
    check_consistency(report)
    fmt = ReportFormat(fmt)
    payload = report.to_dict()
    if fmt is ReportFormat.JSON:
        return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    frame = pd.json_normalize(payload, sep=".")
    return frame.to_csv(index=False, lineterminator="\n")


def write_report(report: StatsReport, path: str, fmt: Union[ReportFormat, str]) -> None:
    text = emit_report(report, fmt)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info("report written to %s", path)


# -------------------------------------------------------------------
# Comparison tables
# -------------------------------------------------------------------

REDUCTION_COLUMNS = {
    "l2_miss_reduction_pct": "l2.misses",
    "l2_data_miss_reduction_pct": "l2_misses_by_requester.data",
    "walk_reduction_pct": "walks",
    "dtlb_miss_reduction_pct": "dtlb.misses",
    "itlb_miss_reduction_pct": "itlb.misses",
}


def comparison_frame(named_reports: Sequence[Tuple[str, StatsReport]]) -> pd.DataFrame:
    """
    Side-by-side table of `(name, StatsReport)` pairs, one row per name in
    the given order, with percentage reductions relative to the first row.
    """
    rows = []
    for name, report in named_reports:
        check_consistency(report)
        row = {"variant": name}
        row.update(pd.json_normalize(report.to_dict(), sep=".").iloc[0].to_dict())
        rows.append(row)
    frame = pd.DataFrame(rows)
    for column, source in REDUCTION_COLUMNS.items():
        baseline = int(frame[source].iloc[0])
        frame[column] = [reduction_pct(baseline, int(v)) for v in frame[source]]
    return frame


def emit_frame(frame: pd.DataFrame, fmt: Union[ReportFormat, str]) -> str:
    fmt = ReportFormat(fmt)
    if fmt is ReportFormat.JSON:
        records = json.loads(frame.to_json(orient="records"))
        return json.dumps(records, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    return frame.to_csv(index=False, lineterminator="\n")
