"""
Experiment Runner
TLB Hierarchy Simulator
--------------------------------------------------------

Drives whole simulations from a RunConfig:

- run              one config, one trace, one StatsReport
- sweep            several named MMU overrides on the identical trace
- compare_presets  the five reference configurations on one trace

Sweeps materialise the trace once and hand the same record list to every
variant. Variants may run in a process pool; each owns its Mmu and page
table, and rows come back in variant order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from core.config import RunConfig, merge_config, with_overrides
from core.errors import ConfigError, SimulatorError
from core.mmu import Mmu
from core.pagetable import PageTable
from core.presets import PRESET_NAMES, get_presets
from core.stats import REDUCTION_COLUMNS, StatsReport, check_consistency, comparison_frame, write_report
from core.trace import AccessRecord, generate, read_trace, trace_spec_to_dict

logger = logging.getLogger(__name__)

VARIANT_KEYS = {
    "name",
    "preset",
    "itlb",
    "dtlb",
    "l2",
    "superpage_entries",
    "latencies",
    "demand_paging",
}
PRESET_COLUMNS = [
    "variant",
    "derived.itlb_mpki",
    "derived.dtlb_mpki",
    "derived.l1_combined_mpki",
    "derived.l2_mpki",
    "derived.walks_pki",
    "derived.cpi",
]


def iter_records(config: RunConfig) -> Iterator[AccessRecord]:
    """The configured trace: a generator spec or a file."""
    if config.trace_spec is not None:
        logger.info("generating trace %s", trace_spec_to_dict(config.trace_spec))
        return generate(config.trace_spec)
    if config.trace_path is not None:
        return read_trace(config.trace_path)
    raise ConfigError("trace", "required: a trace file path or a generator object")


def build_mmu(config: RunConfig) -> Mmu:
    """A fresh Mmu over a page table with the configured mappings preloaded."""
    page_table = PageTable(data_frame_base=config.data_frame_base)
    for mapping in config.mappings:
        page_table.map_region(mapping.base, mapping.size, mapping.count)
        logger.info(
            "preloaded %d x %s from 0x%x", mapping.count, mapping.size.label, mapping.base
        )
    return Mmu(config.mmu, page_table)


def run(
    config: RunConfig,
    records: Optional[Iterable[AccessRecord]] = None,
    *,
    write_output: bool = True,
) -> StatsReport:
    """
    Simulate a whole trace and return its report.

    Parameters
    ----------
    config : RunConfig
        Validated run configuration.
    records : iterable of AccessRecord, optional
        Records to simulate instead of the configured trace.
    write_output : bool, optional
        Write the report to `config.output_path` when one is set.

    Raises
    ------
    SimulatorError
        On trace, translation or consistency errors.
    OSError
        If the trace or the output file cannot be opened.
    """
    logger.info("run %s: starting", config.name)
    mmu = build_mmu(config)
    source = records if records is not None else iter_records(config)
    done = 0
    try:
        for record in source:
            mmu.step(record)
            done += 1
    except SimulatorError:
        logger.error("run %s: failed after %d records", config.name, done)
        raise

    report = mmu.report()
    check_consistency(report)
    logger.info(
        "run %s: %d records, %d cycles, %d walks",
        config.name, report.instructions, report.total_cycles, report.walks,
    )
    if write_output and config.output_path:
        write_report(report, config.output_path, config.output_format)
    return report


# -------------------------------------------------------------------
# Sweeps
# -------------------------------------------------------------------


def _variant_overrides(index: int, variant: Mapping[str, Any]) -> Dict[str, Any]:
    unknown = sorted(set(variant) - VARIANT_KEYS)
    if unknown:
        raise ConfigError(
            f"variants[{index}].{unknown[0]}",
            "variants may only override the hierarchy (trace and seed are shared)",
        )
    overrides = {k: v for k, v in variant.items() if k not in ("name", "preset")}
    if "preset" in variant:
        overrides = merge_config(get_presets().get(str(variant["preset"])).definition, overrides)
    overrides["name"] = str(variant["name"])
    return overrides


def _run_variant(payload: Tuple[RunConfig, List[AccessRecord]]) -> StatsReport:
    config, records = payload
    return run(config, records, write_output=False)


def sweep(
    base_config: RunConfig,
    variants: Optional[Sequence[Mapping[str, Any]]] = None,
    *,
    jobs: int = 1,
) -> pd.DataFrame:
    """
    Run every variant on the identical trace and seed.

    Parameters
    ----------
    base_config : RunConfig
        Shared trace, seed, mappings and defaults.
    variants : sequence of mapping, optional
        `{"name": ..., **overrides}`; defaults to `base_config.variants`.
    jobs : int, optional
        Worker processes; 1 runs in-process.

    Returns
    -------
    pandas.DataFrame
        One row per variant in the given order, with percentage reductions
        relative to the first.

    Raises
    ------
    ConfigError
        With fewer than two variants or an invalid override.
    """
    variants = list(variants if variants is not None else base_config.variants)
    if len(variants) < 2:
        raise ConfigError("variants", f"a sweep needs at least 2 variants, got {len(variants)}")
    if jobs < 1:
        raise ConfigError("jobs", f"must be >= 1, got {jobs}")

    configs = [with_overrides(base_config, _variant_overrides(i, v)) for i, v in enumerate(variants)]
    records = list(iter_records(base_config))
    logger.info("sweep: %d variants over %d records", len(configs), len(records))

    if jobs == 1:
        reports = [_run_variant((config, records)) for config in configs]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(configs))) as pool:
            reports = list(pool.map(_run_variant, [(config, records) for config in configs]))

    frame = comparison_frame([(config.name, report) for config, report in zip(configs, reports)])
    for column in REDUCTION_COLUMNS:
        for name, value in zip(frame["variant"], frame[column]):
            if value < 0:
                logger.warning("sweep: %s has negative %s (%.1f%%)", name, column, value)
    return frame


def compare_presets(base_config: RunConfig, *, jobs: int = 1) -> pd.DataFrame:
    """
    Run the five reference configurations on one trace.

    Reports per-side MPKI, latency-model CPI and the latency-model speedup
    over configuration I. The speedup is relative to this model only.
    """
    registry = get_presets()
    variants = [{"name": name, "preset": name} for name in PRESET_NAMES if name in registry.presets]
    frame = sweep(base_config, variants, jobs=jobs)
    table = frame[PRESET_COLUMNS].rename(
        columns={c: c.split(".", 1)[1] for c in PRESET_COLUMNS if c.startswith("derived.")}
    )
    table = table.rename(columns={"variant": "preset"})
    baseline_cpi = float(table["cpi"].iloc[0])
    table["speedup_vs_I_pct"] = [
        round((baseline_cpi / float(cpi) - 1.0) * 100.0, 2) for cpi in table["cpi"]
    ]
    return table.reset_index(drop=True)
