"""
Run Configuration
TLB Hierarchy Simulator
--------------------------------------------------------

Parses and validates run configs (JSON, or YAML with the same schema)
into RunConfig values. See docs/about_config_schema.md for the schema.

Resolution order:
  1) the named preset, if any, supplies itlb / dtlb / l2
  2) explicit keys in the file are merged over it (a geometry that names
     sets or entries replaces the preset's size, not just its ways)
  3) defaults fill the rest: latencies (1, 2, 20), 4 superpage entries,
     demand paging on, data frames from 0x1000, seed 1, JSON output

Unknown keys are rejected at every level.
"""

from __future__ import annotations

import copy
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

from core.errors import ConfigError
from core.helpers import load_structured_file, parse_int
from core.mmu import LatencyModel, MmuConfig
from core.pagetable import DEFAULT_DATA_FRAME_BASE
from core.presets import get_presets, parse_geometry
from core.stats import ReportFormat
from core.sv39 import PageSize
from core.trace import TraceSpec, trace_spec_from_dict

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {
    "name",
    "preset",
    "itlb",
    "dtlb",
    "l2",
    "superpage_entries",
    "latencies",
    "demand_paging",
    "data_frame_base",
    "trace",
    "mappings",
    "seed",
    "output",
    "variants",
}
GEOMETRY_SECTIONS = ("itlb", "dtlb", "l2")
LATENCY_KEYS = {"l1_hit_cycles", "l2_extra_cycles", "mem_access_cycles"}
MAPPING_KEYS = {"base", "size", "count"}
OUTPUT_KEYS = {"path", "format"}


@dataclass(frozen=True)
class MappingPreload:
    """`count` consecutive pages of `size` mapped from `base` before the run."""

    base: int
    size: PageSize
    count: int


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run: hierarchy, workload, mappings, seed and output."""

    name: str
    mmu: MmuConfig
    trace_path: Optional[str] = None
    trace_spec: Optional[TraceSpec] = None
    mappings: Tuple[MappingPreload, ...] = ()
    seed: int = 1
    data_frame_base: int = DEFAULT_DATA_FRAME_BASE
    output_path: Optional[str] = None
    output_format: ReportFormat = ReportFormat.JSON
    variants: Tuple[Dict[str, Any], ...] = ()
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.trace_path is not None and self.trace_spec is not None:
            raise ConfigError("trace", "give a trace path or a generator, not both")

    @property
    def has_trace(self) -> bool:
        return self.trace_path is not None or self.trace_spec is not None


# -------------------------------------------------------------------
# Merging
# -------------------------------------------------------------------


def _merge_geometry(base: Optional[Mapping[str, Any]], override: Any) -> Any:
    if override is None or base is None or not isinstance(override, Mapping):
        return copy.deepcopy(override)
    merged = dict(base)
    if "sets" in override or "entries" in override:
        merged.pop("sets", None)
        merged.pop("entries", None)
    merged.update(override)
    return merged


def merge_config(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Deep-merge `overrides` into a copy of `base`.

    Geometry sections follow the sets/entries replacement rule; other
    objects merge key by key; everything else is replaced.
    """
    out = copy.deepcopy(dict(base))
    for key, value in overrides.items():
        if key in GEOMETRY_SECTIONS:
            out[key] = _merge_geometry(out.get(key), value)
        elif isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def expand_preset(raw: Mapping[str, Any]) -> Dict[str, Any]:
    """Replace a `preset` key by its geometry sections, keeping explicit keys on top."""
    raw = dict(raw)
    name = raw.pop("preset", None)
    if name is None:
        return raw
    preset = get_presets().get(str(name))
    expanded = merge_config(preset.definition, raw)
    expanded.setdefault("name", f"preset {preset.name}")
    return expanded


# -------------------------------------------------------------------
# Parsing
# -------------------------------------------------------------------


def _check_keys(data: Mapping[str, Any], allowed: set, prefix: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}", "unknown key")


def _parse_latencies(data: Any) -> LatencyModel:
    if data is None:
        return LatencyModel()
    if not isinstance(data, Mapping):
        raise ConfigError("latencies", "expected an object")
    _check_keys(data, LATENCY_KEYS, "latencies.")
    return LatencyModel(**{k: parse_int(v, f"latencies.{k}") for k, v in data.items()})


def _parse_mappings(data: Any) -> Tuple[MappingPreload, ...]:
    if data is None:
        return ()
    if not isinstance(data, list):
        raise ConfigError("mappings", "expected a list")
    out: List[MappingPreload] = []
    for i, item in enumerate(data):
        key = f"mappings[{i}]"
        if not isinstance(item, Mapping):
            raise ConfigError(key, "expected an object with base, size, count")
        _check_keys(item, MAPPING_KEYS, f"{key}.")
        for required in MAPPING_KEYS:
            if required not in item:
                raise ConfigError(f"{key}.{required}", "required")
        try:
            size = PageSize.from_label(str(item["size"]))
        except ValueError as exc:
            raise ConfigError(f"{key}.size", str(exc)) from exc
        count = parse_int(item["count"], f"{key}.count")
        if count < 1:
            raise ConfigError(f"{key}.count", "must be >= 1")
        out.append(MappingPreload(parse_int(item["base"], f"{key}.base"), size, count))
    return tuple(out)


def _parse_output(data: Any) -> Tuple[Optional[str], ReportFormat]:
    if data is None:
        return None, ReportFormat.JSON
    if not isinstance(data, Mapping):
        raise ConfigError("output", "expected an object with path and/or format")
    _check_keys(data, OUTPUT_KEYS, "output.")
    try:
        fmt = ReportFormat(str(data.get("format", "json")).lower())
    except ValueError as exc:
        raise ConfigError("output.format", "expected json or csv") from exc
    path = data.get("path")
    return (str(path) if path is not None else None), fmt


def config_from_dict(raw: Mapping[str, Any], base_dir: Optional[str] = None) -> RunConfig:
    """
    Validate a config mapping and apply defaults.

    Relative trace paths are resolved against `base_dir` when given.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("config", "expected a JSON object at the top level")
    _check_keys(raw, TOP_LEVEL_KEYS, "")
    expanded = expand_preset(raw)

    seed = parse_int(expanded.get("seed", 1), "seed")
    for section in ("itlb", "dtlb"):
        if expanded.get(section) is None:
            raise ConfigError(section, "required (or give a preset)")
    l2_raw = expanded.get("l2")

    demand_paging = expanded.get("demand_paging", True)
    if not isinstance(demand_paging, bool):
        raise ConfigError("demand_paging", "must be true or false")

    mmu = MmuConfig(
        itlb=parse_geometry(expanded["itlb"], "itlb", seed),
        dtlb=parse_geometry(expanded["dtlb"], "dtlb", seed + 1),
        l2=parse_geometry(l2_raw, "l2", seed + 2) if l2_raw is not None else None,
        superpage_entries=parse_int(expanded.get("superpage_entries", 4), "superpage_entries"),
        latencies=_parse_latencies(expanded.get("latencies")),
        demand_paging=demand_paging,
    )

    trace = expanded.get("trace")
    trace_path: Optional[str] = None
    trace_spec: Optional[TraceSpec] = None
    if isinstance(trace, str):
        trace_path = trace if base_dir is None or os.path.isabs(trace) else os.path.join(base_dir, trace)
        expanded["trace"] = trace_path
    elif isinstance(trace, Mapping):
        trace_spec = trace_spec_from_dict(trace, default_seed=seed)
    elif trace is not None:
        raise ConfigError("trace", "expected a file path or a generator object")

    variants = expanded.get("variants") or []
    if not isinstance(variants, list) or not all(
        isinstance(v, Mapping) and "name" in v for v in variants
    ):
        raise ConfigError("variants", "expected a list of objects, each with a name")

    output_path, output_format = _parse_output(expanded.get("output"))
    data_frame_base = parse_int(
        expanded.get("data_frame_base", DEFAULT_DATA_FRAME_BASE), "data_frame_base"
    )

    return RunConfig(
        name=str(expanded.get("name", "run")),
        mmu=mmu,
        trace_path=trace_path,
        trace_spec=trace_spec,
        mappings=_parse_mappings(expanded.get("mappings")),
        seed=seed,
        data_frame_base=data_frame_base,
        output_path=output_path,
        output_format=output_format,
        variants=tuple(dict(v) for v in variants),
        raw=expanded,
    )


def load_config(path: str) -> RunConfig:
    """
    Load and validate a run config file.

    Raises
    ------
    ConfigError
        On a missing or unparsable file or any schema violation.
    """
    raw = load_structured_file(path)
    config = config_from_dict(raw if raw is not None else {}, base_dir=os.path.dirname(os.path.abspath(path)))
    logger.info("loaded config %s (%s)", path, config.name)
    return config


def with_overrides(config: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """A new RunConfig with `overrides` deep-merged over `config`."""
    merged = merge_config(config.raw, overrides)
    return config_from_dict(merged)
