"""
Preset Registry
TLB Hierarchy Simulator
--------------------------------------------------------

Loads the five reference hierarchy configurations from
apps/config/tlb_presets.yaml and resolves them into MmuConfig values.

Also home of `parse_geometry`, the one parser for geometry objects, so
presets and run configs validate geometries identically.

The registry is loaded once per process and shared.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional

import pandas as pd

from core.errors import ConfigError
from core.helpers import CONFIG_DIR, load_structured_file, parse_int
from core.mmu import LatencyModel, MmuConfig
from core.stats import format_bytes, reach
from core.sv39 import PageSize
from core.tlb_core import ReplacementPolicy, TlbGeometry

logger = logging.getLogger(__name__)

PRESETS_PATH = os.path.join(CONFIG_DIR, "tlb_presets.yaml")
PRESET_NAMES = ("I", "II", "III", "IV", "V")
GEOMETRY_KEYS = {"sets", "entries", "ways", "policy", "seed"}


def parse_geometry(data: Any, key: str, default_seed: int = 1) -> TlbGeometry:
    """
    Parse `{ways, sets|entries, policy?, seed?}` into a TlbGeometry.

    Raises
    ------
    ConfigError
        Naming `key` (e.g. "l2.sets") and the reason.
    """
    if not isinstance(data, Mapping):
        raise ConfigError(key, "expected an object with ways and sets or entries")
    unknown = sorted(set(data) - GEOMETRY_KEYS)
    if unknown:
        raise ConfigError(f"{key}.{unknown[0]}", "unknown key")
    if "ways" not in data:
        raise ConfigError(f"{key}.ways", "required")
    ways = parse_int(data["ways"], f"{key}.ways")
    if ("sets" in data) == ("entries" in data):
        raise ConfigError(key, "give exactly one of sets or entries")
    if "sets" in data:
        sets = parse_int(data["sets"], f"{key}.sets")
    else:
        entries = parse_int(data["entries"], f"{key}.entries")
        if ways < 1 or entries % ways:
            raise ConfigError(f"{key}.entries", f"{entries} is not a multiple of ways={ways}")
        sets = entries // ways
    policy_name = str(data.get("policy", ReplacementPolicy.PSEUDO_LRU.value)).lower()
    try:
        policy = ReplacementPolicy(policy_name)
    except ValueError as exc:
        raise ConfigError(f"{key}.policy", f"expected plru or random, got {policy_name!r}") from exc
    seed = parse_int(data.get("seed", default_seed), f"{key}.seed")
    try:
        return TlbGeometry(sets=sets, ways=ways, policy=policy, seed=seed)
    except ConfigError as exc:
        raise ConfigError(f"{key}.{exc.key}", exc.reason) from exc


@dataclass(frozen=True)
class Preset:
    """One reference configuration as written in the presets file."""

    name: str
    description: str
    definition: Dict[str, Any]

    def resolve(
        self,
        seed: int = 1,
        latencies: Optional[LatencyModel] = None,
        superpage_entries: int = 4,
    ) -> MmuConfig:
        l2 = self.definition.get("l2")
        return MmuConfig(
            itlb=parse_geometry(self.definition["itlb"], f"preset {self.name}.itlb", seed),
            dtlb=parse_geometry(self.definition["dtlb"], f"preset {self.name}.dtlb", seed + 1),
            l2=parse_geometry(l2, f"preset {self.name}.l2", seed + 2) if l2 is not None else None,
            superpage_entries=superpage_entries,
            latencies=latencies or LatencyModel(),
        )

    @property
    def mmu(self) -> MmuConfig:
        return self.resolve()


class PresetRegistry:
    """Reads the presets file once and serves Preset objects by name."""

    def __init__(self, path: str = PRESETS_PATH):
        self.path = path
        self.presets: Dict[str, Preset] = {}
        self._load()

    def _load(self) -> None:
        entries = load_structured_file(self.path) or []
        if not isinstance(entries, list):
            raise ConfigError(self.path, "expected a list of presets")
        for item in entries:
            if not isinstance(item, Mapping) or "name" not in item:
                raise ConfigError(self.path, f"preset without a name: {item!r}")
            name = str(item["name"])
            definition = {k: item.get(k) for k in ("itlb", "dtlb", "l2")}
            preset = Preset(name, str(item.get("description", "")), definition)
            preset.resolve()  # validate eagerly
            self.presets[name] = preset
        logger.debug("loaded %d presets from %s", len(self.presets), self.path)

    def names(self) -> List[str]:
        return list(self.presets)

    def get(self, name: str) -> Preset:
        try:
            return self.presets[str(name)]
        except KeyError as exc:
            raise ConfigError("preset", f"unknown preset {name!r}; expected one of {self.names()}") from exc

    def table(self) -> pd.DataFrame:
        """Associativity, entries and reach of every preset, in file order."""
        rows = []
        for preset in self.presets.values():
            mmu = preset.mmu
            row: Dict[str, Any] = {"preset": preset.name, "description": preset.description}
            for label, geometry in (("dtlb", mmu.dtlb), ("itlb", mmu.itlb), ("l2", mmu.l2)):
                if geometry is None:
                    row[f"{label}"] = "-"
                    row[f"{label}_sets"] = 0
                    row[f"{label}_reach"] = "-"
                    continue
                row[f"{label}"] = geometry.describe()
                row[f"{label}_sets"] = geometry.sets
                row[f"{label}_reach"] = format_bytes(reach(geometry.entries, PageSize.BASE_4K))
            rows.append(row)
        return pd.DataFrame(rows)


# --------------------------------------------------------------
# Shared accessor
# --------------------------------------------------------------
_registry_instance: Optional[PresetRegistry] = None


def get_presets(path: Optional[str] = None) -> PresetRegistry:
    """
    Accessor for a process-wide registry. Passing a path other than the
    default builds a separate, uncached registry.
    """
    global _registry_instance
    if path is not None and path != PRESETS_PATH:
        return PresetRegistry(path)
    if _registry_instance is None:
        _registry_instance = PresetRegistry()
    return _registry_instance
