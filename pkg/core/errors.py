"""
Simulator Errors
TLB Hierarchy Simulator
--------------------------------------------------------

One exception hierarchy for the whole package. Every error the simulator
raises on purpose derives from SimulatorError, so the command-line front
end can separate modelling failures from programming errors.

ConfigError and ParseError also derive from ValueError: both describe
bad input rather than a broken simulation.
"""

from __future__ import annotations

from typing import Optional


class SimulatorError(Exception):
    """Base class for every error raised deliberately by the simulator."""


class CanonicalityError(SimulatorError):
    """A virtual address whose bits 63..39 do not all equal bit 38."""

    def __init__(self, va: int):
        self.va = va
        super().__init__(f"non-canonical Sv39 address 0x{va:x}")

    def __reduce__(self):
        return type(self), (self.va,)


class AlignmentError(SimulatorError):
    """A superpage leaf whose PPN has nonzero low bits at its level."""

    def __init__(self, ppn: int, level: int):
        self.ppn = ppn
        self.level = level
        super().__init__(f"misaligned superpage leaf ppn=0x{ppn:x} at level {level}")

    def __reduce__(self):
        return type(self), (self.ppn, self.level)


class PageFault(SimulatorError):
    """A walk reached an invalid PTE."""

    def __init__(self, va: int, level: int):
        self.va = va
        self.level = level
        super().__init__(f"page fault at va 0x{va:x} (invalid PTE at level {level})")

    def __reduce__(self):
        return type(self), (self.va, self.level)


class MappingConflict(SimulatorError):
    """map_page overlaps an existing mapping of a different page size."""


class ParseError(SimulatorError, ValueError):
    """A trace line that does not match the trace grammar."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        self.message = message
        super().__init__(f"{where}{message}")

    def __reduce__(self):
        return type(self), (self.message, self.line_no)


class ConfigError(SimulatorError, ValueError):
    """A config schema violation. The message names the key and the reason."""

    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")

    def __reduce__(self):
        return type(self), (self.key, self.reason)


class UndefinedMetric(SimulatorError):
    """A metric whose denominator is zero."""


class InternalConsistencyError(SimulatorError):
    """Counters that violate a conservation invariant; the report is refused."""
