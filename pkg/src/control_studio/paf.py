"""Prosodic acoustic feature (PAF) domain types.

A PAF sequence is a (T, 3) float matrix, stream order fixed globally as
(f0, energy, duration). A driving set is the unordered bag of values a user
has pinned, each tagged with its phone position and feature stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STREAMS = ("f0", "energy", "duration")
STREAM_INDEX = {name: i for i, name in enumerate(STREAMS)}

__all__ = ["STREAMS", "STREAM_INDEX", "DrivingValue", "DrivingSet", "DrivingSetError"]


class DrivingSetError(ValueError):
    """A driving set violates its invariants for the target sentence."""


@dataclass(frozen=True)
class DrivingValue:
    position: int
    stream: str
    value: float

    @property
    def stream_index(self) -> int:
        return STREAM_INDEX[self.stream]

    def slot(self) -> tuple[int, int]:
        return (self.position, self.stream_index)


class DrivingSet:
    """Unordered bag of pinned values; no two may share (position, stream)."""

    def __init__(self, values=()):
        self.values: list[DrivingValue] = []
        seen: set[tuple[int, int]] = set()
        for dv in values:
            if dv.stream not in STREAM_INDEX:
                raise DrivingSetError(f"unknown stream {dv.stream!r}")
            key = dv.slot()
            if key in seen:
                raise DrivingSetError(
                    f"duplicate driving value at position {dv.position}, stream {dv.stream}")
            if not np.isfinite(dv.value):
                raise DrivingSetError(
                    f"non-finite driving value at position {dv.position}, stream {dv.stream}")
            seen.add(key)
            self.values.append(dv)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def validate_for_length(self, t: int) -> None:
        for dv in self.values:
            if not (0 <= dv.position < t):
                raise DrivingSetError(
                    f"driving position {dv.position} outside sentence of length {t}")
        if len(self.values) > 3 * t:
            raise DrivingSetError(f"driving set of size {len(self.values)} exceeds 3*T={3 * t}")

    def slots(self) -> set[tuple[int, int]]:
        return {dv.slot() for dv in self.values}

    @classmethod
    def from_paf(cls, paf: np.ndarray, slots=None) -> "DrivingSet":
        """Extract driving values from a PAF matrix.

        ``slots`` is an iterable of (position, stream_index); None takes all
        3*T slots.
        """
        t = paf.shape[0]
        if slots is None:
            slots = [(pos, s) for pos in range(t) for s in range(3)]
        return cls([DrivingValue(pos, STREAMS[s], float(paf[pos, s])) for pos, s in slots])
