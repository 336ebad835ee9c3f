"""Deterministic seed derivation.

Every random draw in a run is seeded from a canonical text rendering of its
coordinates hashed with 64-bit FNV-1a, so external learners can reproduce the
values in any language::

    master=<int>;params=<params_id>;repeat=<0|1>;learner=<i>;iteration=<t>

FNV-1a is applied to the UTF-8 bytes of that string (offset basis
0xcbf29ce484222325, prime 0x100000001b3, arithmetic mod 2**64).
"""
from __future__ import annotations

from dataclasses import dataclass

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def format_decay(d: float) -> str:
    return f"{d:.6f}"


def params_id(A: int, T: int, d: float, oversample: bool, seed_mode: str) -> str:
    """Canonical parameter identifier (fixed key order and number format)."""
    return f"A={int(A)},T={int(T)},d={format_decay(d)},o={int(bool(oversample))},mode={seed_mode}"


@dataclass(frozen=True)
class SeedCoordinates:
    master_seed: int
    params_id: str
    is_repeat: bool
    learner_index: int
    iteration: int

    def canonical(self) -> str:
        return (f"master={int(self.master_seed)};params={self.params_id};"
                f"repeat={int(bool(self.is_repeat))};learner={int(self.learner_index)};"
                f"iteration={int(self.iteration)}")


def derive_seed(coords: SeedCoordinates) -> int:
    return fnv1a_64(coords.canonical().encode("utf-8"))


def stream_seed(coords: SeedCoordinates, purpose: str, *index) -> int:
    """Seed for a named random stream hanging off a coordinate tuple."""
    text = coords.canonical() + f";stream={purpose}"
    if index:
        text += ";" + ",".join(str(i) for i in index)
    return fnv1a_64(text.encode("utf-8"))
