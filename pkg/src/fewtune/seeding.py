"""Deterministic, platform-stable RNG derivation."""

from __future__ import annotations

import random


def derived_rng(*parts: int | str) -> random.Random:
    """An RNG seeded from the joined parts; string seeding is stable across runs."""
    return random.Random(":".join(str(p) for p in parts))


def derived_seed(*parts: int | str) -> int:
    return derived_rng(*parts).getrandbits(32)
