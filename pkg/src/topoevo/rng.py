"""Seeded random streams.

All randomness comes from numpy's PCG64 generator.  Streams are derived from
a master seed through ``SeedSequence`` spawn keys, so a stream is fully named
by ``(master_seed, repetition, component)`` and adding or skipping draws in
one component never shifts another.
"""

from __future__ import annotations

import numpy as np

# Spawn-key slots for the per-repetition components.
POOL = 0
EXPANSION = 1
OPT = 2
EVO = 3
TSP = 4

COMPONENTS = {"pool": POOL, "expansion": EXPANSION, "opt": OPT, "evo": EVO, "tsp": TSP}


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the substream named by `key` under `master_seed`."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def component_stream(master_seed: int, repetition: int, component: str | int, *extra: int) -> np.random.Generator:
    slot = COMPONENTS[component] if isinstance(component, str) else int(component)
    return stream(master_seed, repetition, slot, *extra)


def as_generator(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(0 if rng is None else int(rng))
