"""Which locations join the network, and when."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Collection, Iterator

import numpy as np

from .geometry import LocationPool, distance_matrix
from .rng import stream


class ExpansionModel(str, enum.Enum):
    RANDOM = "random"
    GRADUAL = "gradual"


class PoolExhausted(ValueError):
    pass


def _available(pool: LocationPool, current: Collection[int], count: int) -> list[int]:
    if count < 0:
        raise ValueError("count must be non-negative")
    unknown = set(current) - set(pool.ids)
    if unknown:
        raise ValueError(f"current nodes not in pool: {sorted(unknown)[:5]}")
    free = sorted(set(pool.ids) - set(current))
    if count > len(free):
        raise PoolExhausted(f"asked for {count} new locations, only {len(free)} left in the pool")
    return free


def random_step(pool: LocationPool, current: Collection[int], count: int,
                rng: np.random.Generator) -> list[int]:
    """`count` ids drawn uniformly without replacement from the unused pool, in draw order."""
    free = _available(pool, current, count)
    if count == 0:
        return []
    picks = rng.choice(len(free), size=count, replace=False)
    return [free[i] for i in picks]


def gradual_step(pool: LocationPool, current: Collection[int], count: int) -> list[int]:
    """Repeatedly take the free location nearest to everything chosen so far.

    Distance ties go to the smaller id.
    """
    free = _available(pool, current, count)
    if not current:
        raise ValueError("gradual expansion needs at least one existing node")
    if count == 0:
        return []
    anchors = [pool[i] for i in sorted(current)]
    cand = [pool[i] for i in free]
    # nearest anchor distance for every free candidate, updated as picks land
    d = distance_matrix(anchors + cand)[: len(anchors), len(anchors):].min(axis=0)
    ids = np.array(free)
    xy = np.array([(p.x, p.y) for p in cand])
    taken = np.zeros(len(free), dtype=bool)
    out = []
    for _ in range(count):
        masked = np.where(taken, np.inf, d)
        k = int(np.lexsort((ids, masked))[0])
        taken[k] = True
        out.append(int(ids[k]))
        c = cand[k]
        d = np.minimum(d, np.hypot(xy[:, 0] - c.x, xy[:, 1] - c.y))
    return out


def step(model: ExpansionModel | str, pool: LocationPool, current: Collection[int], count: int,
         rng: np.random.Generator) -> list[int]:
    if ExpansionModel(model) is ExpansionModel.RANDOM:
        return random_step(pool, current, count, rng)
    return gradual_step(pool, current, count)


@dataclass(frozen=True)
class ExpansionFactor:
    n: int
    m: int

    @property
    def rho(self) -> float:
        return (self.n + self.m) / self.n

    @property
    def exact(self) -> Fraction:
        return Fraction(self.n + self.m, self.n)


def expansion_factor(n: int, m: int) -> ExpansionFactor:
    if n < 1:
        raise ValueError("expansion factor needs n >= 1")
    if m < 0:
        raise ValueError("m must be non-negative")
    return ExpansionFactor(n, m)


def added_for(n: int, rho: float) -> int:
    """New-node count m for growing n nodes by factor rho: floor(rho*n) - n."""
    if rho < 1:
        raise ValueError("rho must be >= 1")
    # guard against 1.25*16 landing a hair under 20
    return int(math.floor(rho * n + 1e-9)) - n


def initial_nodes(pool: LocationPool, model: ExpansionModel | str, rng: np.random.Generator,
                  size: int = 3) -> list[int]:
    """Uniformly random first location, then `size - 1` more picks under the model."""
    if size < 1:
        raise ValueError("initial size must be >= 1")
    if size > len(pool):
        raise PoolExhausted(f"initial size {size} exceeds pool of {len(pool)}")
    first = pool.ids[int(rng.integers(len(pool)))]
    return [first] + step(model, pool, [first], size - 1, rng)


@dataclass(frozen=True)
class ExpansionPlan:
    """Initial node set followed by growth steps of the given sizes."""

    model: ExpansionModel
    step_counts: tuple[int, ...]
    pool: LocationPool
    seed: int
    initial_size: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", ExpansionModel(self.model))
        object.__setattr__(self, "step_counts", tuple(int(c) for c in self.step_counts))
        if not self.step_counts:
            raise ValueError("an expansion plan needs at least one step")
        if any(c < 1 for c in self.step_counts):
            raise ValueError("step counts must be positive")
        if self.initial_size + sum(self.step_counts) > len(self.pool):
            raise PoolExhausted("plan needs more locations than the pool holds")

    @classmethod
    def single_node(cls, model, pool: LocationPool, final_size: int, seed: int,
                    initial_size: int = 3) -> "ExpansionPlan":
        return cls(ExpansionModel(model), (1,) * (final_size - initial_size), pool, seed, initial_size)

    def environments(self, rng: np.random.Generator | None = None) -> Iterator[tuple[list[int], list[int]]]:
        """Yield (all nodes, newly added nodes) per environment, the initial set first."""
        if rng is None:
            rng = stream(self.seed)
        current = initial_nodes(self.pool, self.model, rng, self.initial_size)
        yield list(current), list(current)
        for count in self.step_counts:
            new = step(self.model, self.pool, current, count, rng)
            current = current + new
            yield list(current), new


def node_order(pool: LocationPool, model: ExpansionModel | str, rng: np.random.Generator,
               total: int, initial_size: int = 3) -> list[int]:
    """The first `total` locations in the order a one-at-a-time expansion adds them."""
    nodes = initial_nodes(pool, model, rng, initial_size)
    if total > initial_size:
        nodes += step(model, pool, nodes, total - initial_size, rng)
    return nodes[:total]

