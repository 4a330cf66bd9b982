"""Island-model evolutionary search with a per-island MAP-Elites archive.

Behavior axes in genotype space: binned genotype norm x binned distance to
parent, 5 bins each, with cell-elitist replacement. Parent selection mixes
exploration (random from island, 20%), exploitation (global elite archive,
70%), and fitness-proportionate island sampling (10%). Every
migration_interval generations an island copies its top candidate to both
ring neighbours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import Candidate, Directive, MetricDirection, StepRecord
from .base import ProposalRequest, RunContext, Strategy

GRID_BINS = 5
NORM_BIN_EDGES = (0.75, 1.5, 2.5, 3.5)
DIST_BIN_EDGES = (0.1, 0.5, 1.5, 2.5)

EXPLORATION_CUT = 0.2
EXPLOITATION_CUT = 0.9


@dataclass
class CellEntry:
    candidate: Candidate
    val: float
    order: int
    cell: tuple[int, int]


@dataclass
class Island:
    grid: dict[tuple[int, int], CellEntry] = field(default_factory=dict)
    generation: int = 0


def behavior_cell(genotype, parent_genotype) -> tuple[int, int]:
    g = np.asarray(genotype, dtype=float)
    p = np.asarray(parent_genotype, dtype=float)
    i = int(np.searchsorted(NORM_BIN_EDGES, float(np.linalg.norm(g))))
    j = int(np.searchsorted(DIST_BIN_EDGES, float(np.linalg.norm(g - p))))
    return i, j


class EvolveStrategy(Strategy):
    name = "evolve"

    def __init__(self, num_islands: int = 4, migration_interval: int = 5,
                 elite_size: int = 10):
        if num_islands < 2 or migration_interval < 1 or elite_size < 1:
            raise ValueError("invalid evolve configuration")
        self.num_islands = num_islands
        self.migration_interval = migration_interval
        self.elite_size = elite_size

    def bind(self, ctx: RunContext):
        super().bind(ctx)
        self.islands = [Island() for _ in range(self.num_islands)]
        # flat global archive of the best candidates seen anywhere
        self.elites: list[CellEntry] = []
        self.current = 0
        self.pending_island = 0
        self.pending_parent = ctx.baseline
        self.order = 0

    def _goodness(self, val: float) -> float:
        return val if self.ctx.direction is MetricDirection.MAXIMIZE else -val

    def _island_entries(self, island: Island) -> list[CellEntry]:
        return sorted(island.grid.values(), key=lambda e: e.order)

    def _pick_parent(self, island: Island) -> Candidate:
        rng = self.ctx.rng
        entries = self._island_entries(island)
        u = rng.random()
        if u < EXPLORATION_CUT:
            return entries[int(rng.integers(len(entries)))].candidate
        if u < EXPLOITATION_CUT:
            pool = self.elites or entries
            return pool[int(rng.integers(len(pool)))].candidate
        weights = np.array([self._goodness(e.val) for e in entries])
        weights = weights - weights.min()
        if weights.sum() <= 0:
            return entries[int(rng.integers(len(entries)))].candidate
        probs = weights / weights.sum()
        return entries[int(rng.choice(len(entries), p=probs))].candidate

    def decide(self) -> ProposalRequest:
        island = self.islands[self.current]
        self.pending_island = self.current
        self.current = (self.current + 1) % self.num_islands
        if not island.grid:
            self.pending_parent = self.ctx.baseline
            return ProposalRequest(parent=self.ctx.baseline, directive=Directive.DRAFT)
        parent = self._pick_parent(island)
        self.pending_parent = parent
        return ProposalRequest(parent=parent, directive=Directive.REFINE)

    def _place(self, island: Island, entry: CellEntry):
        # the behavior descriptor travels with the candidate across islands
        incumbent = island.grid.get(entry.cell)
        if incumbent is None or self._goodness(entry.val) > self._goodness(incumbent.val):
            island.grid[entry.cell] = entry

    def _update_elites(self, entry: CellEntry):
        if any(e.candidate.candidate_id == entry.candidate.candidate_id
               for e in self.elites):
            return
        self.elites.append(entry)
        self.elites.sort(key=lambda e: (-self._goodness(e.val), e.order))
        del self.elites[self.elite_size:]

    def _island_top(self, island: Island) -> CellEntry | None:
        best = None
        for entry in self._island_entries(island):
            if best is None or self._goodness(entry.val) > self._goodness(best.val):
                best = entry
        return best

    def observe(self, record: StepRecord, candidate: Candidate):
        island = self.islands[self.pending_island]
        island.generation += 1
        if record.ok:
            self.order += 1
            entry = CellEntry(
                candidate=candidate, val=record.val_metric, order=self.order,
                cell=behavior_cell(candidate.genotype, self.pending_parent.genotype))
            self._place(island, entry)
            self._update_elites(entry)
        if island.generation % self.migration_interval == 0:
            top = self._island_top(island)
            if top is not None:
                left = self.islands[(self.pending_island - 1) % self.num_islands]
                right = self.islands[(self.pending_island + 1) % self.num_islands]
                for neighbour in (left, right):
                    self._place(neighbour, top)
