"""Exact event-driven simulation of the birth-death process on a torus.

Each point dies at rate ``mortality + sum of the competition kernel over its
neighbours`` and independently undergoes fission at the constant per-entity
rate given by the fission kernel's total mass.  The simulation is a direct
kinetic Monte Carlo scheme: exponential waiting times from the total event
rate, category and subject selection proportional to rates, then an
incremental update of the cached rates of every point within the competition
range of each removed or inserted position.

A cell list sized to the interaction range backs all neighbour queries, so a
single event costs O(local density) rather than O(N).  Victim selection for
deaths goes through per-cell aggregated death rates (linear scan over cells,
then over the chosen cell's residents).  Caches are rebuilt from scratch at a
fixed event cadence to cancel floating-point drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np
from scipy.spatial import cKDTree

from .kernels import KernelSet, sample_offspring

# Full cache rebuild cadence (events); bounds incremental float drift.
REBUILD_INTERVAL = 1 << 16

_INITIAL_CAPACITY = 64
_EMPTY_IDS = np.empty(0, dtype=np.int64)
_EMPTY_VALS = np.empty(0)


@dataclass(frozen=True)
class TorusGeometry:
    """Periodic box [0, side)^dim with the minimal-image metric."""

    dim: int
    side: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"supported dimensions are 1 and 2, got {self.dim}")
        if not self.side > 0:
            raise ValueError(f"torus side must be > 0, got {self.side}")

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Map coordinates into [0, side); guards against mod returning side."""
        out = np.mod(points, self.side)
        out[out >= self.side] = 0.0
        return out

    def min_image(self, delta: np.ndarray) -> np.ndarray:
        """Minimal-image representative of displacement(s) ``delta``."""
        return delta - self.side * np.round(delta / self.side)

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        d = self.min_image(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return float(np.linalg.norm(d))


def validate_geometry(geom: TorusGeometry, kernels: KernelSet) -> None:
    """The torus must hold at least four interaction ranges per side."""
    max_range = kernels.max_range
    if geom.side < 4.0 * max_range:
        raise ValueError(
            f"torus side {geom.side} is below 4 * max kernel range = {4.0 * max_range}")
    if kernels.dim != geom.dim:
        raise ValueError(f"kernel dimension {kernels.dim} != geometry dimension {geom.dim}")


class Configuration:
    """Finite point set on the torus with a cell-list index for range queries.

    Points are addressed by integer ids (array slots, reused after removal).
    Cell size is at least the largest kernel range, so any fixed-radius query
    up to that range only needs the 3^dim block of cells around the query
    point.
    """

    def __init__(self, geom: TorusGeometry, min_cell_size: float, capacity: int = _INITIAL_CAPACITY):
        if min_cell_size <= 0:
            raise ValueError("min_cell_size must be > 0")
        self.geom = geom
        self.ncells_axis = max(1, int(math.floor(geom.side / min_cell_size)))
        self.cell_size = geom.side / self.ncells_axis
        self.ncells = self.ncells_axis ** geom.dim
        self._neighbor_cells = self._build_neighbor_table()

        cap = max(capacity, 4)
        self.pos = np.zeros((cap, geom.dim))
        self.alive = np.zeros(cap, dtype=bool)
        self.cell_of = np.zeros(cap, dtype=np.int64)
        self._slot_in_cell = np.zeros(cap, dtype=np.int64)
        self._slot_in_alive = np.zeros(cap, dtype=np.int64)
        self.cell_members: list[list[int]] = [[] for _ in range(self.ncells)]
        self.alive_ids: list[int] = []
        self._free: list[int] = list(range(cap - 1, -1, -1))

    # -- basics ---------------------------------------------------------

    @property
    def n_points(self) -> int:
        return len(self.alive_ids)

    @property
    def capacity(self) -> int:
        return self.pos.shape[0]

    def position(self, point_id: int) -> np.ndarray:
        if not self.alive[point_id]:
            raise KeyError(f"unknown point id {point_id}")
        return self.pos[point_id].copy()

    def positions(self) -> np.ndarray:
        """Copy of all live positions, in insertion bookkeeping order."""
        if not self.alive_ids:
            return np.zeros((0, self.geom.dim))
        return self.pos[np.asarray(self.alive_ids, dtype=np.int64)].copy()

    # -- cell arithmetic --------------------------------------------------

    def _build_neighbor_table(self):
        n = self.ncells_axis
        table = []
        for flat in range(self.ncells):
            coords = self._unflatten(flat)
            seen = set()
            for offs in iter_product((-1, 0, 1), repeat=self.geom.dim):
                seen.add(self._flatten(tuple((c + o) % n for c, o in zip(coords, offs))))
            table.append(sorted(seen))
        return table

    def _flatten(self, coords) -> int:
        flat = 0
        for c in coords:
            flat = flat * self.ncells_axis + c
        return flat

    def _unflatten(self, flat: int):
        coords = []
        for _ in range(self.geom.dim):
            coords.append(flat % self.ncells_axis)
            flat //= self.ncells_axis
        return tuple(reversed(coords))

    def cell_index_of(self, x: np.ndarray) -> int:
        n = self.ncells_axis
        c0 = int(x[0] / self.cell_size)
        if c0 >= n:
            c0 = n - 1
        if self.geom.dim == 1:
            return c0
        c1 = int(x[1] / self.cell_size)
        if c1 >= n:
            c1 = n - 1
        return c0 * n + c1

    # -- mutation ---------------------------------------------------------

    def _grow(self):
        old = self.capacity
        new = old * 2
        self.pos = np.vstack((self.pos, np.zeros((old, self.geom.dim))))
        self.alive = np.concatenate((self.alive, np.zeros(old, dtype=bool)))
        self.cell_of = np.concatenate((self.cell_of, np.zeros(old, dtype=np.int64)))
        self._slot_in_cell = np.concatenate((self._slot_in_cell, np.zeros(old, dtype=np.int64)))
        self._slot_in_alive = np.concatenate((self._slot_in_alive, np.zeros(old, dtype=np.int64)))
        self._free.extend(range(new - 1, old - 1, -1))

    def add(self, x: np.ndarray) -> int:
        """Insert a point (already wrapped into the box); returns its id."""
        if not self._free:
            self._grow()
        pid = self._free.pop()
        self.pos[pid] = x
        self.alive[pid] = True
        cell = self.cell_index_of(x)
        self.cell_of[pid] = cell
        members = self.cell_members[cell]
        self._slot_in_cell[pid] = len(members)
        members.append(pid)
        self._slot_in_alive[pid] = len(self.alive_ids)
        self.alive_ids.append(pid)
        return pid

    def remove(self, pid: int) -> None:
        if not self.alive[pid]:
            raise KeyError(f"unknown point id {pid}")
        cell = self.cell_of[pid]
        members = self.cell_members[cell]
        slot = self._slot_in_cell[pid]
        last = members[-1]
        members[slot] = last
        self._slot_in_cell[last] = slot
        members.pop()

        slot = self._slot_in_alive[pid]
        last = self.alive_ids[-1]
        self.alive_ids[slot] = last
        self._slot_in_alive[last] = slot
        self.alive_ids.pop()

        self.alive[pid] = False
        self._free.append(pid)

    # -- queries ------------------------------------------------------------

    def neighbors_within(self, x: np.ndarray, radius: float, exclude: int = -1):
        """Ids and minimal-image distances of live points within ``radius`` of x.

        Scans only the 3^dim cell block around x; valid for radius up to the
        cell size.
        """
        cell = self.cell_index_of(x)
        cand: list[int] = []
        for c in self._neighbor_cells[cell]:
            cand += self.cell_members[c]
        if not cand:
            return _EMPTY_IDS, _EMPTY_VALS
        ids = np.array(cand, dtype=np.int64)
        if self.geom.dim == 1:
            dist = self.pos[ids, 0] - x[0]
            np.abs(dist, out=dist)
            np.minimum(dist, self.geom.side - dist, out=dist)
        else:
            delta = self.pos[ids] - x
            delta -= self.geom.side * np.round(delta / self.geom.side)
            dist = np.sqrt(np.einsum("ij,ij->i", delta, delta))
        mask = dist <= radius
        if exclude >= 0:
            mask &= ids != exclude
        return ids[mask], dist[mask]


@dataclass(frozen=True)
class EventRecord:
    """One elementary act: a death or a fission."""

    kind: str  # "death" | "fission"
    time: float
    subject: np.ndarray
    offspring: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("death", "fission"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "fission" and (self.offspring is None or len(self.offspring) != 2):
            raise ValueError("fission records carry exactly two offspring")
        if self.kind == "death" and self.offspring is not None:
            raise ValueError("death records carry no offspring")


@dataclass(frozen=True)
class Snapshot:
    """Immutable copy of the point configuration at a fixed time."""

    time: float
    points: np.ndarray
    replica: int | None = None

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass
class RunResult:
    """Snapshots plus an event-log summary for one realisation."""

    snapshots: list[Snapshot]
    extinct: bool
    extinction_time: float | None
    n_deaths: int
    n_fissions: int
    final_population: int
    final_time: float
    replica: int | None = None
    seed: int | None = None

    @property
    def n_events(self) -> int:
        return self.n_deaths + self.n_fissions


class SimState:
    """Live simulation state: configuration, cached rates, clock, rng."""

    def __init__(self, points: np.ndarray, geom: TorusGeometry, kernels: KernelSet, rng):
        validate_geometry(geom, kernels)
        self.geom = geom
        self.kernels = kernels
        self.rng = np.random.default_rng(rng)
        self.t = 0.0
        self.event_count = 0
        self._pending_dt: float | None = None

        cell_floor = max(kernels.max_range, geom.side / 64.0)
        self.config = Configuration(geom, cell_floor, capacity=max(_INITIAL_CAPACITY, 2 * len(points)))
        self.death_rates = np.zeros(self.config.capacity)
        self.cell_rates = np.zeros(self.config.ncells)
        self.total_death_rate = 0.0

        # hot-loop constants
        comp = kernels.competition
        self._comp_range = comp.range_ if comp is not None else 0.0
        self._comp_flat_amp = comp.amplitude if comp is not None and comp.shape == "tophat" else None
        self._b_total = kernels.b_total
        self._m_const = float(kernels.mortality.value) if kernels.mortality.is_constant else None

        pts = geom.wrap(np.asarray(points, dtype=float).reshape(-1, geom.dim))
        for x in pts:
            self.config.add(x)
        self.rebuild_caches()

    # -- rates ---------------------------------------------------------------

    @property
    def n_points(self) -> int:
        return self.config.n_points

    @property
    def total_fission_rate(self) -> float:
        return self.n_points * self.kernels.b_total

    @property
    def total_rate(self) -> float:
        return self.total_death_rate + self.total_fission_rate

    def death_rate(self, point_id: int) -> float:
        """Cached death rate m(x) + sum over in-range neighbours of a(x - y)."""
        if not self.config.alive[point_id]:
            raise KeyError(f"unknown point id {point_id}")
        return float(self.death_rates[point_id])

    def recompute_death_rates(self) -> np.ndarray:
        """Death rates of all live points from scratch (drift oracle).

        Returned in ``config.alive_ids`` order.
        """
        ids = np.asarray(self.config.alive_ids, dtype=np.int64)
        pts = self.config.pos[ids] if len(ids) else np.zeros((0, self.geom.dim))
        rates = np.asarray(self.kernels.mortality.at(pts), dtype=float).reshape(len(ids)).copy()
        comp = self.kernels.competition
        if comp is not None and len(ids) > 1:
            tree = cKDTree(pts, boxsize=[self.geom.side] * self.geom.dim)
            pairs = tree.query_pairs(comp.range_, output_type="ndarray")
            if len(pairs):
                delta = self.geom.min_image(pts[pairs[:, 0]] - pts[pairs[:, 1]])
                dist = np.abs(delta[:, 0]) if self.geom.dim == 1 else np.linalg.norm(delta, axis=1)
                vals = comp.profile(dist)
                np.add.at(rates, pairs[:, 0], vals)
                np.add.at(rates, pairs[:, 1], vals)
        return rates

    def rebuild_caches(self) -> None:
        """Recompute all cached rates from scratch."""
        ids = np.asarray(self.config.alive_ids, dtype=np.int64)
        rates = self.recompute_death_rates()
        self.death_rates[:] = 0.0
        self.cell_rates[:] = 0.0
        if len(ids):
            self.death_rates[ids] = rates
            np.add.at(self.cell_rates, self.config.cell_of[ids], rates)
        self.total_death_rate = float(rates.sum()) if len(ids) else 0.0

    # -- incremental bookkeeping ----------------------------------------------

    def _insert_point(self, x: np.ndarray) -> int:
        mort = self._m_const
        if mort is None:
            mort = float(self.kernels.mortality.at(x))
        gain = 0.0
        if self._comp_range > 0.0:
            ids, dists = self.config.neighbors_within(x, self._comp_range)
            if len(ids):
                amp = self._comp_flat_amp
                if amp is not None:  # tophat: every in-range neighbour adds amp
                    gain = amp * len(ids)
                    self.death_rates[ids] += amp
                    np.add.at(self.cell_rates, self.config.cell_of[ids], amp)
                else:
                    vals = self.kernels.competition.profile(dists)
                    gain = float(vals.sum())
                    self.death_rates[ids] += vals
                    np.add.at(self.cell_rates, self.config.cell_of[ids], vals)
        pid = self.config.add(x)
        if self.death_rates.shape[0] < self.config.capacity:
            extra = self.config.capacity - self.death_rates.shape[0]
            self.death_rates = np.concatenate((self.death_rates, np.zeros(extra)))
        rate = mort + gain
        self.death_rates[pid] = rate
        self.cell_rates[self.config.cell_of[pid]] += rate
        self.total_death_rate += rate + gain
        return pid

    def _remove_point(self, pid: int) -> None:
        x = self.config.pos[pid]
        loss = 0.0
        if self._comp_range > 0.0:
            ids, dists = self.config.neighbors_within(x, self._comp_range, exclude=pid)
            if len(ids):
                cells = self.config.cell_of[ids]
                amp = self._comp_flat_amp
                if amp is not None:
                    loss = amp * len(ids)
                    self.death_rates[ids] -= amp
                    np.subtract.at(self.cell_rates, cells, amp)
                else:
                    vals = self.kernels.competition.profile(dists)
                    loss = float(vals.sum())
                    self.death_rates[ids] -= vals
                    np.subtract.at(self.cell_rates, cells, vals)
                self.cell_rates[cells] = np.maximum(self.cell_rates[cells], 0.0)
        own = float(self.death_rates[pid])
        cell = self.config.cell_of[pid]
        self.cell_rates[cell] -= own
        self.config.remove(pid)
        if not self.config.cell_members[cell]:
            self.cell_rates[cell] = 0.0  # kill float residue in emptied cells
        self.death_rates[pid] = 0.0
        self.total_death_rate -= own + loss

    # -- event machinery -------------------------------------------------------

    def _waiting_time(self) -> float:
        return self.rng.exponential() / self.total_rate

    def peek_event_time(self) -> float:
        """Time of the next event; drawing is memoised until step() consumes it."""
        if self.n_points == 0 or self.total_rate <= 0.0:
            return math.inf
        if self._pending_dt is None:
            self._pending_dt = self._waiting_time()
        return self.t + self._pending_dt

    def _select_death_victim(self) -> int:
        cum = np.cumsum(self.cell_rates)
        u = self.rng.random() * min(self.total_death_rate, cum[-1])
        cell = min(int(np.searchsorted(cum, u, side="right")), self.config.ncells - 1)
        while not self.config.cell_members[cell]:  # drift residue guard
            cell = (cell + 1) % self.config.ncells
        members = self.cell_members_array(cell)
        residual = u - (cum[cell - 1] if cell > 0 else 0.0)
        local = np.cumsum(self.death_rates[members])
        j = min(int(np.searchsorted(local, residual, side="right")), len(members) - 1)
        return int(members[j])

    def cell_members_array(self, cell: int) -> np.ndarray:
        return np.asarray(self.config.cell_members[cell], dtype=np.int64)

    def step(self) -> EventRecord | None:
        """Advance by one event.

        Returns None from absorbing states: an extinct population or a state
        whose total event rate is zero.
        """
        n = self.config.n_points
        if n == 0:
            return None
        total = self.total_death_rate + n * self._b_total
        if total <= 0.0:
            return None
        dt = self._pending_dt
        if dt is None:
            dt = self.rng.exponential() / total
        else:
            self._pending_dt = None
        self.t += dt
        self.event_count += 1

        if self.rng.random() * total < self.total_death_rate:
            victim = self._select_death_victim()
            subject = self.config.pos[victim].copy()
            self._remove_point(victim)
            record = EventRecord("death", self.t, subject)
        else:
            parent = self.config.alive_ids[int(self.rng.integers(n))]
            subject = self.config.pos[parent].copy()
            y1, y2 = sample_offspring(self.kernels.fission, subject, self.rng)
            y1 = self.geom.wrap(y1)
            y2 = self.geom.wrap(y2)
            self._remove_point(parent)
            self._insert_point(y1)
            self._insert_point(y2)
            record = EventRecord("fission", self.t, subject, (y1, y2))

        if self.event_count % REBUILD_INTERVAL == 0:
            self.rebuild_caches()
        return record

    def snapshot(self, replica: int | None = None) -> Snapshot:
        return Snapshot(time=self.t, points=self.config.positions(), replica=replica)


# ---------------------------------------------------------------------------
# Module operations
# ---------------------------------------------------------------------------

def init_poisson(kappa: float, geom: TorusGeometry, kernels: KernelSet, seed) -> SimState:
    """Poisson(kappa * volume) points placed independently uniformly at t = 0."""
    if kappa <= 0:
        raise ValueError(f"initial intensity must be > 0, got {kappa}")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(kappa * geom.volume))
    points = rng.uniform(0.0, geom.side, size=(n, geom.dim))
    return SimState(points, geom, kernels, rng)


def init_from_points(points, geom: TorusGeometry, kernels: KernelSet, seed=0) -> SimState:
    """Deterministic initial configuration (mainly for tests and oracles)."""
    return SimState(np.asarray(points, dtype=float), geom, kernels, np.random.default_rng(seed))


def death_rate(state: SimState, point_id: int) -> float:
    return state.death_rate(point_id)


def step(state: SimState) -> EventRecord | None:
    return state.step()


def run(state: SimState, horizon: float, snapshot_times=(), replica: int | None = None,
        seed: int | None = None) -> RunResult:
    """Run until the horizon or extinction, recording snapshots.

    ``snapshot_times`` must be sorted and bounded by the horizon.  On
    extinction the snapshot list is truncated at the extinction time and the
    result carries the extinction flag (an absorbing state, not an error).
    """
    times = list(snapshot_times)
    if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError("snapshot_times must be sorted ascending")
    if times and times[-1] > horizon:
        raise ValueError("snapshot_times must not exceed the horizon")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")

    snapshots: list[Snapshot] = []
    n_deaths = n_fissions = 0
    k = 0
    extinct = False
    extinction_time = None

    while True:
        if state.n_points == 0:
            extinct = True
            extinction_time = state.t
            break
        t_next = state.peek_event_time()
        while k < len(times) and times[k] < t_next and times[k] <= horizon:
            snapshots.append(Snapshot(time=times[k], points=state.config.positions(), replica=replica))
            k += 1
        if t_next > horizon:
            state._pending_dt = None  # event beyond horizon never happens
            state.t = horizon
            break
        record = state.step()
        if record.kind == "death":
            n_deaths += 1
        else:
            n_fissions += 1

    return RunResult(
        snapshots=snapshots,
        extinct=extinct,
        extinction_time=extinction_time,
        n_deaths=n_deaths,
        n_fissions=n_fissions,
        final_population=state.n_points,
        final_time=state.t,
        replica=replica,
        seed=seed,
    )
