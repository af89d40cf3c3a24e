"""On-lattice birth-death-migration exclusion process.

Exact stochastic simulation on a square lattice with at most one agent per
site. Each agent proliferates at rate rp, dies at rate rp/2, and migrates at
rate rm; proliferation and migration target one of the four von Neumann
neighbors uniformly and abort when the target is occupied or off-lattice, so
the total propensity is always N(t) * (rp + rp/2 + rm) and aborted attempts
still advance the clock. Reflecting boundaries are realized as aborted
off-lattice moves.

Density trajectories are sampled onto a uniform grid by holding the state
constant between events.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .mfm import default_t_end
from .timeseries import TimeSeries, uniform_grid

DEFAULT_SIDE = 120
DEFAULT_RM = 1.0
DEFAULT_REPLICATES = 25
DEFAULT_IC = 0.05


@dataclass
class AbmParams:
    """Simulation settings; the death rate is always rp/2, never stored.

    rp = 0 is accepted (migration-only dynamics conserve the population)
    but then needs an explicit t_end since the default horizon is 30/rp.
    """

    rp: float
    rm: float = DEFAULT_RM
    lattice_side: int = DEFAULT_SIDE
    ic_fraction: float = DEFAULT_IC
    n_replicates: int = DEFAULT_REPLICATES
    t_end: float | None = None
    n_points: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.rp < 0:
            raise ValueError("rp must be nonnegative")
        if self.rm < 0:
            raise ValueError("rm must be nonnegative")
        if self.lattice_side < 2:
            raise ValueError("lattice_side must be at least 2")
        if not (0 < self.ic_fraction < 1):
            raise ValueError("ic_fraction must lie in (0, 1)")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be positive")
        if self.t_end is None:
            if self.rp <= 0:
                raise ValueError("rp = 0 requires an explicit t_end")
            self.t_end = default_t_end(self.rp)
        if not (self.t_end > 0):
            raise ValueError("t_end must be positive")
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")

    def grid(self) -> np.ndarray:
        return uniform_grid(self.t_end, self.n_points)

    def replicate_seed(self, index: int) -> int:
        return self.seed + index


@dataclass
class Lattice:
    """Flat occupancy array plus the list of occupied sites.

    The site list gives O(1) uniform agent selection; events maintain it by
    swap-remove on death and in-place update on migration.
    """

    side: int
    occupied: np.ndarray  # int8, length side*side
    agent_sites: np.ndarray  # int64 flat indices of occupied sites

    def __post_init__(self):
        if self.occupied.shape != (self.side * self.side,):
            raise ValueError("occupancy array must have side*side entries")
        n_occ = int(np.count_nonzero(self.occupied))
        if n_occ != self.agent_sites.size:
            raise ValueError("agent list does not match occupancy count")
        if self.agent_sites.size:
            if np.unique(self.agent_sites).size != self.agent_sites.size:
                raise ValueError("duplicate agent sites")
            if self.agent_sites.min() < 0 or self.agent_sites.max() >= self.side**2:
                raise ValueError("agent site out of bounds")
            if not self.occupied[self.agent_sites].all():
                raise ValueError("agent list points at empty sites")

    @property
    def n_agents(self) -> int:
        return self.agent_sites.size

    def density(self) -> float:
        return self.n_agents / self.side**2


def init_lattice(side: int, ic_fraction: float, rng: np.random.Generator) -> Lattice:
    """Occupy exactly round(ic_fraction * side^2) sites uniformly at random."""
    if not (0 < ic_fraction < 1):
        raise ValueError("ic_fraction must lie in (0, 1)")
    area = side * side
    n_occ = int(round(ic_fraction * area))
    sites = rng.choice(area, size=n_occ, replace=False).astype(np.int64)
    occ = np.zeros(area, dtype=np.int8)
    occ[sites] = 1
    return Lattice(side, occ, sites)


@njit(cache=True, nogil=True)
def _gillespie(side, occ, agents_init, n0, rp, rm, t_grid, seed, out, event_times):
    """Event loop for one replicate; returns (events executed, final count).

    out receives the density at every grid time. event_times, when
    non-empty, records the first len(event_times) event times for
    distributional checks.
    """
    np.random.seed(seed)
    area = side * side
    agents = np.empty(area, dtype=np.int64)
    for i in range(n0):
        agents[i] = agents_init[i]
    n = n0
    n_grid = t_grid.shape[0]

    per_agent = rp + 0.5 * rp + rm
    p_birth = rp / per_agent if per_agent > 0.0 else 0.0
    p_death = 0.5 * rp / per_agent if per_agent > 0.0 else 0.0

    t = 0.0
    gi = 0
    n_events = 0
    while gi < n_grid:
        if n == 0:
            while gi < n_grid:
                out[gi] = 0.0
                gi += 1
            break
        if per_agent == 0.0:
            while gi < n_grid:
                out[gi] = n / area
                gi += 1
            break
        total_rate = n * per_agent
        t_next = t - np.log(np.random.random()) / total_rate
        while gi < n_grid and t_grid[gi] < t_next:
            out[gi] = n / area
            gi += 1
        if gi >= n_grid:
            break
        t = t_next
        if n_events < event_times.shape[0]:
            event_times[n_events] = t
        n_events += 1

        k = np.random.randint(0, n)
        site = agents[k]
        u = np.random.random()
        if u < p_birth + p_death and u >= p_birth:
            # Death always succeeds: swap-remove from the agent list.
            occ[site] = 0
            agents[k] = agents[n - 1]
            n -= 1
            continue
        # Birth and migration share the neighbor draw and abort rule.
        x = site // side
        y = site % side
        d = np.random.randint(0, 4)
        if d == 0:
            nx, ny = x + 1, y
        elif d == 1:
            nx, ny = x - 1, y
        elif d == 2:
            nx, ny = x, y + 1
        else:
            nx, ny = x, y - 1
        if nx < 0 or nx >= side or ny < 0 or ny >= side:
            continue
        target = nx * side + ny
        if occ[target] != 0:
            continue
        if u < p_birth:
            occ[target] = 1
            agents[n] = target
            n += 1
        else:
            occ[site] = 0
            occ[target] = 1
            agents[k] = target
    return n_events, n


_NO_EVENT_TIMES = np.empty(0)


def simulate(
    params: AbmParams,
    seed: int | None = None,
    event_times_out: np.ndarray | None = None,
) -> TimeSeries:
    """One exact-stochastic replicate sampled on the uniform grid.

    The seed (default params.seed) drives both the initial lattice draw and
    the event stream, so equal seeds reproduce the trajectory exactly.
    """
    if seed is None:
        seed = params.seed
    rng = np.random.default_rng(seed)
    lattice = init_lattice(params.lattice_side, params.ic_fraction, rng)
    t_grid = params.grid()
    out = np.empty(t_grid.size)
    times = event_times_out if event_times_out is not None else _NO_EVENT_TIMES
    n_events, n_final = _gillespie(
        lattice.side,
        lattice.occupied.copy(),
        lattice.agent_sites,
        lattice.n_agents,
        float(params.rp),
        float(params.rm),
        t_grid,
        np.uint32(seed & 0xFFFFFFFF),
        out,
        times,
    )
    meta = {
        "rp": params.rp,
        "rm": params.rm,
        "source": "abm",
        "seed": int(seed),
        "n_events": int(n_events),
        "extinct": bool(n_final == 0),
    }
    return TimeSeries(t_grid, out, meta)


def run_replicates(params: AbmParams, jobs: int = 1) -> list[TimeSeries]:
    """Independent replicates with seeds params.seed + replicate index.

    Results are ordered by replicate index regardless of scheduling, so
    parallel and serial runs agree exactly.
    """
    seeds = [params.replicate_seed(i) for i in range(params.n_replicates)]
    if jobs <= 1 or params.n_replicates == 1:
        return [simulate(params, seed=s) for s in seeds]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: simulate(params, seed=s), seeds))


def ensemble_mean(params: AbmParams, jobs: int = 1) -> TimeSeries:
    """Pointwise mean density over the replicate ensemble.

    The returned series carries the per-point standard deviation and the
    replicate seeds in its metadata.
    """
    reps = run_replicates(params, jobs=jobs)
    stack = np.vstack([r.c for r in reps])
    mean = stack.mean(axis=0)
    std = stack.std(axis=0, ddof=1) if len(reps) > 1 else np.zeros(stack.shape[1])
    meta = {
        "rp": params.rp,
        "rm": params.rm,
        "source": "abm",
        "seed": int(params.seed),
        "n_replicates": params.n_replicates,
        "replicate_seeds": [params.replicate_seed(i) for i in range(params.n_replicates)],
        "extinct_replicates": sum(r.meta["extinct"] for r in reps),
        "c_std": std,
    }
    return TimeSeries(reps[0].t.copy(), mean, meta)
