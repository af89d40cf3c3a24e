"""Scalar density trajectories on a uniform time grid, plus CSV round-tripping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Relative slack allowed when deciding whether a grid is uniform.
GRID_RTOL = 1e-8


@dataclass
class TimeSeries:
    """A sampled density trajectory: times ``t`` and values ``c``.

    ``meta`` carries bookkeeping (seeds, extinction flags, replicate counts)
    and never participates in numerics.
    """

    t: np.ndarray
    c: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if self.t.ndim != 1 or self.c.ndim != 1:
            raise ValueError("time series arrays must be one-dimensional")
        if self.t.shape != self.c.shape:
            raise ValueError(
                f"times and values disagree in length: {self.t.size} vs {self.c.size}"
            )
        if self.t.size >= 2 and not np.all(np.diff(self.t) > 0):
            raise ValueError("time grid must be strictly increasing")

    @property
    def n(self) -> int:
        return self.t.size

    @property
    def dt(self) -> float:
        """Nominal spacing of the grid (first interval)."""
        if self.t.size < 2:
            raise ValueError("need at least two samples for a spacing")
        return float(self.t[1] - self.t[0])

    def is_uniform(self, rtol: float = GRID_RTOL) -> bool:
        if self.t.size < 2:
            return True
        steps = np.diff(self.t)
        return bool(np.all(np.abs(steps - steps[0]) <= rtol * abs(steps[0])))

    def copy(self) -> "TimeSeries":
        return TimeSeries(self.t.copy(), self.c.copy(), dict(self.meta))


def uniform_grid(t_end: float, n_points: int) -> np.ndarray:
    """Uniform sample grid over [0, t_end] with ``n_points`` samples."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    return np.linspace(0.0, t_end, n_points)


def write_csv(ts: TimeSeries, path) -> None:
    """Write a trajectory as ``t,C`` rows at full float precision.

    Values are emitted with shortest round-trip repr, so reading the file
    back reproduces every float bit-for-bit.
    """
    with open(path, "w", newline="") as fh:
        fh.write("t,C\n")
        for ti, ci in zip(ts.t.tolist(), ts.c.tolist()):
            fh.write(f"{ti!r},{ci!r}\n")


def read_csv(path) -> TimeSeries:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,C":
            raise ValueError(f"{path}: expected header 't,C', got {header!r}")
        t, c = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a, b = line.split(",")
            t.append(float(a))
            c.append(float(b))
    return TimeSeries(np.array(t), np.array(c))
