"""Candidate-term design matrices for sparse regression.

Plain library: columns C, C^2, ..., C^max_degree for a single experiment.
Embedded library: the same columns scaled by that experiment's proliferation
rate, with rows from all experiments stacked in input order so one joint
regression covers the whole experiment set.

Columns are never normalized: the coefficient-magnitude guard used during
lambda selection operates on raw coefficients, and normalizing would change
what that guard means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .timeseries import TimeSeries

MAX_DEGREE = 10


@dataclass(frozen=True)
class LibrarySpec:
    max_degree: int = MAX_DEGREE
    embed_rp: bool = False

    def __post_init__(self):
        if not (1 <= self.max_degree <= MAX_DEGREE):
            raise ValueError(f"max_degree must lie in [1, {MAX_DEGREE}]")


@dataclass(frozen=True)
class TermLabel:
    degree: int
    embedded: bool

    def __str__(self):
        base = f"C^{self.degree}"
        return f"Rp*{base}" if self.embedded else base


@dataclass
class DesignMatrix:
    """Stacked term matrix plus enough bookkeeping to undo the stacking."""

    theta: np.ndarray
    column_labels: list[TermLabel]
    spec: LibrarySpec
    rp_values: list[float]
    row_offsets: np.ndarray  # len(rp_values) + 1; experiment j owns rows [j], [j+1])

    @property
    def n_rows(self) -> int:
        return self.theta.shape[0]

    @property
    def n_terms(self) -> int:
        return self.theta.shape[1]

    def rows_of(self, j: int) -> slice:
        return slice(int(self.row_offsets[j]), int(self.row_offsets[j + 1]))


def powers(c: np.ndarray, max_degree: int) -> np.ndarray:
    """Matrix with column k-1 equal to c**k, k = 1..max_degree."""
    c = np.asarray(c, dtype=float)
    out = np.empty((c.size, max_degree))
    out[:, 0] = c
    for k in range(1, max_degree):
        out[:, k] = out[:, k - 1] * c
    return out


def build_theta(data: list[tuple[float, TimeSeries]], spec: LibrarySpec) -> DesignMatrix:
    """Assemble the design matrix for one or many experiments.

    The plain library describes a single experiment, so more than one input
    series is rejected; the embedded library stacks every experiment's rows
    and scales each block by its rp.
    """
    if not data:
        raise ValueError("no experiments supplied")
    if not spec.embed_rp and len(data) != 1:
        raise ValueError("plain library takes exactly one experiment")
    blocks = []
    offsets = [0]
    rp_values = []
    for rp, ts in data:
        block = powers(ts.c, spec.max_degree)
        if spec.embed_rp:
            block *= rp
        blocks.append(block)
        rp_values.append(float(rp))
        offsets.append(offsets[-1] + ts.n)
    labels = [TermLabel(k, spec.embed_rp) for k in range(1, spec.max_degree + 1)]
    return DesignMatrix(
        theta=np.vstack(blocks),
        column_labels=labels,
        spec=spec,
        rp_values=rp_values,
        row_offsets=np.asarray(offsets, dtype=np.int64),
    )
