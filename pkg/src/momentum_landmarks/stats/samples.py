"""Per-landmark sample matrices and the mean-momentum-norm statistic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GROUPS",
    "LandmarkSampleMatrix",
    "build_sample_matrices",
    "mean_momentum_norm",
    "flag_large_norms",
]

GROUPS = ("control", "case")


@dataclass(frozen=True)
class LandmarkSampleMatrix:
    """``rows`` holds one ``(x, y)`` observation per group member at one landmark.

    ``landmark_index`` is 1-based.  ``source`` records whether the rows are
    momenta or raw positions.
    """

    group: str
    landmark_index: int
    rows: np.ndarray
    source: str = "momentum"

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ValueError(f"group must be one of {GROUPS}, got {self.group!r}")
        if self.landmark_index < 1:
            raise ValueError("landmark_index is 1-based")
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 2:
            raise ValueError(f"rows must have shape (m, 2), got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows must be finite")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return self.rows.shape[0]


def build_sample_matrices(stack, group: str, source: str = "momentum") -> list:
    """Split an ``(m, L, 2)`` stack into ``L`` per-landmark matrices of shape ``(m, 2)``."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3 or stack.shape[2] != 2:
        raise ValueError(f"expected an (m, L, 2) stack, got shape {stack.shape}")
    return [
        LandmarkSampleMatrix(group, j + 1, stack[:, j, :], source)
        for j in range(stack.shape[1])
    ]


def mean_momentum_norm(sample) -> float:
    """Euclidean norm of the mean row."""
    rows = np.asarray(getattr(sample, "rows", sample), dtype=float)
    return float(np.linalg.norm(rows.mean(axis=0)))


def flag_large_norms(samples, ratio: float = 1.5, z: float = 2.0) -> list:
    """1-based landmarks whose mean norm stands out from the rest.

    A landmark is flagged when its norm exceeds ``ratio`` times the median
    norm over all landmarks and ``z`` times the standard error of the mean
    row (``sqrt(trace(cov) / m)``), so that pure sampling noise is not
    reported.
    """
    norms = np.array([mean_momentum_norm(s) for s in samples])
    med = float(np.median(norms))
    out = []
    for s, norm in zip(samples, norms):
        rows = np.asarray(s.rows)
        se = np.sqrt(np.trace(np.cov(rows, rowvar=False)) / rows.shape[0]) if len(rows) > 1 else 0.0
        if norm > ratio * med and norm > z * se:
            out.append(int(s.landmark_index))
    return sorted(out)
