"""Nondecreasing functions on [0, 1) represented on a uniform grid.

The grid is x_i = i/M for i = 0..M-1, so it covers [0, 1 - 1/M]. Values are
interpolated piecewise-linearly; queries beyond the last grid point continue
the last segment linearly and are clamped to [0, 1], which keeps the
extension inside the nondecreasing-[0,1] class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

DEFAULT_GRID_SIZE = 1024


@dataclass(frozen=True)
class GridFunction:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise InvalidParameterError("GridFunction needs a 1-d value array with >= 2 points")
        if v.min() < -1e-12 or v.max() > 1 + 1e-12:
            raise InvalidParameterError("GridFunction values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.size) / self.size

    @classmethod
    def constant(cls, c: float, size: int = DEFAULT_GRID_SIZE) -> "GridFunction":
        return cls(np.full(size, float(c)))

    @classmethod
    def from_callable(cls, f, size: int = DEFAULT_GRID_SIZE) -> "GridFunction":
        xs = np.arange(size) / size
        return cls(np.asarray([float(f(x)) for x in xs]))

    def __call__(self, x):
        xs = self.grid
        q = np.asarray(x, dtype=float)
        scalar = q.ndim == 0
        q = np.atleast_1d(q)
        if np.any(q < 0) or np.any(q >= 1):
            raise InvalidParameterError("GridFunction arguments must lie in [0, 1)")
        out = np.interp(q, xs, self.values)
        beyond = q > xs[-1]
        if np.any(beyond):
            slope = (self.values[-1] - self.values[-2]) * self.size
            out = np.where(beyond, self.values[-1] + slope * (q - xs[-1]), out)
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def is_nondecreasing(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) >= -tol))

    def monotonized(self) -> tuple["GridFunction", float]:
        """Running-maximum projection onto the nondecreasing class.

        Returns the repaired function and the largest pointwise repair.
        """
        repaired = np.maximum.accumulate(np.clip(self.values, 0.0, 1.0))
        repair = float(np.max(repaired - np.clip(self.values, 0.0, 1.0), initial=0.0))
        return GridFunction(repaired), repair

    def sup(self) -> float:
        return float(self.values.max())

    def interp_error_estimate(self) -> float:
        """Curvature-based bound on the piecewise-linear interpolation error:
        max |second difference| / 8."""
        if self.size < 3:
            return 0.0
        return float(np.abs(np.diff(self.values, 2)).max() / 8.0)
