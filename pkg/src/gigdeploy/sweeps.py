"""Sweep axes and an order-preserving parallel map."""
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

# CLI axis names -> MarketParams field names
AXIS_FIELDS = {
    "ws": "w_s", "w_s": "w_s", "K": "K", "k": "K", "V": "V", "v": "V",
    "Lambda": "Lambda", "lambda": "Lambda", "mu_s": "mu_s", "mu-s": "mu_s",
    "mu_o": "mu_o", "mu-o": "mu_o", "alpha": "alpha",
}


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.name not in AXIS_FIELDS:
            raise InvalidInput(f"unknown sweep axis {self.name!r}")
        if self.n < 1 or (self.n > 1 and not self.hi > self.lo):
            raise InvalidInput(f"bad sweep axis {self}")

    @property
    def field(self):
        return AXIS_FIELDS[self.name]

    @property
    def values(self):
        if self.n == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.n)

    @classmethod
    def parse(cls, text):
        parts = text.split(":")
        if len(parts) != 4:
            raise InvalidInput(f"sweep must look like name:lo:hi:n, got {text!r}")
        try:
            return cls(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise InvalidInput(f"bad sweep {text!r}") from exc


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple

    def points(self):
        """Cartesian product, last axis varying fastest (row-major)."""
        grids = np.meshgrid(*[a.values for a in self.axes], indexing="ij")
        flat = [g.ravel() for g in grids]
        return [tuple(float(f[i]) for f in flat) for i in range(flat[0].size)]

    def apply(self, params, point):
        return params.with_(**{a.field: v for a, v in zip(self.axes, point)})

    @property
    def shape(self):
        return tuple(a.n for a in self.axes)


def regime_grid(n_ws=64, n_K=64, ws_hi=1.0, K_lo=10.0, K_hi=100.0):
    """The (w_s, K) grid used for regime maps: w_s in (0, ws_hi], K in [K_lo, K_hi]."""
    return SweepSpec((Axis("K", K_lo, K_hi, n_K), Axis("ws", ws_hi / n_ws, ws_hi, n_ws)))


def default_jobs():
    try:
        return max(1, int(os.environ.get("GIGDEPLOY_JOBS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items, jobs=1, chunksize=None):
    """map() that fans out over processes but always returns results in input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    if chunksize is None:
        chunksize = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
