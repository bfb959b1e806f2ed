"""Brute-force grid baseline: replicate simulations at every grid point and
report the success proportion with its binomial standard error."""
from __future__ import annotations

from functools import partial

import numpy as np

from .parallel import map_ranges
from .params import ParameterSpace
from .rng import RngStream
from .simulators import Simulator
from .surface import GridSpec, LikelihoodSurface, grid_points


def _grid_cells(start, stop, thetas, sim, space, replicates, rng):
    out = []
    for i in range(start, stop):
        theta = space.to_simulator(thetas[i])
        point_rng = rng.child("grid", i)
        hits = 0
        for r in range(replicates):
            if sim.run(theta, point_rng.child("rep", r)).outcome_holds:
                hits += 1
        out.append(hits)
    return out


def grid_estimate(
    sim: Simulator,
    space: ParameterSpace,
    grid: GridSpec,
    rng: RngStream,
    workers: int | None = None,
) -> LikelihoodSurface:
    """Estimate P(R | theta) at each grid point by the proportion of `replicates` successes."""
    names, coords, thetas = grid_points(space, grid)
    r = grid.replicates
    hits = np.array(
        map_ranges(partial(_grid_cells, thetas=thetas, sim=sim, space=space, replicates=r, rng=rng),
                   len(thetas), workers),
        dtype=float,
    )
    shape = tuple(len(c) for c in coords)
    p = (hits / r).reshape(shape)
    se = np.sqrt(p * (1.0 - p) / r)
    return LikelihoodSurface(names, coords, p, None, se, dict(grid.fixed), {"replicates": r})
