"""Grid specifications and gridded likelihood surfaces."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .params import ParameterSpace


@dataclass(frozen=True)
class GridSpec:
    """How to lay a grid over (part of) a parameter space.

    `counts` is the interval count per gridded dimension (an int applies to
    all). Points sit at interval midpoints unless `midpoints` is false, in
    which case they are edge-inclusive ``linspace`` points. `coordinates`
    overrides the rule for named dimensions with explicit values; `fixed`
    pins named dimensions to a single value (a conditional slice).
    `replicates` is only used by the brute-force grid estimate.
    """

    counts: int | dict[str, int] = 20
    midpoints: bool = True
    replicates: int = 1
    coordinates: dict[str, tuple[float, ...]] = field(default_factory=dict)
    fixed: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        counts = self.counts.values() if isinstance(self.counts, dict) else [self.counts]
        if any(int(c) < 1 for c in counts):
            raise ContractViolation("grid interval counts must be >= 1")
        if self.replicates < 1:
            raise ContractViolation("grid replicates must be >= 1")
        for name, coords in self.coordinates.items():
            if len(coords) == 0:
                raise ContractViolation(f"explicit coordinates for {name!r} are empty")

    def count_for(self, name: str) -> int:
        if isinstance(self.counts, dict):
            return int(self.counts.get(name, 20))
        return int(self.counts)


def axis_coordinates(lower: float, upper: float, count: int, midpoints: bool = True) -> np.ndarray:
    if midpoints:
        step = (upper - lower) / count
        return lower + step * (np.arange(count) + 0.5)
    if count == 1:
        return np.array([(lower + upper) / 2.0])
    return np.linspace(lower, upper, count)


def grid_axes(space: ParameterSpace, spec: GridSpec) -> tuple[list[str], list[np.ndarray]]:
    """Names and coordinates of the gridded (non-fixed) dimensions."""
    for name in list(spec.fixed) + list(spec.coordinates):
        space.index(name)  # KeyError for unknown names
    names, coords = [], []
    for d in space.dims:
        if d.name in spec.fixed:
            continue
        if d.name in spec.coordinates:
            c = np.asarray(spec.coordinates[d.name], dtype=float)
        else:
            c = axis_coordinates(d.lower, d.upper, spec.count_for(d.name), spec.midpoints)
        names.append(d.name)
        coords.append(c)
    if not names:
        raise ContractViolation("grid has no free dimensions")
    return names, coords


def grid_points(space: ParameterSpace, spec: GridSpec) -> tuple[list[str], list[np.ndarray], np.ndarray]:
    """Full parameter vectors for every grid point, in row-major order."""
    names, coords = grid_axes(space, spec)
    shape = tuple(len(c) for c in coords)
    n = int(np.prod(shape))
    if n == 0:
        raise ContractViolation("empty grid")
    thetas = np.empty((n, space.ndim))
    for name, value in spec.fixed.items():
        thetas[:, space.index(name)] = float(value)
    mesh = np.meshgrid(*coords, indexing="ij")
    for name, m in zip(names, mesh):
        thetas[:, space.index(name)] = m.ravel()
    return names, coords, thetas


@dataclass
class LikelihoodSurface:
    """Estimated outcome probability on a grid.

    ``values`` has one axis per name in ``names``. ``raw_values`` keeps the
    unclipped estimates where clipping applies; ``std_error`` is present for
    the replicate-based grid baseline.
    """

    names: list[str]
    coords: list[np.ndarray]
    values: np.ndarray
    raw_values: np.ndarray | None = None
    std_error: np.ndarray | None = None
    fixed: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def clipped_count(self) -> int:
        if self.raw_values is None:
            return 0
        return int(np.count_nonzero(self.raw_values != self.values))

    def marginalize(self, keep: list[str]) -> LikelihoodSurface:
        """Average the surface over every axis not named in `keep`."""
        for k in keep:
            if k not in self.names:
                raise KeyError(k)
        axes = [self.names.index(k) for k in keep]
        drop = tuple(i for i in range(len(self.names)) if i not in axes)
        remaining = sorted(axes)
        perm = [remaining.index(a) for a in axes]

        def reduce(arr):
            if arr is None:
                return None
            out = arr.mean(axis=drop) if drop else arr
            return np.transpose(out, perm)

        return LikelihoodSurface(
            list(keep),
            [self.coords[a] for a in axes],
            reduce(self.values),
            reduce(self.raw_values),
            None,
            dict(self.fixed),
            {"averaged_over": [self.names[i] for i in drop]},
        )

    def rows(self):
        for index in np.ndindex(*self.values.shape):
            point = [float(c[i]) for c, i in zip(self.coords, index)]
            yield index, point

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            header = [*self.names, "likelihood"]
            if self.std_error is not None:
                header.append("std_error")
            w.writerow(header)
            for index, point in self.rows():
                row = [repr(v) for v in point] + [repr(float(self.values[index]))]
                if self.std_error is not None:
                    row.append(repr(float(self.std_error[index])))
                w.writerow(row)

    def write_json(self, path, extra: dict | None = None) -> None:
        doc = {
            "axes": self.names,
            "shape": list(self.values.shape),
            "fixed": self.fixed,
            "clipped_points": self.clipped_count,
            **self.meta,
        }
        if extra:
            doc.update(extra)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_surface_csv(path) -> tuple[list[str], np.ndarray]:
    """Header names and the numeric body of a surface CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])

