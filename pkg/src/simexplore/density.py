"""Product-Gaussian kernel density estimates on the parameter box.

Three boundary rules are available:

``reflect`` (default)
    Each component is a Gaussian folded back into the box by mirror
    reflection at both walls. Mass is conserved and there is no first-order
    bias at the walls.
``truncate``
    Each component is cut at the box and renormalised to unit mass.
``none``
    Plain Gaussians; mass outside the box is simply lost.

All three give a density that integrates to at most 1 over the box (exactly 1
for the first two) and is zero outside it.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ContractViolation, KdeFitError
from .params import ParameterSpace, reflect
from .rng import RngStream

BOUNDARY_RULES = ("reflect", "truncate", "none")
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_CHUNK_ELEMS = 2_000_000


@dataclass(frozen=True)
class KdeModel:
    """A fitted density.

    Attributes
    ----------
    points : (n, d) array
        Kernel centres, sorted lexicographically so evaluation does not depend
        on the order the samples arrived in.
    bandwidths : (d,) array
    space : ParameterSpace
        Support box.
    boundary : str
        One of ``BOUNDARY_RULES``.
    mass : (n, d) array
        Per-component, per-dimension in-box mass used by ``truncate``.
    degenerate : tuple of str
        Dimensions whose bandwidth fell back to ``width / 100``.
    """

    points: np.ndarray
    bandwidths: np.ndarray
    space: ParameterSpace
    boundary: str = "reflect"
    mass: np.ndarray | None = None
    degenerate: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def ndim(self) -> int:
        return self.points.shape[1]

    def with_bandwidths(self, bandwidths) -> KdeModel:
        bw = np.asarray(bandwidths, dtype=float)
        return _build(self.points, bw, self.space, self.boundary, self.degenerate)


def scott_bandwidths(samples: np.ndarray) -> np.ndarray:
    """Scott's rule per dimension: ``std * n ** (-1 / (d + 4))``."""
    n, d = samples.shape
    return samples.std(axis=0, ddof=1) * n ** (-1.0 / (d + 4))


def _build(points, bw, space, boundary, degenerate):
    mass = None
    if boundary == "truncate":
        mass = ndtr((space.upper - points) / bw) - ndtr((space.lower - points) / bw)
    return KdeModel(points, bw, space, boundary, mass, tuple(degenerate))


def fit_kde(samples, space: ParameterSpace, boundary: str = "reflect", allow_degenerate: bool = False) -> KdeModel:
    """Fit a diagonal-bandwidth Gaussian KDE with Scott's rule.

    Raises
    ------
    KdeFitError
        With fewer than two samples, or when a dimension has zero variance and
        `allow_degenerate` is false. With `allow_degenerate` the bandwidth of
        such a dimension falls back to one hundredth of the box width and the
        dimension is listed in ``degenerate``.
    """
    if boundary not in BOUNDARY_RULES:
        raise ContractViolation(f"unknown boundary rule {boundary!r}; expected one of {BOUNDARY_RULES}")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != space.ndim:
        raise ContractViolation(f"samples must have shape (n, {space.ndim}), got {samples.shape}")
    n = len(samples)
    if n < 2:
        raise KdeFitError(f"need at least 2 samples to fit a KDE, got {n}")
    if np.any(samples < space.lower) or np.any(samples > space.upper):
        raise ContractViolation("all samples must lie inside the support box")

    # sort first so the fit, bandwidth included, is independent of sample order
    samples = samples[np.lexsort(samples.T[::-1])]
    bw = scott_bandwidths(samples)
    flat = [space.names[j] for j in range(space.ndim) if not bw[j] > 0]
    if flat:
        if not allow_degenerate:
            raise KdeFitError(f"zero sample variance in dimension(s) {', '.join(flat)}")
        for name in flat:
            j = space.index(name)
            bw[j] = space.widths[j] / 100.0

    points = samples
    points.setflags(write=False)
    bw.setflags(write=False)
    return _build(points, bw, space, boundary, flat)


def _kernel_factor(model: KdeModel, x: np.ndarray, j: int) -> np.ndarray:
    """One-dimensional kernel values, shape ``(len(x), n)``, for dimension `j`."""
    c = model.points[:, j]
    h = model.bandwidths[j]
    diff = x[:, None] - c[None, :]
    k = np.exp(-0.5 * (diff / h) ** 2)
    if model.boundary == "reflect":
        lo, hi = model.space.lower[j], model.space.upper[j]
        period = 2.0 * (hi - lo)
        reach = 9.0 * h
        n_img = int(math.ceil(reach / period)) + 1
        images = [2.0 * lo - c]
        for m in range(1, n_img + 1):
            images += [c + m * period, c - m * period, 2.0 * lo - c + m * period, 2.0 * lo - c - m * period]
        for y in images:
            # images farther than `reach` from the box contribute < exp(-40)
            cols = np.flatnonzero((y > lo - reach) & (y < hi + reach))
            if cols.size:
                k[:, cols] += np.exp(-0.5 * ((x[:, None] - y[None, cols]) / h) ** 2)
    elif model.boundary == "truncate":
        k = k / model.mass[None, :, j]
    return k * (_INV_SQRT_2PI / h)


def kde_density_many(model: KdeModel, thetas) -> np.ndarray:
    """Evaluate the density at each row of `thetas`."""
    x = np.atleast_2d(np.asarray(thetas, dtype=float))
    if x.shape[1] != model.ndim:
        raise ContractViolation(f"expected rows of {model.ndim} values, got shape {x.shape}")
    out = np.zeros(len(x))
    inside = np.all((x >= model.space.lower) & (x <= model.space.upper), axis=1)
    idx = np.flatnonzero(inside)
    step = max(1, _CHUNK_ELEMS // model.n)
    for start in range(0, idx.size, step):
        rows = idx[start:start + step]
        # far tails may overflow the squared distance; exp(-inf) = 0 is exact
        with np.errstate(over="ignore"):
            prod = _kernel_factor(model, x[rows, 0], 0)
            for j in range(1, model.ndim):
                prod *= _kernel_factor(model, x[rows, j], j)
        # contiguous last-axis reduction: numpy sums pairwise
        out[rows] = prod.sum(axis=1) / model.n
    return out


def kde_density(model: KdeModel, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.ndim,):
        raise ContractViolation(f"expected a vector of {model.ndim} values, got shape {theta.shape}")
    return float(kde_density_many(model, theta[None, :])[0])


def _draw_components(model: KdeModel, comps: np.ndarray, rng: RngStream) -> np.ndarray:
    centres = model.points[comps]
    draws = centres + model.bandwidths * rng.normal(size=centres.shape)
    lo, hi = model.space.lower, model.space.upper
    if model.boundary == "reflect":
        return reflect(draws, lo, hi)
    if model.boundary == "none":
        return draws
    bad = (draws < lo) | (draws > hi)
    while bad.any():
        r, c = np.nonzero(bad)
        draws[r, c] = centres[r, c] + model.bandwidths[c] * rng.normal(size=r.size)
        bad[r, c] = (draws[r, c] < lo[c]) | (draws[r, c] > hi[c])
    return draws


def kde_sample(model: KdeModel, rng: RngStream) -> np.ndarray:
    """One draw: a uniformly chosen component, then its boundary-adjusted Gaussian."""
    comp = rng.integers(model.n, size=1)
    return _draw_components(model, comp, rng)[0]


def kde_sample_many(model: KdeModel, size: int, rng: RngStream) -> np.ndarray:
    return _draw_components(model, rng.integers(model.n, size=size), rng)


def write_kde(model: KdeModel, points_path, json_path, extra: dict | None = None,
              header_comment: str | None = None) -> None:
    with open(points_path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(model.space.names)
        for p in model.points:
            w.writerow([repr(float(v)) for v in p])
    doc = {
        "bandwidths": dict(zip(model.space.names, (float(b) for b in model.bandwidths))),
        "n_points": model.n,
        "boundary": model.boundary,
        "degenerate_dimensions": list(model.degenerate),
        "support": model.space.to_json(),
    }
    if extra:
        doc.update(extra)
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
