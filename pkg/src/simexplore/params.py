"""Parameter spaces, the uniform box prior, and the reflecting window kernel.

Parameter vectors are plain 1-d float arrays ordered like the space's
dimensions. Integer-valued dimensions stay real-valued inside the chain and
are rounded only when handed to a simulator (see
:meth:`ParameterSpace.to_simulator`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation
from .rng import RngStream


@dataclass(frozen=True)
class Dimension:
    name: str
    lower: float
    upper: float
    integer: bool = False

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ContractViolation("dimension names must be non-empty strings")
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ContractViolation(f"dimension {self.name!r}: bounds must be finite")
        if not lo < hi:
            raise ContractViolation(f"dimension {self.name!r}: lower ({lo}) must be < upper ({hi})")
        if self.integer and (lo != round(lo) or hi != round(hi)):
            raise ContractViolation(f"dimension {self.name!r}: integer-valued dims need integer bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class ParameterSpace:
    """An ordered box of named real (or integer-valued) parameters."""

    dims: tuple[Dimension, ...]
    lower: np.ndarray = field(init=False, repr=False, compare=False)
    upper: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dims = tuple(self.dims)
        if not dims:
            raise ContractViolation("a parameter space needs at least one dimension")
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ContractViolation(f"duplicate dimension names in {names}")
        object.__setattr__(self, "dims", dims)
        lower = np.array([d.lower for d in dims])
        upper = np.array([d.upper for d in dims])
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_bounds(cls, bounds: Iterable[Sequence], integer: Iterable[str] = ()) -> ParameterSpace:
        """Build from ``[(name, lower, upper), ...]``; names listed in `integer` are integer-valued."""
        integer = set(integer)
        return cls(tuple(Dimension(name, lo, hi, name in integer) for name, lo, hi in bounds))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dims]

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def integer_mask(self) -> np.ndarray:
        return np.array([d.integer for d in self.dims])

    def index(self, name: str) -> int:
        for i, d in enumerate(self.dims):
            if d.name == name:
                return i
        raise KeyError(name)

    def check(self, theta) -> np.ndarray:
        """Return `theta` as a float array, raising on a dimension mismatch."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.ndim,):
            raise ContractViolation(f"expected a vector of {self.ndim} values, got shape {theta.shape}")
        return theta

    def contains(self, theta) -> bool:
        theta = self.check(theta)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def to_simulator(self, theta) -> np.ndarray:
        """Round integer-valued dims half away from zero; other dims pass through."""
        theta = self.check(theta).copy()
        mask = self.integer_mask
        if mask.any():
            theta[mask] = round_half_away(theta[mask])
        return theta

    def as_dict(self, theta) -> dict[str, float]:
        return dict(zip(self.names, (float(v) for v in self.check(theta))))

    def to_json(self) -> list[dict]:
        return [
            {"name": d.name, "lower": d.lower, "upper": d.upper, "integer": d.integer}
            for d in self.dims
        ]


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def reflect(x, lower, upper):
    """Fold `x` back into ``[lower, upper]`` by repeated mirror reflection."""
    x = np.asarray(x, dtype=float)
    width = np.asarray(upper, dtype=float) - lower
    y = np.mod(x - lower, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    return lower + y


@dataclass(frozen=True)
class UniformBoxPrior:
    space: ParameterSpace

    @property
    def density_value(self) -> float:
        return 1.0 / self.space.volume


def prior_sample(prior: UniformBoxPrior, rng: RngStream) -> np.ndarray:
    """One draw from the box prior; integer dims are uniform over their integer range."""
    space = prior.space
    theta = rng.uniform(space.lower, space.upper)
    for i, d in enumerate(space.dims):
        if d.integer:
            theta[i] = float(rng.integers(int(d.lower), int(d.upper) + 1))
    return np.clip(theta, space.lower, space.upper)


def prior_density(prior: UniformBoxPrior, theta) -> float:
    theta = prior.space.check(theta)
    if not prior.space.contains(theta):
        return 0.0
    return prior.density_value


def prior_density_many(prior: UniformBoxPrior, thetas) -> np.ndarray:
    """Vectorised :func:`prior_density` over the rows of `thetas`."""
    space = prior.space
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != space.ndim:
        raise ContractViolation(f"expected rows of {space.ndim} values, got shape {thetas.shape}")
    inside = np.all((thetas >= space.lower) & (thetas <= space.upper), axis=1)
    return np.where(inside, prior.density_value, 0.0)


@dataclass(frozen=True)
class UniformWindowKernel:
    """Uniform proposal on ``theta ± half_widths``, reflected into the box."""

    half_widths: tuple[float, ...]

    def __post_init__(self):
        hw = tuple(float(w) for w in self.half_widths)
        if any(not math.isfinite(w) or w < 0 for w in hw):
            raise ContractViolation("proposal half-widths must be finite and non-negative")
        if any(0 < w < 1e-300 for w in hw):
            # 1/(2w) would overflow; use 0 for a fixed dimension
            raise ContractViolation("nonzero proposal half-widths must be at least 1e-300")
        object.__setattr__(self, "half_widths", hw)

    @classmethod
    def fraction_of(cls, space: ParameterSpace, fraction: float) -> UniformWindowKernel:
        return cls(tuple(fraction * space.widths))

    def transition_density(self, theta, theta_new, space: ParameterSpace) -> float:
        """Density of proposing `theta_new` from `theta`, counting every reflected image.

        Dimensions with zero half-width are point masses and are left out of
        the product; they cancel in any Hastings ratio.
        """
        theta = space.check(theta)
        theta_new = space.check(theta_new)
        dens = 1.0
        for x, y, w, lo, hi in zip(theta, theta_new, self.half_widths, space.lower, space.upper):
            if w == 0.0:
                continue
            # images of y are y + k*period and 2*lo - y + k*period; written via
            # d and s so the count is exactly symmetric in (x, y). Coinciding
            # images at a wall are both counted, matching the limiting density.
            period = 2.0 * (hi - lo)
            d = y - x
            s = (x - lo) + (y - lo)
            kmax = math.ceil(w / period) + 2
            hits = 0
            for k in range(-kmax, kmax + 1):
                hits += abs(d + k * period) <= w
                hits += abs(s - k * period) <= w
            dens *= hits / (2.0 * w)
        return dens


def propose(kernel: UniformWindowKernel, theta, space: ParameterSpace, rng: RngStream) -> np.ndarray:
    theta = space.check(theta)
    hw = np.asarray(kernel.half_widths)
    if hw.shape != theta.shape:
        raise ContractViolation("kernel and space dimension counts differ")
    step = rng.uniform(-hw, hw)
    return reflect(theta + step, space.lower, space.upper)


def hastings_ratio(prior: UniformBoxPrior, kernel: UniformWindowKernel, theta, theta_new) -> float:
    """``min(1, P(θ')q(θ'→θ) / (P(θ)q(θ→θ')))``."""
    space = prior.space
    num = prior_density(prior, theta_new)
    den = prior_density(prior, theta)
    if den > 0.0 and num > 0.0:
        num *= kernel.transition_density(theta_new, theta, space)
        den *= kernel.transition_density(theta, theta_new, space)
    if den <= 0.0:
        raise ContractViolation("current state has zero prior/proposal density")
    return min(1.0, num / den)
