"""Personalized local differential privacy for trade amounts.

A trader asks that their actual trade be statistically indistinguishable,
up to a likelihood-ratio factor exp(epsilon), from every other trade in a
masking interval [lower, upper]. The market maker delivers this by adding a
random noise trade eta right after the user trade, so the adversary's
observable is the post-noise position v + eta. This module holds the privacy
spec, finite-support noise distributions, the two-point mechanism that
achieves the guarantee with zero-mean noise, its mean-shifted variant used
for adversarial experiments, and an exhaustive verifier that checks the
guarantee on the observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DistributionShapeError,
    InfeasibleBiasError,
    MisalignedSupportError,
    SpecViolationError,
)

# Below this epsilon the two-point atom width blows past any float budget;
# requests are rejected rather than silently degraded.
EPSILON_FLOOR = 1e-6

# Probabilities must sum to one within this before a distribution is accepted.
PROBABILITY_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class PrivacySpec:
    """Masking interval [lower, upper] and likelihood-ratio budget epsilon."""

    lower: float
    upper: float
    epsilon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise SpecViolationError(
                f"masking interval bounds must be finite, got [{self.lower}, {self.upper}]"
            )
        if self.lower > self.upper:
            raise SpecViolationError(
                f"masking interval needs lower <= upper, got [{self.lower}, {self.upper}]"
            )
        if not self.epsilon > 0.0:  # also rejects NaN
            raise SpecViolationError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.upper + self.lower)

    @property
    def degenerate(self) -> bool:
        """True when no masking is actually requested: point interval or epsilon = inf."""
        return self.lower == self.upper or math.isinf(self.epsilon)

    def contains(self, delta: float) -> bool:
        return self.lower <= delta <= self.upper

    def recentered(self, delta: float) -> "PrivacySpec":
        """Same width and epsilon, midpoint moved onto ``delta``."""
        half = 0.5 * self.width
        return PrivacySpec(delta - half, delta + half, self.epsilon)

    def to_json_obj(self) -> dict:
        return {"tau": [self.lower, self.upper], "epsilon": self.epsilon}


@dataclass(frozen=True, slots=True)
class NoiseAtom:
    eta: float
    p: float


@dataclass(frozen=True, slots=True)
class NoiseDistribution:
    """Finite-support distribution over noise trades (in units of X)."""

    atoms: tuple[NoiseAtom, ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise DistributionShapeError("noise distribution needs at least one atom")
        total = 0.0
        for atom in self.atoms:
            if not math.isfinite(atom.eta):
                raise DistributionShapeError(f"atom value must be finite, got {atom.eta}")
            if not -PROBABILITY_TOL <= atom.p <= 1.0 + PROBABILITY_TOL:
                raise DistributionShapeError(f"atom probability {atom.p} outside [0, 1]")
            total += atom.p
        if abs(total - 1.0) > PROBABILITY_TOL * max(1, len(self.atoms)):
            raise DistributionShapeError(f"atom probabilities sum to {total}, not 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "NoiseDistribution":
        return cls(tuple(NoiseAtom(float(e), float(p)) for e, p in pairs))

    @classmethod
    def zero(cls) -> "NoiseDistribution":
        return cls((NoiseAtom(0.0, 1.0),))

    @property
    def is_zero_noise(self) -> bool:
        return len(self.atoms) == 1 and self.atoms[0].eta == 0.0

    def mean(self) -> float:
        return sum(a.p * a.eta for a in self.atoms)

    def support(self) -> tuple[float, ...]:
        return tuple(a.eta for a in self.atoms)

    def sample(self, rng: np.random.Generator | None) -> float:
        """Draw one noise value. Single-atom distributions consume no randomness,
        so deterministic trades leave a shared random stream untouched."""
        if len(self.atoms) == 1:
            return self.atoms[0].eta
        if rng is None:
            raise ValueError("rng required to sample a distribution with several atoms")
        u = rng.random()
        acc = 0.0
        for atom in self.atoms:
            acc += atom.p
            if u < acc:
                return atom.eta
        return self.atoms[-1].eta

    def to_json_obj(self) -> list[dict]:
        return [{"eta": a.eta, "p": a.p} for a in self.atoms]

    @classmethod
    def from_json_obj(cls, obj: Sequence[dict]) -> "NoiseDistribution":
        return cls.from_pairs((d["eta"], d["p"]) for d in obj)


def binary_mechanism(delta: float, spec: PrivacySpec) -> NoiseDistribution:
    """Two-point noise masking ``delta`` within the spec's interval.

    Writing m for the interval midpoint, w for its half-width and
    t = tanh(epsilon/2), the noise takes the values

        m - delta -/+ w/t     with probabilities (1 -/+ d*t)/2,

    where d = (delta - m)/w is the trade's normalized position in the
    interval. Both post-noise positions delta + eta land on the
    input-independent landmarks m -/+ w/t, which is what makes the guarantee
    hold with the ratio exactly exp(epsilon) at the interval endpoints, and
    the mean is identically zero. A degenerate spec yields the zero atom.
    """
    if not spec.contains(delta):
        raise SpecViolationError(
            f"trade {delta} outside masking interval [{spec.lower}, {spec.upper}]"
        )
    if spec.degenerate:
        return NoiseDistribution.zero()
    if spec.epsilon < EPSILON_FLOOR:
        raise SpecViolationError(
            f"epsilon {spec.epsilon} below the supported floor {EPSILON_FLOOR}"
        )
    half = 0.5 * spec.width
    t = math.tanh(0.5 * spec.epsilon)  # = (e^eps - 1)/(e^eps + 1), overflow-free
    big = half / t
    center = spec.midpoint - delta
    d = (delta - spec.midpoint) / half
    return NoiseDistribution(
        (
            NoiseAtom(center - big, 0.5 * (1.0 - d * t)),
            NoiseAtom(center + big, 0.5 * (1.0 + d * t)),
        )
    )


def biased_binary(delta: float, spec: PrivacySpec, mu: float) -> NoiseDistribution:
    """Two-point noise on the same atoms as binary_mechanism but with mean mu.

    Solves the 2x2 system (probabilities sum to one, mean equals mu); only
    means inside the atom span are expressible. Used to build the adversarial
    counterexamples: shifting the mean breaks priceability.
    """
    base = binary_mechanism(delta, spec)
    if len(base.atoms) == 1:
        if mu != 0.0:
            raise InfeasibleBiasError(
                f"degenerate spec admits only zero-mean noise, requested mean {mu}"
            )
        return base
    lo, hi = base.atoms[0].eta, base.atoms[1].eta
    p_hi = (mu - lo) / (hi - lo)
    if not 0.0 <= p_hi <= 1.0:
        raise InfeasibleBiasError(
            f"mean {mu} outside the atom span [{lo}, {hi}] of the masking interval"
        )
    return NoiseDistribution((NoiseAtom(lo, 1.0 - p_hi), NoiseAtom(hi, p_hi)))


def biased_factory(mu: float) -> Callable[[float, PrivacySpec], NoiseDistribution]:
    """Noise factory that biases masked trades and leaves exact trades exact.

    Strategies interleave masked trades with non-private corrections carrying
    degenerate specs; a bias can only live where there is noise to tilt.
    """

    def factory(delta: float, spec: PrivacySpec) -> NoiseDistribution:
        if spec.degenerate:
            return binary_mechanism(delta, spec)
        return biased_binary(delta, spec, mu)

    return factory


@dataclass(frozen=True, slots=True)
class PLDPReport:
    """Outcome of an exhaustive guarantee check over an input grid."""

    max_ratio: float
    satisfied: bool
    bound: float
    grid_size: int
    n_outputs: int


def verify_pldp(
    mechanism: Callable[[float], NoiseDistribution],
    spec: PrivacySpec,
    grid_size: int = 101,
    *,
    match_tol: float = 1e-9,
    ratio_slack: float = 1e-9,
) -> PLDPReport:
    """Check the likelihood-ratio guarantee of a noise mechanism on a grid.

    ``mechanism`` maps an input trade v to its noise distribution; the
    verifier compares the induced distributions of the adversary-visible
    post-noise position v + eta across all grid-point pairs in the masking
    interval. Outputs from different inputs are identified when they agree
    within ``match_tol``; two outputs of a single input falling into one
    bucket make the alignment ambiguous and raise MisalignedSupportError.
    Ratio conventions: 0/0 counts as 1, positive/0 as infinity. The guarantee
    is satisfied when the worst ratio is at most exp(epsilon), with
    ``ratio_slack`` relative headroom for float rounding.
    """
    if grid_size < 1:
        raise ValueError(f"grid_size must be >= 1, got {grid_size}")
    if spec.lower == spec.upper:
        grid = np.array([spec.lower])
    else:
        grid = np.linspace(spec.lower, spec.upper, grid_size)

    # entry list: (observable output, input index, probability)
    entries: list[tuple[float, int, float]] = []
    for i, v in enumerate(grid):
        dist = mechanism(float(v))
        for atom in dist.atoms:
            entries.append((float(v) + atom.eta, i, atom.p))
    entries.sort(key=lambda e: e[0])

    n = len(grid)
    columns: list[np.ndarray] = []
    anchor = math.nan
    col: np.ndarray | None = None
    filled: set[int] = set()
    for out, i, p in entries:
        if col is None or out - anchor > match_tol:
            anchor = out
            col = np.zeros(n)
            columns.append(col)
            filled = set()
        if i in filled:
            raise MisalignedSupportError(
                f"input {grid[i]} has two outputs within {match_tol} of {anchor}; "
                "alignment across inputs is ambiguous"
            )
        filled.add(i)
        col[i] = p

    bound = math.exp(spec.epsilon) if not math.isinf(spec.epsilon) else math.inf
    max_ratio = 1.0
    for col in columns:
        top = float(col.max())
        if top <= 0.0:
            continue  # all-zero bucket: every pairwise ratio is 0/0 = 1
        bottom = float(col.min())
        ratio = math.inf if bottom <= 0.0 else top / bottom
        if ratio > max_ratio:
            max_ratio = ratio
    satisfied = max_ratio <= bound * (1.0 + ratio_slack)
    return PLDPReport(
        max_ratio=max_ratio,
        satisfied=satisfied,
        bound=bound,
        grid_size=len(grid),
        n_outputs=len(columns),
    )
