"""Regularized square roots and the stochastic-parabolicity budget.

The noise coefficient of the conservative SPDE is a C^1 odd regularization
f of the signed square root, flattened to a line through the origin below a
threshold delta so that its Lipschitz constant is ~1/sqrt(delta). Keeping

    ratio = c_growth * (2M + 1)^d / (N * delta) < 1

(number of driving modes times squared Lipschitz constant, against the 1/N
noise intensity) is what keeps the drift coercive; everything downstream
refuses to run outside that regime.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegSqrt",
    "RegParams",
    "CoercivityViolation",
    "check_coercivity",
    "select_parameters",
    "LIPSCHITZ_CONSTANT",
    "DECAY_CONSTANT",
    "GROWTH_CONSTANT",
    "SQUARE_DEFECT_CONSTANT",
]

# Published bounds for the cubic-blend regularizer, measured once by a fine
# sweep (tests re-verify them):
#   |f'(x)|      <= LIPSCHITZ_CONSTANT / sqrt(delta)   (max at |x| = 2*delta/3)
#   |f'(x)|      <= DECAY_CONSTANT / sqrt(|x|)          for x != 0
#   |f(x)|       <= GROWTH_CONSTANT * sqrt(|x|)         (equality for |x| >= delta)
#   |f(x)^2 - x| <= SQUARE_DEFECT_CONSTANT * delta      (max at |x| = delta/2)
LIPSCHITZ_CONSTANT = 7.0 / 6.0
DECAY_CONSTANT = 0.9763
GROWTH_CONSTANT = 1.0
SQUARE_DEFECT_CONSTANT = 0.25


@dataclass(frozen=True)
class RegSqrt:
    """Odd C^1 interpolant of sign(x)*sqrt(|x|), exact for |x| >= delta.

    Pieces (for x >= 0; extended oddly):

        x / sqrt(delta)                                  0 <= x <= delta/2
        -(2 sqrt(d)/d^3) x^3 + (4/(d sqrt(d))) x^2
            - (3/(2 sqrt(d))) x + sqrt(d)/2              delta/2 <= x <= delta
        sqrt(x)                                          x >= delta

    with d = delta. Values and first derivatives match at both knots.
    """

    delta: float

    def __post_init__(self) -> None:
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")

    @property
    def growth_constant(self) -> float:
        """c with ||f'||_inf^2 <= c / delta for this family."""
        return LIPSCHITZ_CONSTANT**2

    def value(self, x: np.ndarray | float) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        d = self.delta
        rd = np.sqrt(d)
        a = np.abs(x)
        s = np.sign(x)
        mid = (-2.0 * rd / d**3) * a**3 + (4.0 / (d * rd)) * a**2 - (1.5 / rd) * a + 0.5 * rd
        out = np.where(
            a <= 0.5 * d,
            x / rd,
            np.where(a <= d, s * mid, s * np.sqrt(a)),
        )
        return out if out.ndim else float(out)

    __call__ = value

    def derivative(self, x: np.ndarray | float) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        d = self.delta
        rd = np.sqrt(d)
        a = np.abs(x)
        mid = (-6.0 * rd / d**3) * a**2 + (8.0 / (d * rd)) * a - 1.5 / rd
        # f is odd, so f' is even; the outer branch needs a > 0 only where used
        outer = 0.5 / np.sqrt(np.maximum(a, d))
        out = np.where(a <= 0.5 * d, 1.0 / rd, np.where(a <= d, mid, outer))
        return out if out.ndim else float(out)


class CoercivityViolation(ValueError):
    """Raised when the noise budget breaks stochastic parabolicity."""

    def __init__(self, ratio: float, message: str):
        super().__init__(message)
        self.ratio = ratio


@dataclass(frozen=True)
class RegParams:
    """Accepted (N, delta, M) parameter set with its coercivity margins.

    Construct via :func:`check_coercivity` or :func:`select_parameters`;
    ``ratio`` < 1 is guaranteed there.
    """

    n_particles: int
    delta: float
    cutoff: int
    dim: int
    c_growth: float
    ratio: float

    @property
    def mode_count(self) -> int:
        return (2 * self.cutoff + 1) ** self.dim

    @property
    def energy_margin(self) -> float:
        """1 - ratio, the dissipation fraction surviving in the L2 estimate."""
        return 1.0 - self.ratio

    @property
    def entropy_margin(self) -> float:
        """(1 - ratio)/4, the Fisher-information weight in the entropy estimate."""
        return 0.25 * (1.0 - self.ratio)


def _ratio(n_particles: int, delta: float, cutoff: int, dim: int, c_growth: float) -> float:
    return c_growth * (2 * cutoff + 1) ** dim / (n_particles * delta)


def check_coercivity(
    n_particles: int,
    delta: float,
    cutoff: int,
    dim: int,
    c_growth: float = LIPSCHITZ_CONSTANT**2,
) -> RegParams:
    """Validate a parameter set against the coercivity condition.

    Returns the accepted :class:`RegParams`; raises
    :class:`CoercivityViolation` when ratio >= 1.
    """
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    if not (delta > 0 and np.isfinite(delta)):
        raise ValueError(f"delta must be positive and finite, got {delta}")
    if not (c_growth > 0):
        raise ValueError(f"c_growth must be positive, got {c_growth}")
    r = _ratio(n_particles, delta, cutoff, dim, c_growth)
    if r >= 1.0:
        raise CoercivityViolation(
            r,
            f"coercivity ratio {r:.4g} >= 1 for N={n_particles}, delta={delta:.4g}, "
            f"M={cutoff}, d={dim}: noise overwhelms dissipation",
        )
    return RegParams(
        n_particles=n_particles,
        delta=delta,
        cutoff=cutoff,
        dim=dim,
        c_growth=c_growth,
        ratio=r,
    )


def select_parameters(
    n_particles: int,
    dim: int,
    safety: float = 0.5,
    c_growth: float = LIPSCHITZ_CONSTANT**2,
) -> RegParams:
    """Pick (delta, M) for a given particle number at a given safety level.

    delta = c * N^(-1/(d/2 + 1)) with the cutoff M = ceil(delta^(-1/2)) slaved
    to it, and c the smallest power of two for which the coercivity ratio is
    at most ``safety``. Smaller delta means a better approximation, so the
    search returns the tightest power of two the budget allows.
    """
    if not (0.0 < safety < 1.0):
        raise ValueError(f"safety must lie in (0, 1), got {safety}")
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    base = float(n_particles) ** (-1.0 / (dim / 2.0 + 1.0))
    for j in range(-30, 64):
        delta = (2.0**j) * base
        cutoff = int(np.ceil(delta**-0.5))
        if _ratio(n_particles, delta, cutoff, dim, c_growth) <= safety:
            return check_coercivity(n_particles, delta, cutoff, dim, c_growth)
    raise CoercivityViolation(
        np.inf, f"no power-of-two multiple reaches safety {safety} for N={n_particles}"
    )
