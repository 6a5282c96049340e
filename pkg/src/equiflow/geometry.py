"""Scaled simplices, entropy regularizers, mirror maps, and Bregman divergences.

Each player's strategy space is a simplex scaled to its demand.  The
regularizer is the scaled negative entropy, whose mirror map has a closed
softmax form; all norms are l1 on the primal side and l-infinity on the
dual side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Softmax weights below this are flushed to zero and the point renormalized.
_FLUSH_THRESHOLD = 1e-300

# Number of sampled pairs used to verify the strong-convexity constant of a
# regularizer at construction time.
_MU_CHECK_SAMPLES = 16


@dataclass(frozen=True)
class ScaledSimplex:
    """The set ``{x >= 0 : sum(x) = scale}`` in ``dimension`` coordinates."""

    dimension: int
    scale: float

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError(f"simplex dimension must be >= 1, got {self.dimension}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"simplex scale must be positive, got {self.scale}")

    @property
    def sum_tolerance(self) -> float:
        return 1e-9 * self.scale

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            return False
        if not np.all(x >= 0.0):
            return False
        return abs(float(np.sum(x)) - self.scale) <= self.sum_tolerance

    def uniform(self) -> np.ndarray:
        """Center of the simplex: equal mass on every coordinate."""
        return np.full(self.dimension, self.scale / self.dimension)

    def require_member(self, x, what: str = "point") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise DomainError(
                f"{what} is not in the scaled simplex "
                f"(dimension {self.dimension}, scale {self.scale})"
            )
        return x


def entropy_eval(x, space: ScaledSimplex) -> float:
    """Scaled negative entropy ``sum_p (x_p/S) log(x_p/S)``.

    Zero entries contribute zero (the 0 log 0 convention).  The value is
    nonpositive and vanishes exactly at the vertices.
    """
    x = space.require_member(x)
    u = x / space.scale
    positive = u > 0.0
    out = np.zeros_like(u)
    out[positive] = u[positive] * np.log(u[positive])
    return float(np.sum(out))


def entropy_gradient(x, space: ScaledSimplex) -> np.ndarray:
    """Gradient of the scaled negative entropy; undefined on the boundary."""
    x = space.require_member(x)
    if np.any(x <= 0.0):
        raise DomainError("entropy gradient requires a strictly positive point")
    return (np.log(x / space.scale) + 1.0) / space.scale


def entropy_mirror_map(z, space: ScaledSimplex) -> np.ndarray:
    """Maximizer of ``<z, x> - psi(x)`` over the scaled simplex.

    For the scaled negative entropy the solution is the scaled softmax of
    ``scale * z``, computed with max-subtraction so arbitrarily negative or
    positive duals stay finite.  The output is strictly positive unless an
    entry underflows, in which case it is flushed to zero and the point is
    renormalized back onto the simplex.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (space.dimension,):
        raise DomainError(
            f"dual vector has shape {z.shape}, expected ({space.dimension},)"
        )
    logits = space.scale * z
    if not np.all(np.isfinite(logits)):
        raise DomainError("dual vector has non-finite entries")
    weights = np.exp(logits - np.max(logits))
    x = space.scale * (weights / np.sum(weights))
    tiny = x < _FLUSH_THRESHOLD
    if np.any(tiny):
        x[tiny] = 0.0
        x *= space.scale / np.sum(x)
    return x


@dataclass(frozen=True)
class EntropyRegularizer:
    """Scaled negative entropy on a scaled simplex.

    The strong-convexity constant defaults to ``1/scale**2`` with respect to
    the l1 norm and is verified at construction against sampled Bregman
    lower bounds.
    """

    space: ScaledSimplex
    strong_convexity_mu: float = field(default=0.0)

    def __post_init__(self):
        if self.strong_convexity_mu == 0.0:
            object.__setattr__(self, "strong_convexity_mu", 1.0 / self.space.scale**2)
        if not self.strong_convexity_mu > 0:
            raise DomainError("strong convexity constant must be positive")
        self._verify_mu()

    def _verify_mu(self):
        rng = np.random.default_rng(0)
        n, s = self.space.dimension, self.space.scale
        for _ in range(_MU_CHECK_SAMPLES):
            x = s * _interior_point(rng, n)
            x_ref = s * _interior_point(rng, n)
            lower = 0.5 * self.strong_convexity_mu * float(np.sum(np.abs(x - x_ref))) ** 2
            if bregman(x, x_ref, self) + 1e-12 < lower:
                raise DomainError(
                    "sampled Bregman divergence violates the declared "
                    f"strong-convexity constant {self.strong_convexity_mu}"
                )

    def value(self, x) -> float:
        return entropy_eval(x, self.space)

    def gradient(self, x) -> np.ndarray:
        return entropy_gradient(x, self.space)

    def mirror_map(self, z) -> np.ndarray:
        return entropy_mirror_map(z, self.space)


def _interior_point(rng: np.random.Generator, n: int) -> np.ndarray:
    # Softmax of a Gaussian draw: strictly positive, sums to one.
    g = rng.standard_normal(n)
    w = np.exp(g - np.max(g))
    return w / np.sum(w)


def bregman(x, x_ref, reg: EntropyRegularizer) -> float:
    """Bregman divergence ``psi(x) - psi(x_ref) - <grad psi(x_ref), x - x_ref>``.

    On the simplex the linear terms cancel and the divergence reduces to the
    scaled relative entropy ``sum_p (x_p/S) log(x_p / x_ref_p)``, which is
    the numerically stable form evaluated here.  Nonnegative, and zero only
    at ``x == x_ref``.
    """
    space = reg.space
    x = space.require_member(x, "x")
    x_ref = space.require_member(x_ref, "x_ref")
    if np.any(x_ref <= 0.0):
        raise DomainError("bregman reference point must be strictly positive")
    positive = x > 0.0
    terms = np.zeros_like(x)
    terms[positive] = x[positive] * np.log(x[positive] / x_ref[positive])
    return float(np.sum(terms)) / space.scale
