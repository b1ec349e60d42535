"""State representation and geometry of the unit simplex.

An N-component state is a vector of non-negative fractions summing to one.
Only the first N-1 components are independent; the last one is the remainder.
All types here are immutable values after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NegativeComponent, SumViolation

#: construction tolerance on |sum - 1|
TOL_SUM = 1e-12


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SimplexState:
    """A full N-component realizable point: fractions >= 0, sum == 1."""

    fractions: np.ndarray

    @property
    def n(self) -> int:
        return self.fractions.shape[0]

    def reduced(self) -> "ReducedState":
        """Drop the determined last component."""
        return ReducedState(_readonly(self.fractions[:-1]))


@dataclass(frozen=True)
class ReducedState:
    """The N-1 independent coordinates; each >= 0, sum <= 1."""

    fractions: np.ndarray

    @property
    def k(self) -> int:
        return self.fractions.shape[0]


@dataclass(frozen=True)
class BoundaryFace:
    """One face of the reduced-space polytope boundary.

    kind is "zero" (Y_alpha = 0, alpha in 1..N-1, stored 0-based) or
    "unitsum" (sum of the reduced coordinates equals one).
    """

    kind: str
    alpha: Optional[int] = None

    def label(self) -> str:
        if self.kind == "zero":
            return f"zero-face-{self.alpha + 1}"
        return "unit-sum-face"


def enumerate_faces(n: int) -> list[BoundaryFace]:
    """The N-1 zero faces plus the unit-sum face of the reduced system."""
    faces = [BoundaryFace("zero", a) for a in range(n - 1)]
    faces.append(BoundaryFace("unitsum"))
    return faces


@dataclass(frozen=True)
class ProcessDefinition:
    """A drift/diffusion pair over the reduced (N-1)-dimensional state.

    drift(Y, t) maps an (..., N-1) array of reduced states to drift rates of
    the same shape; diffusion(Y, t) maps it to symmetric non-negative
    semi-definite (..., N-1, N-1) matrices.  Both must be pure and handle
    batched input.

    diffusion_is_diagonal, diffusion_diag and diffusion_factor are optional
    fast paths for the integrator: a diagonal flag lets noise be generated
    from the square root of the diagonal, diffusion_diag(Y, t) -> (..., K)
    returns that diagonal without building matrices, and an explicit
    factor(Y, t) -> (..., K, K) with factor @ factor.T == diffusion
    short-circuits numerical factorization.
    """

    dimension: int
    drift: Callable[[np.ndarray, float], np.ndarray]
    diffusion: Callable[[np.ndarray, float], np.ndarray]
    name: str
    parameters: dict = field(default_factory=dict)
    diffusion_is_diagonal: bool = False
    diffusion_diag: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    diffusion_factor: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    @property
    def k(self) -> int:
        return self.dimension - 1


def make_state(fractions) -> SimplexState:
    """Validate and build a SimplexState, renormalizing tiny sum drift.

    Components within -TOL_SUM of zero are clamped to exactly zero; the
    vector is then divided by its sum (which must lie within TOL_SUM of
    one).  Division preserves exact zeros, so absorbing states stay
    absorbing.
    """
    y = np.asarray(fractions, dtype=float)
    if y.ndim != 1 or y.shape[0] < 2:
        raise SumViolation(f"need at least 2 components, got shape {y.shape}")
    if np.any(y < -TOL_SUM):
        bad = int(np.argmin(y))
        raise NegativeComponent(f"component {bad + 1} is {y[bad]:.3e}")
    y = np.where(y < 0.0, 0.0, y)
    s = y.sum()
    if abs(s - 1.0) > TOL_SUM:
        raise SumViolation(f"components sum to {s!r}")
    if s != 1.0:
        y = y / s
        # division can leave the sum one ulp off; absorb the residual into
        # the largest component so zeros stay exact and the sum is exact
        for _ in range(3):
            r = y.sum()
            if r == 1.0:
                break
            y[int(np.argmax(y))] += 1.0 - r
    return SimplexState(_readonly(y))


def complete_reduced(reduced: ReducedState) -> SimplexState:
    """Append the determined remainder 1 - sum(Y) as the last component."""
    y = reduced.fractions
    if np.any(y < -TOL_SUM):
        bad = int(np.argmin(y))
        raise NegativeComponent(f"component {bad + 1} is {y[bad]:.3e}")
    s = y.sum()
    if s > 1.0 + TOL_SUM:
        raise SumViolation(f"reduced components sum to {s!r} > 1")
    last = max(1.0 - s, 0.0)
    return SimplexState(_readonly(np.concatenate([np.maximum(y, 0.0), [last]])))


def boundary_distance(state: ReducedState) -> float:
    """Euclidean distance from a reduced state to the nearest boundary face.

    The zero face Y_alpha = 0 is at distance Y_alpha; the unit-sum
    hyperplane sum(Y) = 1 is at distance (1 - sum(Y)) / sqrt(N-1).
    """
    y = state.fractions
    d_zero = float(np.min(y))
    d_sum = float((1.0 - y.sum()) / np.sqrt(y.shape[0]))
    return max(min(d_zero, d_sum), 0.0)


def sample_face(face: BoundaryFace, rng: np.random.Generator, k: int) -> ReducedState:
    """Uniform sample on one boundary face of the reduced k-dim polytope.

    Points on a zero face have that coordinate exactly zero with the rest
    uniform on their sub-simplex; unit-sum face points sum exactly to one.
    """
    if face.kind == "zero":
        y = np.zeros(k)
        if k > 1:
            # uniform on {x >= 0, sum x <= 1} in k-1 free coordinates
            u = rng.dirichlet(np.ones(k))
            y[[i for i in range(k) if i != face.alpha]] = u[:-1]
        return ReducedState(_readonly(y))
    if face.kind == "unitsum":
        if k == 1:
            return ReducedState(_readonly(np.array([1.0])))
        u = rng.dirichlet(np.ones(k))
        u = u / u.sum()  # tighten roundoff on the face equation
        return ReducedState(_readonly(u))
    raise ValueError(f"unknown face kind {face.kind!r}")


class Ensemble:
    """M realizable states stored as an (M, N) array of full fractions."""

    def __init__(self, states: np.ndarray):
        states = np.ascontiguousarray(states, dtype=float)
        if states.ndim != 2 or states.shape[1] < 2:
            raise ValueError(f"expected (M, N>=2) array, got {states.shape}")
        self.states = states

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def reduced(self) -> np.ndarray:
        return self.states[:, :-1]

    @classmethod
    def from_delta(cls, state: SimplexState, m: int) -> "Ensemble":
        return cls(np.tile(state.fractions, (m, 1)))

    @classmethod
    def from_uniform(cls, n: int, m: int, rng: np.random.Generator) -> "Ensemble":
        return cls(rng.dirichlet(np.ones(n), size=m))

    @classmethod
    def from_states(cls, states) -> "Ensemble":
        return cls(np.stack([s.fractions for s in states]))
