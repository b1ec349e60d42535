"""The four realizable simplex diffusion processes plus negative controls.

Each constructor validates its parameters and returns a ProcessDefinition
whose drift/diffusion closures accept batched reduced states of shape
(..., N-1).  Drift components carry units of 1/time, diffusion entries
1/time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ProcessDefinition
from .errors import DirichletConstraintViolated, InvalidParameter, SingularNesting

DIRCONST_RTOL = 1e-10


def _as_vector(x, name, length=None):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise InvalidParameter(name, f"expected a vector, got shape {v.shape}")
    if length is not None and v.shape[0] != length:
        raise InvalidParameter(name, f"expected length {length}, got {v.shape[0]}")
    return v


@dataclass(frozen=True)
class BetaParams:
    """Parameters of the scalar mean-reverting process with quadratic diffusion."""

    b: float
    S: float
    kappa: float

    def __post_init__(self):
        if not self.b > 0:
            raise InvalidParameter("b", f"must be > 0, got {self.b}")
        if not self.kappa > 0:
            raise InvalidParameter("kappa", f"must be > 0, got {self.kappa}")
        if not 0.0 <= self.S <= 1.0:
            raise InvalidParameter("S", f"must be in [0, 1], got {self.S}")

    @property
    def absorbing_allowed(self) -> bool:
        return self.S in (0.0, 1.0)


@dataclass(frozen=True)
class WrightFisherParams:
    omega: np.ndarray

    def __post_init__(self):
        omega = _as_vector(self.omega, "omega")
        if omega.shape[0] < 2:
            raise InvalidParameter("omega", "need at least 2 components")
        if np.any(omega <= 0):
            raise InvalidParameter("omega", "all components must be > 0")
        object.__setattr__(self, "omega", omega)

    @property
    def omega_total(self) -> float:
        return float(self.omega.sum())


@dataclass(frozen=True)
class DirichletParams:
    """Per-component relaxation/mean/diffusion vectors over the N-1 reduced axes.

    dirichlet_invariant requests the guarantee that the invariant law is
    Dirichlet, which additionally requires (1-S_a) b_a / kappa_a to be the
    same for every component.
    """

    b: np.ndarray
    S: np.ndarray
    kappa: np.ndarray
    dirichlet_invariant: bool = False

    def __post_init__(self):
        b = _as_vector(self.b, "b")
        S = _as_vector(self.S, "S", b.shape[0])
        kappa = _as_vector(self.kappa, "kappa", b.shape[0])
        if np.any(b <= 0):
            raise InvalidParameter("b", "all components must be > 0")
        if np.any(kappa <= 0):
            raise InvalidParameter("kappa", "all components must be > 0")
        if np.any((S <= 0) | (S >= 1)):
            raise InvalidParameter("S", "all components must be in (0, 1)")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "kappa", kappa)
        if self.dirichlet_invariant:
            ratio = (1.0 - S) * b / kappa
            if np.max(np.abs(ratio - ratio[0])) > DIRCONST_RTOL * max(1.0, abs(ratio[0])):
                raise DirichletConstraintViolated(
                    f"(1-S) b / kappa must be constant, got {ratio}")


@dataclass(frozen=True)
class GenDirichletParams:
    """Nested-remainder generalization; c couples component a to later axes.

    c is a (K-1) x (K-1) matrix, zero below the diagonal, where K is the
    number of reduced components.
    """

    b: np.ndarray
    S: np.ndarray
    kappa: np.ndarray
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        b = _as_vector(self.b, "b")
        S = _as_vector(self.S, "S", b.shape[0])
        kappa = _as_vector(self.kappa, "kappa", b.shape[0])
        if np.any(b <= 0):
            raise InvalidParameter("b", "all components must be > 0")
        if np.any(kappa <= 0):
            raise InvalidParameter("kappa", "all components must be > 0")
        if np.any((S <= 0) | (S >= 1)):
            raise InvalidParameter("S", "all components must be in (0, 1)")
        k = b.shape[0]
        c = self.c
        if c is None:
            c = np.zeros((k - 1, k - 1))
        c = np.asarray(c, dtype=float)
        if c.shape != (k - 1, k - 1):
            raise InvalidParameter("c", f"expected shape {(k - 1, k - 1)}, got {c.shape}")
        if k > 1 and np.any(np.tril(c, -1) != 0.0):
            raise InvalidParameter("c", "entries below the diagonal must be zero")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "c", c)

    @classmethod
    def reduction_of(cls, p: DirichletParams) -> "GenDirichletParams":
        """Coupling matrix choice c[a, beta] = kappa[beta] (a <= beta)."""
        k = p.b.shape[0]
        c = np.triu(np.tile(p.kappa[:-1], (k - 1, 1))) if k > 1 else np.zeros((0, 0))
        return cls(b=p.b, S=p.S, kappa=p.kappa, c=c)


def beta_process(p: BetaParams) -> ProcessDefinition:
    """Scalar process on [0, 1]: linear drift toward S, quadratic diffusion."""
    b, S, kappa = p.b, p.S, p.kappa

    def drift(y, t):
        return 0.5 * b * (S - y)

    def diffusion_diag(y, t):
        return kappa * y * (1.0 - y)

    def diffusion(y, t):
        return diffusion_diag(y, t)[..., np.newaxis]

    return ProcessDefinition(
        dimension=2, drift=drift, diffusion=diffusion, name="beta",
        parameters={"b": b, "S": S, "kappa": kappa,
                    "absorbing_allowed": p.absorbing_allowed},
        diffusion_is_diagonal=True, diffusion_diag=diffusion_diag)


def _wf_diffusion_factor(y):
    """Closed-form lower-triangular factor of diag(Y) - Y Y^T.

    Built from the nested remainders q_j = 1 - Y_1 - ... - Y_j; columns
    whose remainder has hit zero carry no noise and are zeroed.
    """
    k = y.shape[-1]
    q = 1.0 - np.cumsum(y, axis=-1)
    q_prev = np.concatenate([np.ones(y.shape[:-1] + (1,)), q[..., :-1]], axis=-1)
    L = np.zeros(y.shape + (k,))
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(k):
            rad = y[..., i] * q[..., i] / q_prev[..., i]
            L[..., i, i] = np.sqrt(np.maximum(np.nan_to_num(rad, nan=0.0), 0.0))
            for j in range(i):
                rad = y[..., j] / (q[..., j] * q_prev[..., j])
                rad = np.maximum(np.nan_to_num(rad, nan=0.0, posinf=0.0), 0.0)
                L[..., i, j] = -y[..., i] * np.sqrt(rad)
    return L


def wright_fisher_process(p: WrightFisherParams) -> ProcessDefinition:
    """Multivariate neutral-mutation diffusion with full coupling matrix."""
    omega = p.omega
    w = p.omega_total
    k = omega.shape[0] - 1
    om = omega[:k]

    def drift(y, t):
        return 0.5 * (om - w * y)

    def diffusion(y, t):
        eye = np.eye(k)
        return y[..., :, np.newaxis] * (eye - y[..., np.newaxis, :])

    return ProcessDefinition(
        dimension=k + 1, drift=drift, diffusion=diffusion, name="wright_fisher",
        parameters={"omega": omega.tolist()},
        diffusion_factor=lambda y, t: _wf_diffusion_factor(y))


def dirichlet_process(p: DirichletParams) -> ProcessDefinition:
    """Componentwise mean-reverting process with diagonal diffusion b_aa ~ Y_a Y_N."""
    b, S, kappa = p.b, p.S, p.kappa
    k = b.shape[0]
    c_in = 0.5 * b * S
    c_out = 0.5 * b * (1.0 - S)

    def drift(y, t):
        y_last = 1.0 - np.sum(y, axis=-1, keepdims=True)
        return c_in * y_last - c_out * y

    def diffusion_diag(y, t):
        y_last = 1.0 - np.sum(y, axis=-1, keepdims=True)
        return kappa * y * y_last

    def diffusion(y, t):
        d = diffusion_diag(y, t)
        out = np.zeros(y.shape + (k,))
        idx = np.arange(k)
        out[..., idx, idx] = d
        return out

    return ProcessDefinition(
        dimension=k + 1, drift=drift, diffusion=diffusion, name="dirichlet",
        parameters={"b": b.tolist(), "S": S.tolist(), "kappa": kappa.tolist(),
                    "dirichlet_invariant": p.dirichlet_invariant},
        diffusion_is_diagonal=True, diffusion_diag=diffusion_diag)


def _gen_dirichlet_terms(y, p: GenDirichletParams):
    """Nesting remainders, their inverse products, and the coupling sum.

    Returns (remainders cy, prefactors u, coupling sum) with guarded
    division: a vanishing numerator forces the product to zero; any other
    division by a zero remainder raises SingularNesting.
    """
    k = p.b.shape[0]
    cy = 1.0 - np.cumsum(y, axis=-1)          # cy[..., a] = 1 - Y_1 - ... - Y_{a+1}
    cy_last = cy[..., -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        # u[..., a] = 1 / (cy[a] * ... * cy[k-2]); u[..., k-1] = 1
        u = np.ones(y.shape)
        if k > 1:
            prod = np.cumprod(cy[..., k - 2::-1], axis=-1)[..., ::-1]
            u[..., : k - 1] = 1.0 / prod
        csum = np.zeros(y.shape)
        for a in range(k - 1):
            for beta in range(a, k - 1):
                num = y[..., a] * cy_last * p.c[a, beta]
                ratio = np.where(num == 0.0, 0.0, num / cy[..., beta])
                csum[..., a] += ratio
    return cy, cy_last, u, csum


def gen_dirichlet_process(p: GenDirichletParams) -> ProcessDefinition:
    """Nested generalization of the Dirichlet process with triangular coupling."""
    b, S, kappa = p.b, p.S, p.kappa
    k = b.shape[0]

    def drift(y, t):
        cy, cy_last, u, csum = _gen_dirichlet_terms(y, p)
        bracket = b * (S * cy_last[..., np.newaxis] - (1.0 - S) * y) + csum
        out = np.where(bracket == 0.0, 0.0, 0.5 * u * bracket)
        if not np.all(np.isfinite(out)):
            raise SingularNesting("drift is undefined: zero nested remainder "
                                  "against a non-zero numerator")
        return out

    def diffusion_diag(y, t):
        cy, cy_last, u, csum = _gen_dirichlet_terms(y, p)
        num = kappa * y * cy_last[..., np.newaxis]
        d = np.where(num == 0.0, 0.0, num * u)
        if not np.all(np.isfinite(d)):
            raise SingularNesting("diffusion is undefined: zero nested remainder "
                                  "against a non-zero numerator")
        return d

    def diffusion(y, t):
        d = diffusion_diag(y, t)
        out = np.zeros(y.shape + (k,))
        idx = np.arange(k)
        out[..., idx, idx] = d
        return out

    return ProcessDefinition(
        dimension=k + 1, drift=drift, diffusion=diffusion, name="gen_dirichlet",
        parameters={"b": b.tolist(), "S": S.tolist(), "kappa": kappa.tolist(),
                    "c": p.c.tolist()},
        diffusion_is_diagonal=True, diffusion_diag=diffusion_diag)


def broken_process(style: str, n: int = 3) -> ProcessDefinition:
    """Deliberately non-realizable controls for the boundary auditor.

    "constant_diffusion" keeps diffusion at 0.1 * I everywhere (non-zero on
    every face); "outward_drift" pushes every component with rate -1
    (outward across every zero face).
    """
    k = n - 1

    if style == "constant_diffusion":
        def drift(y, t):
            return np.zeros_like(y)

        def diffusion(y, t):
            out = np.zeros(y.shape + (k,))
            idx = np.arange(k)
            out[..., idx, idx] = 0.1
            return out

        name = "broken_constant_diffusion"
    elif style == "outward_drift":
        def drift(y, t):
            return np.full_like(y, -1.0)

        def diffusion(y, t):
            return np.zeros(y.shape + (k,))

        name = "broken_outward_drift"
    else:
        raise InvalidParameter("style", f"unknown style {style!r}")

    return ProcessDefinition(
        dimension=n, drift=drift, diffusion=diffusion, name=name,
        parameters={"style": style, "n": n}, diffusion_is_diagonal=True)
