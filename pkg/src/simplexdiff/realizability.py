"""Numerical audits of boundary realizability and moment-bound constraints.

The boundary audit samples each face of the reduced-space polytope,
substitutes the face equation exactly (zeros, or a unit sum), and checks
the sign of the inward drift and the vanishing of the diffusion there.
Moment audits check the closed bounds and the zero-row-sum structure that
any ensemble of realizable states must satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BoundaryFace, ProcessDefinition, enumerate_faces
from .errors import EvaluationFailure
from .statistics import MomentSet

#: identities that hold per-sample are checked at this fixed tolerance
EXACT_TOL = 1e-12


@dataclass(frozen=True)
class ToleranceSet:
    diffusion_zero_tol: float = 1e-10
    drift_sign_tol: float = 1e-10
    moment_stat_tol: float = 3.0

    def __post_init__(self):
        for name in ("diffusion_zero_tol", "drift_sign_tol", "moment_stat_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class AuditCheck:
    constraint: str        # e.g. "zero-face-1:drift-inward"
    subject: str           # face label or moment name
    violation: float       # worst violation magnitude, >= 0
    location: object       # reduced coordinates or an index pair
    passed: bool


@dataclass
class AuditReport:
    checks: list = field(default_factory=list)

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, constraint, subject, violation, location, tol):
        violation = float(max(violation, 0.0))
        self.checks.append(AuditCheck(constraint=constraint, subject=subject,
                                      violation=violation, location=location,
                                      passed=violation <= tol))

    def worst(self) -> float:
        return max((c.violation for c in self.checks), default=0.0)

    def to_dict(self) -> dict:
        return {"overall_pass": self.overall_pass,
                "checks": [{"constraint": c.constraint, "subject": c.subject,
                            "violation": c.violation,
                            "location": np.asarray(c.location).tolist()
                            if c.location is not None else None,
                            "passed": c.passed} for c in self.checks]}

    def table(self) -> str:
        lines = [f"{'constraint':40s} {'subject':18s} {'violation':>12s} pass"]
        for c in self.checks:
            lines.append(f"{c.constraint:40s} {c.subject:18s} "
                         f"{c.violation:12.3e} {'yes' if c.passed else 'NO'}")
        lines.append(f"overall: {'PASS' if self.overall_pass else 'FAIL'}")
        return "\n".join(lines)


def _generator(rng):
    return rng.generator if hasattr(rng, "generator") else rng


def _face_points(face: BoundaryFace, k: int, n_samples: int,
                 gen: np.random.Generator) -> np.ndarray:
    """n_samples points with the face equation substituted exactly."""
    if face.kind == "zero":
        pts = np.zeros((n_samples, k))
        if k > 1:
            sub = gen.dirichlet(np.ones(k), size=n_samples)[:, :-1]
            cols = [i for i in range(k) if i != face.alpha]
            pts[:, cols] = sub
        return pts
    pts = gen.dirichlet(np.ones(k), size=n_samples) if k > 1 else np.ones((n_samples, 1))
    return pts / pts.sum(axis=1, keepdims=True)


def _worst(values: np.ndarray, pts: np.ndarray):
    """Largest value over (sample, ...) and the sample where it occurs."""
    flat = values.reshape(values.shape[0], -1)
    per_sample = flat.max(axis=1)
    i = int(np.argmax(per_sample))
    return float(per_sample[i]), pts[i]


def audit_boundary(proc: ProcessDefinition, samples_per_face: int, rng,
                   tol: ToleranceSet = ToleranceSet()) -> AuditReport:
    """Check the inward-drift and zero-diffusion conditions on every face.

    Zero face alpha: the drift component alpha must be >= 0 (up to sign
    tolerance) and row alpha of the diffusion matrix must vanish.  Unit-sum
    face: the drift component along the outward normal (the sum over
    components) must be <= 0 and the diffusion must annihilate the normal
    (zero row-sums and total sum); diagonal-structured processes must
    additionally satisfy the stricter entrywise conditions there, every
    drift component <= 0 and every matrix entry zero.
    """
    if samples_per_face < 1:
        raise ValueError("samples_per_face must be >= 1")
    gen = _generator(rng)
    k = proc.k
    report = AuditReport()
    for face in enumerate_faces(proc.dimension):
        pts = _face_points(face, k, samples_per_face, gen)
        try:
            a = np.atleast_2d(proc.drift(pts, 0.0))
            B = proc.diffusion(pts, 0.0)
        except Exception as exc:
            raise EvaluationFailure(
                f"drift/diffusion raised on {face.label()}: {exc}") from exc
        B = B.reshape(pts.shape[0], k, k)
        label = face.label()
        if face.kind == "zero":
            viol, loc = _worst(-a[:, face.alpha: face.alpha + 1], pts)
            report.add(f"{label}:drift-inward", label, viol, loc,
                       tol.drift_sign_tol)
            viol, loc = _worst(np.abs(B[:, face.alpha, :]), pts)
            report.add(f"{label}:diffusion-zero", label, viol, loc,
                       tol.diffusion_zero_tol)
        else:
            viol, loc = _worst(a.sum(axis=1, keepdims=True), pts)
            report.add(f"{label}:drift-inward", label, viol, loc,
                       tol.drift_sign_tol)
            viol, loc = _worst(np.abs(B.sum(axis=2)), pts)
            report.add(f"{label}:diffusion-row-sums", label, viol, loc,
                       tol.diffusion_zero_tol)
            viol, loc = _worst(np.abs(B.sum(axis=(1, 2)))[:, np.newaxis], pts)
            report.add(f"{label}:diffusion-total-sum", label, viol, loc,
                       tol.diffusion_zero_tol)
            if proc.diffusion_is_diagonal:
                viol, loc = _worst(a, pts)
                report.add(f"{label}:drift-componentwise", label, viol, loc,
                           tol.drift_sign_tol)
                viol, loc = _worst(np.abs(B), pts)
                report.add(f"{label}:diffusion-entries", label, viol, loc,
                           tol.diffusion_zero_tol)
    return report


def audit_moment_bounds(m: MomentSet, ensemble_size: int,
                        tol: ToleranceSet = ToleranceSet()) -> AuditReport:
    """Closed bounds on means and central moments of bounded fractions."""
    report = AuditReport()
    t = EXACT_TOL

    def bound(name, values, lo, hi):
        values = np.asarray(values)
        over = np.maximum(lo - values, values - hi)
        i = int(np.argmax(over))
        report.add(name, "moments", float(over.flat[i]),
                   list(np.unravel_index(i, values.shape)), t)

    bound("means-in-[0,1]", m.mean, 0.0, 1.0)
    report.add("means-sum-to-one", "moments", abs(m.mean.sum() - 1.0), None, t)
    bound("variances-in-[0,1]", np.diagonal(m.covariance), 0.0, 1.0)
    bound("covariances-in-[-1,1]", m.covariance, -1.0, 1.0)
    bound("third-moments-in-[-1,1]", m.third, -1.0, 1.0)
    bound("fourth-moments-in-[0,1]", m.fourth, 0.0, 1.0)
    return report


def _rowsum_se(m: MomentSet, ensemble_size: int) -> np.ndarray:
    """Conservative standard-error scale for covariance row-sums.

    Treats the row-sum estimator as an average of y_a * sum(y) products
    with spread bounded by the componentwise standard deviations; exact for
    degenerate ensembles (zero), conservative otherwise.
    """
    sd = np.sqrt(np.maximum(np.diagonal(m.covariance), 0.0))
    return sd * sd.sum() / np.sqrt(max(ensemble_size, 1))


def audit_covariance_structure(m: MomentSet, ensemble_size: int,
                               tol: ToleranceSet = ToleranceSet()) -> AuditReport:
    """Zero row-sums, the weak constraint, and exact symmetry of the covariance.

    The identities hold sample-wise for realizable states, so the
    statistical tolerance is floored at the fixed accumulation tolerance.
    """
    report = AuditReport()
    se = _rowsum_se(m, ensemble_size)
    rows = m.covariance_row_sums()
    thresholds = np.maximum(tol.moment_stat_tol * se, EXACT_TOL)
    i = int(np.argmax(np.abs(rows) - thresholds))
    report.add("covariance-row-sums-zero", "covariance", abs(rows[i]), [i + 1],
               thresholds[i])
    weak = m.weak_constraint_residual()
    weak_tol = max(tol.moment_stat_tol * float(se.sum()), EXACT_TOL)
    report.add("weak-zero-sum-residual", "covariance", abs(weak), None, weak_tol)
    asym = np.max(np.abs(m.covariance - m.covariance.T))
    report.add("covariance-symmetry", "covariance", asym, None, 0.0)
    return report
