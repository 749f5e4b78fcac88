"""Coefficient matrices sigma(x), ellipticity checks, and complex dilatations.

A coefficient field is a pointwise evaluator x -> 2x2 matrix; the solvers
decide where to sample it (triangle centroids, grid nodes). Evaluators must
be pure functions so fields can be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, EllipticityError

#: counterclockwise quarter rotation; div(J grad u) vanishes identically
ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])

_SINGULAR_DET = 1e-12


@dataclass(frozen=True)
class CoefficientField:
    """Matrix-valued map x -> sigma(x).

    evaluator takes (x1, x2) and returns a 2x2 array; symmetric is the
    caller's claim, checked opportunistically where matrices are evaluated.
    """

    evaluator: Callable[[float, float], np.ndarray]
    symmetric: bool
    descriptor: str

    def at(self, x1: float, x2: float) -> np.ndarray:
        m = np.asarray(self.evaluator(x1, x2), dtype=float)
        if m.shape != (2, 2):
            raise EllipticityError(
                f"field '{self.descriptor}' returned shape {m.shape} at ({x1}, {x2})"
            )
        if not np.isfinite(m).all():
            raise EllipticityError(
                f"field '{self.descriptor}' has non-finite entries at ({x1}, {x2})"
            )
        if self.symmetric and abs(m[0, 1] - m[1, 0]) > 1e-12 * (1.0 + abs(m[0, 1])):
            raise EllipticityError(
                f"field '{self.descriptor}' claims symmetry but "
                f"sigma12 != sigma21 at ({x1}, {x2})"
            )
        return m

    def at_points(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.array([self.at(x, y) for x, y in points])


@dataclass(frozen=True)
class VectorField2:
    """Vector-valued map x -> b(x), the lower-order coefficient."""

    evaluator: Callable[[float, float], tuple]
    descriptor: str = ""

    def at(self, x1: float, x2: float) -> np.ndarray:
        v = np.asarray(self.evaluator(x1, x2), dtype=float)
        if v.shape != (2,) or not np.isfinite(v).all():
            raise EllipticityError(
                f"vector field '{self.descriptor}' invalid at ({x1}, {x2})"
            )
        return v


@dataclass(frozen=True)
class EllipticityReport:
    """Sampled ellipticity summary.

    K_estimate is 1 / min(min_sym_eig, min_inv_sym_eig) when the field passes
    (both minima positive) and None otherwise.
    """

    K_estimate: Optional[float]
    min_sym_eig: float
    min_inv_sym_eig: float
    sample_count: int
    worst_point: tuple[float, float]

    @property
    def elliptic(self) -> bool:
        return min(self.min_sym_eig, self.min_inv_sym_eig) > 0.0

    def to_dict(self) -> dict:
        return {
            "K_estimate": self.K_estimate,
            "min_sym_eig": self.min_sym_eig,
            "min_inv_sym_eig": self.min_inv_sym_eig,
            "sample_count": self.sample_count,
            "worst_point": list(self.worst_point),
            "elliptic": self.elliptic,
        }


@dataclass(frozen=True)
class DilatationPair:
    mu: complex
    nu: complex

    @property
    def magnitude(self) -> float:
        return abs(self.mu) + abs(self.nu)


def _min_sym_eig(m: np.ndarray) -> float:
    # eigenvalues of the symmetric part; only it enters sigma xi . xi
    half = 0.5 * (m[0, 1] + m[1, 0])
    mean = 0.5 * (m[0, 0] + m[1, 1])
    rad = math.hypot(0.5 * (m[0, 0] - m[1, 1]), half)
    return mean - rad


def ellipticity_report(field: CoefficientField, sample_points) -> EllipticityReport:
    """Estimate the ellipticity constant K over a sample set.

    Both quadratic-form bounds are sampled: the least eigenvalue of sym(sigma)
    and of sym(sigma^{-1}). Raises on singular or non-finite samples; a
    non-elliptic field is reported, not raised (K_estimate None).
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if len(pts) == 0:
        raise EllipticityError("ellipticity check needs a nonempty sample set")
    worst = math.inf
    worst_point = (float(pts[0, 0]), float(pts[0, 1]))
    min_sym = math.inf
    min_inv = math.inf
    for x, y in pts:
        m = field.at(x, y)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) <= _SINGULAR_DET:
            raise EllipticityError(
                f"sigma is numerically singular at ({x}, {y}): det={det:.3e}"
            )
        inv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
        e1 = _min_sym_eig(m)
        e2 = _min_sym_eig(inv)
        min_sym = min(min_sym, e1)
        min_inv = min(min_inv, e2)
        local = min(e1, e2)
        if local < worst:
            worst = local
            worst_point = (float(x), float(y))
    K = 1.0 / worst if worst > 0 else None
    return EllipticityReport(
        K_estimate=K,
        min_sym_eig=float(min_sym),
        min_inv_sym_eig=float(min_inv),
        sample_count=len(pts),
        worst_point=worst_point,
    )


def require_elliptic(field: CoefficientField, sample_points) -> EllipticityReport:
    report = ellipticity_report(field, sample_points)
    if not report.elliptic:
        raise EllipticityError(
            f"field '{field.descriptor}' is not elliptic: min symmetric-part "
            f"eigenvalue {min(report.min_sym_eig, report.min_inv_sym_eig):.3e} "
            f"at {report.worst_point}"
        )
    return report


def dilatations(m) -> DilatationPair:
    """Complex dilatations (mu, nu) of a 2x2 coefficient matrix.

    mu = (s22 - s11 - i(s12 + s21)) / (1 + tr + det)
    nu = (1 - det + i(s12 - s21)) / (1 + tr + det)
    """
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    denom = 1.0 + tr + det
    if abs(denom) <= 1e-14:
        raise EllipticityError(
            "1 + tr(sigma) + det(sigma) vanishes; matrix is not elliptic"
        )
    mu = complex(m[1, 1] - m[0, 0], -(m[0, 1] + m[1, 0])) / denom
    nu = complex(1.0 - det, m[0, 1] - m[1, 0]) / denom
    return DilatationPair(mu=mu, nu=nu)


def dilatation_bound(field: CoefficientField, sample_points) -> float:
    """Supremum of |mu| + |nu| over the samples; must come out below 1."""
    require_elliptic(field, sample_points)
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    k = 0.0
    for x, y in pts:
        k = max(k, dilatations(field.at(x, y)).magnitude)
    if not k < 1.0:
        raise EllipticityError(f"dilatation bound {k} is not below 1")
    return k


def divergence_of_sigma(field: CoefficientField, p, step: float) -> tuple[float, float]:
    """Central-difference row divergence (d1 s11 + d2 s21, d1 s12 + d2 s22)."""
    if not step > 0:
        raise ConfigError("finite-difference step must be positive")
    x, y = float(p[0]), float(p[1])
    sxp = field.at(x + step, y)
    sxm = field.at(x - step, y)
    syp = field.at(x, y + step)
    sym = field.at(x, y - step)
    b1 = (sxp[0, 0] - sxm[0, 0]) / (2 * step) + (syp[1, 0] - sym[1, 0]) / (2 * step)
    b2 = (sxp[0, 1] - sxm[0, 1]) / (2 * step) + (syp[1, 1] - sym[1, 1]) / (2 * step)
    return float(b1), float(b2)


# ---------------------------------------------------------------------------
# built-in field library


def identity_field() -> CoefficientField:
    eye = np.eye(2)
    return CoefficientField(lambda x, y: eye, symmetric=True, descriptor="identity")


def constant_field(matrix, descriptor: str = "const") -> CoefficientField:
    m = np.array(matrix, dtype=float)
    sym = abs(m[0, 1] - m[1, 0]) < 1e-15
    return CoefficientField(lambda x, y: m, symmetric=sym, descriptor=descriptor)


def anisotropic_field(l1: float, l2: float, theta: float = 0.0) -> CoefficientField:
    """Constant rotated-anisotropic field R diag(l1, l2) R^T."""
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    m = R @ np.diag([l1, l2]) @ R.T
    return constant_field(m, descriptor=f"aniso:l1={l1},l2={l2},theta={theta}")


def meyers_sigma(alpha: float) -> CoefficientField:
    """Radial coefficient family with eigenvalues alpha and 1/alpha.

    Entries are homogeneous of degree zero, smooth away from the origin and
    discontinuous there (for alpha != 1). Evaluation at the origin raises.
    """
    if not alpha > 0:
        raise ConfigError("meyers alpha must be positive")
    ai = 1.0 / alpha

    def ev(x1, x2):
        r2 = x1 * x1 + x2 * x2
        if r2 == 0.0:
            raise EllipticityError("sigma is discontinuous at 0; cannot evaluate there")
        off = (ai - alpha) * x1 * x2 / r2
        return np.array(
            [
                [(ai * x1 * x1 + alpha * x2 * x2) / r2, off],
                [off, (alpha * x1 * x1 + ai * x2 * x2) / r2],
            ]
        )

    return CoefficientField(ev, symmetric=True, descriptor=f"meyers:alpha={alpha}")


def holder_bump_field(
    eps: float, cx: float, cy: float, w: float, theta: float
) -> CoefficientField:
    """Identity plus a smooth rank-one Gaussian bump: I + eps exp(-|x-c|^2/w^2) dd^T."""
    if eps <= -1.0:
        raise ConfigError("holder bump needs eps > -1 for ellipticity")
    if w <= 0:
        raise ConfigError("holder bump width must be positive")
    d = np.array([math.cos(theta), math.sin(theta)])
    P = np.outer(d, d)
    eye = np.eye(2)

    def ev(x1, x2):
        g = math.exp(-((x1 - cx) ** 2 + (x2 - cy) ** 2) / (w * w))
        return eye + (eps * g) * P

    return CoefficientField(
        ev,
        symmetric=True,
        descriptor=f"holder:eps={eps},cx={cx},cy={cy},w={w},theta={theta}",
    )


def nonsymmetric_field(tau: float, base: Optional[CoefficientField] = None) -> CoefficientField:
    """Symmetric base plus tau J; the skew part never enters sigma xi . xi."""
    if base is None:
        base = identity_field()
    skew = tau * ROTATION

    def ev(x1, x2):
        return base.at(x1, x2) + skew

    return CoefficientField(
        ev, symmetric=False, descriptor=f"nonsym:tau={tau},base={base.descriptor}"
    )


def random_holder_field(seed: int) -> CoefficientField:
    """Seeded smooth symmetric field: identity plus 2-3 nonnegative bumps."""
    rng = np.random.default_rng(seed)
    nb = int(rng.integers(2, 4))
    bumps = []
    for _ in range(nb):
        c = rng.uniform(-0.7, 0.7, size=2)
        w = rng.uniform(0.3, 0.7)
        eps = rng.uniform(0.1, 0.5)
        th = rng.uniform(0.0, math.pi)
        d = np.array([math.cos(th), math.sin(th)])
        bumps.append((c[0], c[1], w, eps, np.outer(d, d)))
    eye = np.eye(2)

    def ev(x1, x2):
        m = eye.copy()
        for cx, cy, w, eps, P in bumps:
            m += eps * math.exp(-((x1 - cx) ** 2 + (x2 - cy) ** 2) / (w * w)) * P
        return m

    return CoefficientField(ev, symmetric=True, descriptor=f"randholder:seed={seed}")


def random_nonsymmetric_field(seed: int, tau: Optional[float] = None) -> CoefficientField:
    """Seeded nonsymmetric field: random smooth symmetric part plus tau J."""
    rng = np.random.default_rng(seed ^ 0x5EED)
    if tau is None:
        tau = float(rng.uniform(0.05, 0.3))
    if not abs(tau) < 1.0:
        raise ConfigError("need |tau| < 1")
    base = random_holder_field(seed)
    f = nonsymmetric_field(tau, base)
    return CoefficientField(
        f.evaluator, symmetric=False, descriptor=f"randnonsym:seed={seed},tau={tau}"
    )


# ---------------------------------------------------------------------------
# descriptor parsing, e.g. "meyers:alpha=2" or "aniso:l1=2,l2=0.5,theta=0.3"


def parse_descriptor(text: str) -> tuple[str, dict]:
    text = text.strip()
    if not text:
        raise ConfigError("empty descriptor")
    name, _, rest = text.partition(":")
    params: dict[str, float] = {}
    if rest:
        for item in rest.split(","):
            key, sep, val = item.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"malformed descriptor parameter '{item}' in '{text}'")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise ConfigError(f"non-numeric value '{val}' in descriptor '{text}'")
    return name.strip().lower(), params


def _need(params: dict, keys, name: str) -> list[float]:
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError(f"descriptor '{name}' is missing parameters {missing}")
    return [params[k] for k in keys]


def field_from_descriptor(text: str) -> CoefficientField:
    """Resolve a coefficient descriptor string to a field."""
    name, p = parse_descriptor(text)
    if name == "identity":
        return identity_field()
    if name == "const":
        a11, a12, a21, a22 = _need(p, ("a11", "a12", "a21", "a22"), name)
        return constant_field([[a11, a12], [a21, a22]], descriptor=text)
    if name == "aniso":
        l1, l2 = _need(p, ("l1", "l2"), name)
        return anisotropic_field(l1, l2, p.get("theta", 0.0))
    if name == "meyers":
        (alpha,) = _need(p, ("alpha",), name)
        return meyers_sigma(alpha)
    if name == "holder":
        (eps,) = _need(p, ("eps",), name)
        return holder_bump_field(
            eps, p.get("cx", 0.0), p.get("cy", 0.0), p.get("w", 0.5), p.get("theta", 0.0)
        )
    if name == "nonsym":
        (tau,) = _need(p, ("tau",), name)
        return nonsymmetric_field(tau)
    if name == "randholder":
        (seed,) = _need(p, ("seed",), name)
        return random_holder_field(int(seed))
    if name == "randnonsym":
        (seed,) = _need(p, ("seed",), name)
        return random_nonsymmetric_field(int(seed), p.get("tau"))
    raise ConfigError(f"unknown coefficient descriptor '{text}'")


def library_fields() -> list[CoefficientField]:
    """Representative members of every built-in family, for sweep tests."""
    return [
        identity_field(),
        anisotropic_field(2.0, 0.5),
        anisotropic_field(3.0, 0.8, theta=0.3),
        meyers_sigma(2.0),
        holder_bump_field(0.4, 0.2, -0.1, 0.5, 0.7),
        nonsymmetric_field(0.2),
    ]
