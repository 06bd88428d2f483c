"""
Hamiltonians H(x, p), their monotone numerical counterparts, and the sampled
audit of the standing assumptions (coercivity, H(x,0)=0 < H(x,p), convexity in
p, the two-point Lipschitz bound, the upper envelope m, l >= 0, and the
compactness proxy for argmin l).
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .exceptions import ValidationError
from .fields import ScalarField, interp_linear
from .reports import ReportBlock

logger = logging.getLogger(__name__)

CONVEXITY_SLACK = 1e-12
EQUALITY_SLACK = 1e-12


class HamiltonianKind(str, enum.Enum):
    EIKONAL = "eikonal"
    CUSTOM = "custom"


class Flux(str, enum.Enum):
    GODUNOV = "godunov"
    LAX_FRIEDRICHS = "lax_friedrichs"


def _as_speed(speed):
    if isinstance(speed, ScalarField):
        return lambda x: interp_linear(speed, x)
    if callable(speed):
        return lambda x: np.broadcast_to(np.asarray(speed(x), dtype=np.float64), np.shape(x)) * 1.0
    value = float(speed)
    return lambda x: np.full(np.shape(x), value) if np.ndim(x) else value


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    kind: HamiltonianKind
    evaluator: Callable
    nu: Callable
    C_H: float
    m: Callable
    m_inv: Callable
    speed: Optional[Callable] = None
    label: str = ""

    @classmethod
    def eikonal(cls, speed, window=(-10.0, 10.0), samples=2001, label="eikonal"):
        """H(x, p) = a(x)|p| with a > 0; nu, C_H and m default from sup a."""
        a = _as_speed(speed)
        if isinstance(speed, ScalarField):
            xs = speed.grid.nodes
        else:
            xs = np.linspace(window[0], window[1], samples)
        a_values = np.asarray(a(xs), dtype=np.float64)
        if not np.all(np.isfinite(a_values)) or np.any(a_values <= 0):
            i = int(np.argmin(np.where(np.isfinite(a_values), a_values, -np.inf)))
            raise ValidationError(f"speed must be positive, a({xs[i]}) = {a_values[i]}", {"x": float(xs[i])})
        sup_a = float(a_values.max())
        return cls(
            kind=HamiltonianKind.EIKONAL,
            evaluator=lambda x, p: a(x) * np.abs(p),
            nu=a,
            C_H=sup_a,
            m=lambda r: sup_a * np.asarray(r, dtype=np.float64),
            m_inv=lambda s: np.asarray(s, dtype=np.float64) / sup_a,
            speed=a,
            label=label,
        )

    @classmethod
    def custom(cls, evaluator, nu, C_H, m, m_inv, label="custom"):
        if C_H < 0:
            raise ValidationError(f"C_H must be nonnegative, got {C_H}", {"C_H": C_H})
        return cls(
            kind=HamiltonianKind.CUSTOM,
            evaluator=evaluator,
            nu=_as_speed(nu),
            C_H=float(C_H),
            m=m,
            m_inv=m_inv,
            label=label,
        )

    @property
    def is_eikonal(self):
        return self.kind == HamiltonianKind.EIKONAL

    def default_flux(self):
        return Flux.GODUNOV if self.is_eikonal else Flux.LAX_FRIEDRICHS


def _require_finite(**arrays):
    for name, value in arrays.items():
        if not np.all(np.isfinite(value)):
            raise ValidationError(f"{name} is not finite", {name: value})


def _scalar_or_array(value):
    value = np.asarray(value, dtype=np.float64)
    return float(value) if value.ndim == 0 else value


def eval_H(spec, x, p):
    _require_finite(x=x, p=p)
    return _scalar_or_array(spec.evaluator(np.asarray(x, dtype=np.float64), np.asarray(p, dtype=np.float64)))


def numerical_H(spec, x, p_minus, p_plus, theta=0.0, flux=None):
    """Monotone numerical Hamiltonian from the backward/forward slopes.

    Godunov (Eikonal only): a(x) * max(max(p-, 0), max(-p+, 0)).
    Lax-Friedrichs: H(x, (p- + p+)/2) - theta * (p+ - p-)/2.
    """
    _require_finite(x=x, p_minus=p_minus, p_plus=p_plus, theta=theta)
    if theta < 0:
        raise ValidationError(f"theta must be nonnegative, got {theta}", {"theta": theta})
    flux = Flux(flux) if flux is not None else spec.default_flux()
    x = np.asarray(x, dtype=np.float64)
    p_minus = np.asarray(p_minus, dtype=np.float64)
    p_plus = np.asarray(p_plus, dtype=np.float64)
    if flux == Flux.GODUNOV:
        if not spec.is_eikonal:
            raise ValidationError("the Godunov flux is only available for Eikonal Hamiltonians")
        upwind = np.maximum(np.maximum(p_minus, 0.0), np.maximum(-p_plus, 0.0))
        return _scalar_or_array(spec.speed(x) * upwind)
    mean = 0.5 * (p_minus + p_plus)
    return _scalar_or_array(spec.evaluator(x, mean) - theta * 0.5 * (p_plus - p_minus))


@dataclass(frozen=True)
class AuditBox:
    x_range: Tuple[float, float]
    p_range: Tuple[float, float]
    x_samples: int = 41
    p_samples: int = 41
    collar: float = 0.1
    eta: float = 1e-9

    def __post_init__(self):
        if self.x_samples < 2 or self.p_samples < 2:
            raise ValidationError(
                "audit needs at least 2 samples per axis",
                {"x_samples": self.x_samples, "p_samples": self.p_samples},
            )
        if self.x_range[0] >= self.x_range[1] or self.p_range[0] >= self.p_range[1]:
            raise ValidationError("audit ranges must be increasing", {"x": self.x_range, "p": self.p_range})

    @property
    def xs(self):
        return np.linspace(self.x_range[0], self.x_range[1], self.x_samples)

    @property
    def ps(self):
        return np.linspace(self.p_range[0], self.p_range[1], self.p_samples)

    def describe(self):
        return (
            f"x in [{self.x_range[0]!r}, {self.x_range[1]!r}] x {self.x_samples}, "
            f"p in [{self.p_range[0]!r}, {self.p_range[1]!r}] x {self.p_samples}"
        )


def lf_dissipation(spec, box):
    """A theta bounding |dH/dp| on the box, as needed for a monotone LF flux."""
    xs = box.xs
    if spec.is_eikonal:
        return float(np.max(spec.speed(xs)))
    ps = box.ps
    values = spec.evaluator(xs[:, None], ps[None, :])
    slopes = np.abs(np.diff(values, axis=1)) / np.diff(ps)[None, :]
    return float(np.max(slopes))


@dataclass
class AssumptionVerdict:
    name: str
    passed: bool
    margin: float
    witness: Dict[str, float] = field(default_factory=dict)


@dataclass
class AuditReport:
    box: AuditBox
    verdicts: Dict[str, AssumptionVerdict]
    fitted_C_H: float
    k_R: Dict[float, float]

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts.values())

    @property
    def failures(self):
        return [v for v in self.verdicts.values() if not v.passed]

    def as_block(self, title="audit"):
        block = ReportBlock(title)
        block.add("box", self.box.describe())
        for verdict in self.verdicts.values():
            block.add(f"{verdict.name}.verdict", verdict.passed)
            block.add(f"{verdict.name}.margin", verdict.margin)
            block.add(f"{verdict.name}.witness", verdict.witness)
        block.add("fitted_C_H", self.fitted_C_H)
        block.add("k_R", {repr(r): k for r, k in self.k_R.items()})
        return block


def _worst(margin, coords):
    """Smallest margin with its witness; ties go to the largest |p|."""
    flat = np.ravel(margin)
    worst = float(flat.min())
    tie = np.flatnonzero(flat <= worst + 1e-15 * (1.0 + abs(worst)))
    if "p" in coords:
        p_flat = np.ravel(np.broadcast_to(coords["p"], margin.shape))
        pick = tie[np.argmax(np.abs(p_flat[tie]))]
    else:
        pick = tie[0]
    witness = {name: float(np.ravel(np.broadcast_to(value, margin.shape))[pick]) for name, value in coords.items()}
    return worst, witness


def _verdict(name, margin, coords, ok):
    worst, witness = _worst(margin, coords)
    return AssumptionVerdict(name, bool(ok(worst)), worst, witness)


def _cost_samples(l, box):
    mask = (l.grid.nodes >= box.x_range[0]) & (l.grid.nodes <= box.x_range[1])
    if np.count_nonzero(mask) >= 3:
        return l.grid.nodes[mask], l.values[mask]
    xs = np.clip(box.xs, l.grid.x_min, l.grid.x_max)
    return xs, interp_linear(l, xs)


def audit_assumptions(spec, l, box):
    xs, ps = box.xs, box.ps
    X, P = xs[:, None], ps[None, :]
    H = np.asarray(spec.evaluator(X, P), dtype=np.float64) * np.ones((xs.size, ps.size))
    nu = np.asarray(spec.nu(xs), dtype=np.float64)[:, None]
    verdicts = {}

    verdicts["coercivity"] = _verdict(
        "coercivity", H - nu * np.abs(P), {"x": X, "p": P}, lambda w: w >= -EQUALITY_SLACK
    )

    H0 = np.asarray(spec.evaluator(xs, np.zeros_like(xs)), dtype=np.float64) * np.ones_like(xs)
    verdicts["zero_at_origin"] = _verdict(
        "zero_at_origin", -np.abs(H0), {"x": xs}, lambda w: w >= -EQUALITY_SLACK
    )

    nonzero = np.abs(ps) > 0
    ratio = H[:, nonzero] / np.abs(ps[nonzero])[None, :]
    verdicts["positive_off_origin"] = _verdict(
        "positive_off_origin", ratio, {"x": X, "p": ps[nonzero][None, :]}, lambda w: w > 0
    )

    mid = 0.5 * (ps[:, None] + ps[None, :])
    H_mid = np.asarray(spec.evaluator(xs[:, None, None], mid[None, :, :]), dtype=np.float64)
    chord = 0.5 * (H[:, :, None] + H[:, None, :])
    verdicts["convexity"] = _verdict(
        "convexity",
        chord - H_mid + CONVEXITY_SLACK,
        {"x": xs[:, None, None], "p": ps[None, :, None], "q": ps[None, None, :]},
        lambda w: w >= 0,
    )

    dp = ps[:, None] - ps[None, :]
    off_diag = dp != 0
    quotients = np.where(
        off_diag[None, :, :],
        np.abs(H[:, :, None] - H[:, None, :]) / np.where(off_diag, np.abs(dp), 1.0)[None, :, :],
        0.0,
    )
    fitted_C_H = float(quotients.max())
    j = np.unravel_index(int(np.argmax(quotients)), quotients.shape)
    verdicts["lipschitz_p"] = AssumptionVerdict(
        "lipschitz_p",
        fitted_C_H <= spec.C_H + 1e-9 * max(1.0, spec.C_H),
        spec.C_H - fitted_C_H,
        {"x": float(xs[j[0]]), "p": float(ps[j[1]]), "q": float(ps[j[2]])},
    )

    k_R = {}
    reach = max(abs(box.x_range[0]), abs(box.x_range[1]))
    for fraction in (0.25, 0.5, 0.75, 1.0):
        radius = fraction * reach
        inside = np.flatnonzero(np.abs(xs) <= radius + 1e-12)
        if inside.size < 2:
            continue
        Hs = H[inside]
        dx = xs[inside][:, None] - xs[inside][None, :]
        distinct = dx != 0
        spread = np.abs(Hs[:, None, :] - Hs[None, :, :]) / (1.0 + np.abs(ps))[None, None, :]
        spread = spread / np.where(distinct, np.abs(dx), 1.0)[:, :, None]
        k_R[float(radius)] = float(np.where(distinct[:, :, None], spread, 0.0).max())

    m_values = np.asarray(spec.m(np.abs(P)), dtype=np.float64) * np.ones_like(H)
    verdicts["upper_envelope"] = _verdict(
        "upper_envelope", m_values - H, {"x": X, "p": P}, lambda w: w >= -EQUALITY_SLACK
    )

    radii = np.linspace(0.0, float(np.max(np.abs(ps))), box.p_samples)
    m_radii = np.asarray(spec.m(radii), dtype=np.float64)
    verdicts["m_increasing"] = _verdict("m_increasing", np.diff(m_radii), {"r": radii[1:]}, lambda w: w > 0)

    lx, lv = _cost_samples(l, box)
    verdicts["cost_nonnegative"] = _verdict("cost_nonnegative", lv, {"x": lx}, lambda w: w >= -EQUALITY_SLACK)

    width = box.x_range[1] - box.x_range[0]
    inner = (lx >= box.x_range[0] + box.collar * width) & (lx <= box.x_range[1] - box.collar * width)
    if inner.any() and (~inner).any():
        interior_min = float(lv[inner].min())
        collar_values = lv[~inner]
        margin = collar_values - interior_min - box.eta
        verdicts["compactness"] = _verdict(
            "compactness", margin, {"x": lx[~inner]}, lambda w: w > 0
        )
    else:
        verdicts["compactness"] = AssumptionVerdict("compactness", False, float("-inf"), {})

    report = AuditReport(box, verdicts, fitted_C_H, k_R)
    if not report.passed:
        logger.info(f"audit of {spec.label} failed: {', '.join(v.name for v in report.failures)}")
    return report
