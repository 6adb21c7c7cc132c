"""Stability diagnostics: eigenvalues, reproduction numbers, margins, fits.

Every inequality condition this module evaluates is reported as an
explicit numeric margin (lhs - rhs) rather than a bare boolean, so a
failed condition shows by how much it failed. Three reproduction-number
variants coexist because two inconsistent closed forms circulate for this
model; the next-generation-matrix value is the one that matches the sign
of the dominant eigenvalue at the infection-free state, so thresholds use
it and the other two are kept as diagnostics.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .equilibria import UnsupportedForcingError
from .integrate import Trajectory
from .model import Forcing, Parameters, as_state, jacobian

__all__ = [
    "MARGINAL_BAND",
    "R0Variants",
    "ConditionLine",
    "ConditionMargins",
    "LyapunovTrace",
    "ContractionFit",
    "StabilityReport",
    "characteristic_coefficients",
    "characteristic_residual",
    "eigenvalues_3x3",
    "routh_hurwitz_stable",
    "r0_all",
    "condition_margins",
    "lyapunov_fit",
    "contraction_fit",
    "stability_report",
    "CONDITION_SETS",
]

# |max Re eigenvalue| below this classifies as marginal.
MARGINAL_BAND = 1e-9

CONDITION_SETS = ("equilibrium", "dfe", "endemic", "nonauto")


# {{{ eigenvalues of a 3x3 via its characteristic cubic


def characteristic_coefficients(J) -> tuple[float, float, float]:
    """(c2, c1, c0) of det(J - lam I) = -(lam^3 + c2 lam^2 + c1 lam + c0)."""
    J = np.asarray(J, dtype=float)
    if J.shape != (3, 3) or not np.all(np.isfinite(J)):
        raise ValueError("need a finite 3x3 matrix")
    a, b, c = J[0]
    d, e, f = J[1]
    g, h, i = J[2]
    c2 = -(a + e + i)
    c1 = (a * e - b * d) + (a * i - c * g) + (e * i - f * h)
    det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    return c2, c1, -det


def _cubic_roots(c2: float, c1: float, c0: float) -> tuple[complex, complex, complex]:
    """Roots of lam^3 + c2 lam^2 + c1 lam + c0 = 0.

    Depressed-cubic form with the trigonometric branch for three real
    roots and a cancellation-free Cardano branch otherwise; roots are
    scaled to O(1) first so the branches stay well conditioned.
    """
    scale = max(abs(c2), math.sqrt(abs(c1)), abs(c0) ** (1.0 / 3.0))
    if scale == 0.0:
        return (0j, 0j, 0j)
    a = c2 / scale
    b = c1 / (scale * scale)
    c = c0 / (scale * scale * scale)

    shift = a / 3.0
    p = b - a * a / 3.0
    q = c - a * b / 3.0 + 2.0 * a**3 / 27.0
    disc = 0.25 * q * q + p**3 / 27.0

    if disc > 0.0:
        # one real root plus a conjugate pair
        sq = math.sqrt(disc)
        u_cubed = -0.5 * q - math.copysign(sq, q)
        u = math.copysign(abs(u_cubed) ** (1.0 / 3.0), u_cubed)
        v = 0.0 if u == 0.0 else -p / (3.0 * u)
        t1 = u + v
        imag = 0.5 * math.sqrt(max(0.0, 3.0 * t1 * t1 + 4.0 * p))
        roots = (complex(t1, 0.0), complex(-0.5 * t1, imag), complex(-0.5 * t1, -imag))
    elif p == 0.0:
        roots = (0j, 0j, 0j)  # triple root of the depressed cubic
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        cos_arg = 3.0 * q / (p * m)
        phi = math.acos(min(1.0, max(-1.0, cos_arg)))
        roots = tuple(
            complex(m * math.cos((phi - 2.0 * math.pi * k) / 3.0), 0.0) for k in range(3)
        )
    return tuple((r - shift) * scale for r in roots)


def _polish_root(lam: complex, c2: float, c1: float, c0: float) -> complex:
    """A couple of Newton steps on the cubic to push the residual to rounding."""
    for _ in range(2):
        val = ((lam + c2) * lam + c1) * lam + c0
        der = (3.0 * lam + 2.0 * c2) * lam + c1
        if der == 0:
            break
        step = val / der
        if not (cmath.isfinite(step)):
            break
        lam = lam - step
    return lam


def eigenvalues_3x3(J) -> tuple[complex, complex, complex]:
    """Eigenvalues as roots of the characteristic cubic, sorted by real part
    (descending). Complex eigenvalues come in exact conjugate pairs."""
    c2, c1, c0 = characteristic_coefficients(J)
    raw = _cubic_roots(c2, c1, c0)
    polished = []
    for r in raw:
        if r.imag > 0:
            pr = _polish_root(r, c2, c1, c0)
            polished.append(pr)
        elif r.imag < 0:
            # keep conjugacy exact: mirror the polished upper root
            pr = _polish_root(r.conjugate(), c2, c1, c0)
            polished.append(pr.conjugate())
        else:
            pr = _polish_root(complex(r.real, 0.0), c2, c1, c0)
            polished.append(complex(pr.real, 0.0))
    polished.sort(key=lambda lam: (-lam.real, lam.imag))
    return tuple(polished)


def characteristic_residual(J, eigenvalues) -> np.ndarray:
    """|p(lam)| per eigenvalue, relative to the Frobenius norm of J cubed."""
    c2, c1, c0 = characteristic_coefficients(J)
    norm = max(1.0, float(np.linalg.norm(np.asarray(J, dtype=float))))
    return np.array(
        [abs(((lam + c2) * lam + c1) * lam + c0) / norm**3 for lam in eigenvalues]
    )


def routh_hurwitz_stable(J) -> bool:
    """All roots of the characteristic cubic in the open left half plane.

    For lam^3 + c2 lam^2 + c1 lam + c0 the criterion is c2 > 0, c0 > 0 and
    c2*c1 > c0.
    """
    c2, c1, c0 = characteristic_coefficients(J)
    return c2 > 0.0 and c0 > 0.0 and c2 * c1 > c0


# }}}


# {{{ reproduction numbers


@dataclass(frozen=True)
class R0Variants:
    """Three reproduction-number closed forms.

    ``simple`` omits the virion production/clearance cascade entirely;
    ``alt`` is an alternative form with a different turnover
    normalization; ``ngm`` is the spectral radius of the next-generation
    matrix on the infected compartments (y, z) and is the only one whose
    unit threshold matches the eigenvalue sign at the infection-free
    state. Threshold logic should use ``ngm``.
    """

    simple: float
    alt: float
    ngm: float


def _constant_value(forcing) -> float:
    if isinstance(forcing, (int, float)):
        return float(forcing)
    if not forcing.is_constant:
        raise UnsupportedForcingError(
            "reproduction numbers need a constant production rate; pass the bound "
            "lambda_max explicitly for time-varying diagnostics"
        )
    return forcing.value


def r0_all(params: Parameters, forcing) -> R0Variants:
    """Evaluate all three reproduction-number variants at a constant rate."""
    lam = _constant_value(forcing)
    beta_eff = (1.0 - params.eta) * params.beta
    prod_eff = (1.0 - params.epsilon) * params.p
    simple = beta_eff * (lam / params.mu1) / (params.mu2 + params.q)
    alt = (
        lam * params.beta * params.p * (1.0 - params.epsilon) * (1.0 - params.eta)
        / (params.mu1 * params.mu2 * (params.mu1 + prod_eff))
    )
    ngm = beta_eff * prod_eff * lam / (params.mu1 * params.mu3 * (params.mu2 + params.q))
    return R0Variants(simple=simple, alt=alt, ngm=ngm)


# }}}


# {{{ condition margins


@dataclass(frozen=True)
class ConditionLine:
    label: str
    lhs: float
    rhs: float
    margin: float
    satisfied: bool


@dataclass(frozen=True)
class ConditionMargins:
    """Every inequality of one condition set, evaluated verbatim.

    ``aux`` carries the intermediate certificate quantities (nu1..nu3 and
    their minimum k where applicable) so reports can show them; nothing in
    here is inferred or corrected beyond plain arithmetic.
    """

    condition_set: str
    lines: tuple[ConditionLine, ...]
    all_satisfied: bool
    aux: dict = field(default_factory=dict)


def _line(label: str, lhs: float, rhs: float) -> ConditionLine:
    margin = lhs - rhs
    return ConditionLine(label, lhs, rhs, margin, margin > 0.0)


def condition_margins(
    set_id: str,
    params: Parameters,
    forcing,
    equilibrium=None,
    b1: float = 0.0,
) -> ConditionMargins:
    """Evaluate one of the printed exponential-stability condition sets.

    set_id:
      * ``equilibrium``: general-equilibrium set; requires the equilibrium
        state for its z_bar.
      * ``dfe``: the same set specialized to z_bar = 0.
      * ``endemic``: the polynomial form specialized to the
        persistent-infection state.
      * ``nonauto``: time-varying production; uses lambda_max and an upper
        bound b1 on the comparison trajectory's virion count (0 is the
        conservative default since z >= 0 always).

    The y-damping display line uses 2*mu2 + q while the nu2 certificate in
    ``aux`` uses mu2 + q; both are evaluated as they stand, the mismatch is
    surfaced rather than resolved.
    """
    if set_id not in CONDITION_SETS:
        raise ValueError(f"unknown condition set {set_id!r}; expected one of {CONDITION_SETS}")

    mu1, mu2, mu3, q = params.mu1, params.mu2, params.mu3, params.q
    beta_eff = (1.0 - params.eta) * params.beta
    prod_eff = (1.0 - params.epsilon) * params.p
    mu_star = min(mu1, mu2)

    if set_id == "nonauto":
        lam = forcing.lambda_max if not isinstance(forcing, (int, float)) else float(forcing)
    else:
        lam = _constant_value(forcing)
    load = beta_eff * lam / mu_star  # (1-eta)*beta*Lambda/mu*
    aux = {"mu_star": mu_star, "lambda": lam}

    if set_id in ("equilibrium", "dfe"):
        if set_id == "equilibrium":
            if equilibrium is None:
                raise ValueError("the 'equilibrium' set needs the equilibrium state for z_bar")
            z_bar = float(as_state(equilibrium)[2])
        else:
            z_bar = 0.0
        lines = (
            _line("x-damping", 2.0 * mu1 + beta_eff * z_bar, load + q),
            _line("y-damping", 2.0 * mu2 + q, beta_eff * z_bar + load + prod_eff),
            _line("z-damping", 2.0 * mu3, prod_eff + load),
        )
        nu1 = 2.0 * mu1 + beta_eff * z_bar - load - q
        nu2 = mu2 + q - beta_eff * z_bar - load - prod_eff
        nu3 = 2.0 * mu3 - prod_eff - load
        aux.update(z_bar=z_bar, nu1=nu1, nu2=nu2, nu3=nu3, k=min(nu1, nu2, nu3))
    elif set_id == "endemic":
        lines = (
            _line(
                "x-damping",
                mu1 * mu2 * mu3 + (1.0 - params.epsilon) * (1.0 - params.eta) * lam * params.beta * q,
                (1.0 - params.eta) * lam * params.beta * mu2 * mu3 / mu_star
                + q * mu2 * mu3
                + params.p * mu1 * mu3,
            ),
            _line(
                "y-damping",
                2.0 * mu2 * mu2 + mu1 * mu2 + params.p * mu1 + q,
                (1.0 - params.eta) * (1.0 - params.epsilon) * params.beta * lam * q / mu3 + load,
            ),
            _line("z-damping", 2.0 * mu3, prod_eff + load),
        )
    else:  # nonauto
        lines = (
            _line("x-damping", 2.0 * mu1 + beta_eff * b1, load + q),
            _line("y-damping", 2.0 * mu2 + q, beta_eff * (b1 + lam / mu_star) + prod_eff),
            _line("z-damping", 2.0 * mu3, prod_eff + load),
        )
        nu1 = 2.0 * mu1 + beta_eff * b1 - load - q
        nu2 = mu2 + q - beta_eff * b1 - load - prod_eff
        nu3 = 2.0 * mu3 - prod_eff - load
        aux.update(b1=b1, nu1=nu1, nu2=nu2, nu3=nu3, k=min(nu1, nu2, nu3))

    return ConditionMargins(
        condition_set=set_id,
        lines=lines,
        all_satisfied=all(line.satisfied for line in lines),
        aux=aux,
    )


# }}}


# {{{ decay fits


@dataclass(frozen=True)
class LyapunovTrace:
    """Squared distance to a reference state along a trajectory.

    ``rate`` is the least-squares decay rate of log V over the
    post-transient half of the run; ``fit_quality`` is the coefficient of
    determination of that fit.
    """

    times: np.ndarray
    values: np.ndarray
    rate: float
    fit_quality: float
    degenerate: bool


@dataclass(frozen=True)
class ContractionFit:
    """Empirical (K, alpha) for squared inter-trajectory distance decay.

    When not degenerate, D(t) <= K * exp(-alpha*(t-t0)) * D(0) holds at
    every sample time by construction of K.
    """

    K: float
    alpha: float
    fit_quality: float
    degenerate: bool


def _fit_log_decay(times, values):
    """Least-squares slope of log(values); returns (rate, r_squared) or None."""
    mask = values > 0.0
    if int(mask.sum()) < 2:
        return None
    t = times[mask]
    logv = np.log(values[mask])
    if t[-1] <= t[0]:
        return None
    slope, intercept = np.polyfit(t, logv, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logv - fitted) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return -float(slope), r2


def lyapunov_fit(traj: Trajectory, reference) -> LyapunovTrace:
    """Fit the exponential decay of V(t) = |u(t) - reference|^2."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    ref = as_state(reference)
    values = np.sum((traj.states - ref) ** 2, axis=1)
    if float(values.max(initial=0.0)) < 1e-300:
        return LyapunovTrace(traj.times, values, 0.0, 0.0, True)
    half = len(traj.times) // 2
    fit = _fit_log_decay(traj.times[half:], values[half:])
    if fit is None:
        return LyapunovTrace(traj.times, values, 0.0, 0.0, True)
    rate, r2 = fit
    return LyapunovTrace(traj.times, values, rate, r2, False)


def _common_grid(traj1: Trajectory, traj2: Trajectory):
    t1, t2 = traj1.times, traj2.times
    if len(t1) == len(t2) and np.array_equal(t1, t2):
        return t1, traj1.states, traj2.states
    lo = max(t1[0], t2[0])
    hi = min(t1[-1], t2[-1])
    if hi <= lo:
        raise ValueError("trajectories do not overlap in time")
    keep = (t1 >= lo) & (t1 <= hi)
    times = t1[keep]
    if len(times) < 4:
        raise ValueError("too few overlapping samples to compare trajectories")
    s1 = traj1.states[keep]
    s2 = np.array([traj2.sample(t) for t in times])
    return times, s1, s2


def contraction_fit(traj1: Trajectory, traj2: Trajectory) -> ContractionFit:
    """Fit K and alpha from two runs of the same system.

    The trajectories must come from identical parameters and forcing;
    differing time grids are reconciled by Hermite resampling onto the
    overlap. A vanishing initial separation (< 1e-14) is degenerate.
    """
    if traj1.params != traj2.params or traj1.forcing != traj2.forcing:
        raise ValueError("trajectories come from different scenarios")
    times, s1, s2 = _common_grid(traj1, traj2)
    dist_sq = np.sum((s1 - s2) ** 2, axis=1)
    d0 = dist_sq[0]
    if math.sqrt(d0) < 1e-14:
        return ContractionFit(0.0, 0.0, 0.0, True)
    half = len(times) // 2
    fit = _fit_log_decay(times[half:], dist_sq[half:])
    if fit is None:
        return ContractionFit(0.0, 0.0, 0.0, True)
    alpha, r2 = fit
    # smallest K making the bound hold at every sample
    growth = dist_sq / d0 * np.exp(alpha * (times - times[0]))
    return ContractionFit(float(growth.max()), alpha, r2, False)


# }}}


@dataclass(frozen=True)
class StabilityReport:
    """Eigenvalue analysis at a state plus reproduction numbers and margins."""

    eigenvalues: tuple[complex, complex, complex]
    max_real_part: float
    classification: str
    r0: R0Variants
    margins: tuple[ConditionMargins, ...]


def stability_report(
    params: Parameters,
    forcing: Forcing,
    state,
    margin_sets: tuple[str, ...] = (),
    b1: float = 0.0,
) -> StabilityReport:
    """Assemble the full local-stability picture at a state."""
    eigs = eigenvalues_3x3(jacobian(params, state))
    max_re = max(lam.real for lam in eigs)
    if abs(max_re) < MARGINAL_BAND:
        classification = "marginal"
    elif max_re < 0.0:
        classification = "stable"
    else:
        classification = "unstable"
    margins = tuple(
        condition_margins(set_id, params, forcing, equilibrium=state, b1=b1)
        for set_id in margin_sets
    )
    return StabilityReport(
        eigenvalues=eigs,
        max_real_part=max_re,
        classification=classification,
        r0=r0_all(params, forcing),
        margins=margins,
    )
