"""Benchmark scenario registry, config files, run orchestration and sweeps.

A scenario bundles parameters, forcing, initial state, time span, step
control and a list of requested analyses. Five benchmark scenarios ship
in the registry; arbitrary ones round-trip through JSON config files.

Each run writes, into its own directory: ``trajectory.csv`` (columns
``t,x,y,z`` at full double precision), ``report.json`` with every
requested analysis (or an explicit skip reason), and ``plot.gp``, a
gnuplot script over the CSV. Runs are deterministic: identical configs
produce byte-identical files. Wall-clock timing is returned to the
caller but deliberately kept out of the files.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import equilibria as eq
from . import process as proc
from . import stability as stab
from .integrate import StepControl, Trajectory, integrate
from .model import (
    ConstantForcing,
    Forcing,
    Parameters,
    PiecewiseLinearForcing,
    SinusoidForcing,
    as_state,
    jacobian,
)

__all__ = [
    "Scenario",
    "RunReport",
    "SweepResult",
    "ConfigError",
    "UnknownScenarioError",
    "SCENARIOS",
    "ANALYSES",
    "DEFAULT_SWEEP_BOX",
    "load_config",
    "save_config",
    "scenario_from_dict",
    "scenario_to_dict",
    "run_scenario",
    "sweep",
]

ANALYSES = (
    "equilibria",
    "stability",
    "conditions",
    "lyapunov",
    "contraction",
    "pullback",
    "absorbing",
)

PULLBACK_HORIZONS = (5.0, 10.0, 20.0, 40.0)
PULLBACK_TOL = 1e-6


class ConfigError(ValueError):
    """A config file could not be parsed or validated."""


class UnknownScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: str
    params: Parameters
    forcing: Forcing
    u0: tuple[float, float, float]
    t_span: tuple[float, float]
    control: StepControl
    analyses: tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise ValueError("scenario id must be nonempty")
        object.__setattr__(self, "u0", tuple(float(v) for v in as_state(self.u0, True)))
        t0, t1 = (float(t) for t in self.t_span)
        if not t1 > t0:
            raise ValueError(f"t_span must be increasing, got {self.t_span}")
        object.__setattr__(self, "t_span", (t0, t1))
        object.__setattr__(self, "analyses", tuple(self.analyses))
        for name in self.analyses:
            if name not in ANALYSES:
                raise ValueError(f"unknown analysis {name!r}; expected one of {ANALYSES}")


def _registry() -> dict[str, Scenario]:
    ctl = StepControl.adaptive(abs_tol=1e-10, rel_tol=1e-10, h_init=1e-3, h_max=0.25)
    # benchmark rate sets: infection clearing, subthreshold (R0 < 1 with a
    # large production rate), and persistent infection (R0 > 1)
    clearing = Parameters(mu1=2.0, mu2=3.0, mu3=7.0, beta=0.2, eta=0.2, epsilon=0.5, p=0.01, q=5.0)
    subthreshold = Parameters(mu1=5.0, mu2=7.0, mu3=2.0, beta=0.7, eta=0.2, epsilon=0.2, p=2.0, q=6.0)
    persistent = Parameters(mu1=6.0, mu2=7.0, mu3=0.1, beta=0.3, eta=0.5, epsilon=0.1, p=5.0, q=10.0)
    wave = SinusoidForcing(amplitude=1.0, omega=2.0, phase=math.pi / 3.0, offset=10.0)
    one = (1.0, 1.0, 1.0)
    scenarios = (
        Scenario(
            "table2-dfe", clearing, ConstantForcing(9.8135), one, (0.0, 15.0), ctl,
            ("equilibria", "stability", "conditions", "lyapunov", "contraction"),
        ),
        Scenario(
            "table3-dfe-check", subthreshold, ConstantForcing(100.0), one, (0.0, 10.0), ctl,
            ("equilibria", "stability", "conditions"),
        ),
        Scenario(
            "set1-nonauto", clearing, wave, one, (0.0, 5.0), ctl,
            ("conditions", "absorbing", "pullback", "contraction"),
        ),
        Scenario(
            "set2-nonauto", persistent, wave, one, (0.0, 5.0), ctl,
            ("conditions", "absorbing"),
        ),
        Scenario(
            "set2-auto-boundcheck", persistent, ConstantForcing(20.0), one, (0.0, 200.0), ctl,
            ("equilibria", "stability", "conditions"),
        ),
    )
    return {s.id: s for s in scenarios}


SCENARIOS = _registry()


# {{{ config serialization


def _forcing_to_dict(f: Forcing) -> dict:
    if isinstance(f, ConstantForcing):
        return {"kind": "constant", "value": f.value}
    if isinstance(f, SinusoidForcing):
        return {
            "kind": "sinusoid",
            "amplitude": f.amplitude,
            "omega": f.omega,
            "phase": f.phase,
            "offset": f.offset,
        }
    if isinstance(f, PiecewiseLinearForcing):
        return {"kind": "piecewise_linear", "times": list(f.times), "values": list(f.values)}
    raise TypeError(f"unknown forcing type {type(f)!r}")


def _forcing_from_dict(d: dict, where: str) -> Forcing:
    kind = d.get("kind")
    try:
        if kind == "constant":
            return ConstantForcing(float(d["value"]))
        if kind == "sinusoid":
            return SinusoidForcing(
                amplitude=float(d["amplitude"]),
                omega=float(d["omega"]),
                phase=float(d["phase"]),
                offset=float(d["offset"]),
            )
        if kind == "piecewise_linear":
            return PiecewiseLinearForcing(tuple(d["times"]), tuple(d["values"]))
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(
        f"{where}.kind must be 'constant', 'sinusoid' or 'piecewise_linear', got {kind!r}"
    )


def _control_to_dict(ctl: StepControl) -> dict:
    d = {
        "mode": ctl.mode,
        "blow_up_threshold": ctl.blow_up_threshold,
        "positivity_tol": ctl.positivity_tol,
    }
    if ctl.mode == "fixed":
        d["h"] = ctl.h
    else:
        d.update(
            abs_tol=ctl.abs_tol,
            rel_tol=ctl.rel_tol,
            h_init=ctl.h_init,
            h_min=ctl.h_min,
            h_max=ctl.h_max,
        )
    return d


def _control_from_dict(d: dict, where: str) -> StepControl:
    try:
        mode = d.get("mode", "adaptive")
        common = {
            k: float(d[k]) for k in ("blow_up_threshold", "positivity_tol") if k in d
        }
        if mode == "fixed":
            return StepControl.fixed(h=float(d["h"]), **common)
        if mode == "adaptive":
            keys = ("abs_tol", "rel_tol", "h_init", "h_min", "h_max")
            opts = {k: float(d[k]) for k in keys if k in d}
            return StepControl.adaptive(**opts, **common)
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.mode must be 'fixed' or 'adaptive', got {d.get('mode')!r}")


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "id": s.id,
        "params": {
            "mu1": s.params.mu1,
            "mu2": s.params.mu2,
            "mu3": s.params.mu3,
            "beta": s.params.beta,
            "eta": s.params.eta,
            "epsilon": s.params.epsilon,
            "p": s.params.p,
            "q": s.params.q,
        },
        "forcing": _forcing_to_dict(s.forcing),
        "u0": list(s.u0),
        "t_span": list(s.t_span),
        "control": _control_to_dict(s.control),
        "analyses": list(s.analyses),
    }


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ConfigError(f"config root must be an object, got {type(d).__name__}")
    for key in ("id", "params", "forcing", "u0", "t_span"):
        if key not in d:
            raise ConfigError(f"missing required field {key!r}")
    pd = d["params"]
    if not isinstance(pd, dict):
        raise ConfigError("params must be an object")
    names = ("mu1", "mu2", "mu3", "beta", "eta", "epsilon", "p", "q")
    missing = [n for n in names if n not in pd]
    if missing:
        raise ConfigError(f"params: missing {', '.join(missing)}")
    try:
        params = Parameters(**{n: float(pd[n]) for n in names})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from exc
    forcing = _forcing_from_dict(d["forcing"], "forcing")
    control = _control_from_dict(d.get("control", {}), "control")
    try:
        return Scenario(
            id=str(d["id"]),
            params=params,
            forcing=forcing,
            u0=tuple(float(v) for v in d["u0"]),
            t_span=tuple(float(v) for v in d["t_span"]),
            control=control,
            analyses=tuple(d.get("analyses", ())),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(data)


def save_config(s: Scenario, path) -> None:
    Path(path).write_text(_dumps(scenario_to_dict(s)), encoding="utf-8")


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# }}}


# {{{ analysis serialization helpers


def _eq_dict(rep: eq.EquilibriumReport) -> dict:
    d = {"kind": rep.kind, "state": list(rep.state), "residual_norm": rep.residual_norm}
    if rep.feasible is not None:
        d["feasible"] = rep.feasible
    if rep.alt_state is not None:
        d["alt_state"] = list(rep.alt_state)
        d["alt_residual"] = rep.alt_residual
    return d


def _margins_dict(cm: stab.ConditionMargins) -> dict:
    return {
        "condition_set": cm.condition_set,
        "all_satisfied": cm.all_satisfied,
        "lines": [
            {
                "label": line.label,
                "lhs": line.lhs,
                "rhs": line.rhs,
                "margin": line.margin,
                "satisfied": line.satisfied,
            }
            for line in cm.lines
        ],
        "aux": dict(sorted(cm.aux.items())),
    }


def _stability_dict(rep: stab.StabilityReport) -> dict:
    return {
        "eigenvalues": [[lam.real, lam.imag] for lam in rep.eigenvalues],
        "max_real_part": rep.max_real_part,
        "classification": rep.classification,
        "r0": {"simple": rep.r0.simple, "alt": rep.r0.alt, "ngm": rep.r0.ngm},
        "margins": [_margins_dict(m) for m in rep.margins],
    }


def _event_dict(e) -> dict:
    return {"kind": e.kind, "time": e.time, "component": e.component, "value": e.value}


# }}}


@dataclass
class RunReport:
    """Everything a scenario run produced, plus where it was written."""

    scenario: Scenario
    trajectory: Trajectory
    document: dict
    trajectory_path: Path
    report_path: Path
    duration_seconds: float

    @property
    def terminated(self) -> bool:
        return self.trajectory.terminated


_PLOT_SCRIPT = """\
set datafile separator ","
set key autotitle columnhead
set xlabel "t"
set ylabel "compartment size"
plot "trajectory.csv" using 1:2 with lines title "x (uninfected)", \\
     "trajectory.csv" using 1:3 with lines title "y (infected)", \\
     "trajectory.csv" using 1:4 with lines title "z (virions)"
"""


def resolve_scenario(ref) -> Scenario:
    """Registry id, config file path, or Scenario instance -> Scenario."""
    if isinstance(ref, Scenario):
        return ref
    if isinstance(ref, str) and ref in SCENARIOS:
        return SCENARIOS[ref]
    path = Path(ref)
    if path.is_file():
        return load_config(path)
    raise UnknownScenarioError(
        f"{ref!r} is neither a registered scenario id ({', '.join(sorted(SCENARIOS))}) "
        "nor a config file path"
    )


def run_scenario(ref, out_dir) -> RunReport:
    """Integrate a scenario, run its analyses and write the run directory."""
    scenario = resolve_scenario(ref)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    t0, t_end = scenario.t_span
    traj = integrate(scenario.params, scenario.forcing, scenario.u0, t0, t_end, scenario.control)

    analyses: dict = {}
    skipped: dict = {}
    for name in scenario.analyses:
        try:
            result = _run_analysis(name, scenario, traj)
        except (eq.UnsupportedForcingError, ValueError, proc.ProcessTerminatedError) as exc:
            skipped[name] = str(exc)
            continue
        if result is None:
            skipped[name] = "not applicable"
        else:
            analyses[name] = result

    doc = {
        "scenario": scenario_to_dict(scenario),
        "trajectory": {
            "path": "trajectory.csv",
            "n_points": int(len(traj.times)),
            "final_time": traj.final_time,
            "final_state": [float(v) for v in traj.final_state],
            "terminated": traj.terminated,
        },
        "events": [_event_dict(e) for e in traj.events],
        "analyses": analyses,
        "skipped": skipped,
    }

    trajectory_path = out_dir / "trajectory.csv"
    report_path = out_dir / "report.json"
    traj.to_csv(trajectory_path)
    report_path.write_text(_dumps(doc), encoding="utf-8")
    (out_dir / "plot.gp").write_text(_PLOT_SCRIPT, encoding="utf-8")

    return RunReport(
        scenario=scenario,
        trajectory=traj,
        document=doc,
        trajectory_path=trajectory_path,
        report_path=report_path,
        duration_seconds=time.perf_counter() - started,
    )


def _run_analysis(name: str, scenario: Scenario, traj: Trajectory):
    params, forcing = scenario.params, scenario.forcing
    t0, t_end = scenario.t_span

    if name == "equilibria":
        dfe = eq.disease_free(params, forcing)
        end = eq.endemic(params, forcing)
        return {"disease_free": _eq_dict(dfe), "endemic": _eq_dict(end)}

    if name == "stability":
        dfe = eq.disease_free(params, forcing)
        out = {"disease_free": _stability_dict(
            stab.stability_report(params, forcing, dfe.state, margin_sets=("dfe",))
        )}
        end = eq.endemic(params, forcing)
        if end.feasible:
            out["endemic"] = _stability_dict(
                stab.stability_report(params, forcing, end.state, margin_sets=("endemic", "equilibrium"))
            )
        return out

    if name == "conditions":
        if forcing.is_constant:
            sets = ("dfe", "endemic")
        else:
            sets = ("nonauto",)
        return [_margins_dict(stab.condition_margins(s, params, forcing)) for s in sets]

    if name == "lyapunov":
        dfe = eq.disease_free(params, forcing)
        trace = stab.lyapunov_fit(traj, dfe.state)
        return {
            "reference": list(dfe.state),
            "rate": trace.rate,
            "fit_quality": trace.fit_quality,
            "degenerate": trace.degenerate,
            "initial_value": float(trace.values[0]),
            "final_value": float(trace.values[-1]),
        }

    if name == "contraction":
        partner_u0 = tuple(v + 1.0 for v in scenario.u0)
        partner = integrate(params, forcing, partner_u0, t0, t_end, scenario.control)
        fit = stab.contraction_fit(traj, partner)
        return {
            "partner_u0": list(partner_u0),
            "K": fit.K,
            "alpha": fit.alpha,
            "fit_quality": fit.fit_quality,
            "degenerate": fit.degenerate,
        }

    if name == "pullback":
        seeds = (scenario.u0, tuple(v + 1.0 for v in scenario.u0))
        est = proc.pullback_estimate(
            params, forcing, t0, PULLBACK_HORIZONS, seeds, PULLBACK_TOL, scenario.control
        )
        return {
            "t_star": est.t_star,
            "horizons": list(est.horizons),
            "endpoints": [[list(pt) for pt in row] for row in est.endpoints],
            "cauchy_gaps": list(est.cauchy_gaps),
            "cross_seed_gap": est.cross_seed_gap,
            "converged": est.converged,
            "tol": est.tol,
        }

    if name == "absorbing":
        rep = proc.absorbing_check(params, forcing, traj)
        return {
            "alpha": rep.alpha,
            "ceiling": rep.ceiling,
            "entry_time": rep.entry_time,
            "holds": rep.holds,
            "slack": rep.slack,
        }

    raise ValueError(f"unknown analysis {name!r}")


# {{{ parameter sweep


DEFAULT_SWEEP_BOX = {
    "lam": (1e-2, 1e2),
    "mu1": (1e-2, 1e2),
    "mu2": (1e-2, 1e2),
    "mu3": (1e-2, 1e2),
    "beta": (1e-2, 1e2),
    "p": (1e-2, 1e2),
    "q": (1e-2, 1e2),
    "eta": (0.0, 0.9),
    "epsilon": (0.0, 0.9),
}

R0_FEASIBILITY_BAND = 1e-6
R0_EIGENVALUE_BAND = 1e-3
DFE_RESIDUAL_CAP_FACTOR = 1e-14
ENDEMIC_RESIDUAL_CAP = 1e-10

_SWEEP_COLUMNS = (
    "index", "lam", "mu1", "mu2", "mu3", "beta", "eta", "epsilon", "p", "q",
    "r0_ngm", "feasible", "in_r0_band", "threshold_ok",
    "dfe_residual", "dfe_residual_ok", "endemic_residual", "endemic_residual_ok",
    "max_re_dfe", "in_eig_band", "eig_sign_ok", "rh_agree",
    "positivity_ok", "bounds_ok", "t_reached",
)

_SWEEP_SPAN = 2.0
_SWEEP_MAX_STEPS = 4000
_SWEEP_CTL = StepControl.adaptive(
    abs_tol=1e-10, rel_tol=1e-9, h_init=1e-3, h_min=1e-14, h_max=0.25
)


@dataclass
class SweepResult:
    counts: dict
    rows: list
    csv_path: Path | None


def _draw_params(rng, box):
    values = {}
    for name in ("lam", "mu1", "mu2", "mu3", "beta", "p", "q"):
        lo, hi = box[name]
        if not 0.0 < lo <= hi:
            raise ValueError(f"sweep box for {name} must satisfy 0 < lo <= hi, got {box[name]}")
        drawn = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        # a collapsed interval pins the value exactly (exp/log round-trip
        # would otherwise perturb the last bit); the rng draw is still
        # consumed so the stream stays aligned across boxes
        values[name] = lo if lo == hi else drawn
    for name in ("eta", "epsilon"):
        lo, hi = box[name]
        if not 0.0 <= lo <= hi < 1.0:
            raise ValueError(f"sweep box for {name} must sit inside [0, 1), got {box[name]}")
        drawn = rng.uniform(lo, hi)
        values[name] = lo if lo == hi else drawn
    lam = values.pop("lam")
    return lam, Parameters(**values)


def _sweep_row(index: int, lam: float, params: Parameters) -> dict:
    forcing = ConstantForcing(lam)
    r0 = stab.r0_all(params, forcing).ngm
    dfe = eq.disease_free(params, forcing)
    end = eq.endemic(params, forcing)

    in_r0_band = abs(r0 - 1.0) < R0_FEASIBILITY_BAND
    threshold_ok = in_r0_band or (end.feasible == (r0 > 1.0))

    dfe_ok = dfe.residual_norm <= DFE_RESIDUAL_CAP_FACTOR * max(1.0, lam)
    endemic_residual = end.residual_norm if end.feasible else None
    endemic_ok = (not end.feasible) or end.residual_norm <= ENDEMIC_RESIDUAL_CAP

    j_dfe = jacobian(params, dfe.state)
    max_re = max(lam_i.real for lam_i in stab.eigenvalues_3x3(j_dfe))
    in_eig_band = abs(r0 - 1.0) < R0_EIGENVALUE_BAND
    eig_sign_ok = in_eig_band or ((max_re < 0.0) == (r0 < 1.0))
    rh_agree = abs(max_re) < stab.MARGINAL_BAND or (
        stab.routh_hurwitz_stable(j_dfe) == (max_re < 0.0)
    )

    traj = integrate(
        params, forcing, (1.0, 1.0, 1.0), 0.0, _SWEEP_SPAN, _SWEEP_CTL,
        max_steps=_SWEEP_MAX_STEPS,
    )
    kinds = {e.kind for e in traj.events}
    positivity_ok = "positivity_violation" not in kinds and "nonfinite" not in kinds
    bounds_ok = "bound_violation" not in kinds and "blow_up" not in kinds

    return {
        "index": index,
        "lam": lam,
        "mu1": params.mu1,
        "mu2": params.mu2,
        "mu3": params.mu3,
        "beta": params.beta,
        "eta": params.eta,
        "epsilon": params.epsilon,
        "p": params.p,
        "q": params.q,
        "r0_ngm": r0,
        "feasible": end.feasible,
        "in_r0_band": in_r0_band,
        "threshold_ok": threshold_ok,
        "dfe_residual": dfe.residual_norm,
        "dfe_residual_ok": dfe_ok,
        "endemic_residual": endemic_residual,
        "endemic_residual_ok": endemic_ok,
        "max_re_dfe": max_re,
        "in_eig_band": in_eig_band,
        "eig_sign_ok": eig_sign_ok,
        "rh_agree": rh_agree,
        "positivity_ok": positivity_ok,
        "bounds_ok": bounds_ok,
        "t_reached": traj.final_time,
    }


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return f"{value:.17g}"


def sweep(n_draws: int, seed: int, out_path=None, box: dict | None = None) -> SweepResult:
    """Randomized property sweep; one CSV row per draw, pass/fail flags per
    property. The per-draw trajectory check integrates over a short window
    with a step budget so stiff corners of the box cannot stall the sweep
    (``t_reached`` records how far each run got)."""
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    full_box = dict(DEFAULT_SWEEP_BOX)
    if box:
        unknown = set(box) - set(full_box)
        if unknown:
            raise ValueError(f"unknown sweep box entries: {sorted(unknown)}")
        full_box.update(box)

    rng = np.random.default_rng(seed)
    rows = []
    counts = {
        "draws": n_draws,
        "feasible": 0,
        "threshold_violations": 0,
        "dfe_residual_failures": 0,
        "endemic_residual_failures": 0,
        "eig_sign_violations": 0,
        "rh_violations": 0,
        "positivity_violations": 0,
        "bound_violations": 0,
    }
    for i in range(n_draws):
        lam, params = _draw_params(rng, full_box)
        row = _sweep_row(i, lam, params)
        rows.append(row)
        counts["feasible"] += int(row["feasible"])
        counts["threshold_violations"] += int(not row["threshold_ok"])
        counts["dfe_residual_failures"] += int(not row["dfe_residual_ok"])
        counts["endemic_residual_failures"] += int(not row["endemic_residual_ok"])
        counts["eig_sign_violations"] += int(not row["eig_sign_ok"])
        counts["rh_violations"] += int(not row["rh_agree"])
        counts["positivity_violations"] += int(not row["positivity_ok"])
        counts["bound_violations"] += int(not row["bounds_ok"])

    csv_path = None
    if out_path is not None:
        csv_path = Path(out_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(_SWEEP_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_cell(row[c]) for c in _SWEEP_COLUMNS) + "\n")
    return SweepResult(counts=counts, rows=rows, csv_path=csv_path)


# }}}
