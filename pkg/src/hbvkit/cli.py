"""Command-line surface.

Exit codes: 0 success, 2 usage or config problems, 3 when integration was
cut short by a numerical event (blow-up, non-finite state or step-size
floor); partial outputs are still written in that case.

Analysis results go to stdout as JSON; progress and file locations go to
stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import equilibria as eq
from . import process as proc
from . import stability as stab
from .integrate import integrate
from .model import ConstantForcing
from .scenarios import (
    SCENARIOS,
    ConfigError,
    Scenario,
    UnknownScenarioError,
    _dumps,
    _margins_dict,
    _stability_dict,
    resolve_scenario,
    run_scenario,
    sweep,
)

USAGE_ERROR = 2
NUMERICAL_EVENT = 3


def _with_tol(scenario: Scenario, tol: float | None) -> Scenario:
    if tol is None or scenario.control.mode != "adaptive":
        return scenario
    ctl = dataclasses.replace(scenario.control, abs_tol=tol, rel_tol=tol)
    return dataclasses.replace(scenario, control=ctl)


def _load(args) -> Scenario:
    return _with_tol(resolve_scenario(args.config), getattr(args, "tol", None))


def _emit(doc) -> None:
    sys.stdout.write(_dumps(doc))


def _integrate_scenario(scenario: Scenario):
    t0, t_end = scenario.t_span
    return integrate(
        scenario.params, scenario.forcing, scenario.u0, t0, t_end, scenario.control
    )


def _parse_triple(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ConfigError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(float(p) for p in parts)


# {{{ subcommand handlers


def _cmd_scenario(args) -> int:
    if args.id not in SCENARIOS:
        raise UnknownScenarioError(
            f"unknown scenario id {args.id!r}; available: {', '.join(sorted(SCENARIOS))}"
        )
    scenario = _with_tol(SCENARIOS[args.id], args.tol)
    report = run_scenario(scenario, Path(args.out) / scenario.id)
    print(
        f"wrote {report.trajectory_path} and {report.report_path} "
        f"({report.duration_seconds:.2f}s)",
        file=sys.stderr,
    )
    return NUMERICAL_EVENT if report.terminated else 0


def _cmd_simulate(args) -> int:
    scenario = dataclasses.replace(_load(args), analyses=())
    report = run_scenario(scenario, Path(args.out) / scenario.id)
    print(f"wrote {report.trajectory_path} and {report.report_path}", file=sys.stderr)
    return NUMERICAL_EVENT if report.terminated else 0


def _cmd_equilibria(args) -> int:
    s = _load(args)
    dfe = eq.disease_free(s.params, s.forcing)
    end = eq.endemic(s.params, s.forcing)
    _emit(
        {
            "disease_free": {
                "state": list(dfe.state),
                "residual_norm": dfe.residual_norm,
            },
            "endemic": {
                "state": list(end.state),
                "residual_norm": end.residual_norm,
                "feasible": end.feasible,
                "alt_state": list(end.alt_state),
                "alt_residual": end.alt_residual,
            },
        }
    )
    return 0


def _cmd_stability(args) -> int:
    s = _load(args)
    dfe = eq.disease_free(s.params, s.forcing)
    doc = {
        "disease_free": _stability_dict(
            stab.stability_report(s.params, s.forcing, dfe.state, margin_sets=("dfe",))
        )
    }
    end = eq.endemic(s.params, s.forcing)
    if end.feasible:
        doc["endemic"] = _stability_dict(
            stab.stability_report(
                s.params, s.forcing, end.state, margin_sets=("endemic", "equilibrium")
            )
        )
    _emit(doc)
    return 0


def _cmd_conditions(args) -> int:
    s = _load(args)
    if args.set:
        sets = (args.set,)
    elif s.forcing.is_constant:
        sets = ("dfe", "endemic")
    else:
        sets = ("nonauto",)
    out = []
    for set_id in sets:
        equilibrium = None
        if set_id == "equilibrium":
            end = eq.endemic(s.params, s.forcing)
            equilibrium = end.state if end.feasible else eq.disease_free(s.params, s.forcing).state
        out.append(
            _margins_dict(
                stab.condition_margins(set_id, s.params, s.forcing, equilibrium, b1=args.b1)
            )
        )
    _emit(out)
    return 0


def _cmd_r0(args) -> int:
    s = _load(args)
    forcing = s.forcing
    if not forcing.is_constant:
        # time-varying production: report the variants at the upper bound
        forcing = ConstantForcing(s.forcing.lambda_max)
    r0 = stab.r0_all(s.params, forcing)
    _emit({"lambda": forcing.value, "simple": r0.simple, "alt": r0.alt, "ngm": r0.ngm})
    return 0


def _cmd_lyapunov(args) -> int:
    s = _load(args)
    traj = _integrate_scenario(s)
    reference = eq.disease_free(s.params, s.forcing).state
    trace = stab.lyapunov_fit(traj, reference)
    _emit(
        {
            "reference": list(reference),
            "rate": trace.rate,
            "fit_quality": trace.fit_quality,
            "degenerate": trace.degenerate,
            "initial_value": float(trace.values[0]),
            "final_value": float(trace.values[-1]),
        }
    )
    return NUMERICAL_EVENT if traj.terminated else 0


def _cmd_contraction(args) -> int:
    s = _load(args)
    offset = _parse_triple(args.offset)
    traj1 = _integrate_scenario(s)
    partner_u0 = tuple(v + d for v, d in zip(s.u0, offset))
    t0, t_end = s.t_span
    traj2 = integrate(s.params, s.forcing, partner_u0, t0, t_end, s.control)
    fit = stab.contraction_fit(traj1, traj2)
    _emit(
        {
            "u0": list(s.u0),
            "partner_u0": list(partner_u0),
            "K": fit.K,
            "alpha": fit.alpha,
            "fit_quality": fit.fit_quality,
            "degenerate": fit.degenerate,
        }
    )
    return NUMERICAL_EVENT if (traj1.terminated or traj2.terminated) else 0


def _cmd_pullback(args) -> int:
    s = _load(args)
    horizons = tuple(float(h) for h in args.horizons.split(","))
    t_star = s.t_span[0] if args.t_star is None else args.t_star
    seeds = (s.u0, tuple(v + 1.0 for v in s.u0))
    est = proc.pullback_estimate(
        s.params, s.forcing, t_star, horizons, seeds, args.ptol, s.control
    )
    _emit(
        {
            "t_star": est.t_star,
            "horizons": list(est.horizons),
            "endpoints": [[list(pt) for pt in row] for row in est.endpoints],
            "cauchy_gaps": list(est.cauchy_gaps),
            "cross_seed_gap": est.cross_seed_gap,
            "converged": est.converged,
            "tol": est.tol,
        }
    )
    return 0


def _cmd_absorbing(args) -> int:
    s = _load(args)
    traj = _integrate_scenario(s)
    rep = proc.absorbing_check(s.params, s.forcing, traj, slack=args.slack)
    _emit(
        {
            "alpha": rep.alpha,
            "ceiling": rep.ceiling,
            "entry_time": rep.entry_time,
            "holds": rep.holds,
            "slack": rep.slack,
        }
    )
    return NUMERICAL_EVENT if traj.terminated else 0


def _cmd_sweep(args) -> int:
    box = None
    if args.box is not None:
        import json

        try:
            raw = json.loads(Path(args.box).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read box file {args.box}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{args.box}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
        if not isinstance(raw, dict) or not raw:
            raise ConfigError("box file must be a nonempty object of name: [lo, hi] pairs")
        try:
            box = {name: (float(lo), float(hi)) for name, (lo, hi) in raw.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"box entries must be [lo, hi] number pairs: {exc}") from exc
    out_path = Path(args.out) / "sweep.csv"
    result = sweep(args.n, args.seed, out_path=out_path, box=box)
    _emit(result.counts)
    print(f"wrote {out_path}", file=sys.stderr)
    return 0


# }}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hbvkit",
        description="Simulate and stress-test the within-host HBV model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario id or JSON config path")
        p.add_argument("--out", default="runs", help="output directory (default: runs)")
        p.add_argument("--seed", type=int, default=42, help="RNG seed where applicable")
        p.add_argument("--tol", type=float, default=None, help="override adaptive abs/rel tolerance")

    p = sub.add_parser("scenario", help="run a registered benchmark scenario end to end")
    p.add_argument("id", help=f"one of: {', '.join(sorted(SCENARIOS))}")
    p.add_argument("--out", default="runs")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("simulate", help="integrate a scenario and write the trajectory CSV")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("equilibria", help="infection-free and persistent equilibria")
    common(p)
    p.set_defaults(func=_cmd_equilibria)

    p = sub.add_parser("stability", help="eigenvalues, classification, R0 variants, margins")
    common(p)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("conditions", help="numeric margins of a stability condition set")
    common(p)
    p.add_argument("--set", choices=stab.CONDITION_SETS, default=None, help="evaluate one specific set")
    p.add_argument("--b1", type=float, default=0.0, help="virion bound for the nonauto set (default 0)")
    p.set_defaults(func=_cmd_conditions)

    p = sub.add_parser("r0", help="reproduction-number variants")
    common(p)
    p.set_defaults(func=_cmd_r0)

    p = sub.add_parser("lyapunov", help="decay-rate fit of the squared distance to the infection-free state")
    common(p)
    p.set_defaults(func=_cmd_lyapunov)

    p = sub.add_parser("contraction", help="empirical contraction fit between two runs")
    common(p)
    p.add_argument("--offset", default="1,1,1", help="partner start = u0 + offset (default 1,1,1)")
    p.set_defaults(func=_cmd_contraction)

    p = sub.add_parser("pullback", help="pullback limit estimate over a horizon ladder")
    common(p)
    p.add_argument("--t-star", dest="t_star", type=float, default=None, help="observation time (default: span start)")
    p.add_argument("--horizons", default="5,10,20,40")
    p.add_argument("--ptol", type=float, default=1e-6, help="convergence tolerance (default 1e-6)")
    p.set_defaults(func=_cmd_pullback)

    p = sub.add_parser("absorbing", help="l1 absorbing-ball check on a scenario trajectory")
    common(p)
    p.add_argument("--slack", type=float, default=None, help="ball slack (default 1e-6 * ceiling)")
    p.set_defaults(func=_cmd_absorbing)

    p = sub.add_parser("sweep", help="randomized property sweep over a parameter box")
    p.add_argument("--n", type=int, default=1000, help="number of draws (default 1000)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="runs")
    p.add_argument(
        "--box",
        default=None,
        help="JSON file of name: [lo, hi] overrides for the draw box "
        "(rates lam, mu1..mu3, beta, p, q log-uniform; eta, epsilon uniform)",
    )
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except proc.ProcessTerminatedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERICAL_EVENT
    except (ConfigError, UnknownScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
