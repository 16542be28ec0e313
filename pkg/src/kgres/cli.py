"""Command line entry point: analyze, wkb, symflow, simulate, experiment, sweep.

Exit codes: 0 success (and every audit verdict passed), 1 an audit verdict failed,
2 invalid configuration, 3 a computation failed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
CSV_VERSION = 1


class Bundle:
    """Output directory whose files all carry the config hash."""

    def __init__(self, out: str, cfg: RunConfig, quiet: bool):
        self.out = out
        self.cfg = cfg
        self.hash = cfgmod.config_hash(cfg)
        self.quiet = quiet
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "config.json"), "w") as fh:
            fh.write(cfgmod.dumps(cfg) + "\n")

    def json(self, name: str, payload: dict) -> str:
        path = os.path.join(self.out, name)
        body = {"config_hash": self.hash, "schema_version": cfgmod.SCHEMA_VERSION, **payload}
        with open(path, "w") as fh:
            json.dump(_plain(body), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def csv(self, name: str, columns: dict) -> str:
        path = os.path.join(self.out, name)
        names = list(columns)
        data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
        header = f"config_hash={self.hash} csv_version={CSV_VERSION}\n" + ",".join(names)
        np.savetxt(path, data, delimiter=",", header=header, fmt="%.17g")
        return path

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex) or isinstance(v, np.complexfloating):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    return v


# --- subcommands ------------------------------------------------------------------

def audit_payload(cfg: RunConfig) -> dict:
    """Resonances, transparency classification, weak transparency and growth indices."""
    from .interaction import (
        ALL_SPECS,
        Gamma,
        Gamma1,
        dt_g_at_zero,
        expected_nontransparent,
        find_resonances,
        gamma1,
        gamma1_closed_form,
        nontransparent_couplings,
        polarization_vector,
        select_xi0,
        transparency_table,
        weak_transparency_audit,
    )
    from .model import solve_phase
    from .symflow import default_radius, resonance_sets

    params = cfgmod.model_params(cfg)
    phase = solve_phase(params)
    ic = cfg.interaction
    reports = transparency_table(params, phase, ic.tol_zero)
    found = nontransparent_couplings(reports, ic.nonzero_threshold)
    expected = expected_nontransparent(params, phase)
    classification_ok = {k.label(): v for k, v in found.items()} == {k.label(): v for k, v in expected.items()}
    weak = weak_transparency_audit(params, phase, ic.pmax, tol=ic.tol_zero)
    xi0, xi0r = select_xi0(params, phase)
    xs = np.linspace(-4, 4, 4001)
    v0 = cfg.wkb.v0
    amp = v0.height * np.exp(-(((xs - v0.center) / v0.width) ** 2))
    dtg = dt_g_at_zero(params, phase, amp[:, None] * polarization_vector(params, phase, 1))
    h = cfg.symflow.window_h or default_radius(params, phase)
    resonances = {s.label(): find_resonances(params, phase, s) for s in ALL_SPECS}
    payload = {
        "phase": {"omega": phase.omega, "k": phase.k},
        "resonance_points": {k: v for k, v in resonances.items() if v},
        "transparency_table": [r.to_dict() for r in reports],
        "nontransparent_found": {k.label(): v for k, v in found.items()},
        "nontransparent_expected": {k.label(): v for k, v in expected.items()},
        "classification_matches": classification_ok,
        "weak_transparency": {"passed": weak.passed, "max_residual": weak.max_residual},
        "xi0": xi0,
        "xi0_other": xi0r,
        "gamma1_xi0": float(gamma1(params, phase, xi0)),
        "gamma1_closed_form_xi0": float(gamma1_closed_form(params, phase, xi0)),
        "Gamma": Gamma(params, phase),
        "Gamma1": Gamma1(params, phase, dtg),
        "windows": {"radius": h, "centers": {k: list(v) for k, v in resonance_sets(params, phase).items()}},
    }
    return payload


def cmd_analyze(cfg: RunConfig, bundle: Bundle) -> int:
    payload = audit_payload(cfg)
    bundle.json("audit.json", payload)
    classification_ok = payload["classification_matches"]
    weak_ok = payload["weak_transparency"]["passed"]
    ok = classification_ok and weak_ok
    bundle.say(f"classification {'matches' if classification_ok else 'DIFFERS'}; weak transparency {'passes' if weak_ok else 'FAILS'}")
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_wkb(cfg: RunConfig, bundle: Bundle) -> int:
    from .grid import Grid1D, carrier_grid
    from .interaction import dt_g_at_zero, polarization_vector
    from .model import solve_phase
    from .wkb import cascade_init, export_snapshot, initial_rate, residual_norm, transport_history

    params = cfgmod.model_params(cfg)
    phase = solve_phase(params)
    w = cfg.wkb
    eps = params.epsilon
    harmonic_max = 15 if w.precision == "extended" else 9
    n_fine = int(2 ** np.ceil(np.log2(2 * harmonic_max * phase.k / eps * w.approx_length / np.pi)))
    fine = carrier_grid(phase.k, eps, w.approx_length, n_fine)
    grid = Grid1D(fine.length, w.amplitude_points)
    e1 = polarization_vector(params, phase, 1)
    v0 = w.v0.height * np.exp(-(((grid.x - w.v0.center) / w.v0.width) ** 2))[:, None] * e1
    sol = cascade_init(params, phase, grid, v0, T=w.t_end, precision=w.precision)
    dtg_numeric = initial_rate(sol, 1e-4)
    dtg_formula = dt_g_at_zero(params, phase, v0)
    rel = float(np.max(np.abs(dtg_numeric - dtg_formula)) / np.max(np.abs(dtg_formula)))
    times = np.linspace(0.0, w.t_end, w.n_snapshots)
    hist = transport_history(sol, times, w.transport_dt)
    rows = {"x": grid.x}
    summary = []
    for i, s in enumerate(hist):
        rows[f"abs_g_t{i}"] = np.abs(s.g)
        rows[f"abs_f_t{i}"] = np.abs(s.f)
        summary.append({"t": s.t, "max_abs_g": float(np.max(np.abs(s.g))), "max_abs_f": float(np.max(np.abs(s.f))),
                        "residual_l2": residual_norm(s, eps, fine)})
    bundle.csv("amplitudes.csv", rows)
    export_snapshot(hist[-1], eps, os.path.join(bundle.out, "profiles_final"))
    bundle.json("wkb.json", {"dtg_micro_step_relative_error": rel, "snapshots": summary, "precision": w.precision,
                             "fine_grid": {"length": fine.length, "n_points": fine.n_points}})
    bundle.say(f"dtg micro-step relative error {rel:.2e}; final residual {summary[-1]['residual_l2']:.3e}")
    return EXIT_OK if rel < 1e-4 else EXIT_VERDICT


def cmd_symflow(cfg: RunConfig, bundle: Bundle) -> int:
    from .model import solve_phase
    from .symflow import (
        FlowSetup,
        closed_form_flow,
        gaussian_dtg,
        growth_envelope_audit,
        integrate_flow,
        stratified_samples,
        write_envelope_csv,
    )

    params = cfgmod.model_params(cfg)
    phase = solve_phase(params)
    s = cfg.symflow
    v0 = cfg.wkb.v0
    setup = FlowSetup(params, phase, gaussian_dtg(params, phase, v0.center, v0.width, v0.height),
                      kind=s.kind, radius=s.window_h, T1=s.T1)
    closed = {}
    if s.kind in ("pp", "mm"):
        for c in setup.chi.centers:
            t = min(3.0, setup.horizon)
            S = integrate_flow(setup, v0.center, c, 0.0, t).S
            C = closed_form_flow(setup, v0.center, c, t)
            closed[f"{c:.12g}"] = float(np.linalg.norm(S - C) / np.linalg.norm(C))
    rows = growth_envelope_audit(setup, stratified_samples(setup, s.n_samples, s.seed), fit_from=s.fit_from)
    write_envelope_csv(rows, os.path.join(bundle.out, "envelope.csv"))
    passed = all(r.passed for r in rows) and all(v < 1e-6 for v in closed.values())
    bundle.json("symflow.json", {
        "kind": s.kind,
        "window_radius": setup.radius,
        "horizon": setup.horizon,
        "closed_form_relative_error": closed,
        "gamma_plus": rows[0].gamma_plus if rows else None,
        "max_fitted_a": max((r.a for r in rows), default=None),
        "n_samples": len(rows),
        "all_passed": passed,
    })
    bundle.say(f"envelope audit {'passes' if passed else 'FAILS'} on {len(rows)} samples")
    return EXIT_OK if passed else EXIT_VERDICT


def cmd_simulate(cfg: RunConfig, bundle: Bundle) -> int:
    from .grid import Grid1D, carrier_grid
    from .interaction import polarization_vector
    from .model import solve_phase
    from .solver import FieldState, SolverConfig, run
    from .wkb import cascade_init, evaluate_wkb, transport_history

    params = cfgmod.model_params(cfg)
    phase = solve_phase(params)
    eps = params.epsilon
    w, sv = cfg.wkb, cfg.solver
    grid = carrier_grid(phase.k, eps, w.approx_length, sv.n_points)
    agrid = Grid1D(grid.length, w.amplitude_points)
    dt = sv.dt_factor * eps
    n_steps = int(np.ceil(sv.t_end / dt - 1e-9))
    e1 = polarization_vector(params, phase, 1)
    v0 = w.v0.height * np.exp(-(((agrid.x - w.v0.center) / w.v0.width) ** 2))[:, None] * e1
    sol = cascade_init(params, phase, agrid, v0, T=n_steps * dt * (1 + 1e-9), precision=w.precision)
    u, v = evaluate_wkb(sol, 0.0, eps, grid)
    reference = None
    if sv.nonlinear:
        times = [i * dt for i in range(0, n_steps + 1, sv.stride)]
        if n_steps % sv.stride:
            times.append(n_steps * dt)
        cache = {round(h.t / dt): h for h in transport_history(sol, times, w.transport_dt)}
        reference = lambda t: evaluate_wkb(cache[round(t / dt)], t, eps, grid)
    sc = SolverConfig(grid=grid, dt=dt, t_end=n_steps * dt, stride=sv.stride, dealias=sv.dealias, nonlinear=sv.nonlinear)
    res = run(FieldState(u, v, 0.0), sc, params, reference=reference)
    bundle.csv("series.csv", res.as_columns())
    l2 = np.asarray(res.l2)
    payload = {"n_steps": n_steps, "dt": dt, "failure": res.failure,
               "l2_initial": float(l2[0]), "l2_final": float(l2[-1])}
    if not sv.nonlinear:
        payload["conservation"] = {"max_relative_l2_drift": float(np.max(np.abs(l2 - l2[0])) / l2[0])}
    else:
        payload["max_deviation"] = float(np.max(res.deviation))
    bundle.json("simulate.json", payload)
    bundle.say(f"simulated {n_steps} steps, final L2 {l2[-1]:.6g}")
    return EXIT_RUNTIME if res.failure else EXIT_OK


def _experiment_payload(res) -> dict:
    out = {"horizon": res.horizon, "Gamma1": res.Gamma1, "failure": res.failure, "perturbation": res.perturbation}
    out["report"] = res.report.to_dict() if res.report else None
    return out


def cmd_experiment(cfg: RunConfig, bundle: Bundle) -> int:
    from .harness import control_experiment, instability_experiment

    ecfg = cfgmod.experiment_config(cfg)
    bundle.json("audit.json", audit_payload(cfg))
    res = instability_experiment(ecfg, with_floor=cfg.harness.with_floor)
    bundle.csv("timeseries.csv", res.columns())
    payload = {"instability": _experiment_payload(res)}
    verdicts = [res.report is not None and res.report.verdict == "pass"]
    if cfg.harness.controls and res.report is not None:
        for kind in ("off_resonance", "orthogonal"):
            c = control_experiment(ecfg, kind, reference_slope=res.report.slope_fitted)
            bundle.csv(f"control_{kind}.csv", c.columns())
            payload[f"control_{kind}"] = _experiment_payload(c)
            verdicts.append(c.report is not None and c.report.verdict == "pass")
    bundle.json("ratefit.json", payload)
    if res.report:
        r = res.report
        bundle.say(f"eps={r.epsilon:g} slope={r.slope_fitted:.4f} Gamma1={r.Gamma1_predicted:.4f} "
                   f"amplification={r.amplification_factor:.2f} verdict={r.verdict}")
    if res.failure and res.report is None:
        return EXIT_RUNTIME
    return EXIT_OK if all(verdicts) else EXIT_VERDICT


def cmd_sweep(cfg: RunConfig, bundle: Bundle) -> int:
    from .harness import epsilon_sweep

    ecfg = cfgmod.experiment_config(cfg)
    out = epsilon_sweep(ecfg, cfg.harness.epsilons)
    entries = []
    for res in out["results"]:
        bundle.csv(f"deviation_eps{res.config.epsilon:g}.csv", res.columns())
        entries.append(_experiment_payload(res))
    bundle.json("sweep.json", {"runs": entries, "distance_to_Gamma1": out["distance"], "non_degrading": out["non_degrading"]})
    ok = out["non_degrading"] is not False and all(r.report is not None and r.report.verdict == "pass" for r in out["results"])
    bundle.say(f"sweep {'passes' if ok else 'FAILS'}: distances {['%.3f' % d for d in out['distance']]}")
    return EXIT_OK if ok else EXIT_VERDICT


COMMANDS = {
    "analyze": cmd_analyze,
    "wkb": cmd_wkb,
    "symflow": cmd_symflow,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgres", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON run configuration (defaults when omitted)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted config path, e.g. model.epsilon=0.003 (repeatable)")
    ap.add_argument("--window-h", type=float, help="shorthand for --override symflow.window_h=VALUE")
    ap.add_argument("--quiet", action="store_true")
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
        overrides = list(args.override)
        if args.window_h is not None:
            overrides.append(f"symflow.window_h={args.window_h}")
        for o in overrides:
            cfg = cfgmod.apply_override(cfg, o)
        cfgmod.validate(cfg)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        _failure(args.out, "config", exc)
        return EXIT_CONFIG
    bundle = Bundle(os.path.join(args.out, args.command), cfg, args.quiet)
    try:
        return COMMANDS[args.command](cfg, bundle)
    except Exception as exc:  # surfaced as a machine-readable record, then a nonzero exit
        bundle.json("failure.json", {"stage": args.command, "error": type(exc).__name__, "message": str(exc)})
        if not args.quiet:
            print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _failure(out: str, stage: str, exc: Exception) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "failure.json"), "w") as fh:
        json.dump({"stage": stage, "error": type(exc).__name__, "message": str(exc)}, fh, indent=2, sort_keys=True)
    print(f"invalid configuration: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
