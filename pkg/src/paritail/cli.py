"""Command-line front end.

    paritail run SCENARIO --out DIR
    paritail validate SCENARIO

``run`` writes ``result.json`` plus mode-specific CSVs. Every CSV starts
with ``#`` comment lines echoing the full scenario (seed included), then a
header row. All randomness is derived from the scenario seed through
``child_seed``, so reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (BootstrapConfig, Imitator, Lazy, RationalGreedy, SimConfig,
                       bootstrap_time, bootstrap_trajectory, efficiency_gap, run_market)
from .equilibrium import (GameSpec, consensus_diagnostic, payoff, payoff_gap, solve_nash)
from .errors import NonpositivePayoff, ParitailError
from .market import BeliefMatrix, DemandModel, bandwidth_profile, demand_from_zipf
from .metrics import json_safe, bias_curve, tail_report
from .polya import convergence_time_curve, fit_exponential_slowdown, run_ensemble
from .rewards import DiscountParams, expected_utility
from .scenario import Scenario, ScenarioError, child_seed, parse_scenario, render_scenario

EXIT_OK = 0
EXIT_INTERNAL = 1


def _demand(s: Scenario) -> DemandModel:
    if s["probs"] is not None:
        return DemandModel.from_probs(s["probs"], s["total_rate"])
    return demand_from_zipf(s["n"], s["zipf_exponent"], s["total_rate"])


def _game(s: Scenario, dm: DemandModel) -> GameSpec:
    m = s["m"]
    budgets = np.full(m, 1.0 / m)
    if s["belief_noise"] > 0:
        rng = np.random.default_rng(child_seed(s.seed, "beliefs"))
        beliefs = BeliefMatrix.noisy(dm.probs, m, s["belief_noise"], rng)
    else:
        beliefs = BeliefMatrix.common(dm.probs, m)
    return GameSpec(budgets, beliefs)


def _solve(s: Scenario, g: GameSpec):
    return solve_nash(g, tol=s["tol"], max_rounds=s["max_rounds"],
                      seed=child_seed(s.seed, "equilibrium"))


def _csv_text(s: Scenario, header, rows) -> str:
    buf = io.StringIO()
    for line in render_scenario(s).splitlines():
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _run_equilibrium(s: Scenario):
    dm = _demand(s)
    g = _game(s, dm)
    res = _solve(s, g)
    a = res.allocation
    try:
        diag = consensus_diagnostic(g, a)
    except NonpositivePayoff:
        diag = None
    d = DiscountParams(s["delta"])
    summary = {
        "converged": res.converged,
        "residual": res.residual,
        "iterations": res.iterations,
        "degenerate": res.degenerate,
        "consensus_diagnostic": diag,
        "payoff_gap": payoff_gap(a, g),
        "payoffs": [payoff(a, i, g) for i in range(a.m)],
        "expected_utility": [expected_utility(a, i, dm, d) for i in range(a.m)],
        "efficiency_gap": efficiency_gap(bandwidth_profile(a), dm),
        "tail": tail_report(bandwidth_profile(a)).to_dict() if a.n >= 2 else None,
    }
    header = ["server", "budget"] + [f"file_{j}" for j in range(a.n)]
    rows = [[i, float(a.budgets[i])] + [float(x) for x in a.bids[i]] for i in range(a.m)]
    return summary, {"equilibrium.csv": _csv_text(s, header, rows)}


def _sim_config(s: Scenario) -> SimConfig:
    dm = _demand(s)
    m = s["m"]
    g = _game(s, dm)
    n_lazy = round(s["lazy_fraction"] * m)
    n_imit = min(m - n_lazy, round(s["imitator_fraction"] * m))
    policies = []
    for i in range(m):
        if i < n_lazy:
            policies.append(Lazy())
        elif i < n_lazy + n_imit:
            policies.append(Imitator())
        else:
            beliefs = g.beliefs.beliefs[i] if s["belief_noise"] > 0 else None
            policies.append(RationalGreedy(beliefs, s["move_fraction"]))
    initial = _solve(s, g).allocation if s["initial"] == "equilibrium" else None
    return SimConfig(dm, s["horizon"], s["broadcast_interval"], policies,
                     s["reallocation_rate"], seed=child_seed(s.seed, "simulate"),
                     initial=initial, discount=DiscountParams(s["delta"]))


def _sim_summary(cfg, trace):
    fees = float(trace.ledger.cumulative.sum())
    prof = bandwidth_profile(trace.final)
    return {
        "gap_initial": float(trace.gap_series[0]),
        "gap_final": float(trace.gap_series[-1]),
        "gap_final_live": efficiency_gap(prof, cfg.demand),
        "arrivals": trace.arrivals,
        "settled": trace.settled,
        "dropped": trace.dropped,
        "fees_paid": fees,
        "fee_conservation_error": abs(fees - trace.settled),
        "tail": tail_report(prof).to_dict() if prof.n >= 2 else None,
    }


def _run_simulate(s: Scenario):
    cfg = _sim_config(s)
    trace = run_market(cfg)
    rows = [[float(t), kind, f, srv, float(gap)] for t, kind, f, srv, gap in trace.events]
    csv_text = _csv_text(s, ["time", "event_type", "file", "server", "pi_gap"], rows)
    return _sim_summary(cfg, trace), {"trace.csv": csv_text}


def _run_metrics(s: Scenario):
    cfg = _sim_config(s)
    trace = run_market(cfg, record_events=False)
    curve = bias_curve(trace.pi_snapshots, trace.ledger.requests_served, s["bins"])
    summary = _sim_summary(cfg, trace)
    summary["bias_curve"] = curve.to_dict()
    rows = [[mid, share, count] for mid, share, count in curve.bins]
    return summary, {"bias.csv": _csv_text(s, ["pi_midpoint", "mean_request_share", "count"], rows)}


def _run_bootstrap(s: Scenario):
    cfg = BootstrapConfig(s["p"], s["pi0"], s["dt"], s["method"])
    times, values, t_hit = bootstrap_trajectory(cfg)
    closed = bootstrap_time(s["p"], s["pi0"])
    summary = {"t_hit": t_hit, "closed_form": closed, "abs_error": abs(t_hit - closed),
               "steps": int(times.size - 1)}
    rows = [[float(t), float(v)] for t, v in zip(times, values)]
    return summary, {"bootstrap.csv": _csv_text(s, ["time", "pi"], rows)}


def _run_polya(s: Scenario):
    seed = child_seed(s.seed, "polya")
    stats = run_ensemble(s["alpha"], s["p"], s["arrivals"], s["runs"], seed,
                         s["seed_a"], s["seed_b"], s["band"])
    fp = stats.first_passage
    summary = {
        "mean_final_pi": stats.mean,
        "variance_final_pi": stats.variance,
        "reached": stats.reached,
        "median_first_passage": float(np.median(np.where(fp >= 0, fp, np.inf))),
    }
    if s["alphas"] is not None:
        curve = convergence_time_curve(s["alphas"], s["p"], s["arrivals"], s["runs"],
                                       child_seed(s.seed, "polya_curve"), s["band"],
                                       on_censored="inf")
        slope, intercept = fit_exponential_slowdown(curve)
        summary["convergence_curve"] = [list(c) for c in curve]
        summary["log_time_vs_inverse_alpha"] = {"slope": slope, "intercept": intercept}
    rows = [[s["alpha"], r, float(stats.final_pi[r]), int(fp[r])] for r in range(fp.size)]
    return summary, {"ensemble.csv": _csv_text(s, ["alpha", "run", "final_pi", "first_passage"], rows)}


RUNNERS = {
    "equilibrium": _run_equilibrium,
    "simulate": _run_simulate,
    "metrics": _run_metrics,
    "bootstrap": _run_bootstrap,
    "polya": _run_polya,
}


def _dump(obj) -> str:
    return json.dumps(json_safe(obj), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _write(out_dir: Path, files: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out_dir / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _error_doc(exc, code):
    if isinstance(exc, ScenarioError):
        errors = [e.to_dict() for e in exc.errors]
    else:
        errors = [{"type": type(exc).__name__, "message": str(exc)}]
    return {"status": "error", "exit_code": code, "errors": errors}


def run_scenario(s: Scenario, out_dir) -> int:
    """Run ``s`` and write its artifacts to ``out_dir``; returns an exit status.

    Nothing is written until the whole run has finished. On failure only
    ``error.json`` is written.
    """
    out_dir = Path(out_dir)
    try:
        summary, files = RUNNERS[s.mode](s)
    except ParitailError as exc:
        _write(out_dir, {"error.json": _dump(_error_doc(exc, exc.exit_code))})
        return exc.exit_code
    except (ValueError, ArithmeticError) as exc:
        _write(out_dir, {"error.json": _dump(_error_doc(exc, EXIT_INTERNAL))})
        return EXIT_INTERNAL
    result = {
        "status": "ok",
        "name": s.name,
        "mode": s.mode,
        "seed": s.seed,
        "version": __version__,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in s.config().items()},
        "summary": summary,
    }
    files = {"result.json": _dump(result), **files}
    _write(out_dir, files)
    return EXIT_OK


def _load(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="paritail", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario and write artifacts")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", required=True, help="output directory")
    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario")
    args = parser.parse_args(argv)

    try:
        s = _load(args.scenario)
    except ScenarioError as exc:
        print(_dump(_error_doc(exc, exc.exit_code)), end="", file=sys.stderr)
        if args.command == "run":
            _write(Path(args.out), {"error.json": _dump(_error_doc(exc, exc.exit_code))})
        return exc.exit_code
    except OSError as exc:
        print(_dump(_error_doc(exc, EXIT_INTERNAL)), end="", file=sys.stderr)
        return EXIT_INTERNAL

    if args.command == "validate":
        print(_dump({"status": "ok", "config": {k: list(v) if isinstance(v, tuple) else v
                                                 for k, v in s.config().items()}}), end="")
        return EXIT_OK
    code = run_scenario(s, args.out)
    if code != EXIT_OK:
        print((Path(args.out) / "error.json").read_text(encoding="utf-8"), end="", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
