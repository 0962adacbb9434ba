"""Command-line experiment runner.

    ccfr solve --config cfg.yaml --out results/
    ccfr transit-sweep | lp-compare | opponent-model | bound-audit ...

Every output file carries the run's configuration.  Outputs other than
``timing.json`` and figures are byte-identical for a fixed config and seed.
Exit codes: 0 success, 1 failed check (bound audit), 2 configuration or
input error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io as _io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io, plotting
from .constraints import ConstraintSet, patroller_risk
from .constraints.opponent import (
    best_response_value,
    build_opponent_constraints,
    exact_opponent_constraints,
    robust_counter_profile,
    simulate_observations,
    spearman,
    value_against,
)
from .lp import (
    MAX_SEQUENCES,
    OPTIMAL,
    ScaleGuardError,
    constrained_best_response,
    constrained_equilibrium,
)
from .regret import CfrSolver, behavioral_average
from .solver import (
    CcfrSolver,
    beta_doubling_solve,
    checkpoint_schedule,
    corollary_lambda_regret,
    solve,
    guarantee_bounds,
    write_diagnostics_csv,
)

log = logging.getLogger("ccfr")
BOUND_TOL = 1e-9


class CliError(Exception):
    pass


# ------------------------------------------------------------------ helpers
def _header(cfg: io.ExperimentConfig, game) -> list[str]:
    return [f"config: {cfg.echo()}", f"game: {getattr(game, 'name', '')} hash={io.game_hash(game)}"]


def _write_csv(path: Path, header: list[str], columns: list[str], rows: list[list],
               units: dict[str, str]) -> None:
    buf = _io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    units = {"iteration": "count", **units}
    buf.write("# units: " + ", ".join(f"{c}={units.get(c, '-')}" for c in columns) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    _atomic_write(path, buf.getvalue())


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _scale_limit(args) -> int:
    return sys.maxsize if args.override_scale_guard else MAX_SEQUENCES


def _strategy_doc(cfg: io.ExperimentConfig, game, labels, xs) -> dict:
    """Average realization plans; echoes only the game section so that solver variants compare."""
    return {
        "format": "ccfr-strategy/1",
        "game": dataclasses.asdict(cfg.game),
        "game_hash": io.game_hash(game),
        "seed": cfg.seed,
        "player1": dict(zip(labels[0], map(float, xs[0]))),
        "player2": dict(zip(labels[1], map(float, xs[1]))),
    }


def _dump(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=1) + "\n")


# ------------------------------------------------------------------ commands
def cmd_solve(cfg: io.ExperimentConfig, out: Path, args) -> int:
    game = io.make_game(cfg.game)
    view = io.solver_view(game)
    labels = tuple(s.sequence_labels() for s in view.spaces)
    start = time.perf_counter()
    if cfg.solver.algorithm == "cfr":
        s = CfrSolver(view).run(cfg.solver.iterations)
        xs = (s.average(1), s.average(2))
        _dump(out / "strategy.json", _strategy_doc(cfg, game, labels, xs))
        _dump(out / "summary.json", {"config": cfg.to_dict(), "iterations": s.t,
                                     "value": view.value(*xs),
                                     "exploitability": s.exploitability()})
        _dump(out / "timing.json", {"solve_seconds": time.perf_counter() - start})
        print(f"cfr: {s.t} iterations, exploitability {s.exploitability():.6g}")
        return 0
    cs = io.make_constraints(game, cfg.constraints, cfg.solver.constrained_player)
    ccfg = cfg.solver.ccfr(cfg.seed)
    res = beta_doubling_solve(view, cs, ccfg) if ccfg.beta_doubling else solve(view, cs, ccfg)
    doc = res.to_dict()
    doc["config"] = cfg.to_dict()
    doc["game_hash"] = io.game_hash(game)
    _dump(out / "result.json", doc)
    _dump(out / "strategy.json", _strategy_doc(cfg, game, labels, res.xbar))
    write_diagnostics_csv(out / "diagnostics.csv", res.diagnostics, res.constraint_names,
                          header_comments=_header(cfg, game))
    _dump(out / "timing.json", {"solve_seconds": time.perf_counter() - start})
    if not args.no_plots:
        plotting.convergence(res.diagnostics, out / "convergence.png", view.name)
    d = res.final
    print(f"ccfr: {res.iterations} iterations, value {d['value']:.6g}, "
          f"exploitability {d['exploitability']:.6g}, total violation {d['total_violation']:.3g}")
    return 0


def run_transit_sweep(game, bounds, ccfg, reference_iterations: int | None = None,
                      progress=print) -> dict:
    """Risk/exploitability trade-off of the patroller over a list of risk bounds.

    Exploitability of each constrained patroller strategy is measured against
    an unconstrained reference run: the reference's guaranteed value minus
    the constrained strategy's guaranteed value (both against exact best
    responses).  The mean best-response gain of the profile is kept as a
    proxy column.
    """
    from .constraints import build_risk_constraint

    view = game.bilinear()
    timing = {}
    t0 = time.perf_counter()
    ref = CfrSolver(view).run(reference_iterations or ccfg.iterations)
    x_ref = ref.average(1)
    v_ref = -view.best_response(2, x_ref)[0]
    timing["reference"] = time.perf_counter() - t0
    points = []
    for b in bounds:
        t0 = time.perf_counter()
        res = solve(view, [build_risk_constraint(game, b)], ccfg)
        timing[f"b={b:g}"] = time.perf_counter() - t0
        x = res.xbar[0]
        risk = patroller_risk(game, x)
        guaranteed = -view.best_response(2, x)[0]
        points.append({"bound": b, "risk": risk, "exploitability": v_ref - guaranteed,
                       "proxy": res.final["exploitability"], "guaranteed": guaranteed,
                       "lambda_bar": float(res.lam_bar[0])})
        progress(f"b_r={b:g}: risk {risk:.5f}, exploitability {v_ref - guaranteed:.5f}, "
                 f"lambda_bar {res.lam_bar[0]:.4g}")
    return {"reference": {"risk": patroller_risk(game, x_ref), "guaranteed": v_ref,
                          "proxy": ref.exploitability()},
            "points": points, "timing": timing}


def cmd_transit_sweep(cfg: io.ExperimentConfig, out: Path, args) -> int:
    if cfg.game.name != "transit":
        raise CliError("transit-sweep needs game.name: transit")
    sc = cfg.transit_sweep
    if cfg.game.w > sc.max_width and not args.override_scale_guard:
        raise CliError(f"w={cfg.game.w} exceeds the desk-scale guard {sc.max_width}; "
                       "pass --override-scale-guard to run anyway")
    game = io.make_game(cfg.game)
    ccfg = cfg.solver.ccfr(cfg.seed)
    data = run_transit_sweep(game, sc.bounds, ccfg, sc.reference_iterations)
    ref = data["reference"]
    rows = [["unconstrained", ref["risk"], float("nan"), 0.0, ref["proxy"], ref["guaranteed"], 0.0]]
    rows += [[f"{p['bound']:g}", p["risk"], p["risk"] - p["bound"], p["exploitability"],
              p["proxy"], p["guaranteed"], p["lambda_bar"]] for p in data["points"]]
    cols = ["risk_bound", "risk", "risk_minus_bound", "exploitability", "exploitability_proxy",
            "guaranteed_value", "lambda_bar"]
    units = {"risk": "probability", "risk_minus_bound": "probability",
             "exploitability": "utility (reference guaranteed value minus this one)",
             "exploitability_proxy": "utility (mean best-response gain)",
             "guaranteed_value": "utility", "lambda_bar": "utility per unit risk"}
    _write_csv(out / "sweep.csv", _header(cfg, game) + [f"iterations: {ccfg.iterations}"],
               cols, rows, units)
    _dump(out / "timing.json", data["timing"])
    if not args.no_plots:
        pts = data["points"]
        plotting.tradeoff([p["bound"] for p in pts], [p["risk"] for p in pts],
                          [p["exploitability"] for p in pts], out / "tradeoff.png")
    return 0


def cmd_lp_compare(cfg: io.ExperimentConfig, out: Path, args) -> int:
    game = io.make_game(cfg.game)
    if not hasattr(game, "tree"):
        raise CliError("lp-compare needs a game tree (kuhn, leduc, leduc_abstract)")
    view = io.solver_view(game)
    p = cfg.solver.constrained_player
    cs = io.make_constraints(game, cfg.constraints, p)
    ccfg = cfg.solver.ccfr(cfg.seed)
    t0 = time.perf_counter()
    res = solve(view, cs, ccfg)
    t_ccfr = time.perf_counter() - t0
    lp_view = view if p == 1 else view.negated()
    t0 = time.perf_counter()
    try:
        eq = constrained_equilibrium(lp_view, cs, _scale_limit(args))
    except ScaleGuardError as e:
        raise CliError(f"{e}; pass --override-scale-guard to run anyway") from e
    t_lp = time.perf_counter() - t0
    if eq.status != OPTIMAL:
        raise CliError(f"LP ended with status {eq.status}")
    x_c = res.xbar[p - 1]
    d = res.final
    viol_lp = cs.values(eq.x) if len(cs) else np.zeros(0)
    report = {
        "config": cfg.to_dict(),
        "game_hash": io.game_hash(game),
        "constrained_player": p,
        "lp_value": eq.value,
        "ccfr_value": d["value"],
        "ccfr_guaranteed_value": d["guaranteed_value"],
        "value_gap": abs(d["value"] - eq.value),
        "ccfr_max_violation": float(np.max(cs.values(x_c), initial=-math.inf)) if len(cs) else 0.0,
        "lp_max_violation": float(np.max(viol_lp, initial=-math.inf)) if len(cs) else 0.0,
        "lambda_bar": res.lam_bar.tolist(),
        "lambda_star": eq.lam.tolist(),
        "beta": res.beta,
        "beta_exceeds_lambda_star": bool(res.beta > float(np.max(eq.lam, initial=0.0))),
        "lp_pivots": eq.pivots,
        "iterations": res.iterations,
    }
    _dump(out / "report.json", report)
    _dump(out / "timing.json", {"ccfr_seconds": t_ccfr, "lp_seconds": t_lp})
    print(f"value gap {report['value_gap']:.3g} (ccfr {d['value']:.6g}, lp {eq.value:.6g}); "
          f"ccfr {t_ccfr:.2f}s, lp {t_lp:.2f}s")
    return 0


def _target_profile(cfg: io.ExperimentConfig, game):
    """Profile to model: a CFR average, computed on the abstraction for Leduc."""
    from .games import build_leduc_abstraction

    om = cfg.opponent_model
    if cfg.game.name == "leduc":
        ab = build_leduc_abstraction(cfg.game.abstraction, tuple(cfg.game.bet_sizes),
                                     cfg.game.max_raises)
        s = CfrSolver(ab.abstract.tree).run(om.target_iterations)
        return tuple(ab.lift(behavioral_average(s.state, q), q) for q in (1, 2))
    s = CfrSolver(game.tree).run(om.target_iterations)
    return tuple(behavioral_average(s.state, q) for q in (1, 2))


def _log_seed(base: int, seed: int, seat: int, n: int) -> int:
    return int(np.random.SeedSequence([base, seed, seat, n]).generate_state(1)[0])


def run_opponent_model(cfg: io.ExperimentConfig, progress=print) -> dict:
    """All (n, gamma, seed) points plus the references; returned as plain data."""
    if cfg.game.name not in ("kuhn", "leduc"):
        raise CliError("opponent-model needs game.name kuhn or leduc")
    om = cfg.opponent_model
    game = io.make_game(cfg.game)
    view = io.solver_view(game)
    target_beh = _target_profile(cfg, game)
    target = tuple(view.spaces[q].realize(target_beh[q]) for q in (0, 1))
    nash_run = CfrSolver(view).run(om.nash_iterations)
    nash = (nash_run.average(1), nash_run.average(2))
    refs = {"nash_value": value_against(view, nash, target),
            "best_response_value": best_response_value(view, target),
            "nash_exploitability": nash_run.exploitability()}
    ccfg = cfg.solver.ccfr(cfg.seed)
    points = []
    for n in om.n:
        for s in range(om.seeds):
            logs = {seat: simulate_observations(game, target_beh, seat, n,
                                                _log_seed(cfg.seed, s, seat, n))
                    for seat in (1, 2)}
            for gamma in om.gamma:
                c1, _ = build_opponent_constraints(logs[1], game, gamma, known_probe=om.known_probe)
                c2, _ = build_opponent_constraints(logs[2], game, gamma, known_probe=om.known_probe)
                cp = robust_counter_profile(view, c1, c2, ccfg)
                v = value_against(view, (cp.x1, cp.x2), target)
                points.append({"n": n, "gamma": gamma, "seed": s, "value": v,
                               "violation_seat1": cp.results[0].final["total_violation"],
                               "violation_seat2": cp.results[1].final["total_violation"]})
                progress(f"n={n} gamma={gamma:g} seed={s}: value {v:.5f}")
    infinite = None
    if om.infinite:
        c1, _ = exact_opponent_constraints(game, 1, target_beh[1])
        c2, _ = exact_opponent_constraints(game, 2, target_beh[0])
        cp = robust_counter_profile(view, c1, c2, ccfg)
        infinite = value_against(view, (cp.x1, cp.x2), target)
        progress(f"infinite data: value {infinite:.5f}")
    return {"game": game, "refs": refs, "points": points, "infinite": infinite}


def cmd_opponent_model(cfg: io.ExperimentConfig, out: Path, args) -> int:
    t0 = time.perf_counter()
    data = run_opponent_model(cfg)
    game, refs, points = data["game"], data["refs"], data["points"]
    header = _header(cfg, game) + [
        f"nash_value: {refs['nash_value']!r}",
        f"best_response_value: {refs['best_response_value']!r}"]
    units = {"value": "utility per game (seat-averaged)", "n": "games per seat",
             "violation_seat1": "constraint units", "violation_seat2": "constraint units"}
    _write_csv(out / "points.csv", header,
               ["n", "gamma", "seed", "value", "violation_seat1", "violation_seat2"],
               [[p["n"], p["gamma"], p["seed"], p["value"], p["violation_seat1"],
                 p["violation_seat2"]] for p in points], units)
    rows, curves = [], {}
    for gamma in cfg.opponent_model.gamma:
        ns, mean, lo, hi = [], [], [], []
        for n in cfg.opponent_model.n:
            vals = [p["value"] for p in points if p["n"] == n and p["gamma"] == gamma]
            rows.append([n, gamma, float(np.mean(vals)), float(np.min(vals)), float(np.max(vals)),
                         refs["nash_value"], refs["best_response_value"]])
            ns.append(n)
            mean.append(float(np.mean(vals)))
            lo.append(float(np.min(vals)))
            hi.append(float(np.max(vals)))
        curves[gamma] = (ns, mean, lo, hi)
        rho = spearman([p["n"] for p in points if p["gamma"] == gamma],
                       [p["value"] for p in points if p["gamma"] == gamma])
        header.append(f"spearman_gamma_{gamma:g}: {rho!r}")
    if data["infinite"] is not None:
        rows.append(["inf", "exact", data["infinite"], data["infinite"], data["infinite"],
                     refs["nash_value"], refs["best_response_value"]])
    _write_csv(out / "curve.csv", header,
               ["n", "gamma", "mean", "min", "max", "nash_value", "best_response_value"],
               rows, {**units, "mean": "utility", "min": "utility", "max": "utility",
                      "nash_value": "utility", "best_response_value": "utility"})
    _dump(out / "timing.json", {"total_seconds": time.perf_counter() - t0})
    if not args.no_plots:
        plotting.learning_curve(curves, refs["nash_value"], refs["best_response_value"],
                                out / "learning_curve.png")
    return 0


def audit_bounds(view, cs: ConstraintSet, ccfg, lp_br: bool = True,
                 limit: int = MAX_SEQUENCES) -> list[dict]:
    """Run the solver and compare each checkpoint's measured quantities to the bounds."""
    solver = CcfrSolver(view, cs, ccfg)
    game = solver.game
    s1 = game.spaces[0]
    lam_star = None
    use_lp = lp_br and cs.linear and s1.num_sequences <= limit
    if use_lp and len(cs):
        eq = constrained_equilibrium(game, cs, limit)
        if eq.status == OPTIMAL:
            lam_star = eq.lam
    rows = []
    for t in checkpoint_schedule(ccfg.iterations, ccfg.checkpoints):
        solver.advance(t - solver.t)
        xb, yb = solver.xbar
        guaranteed = -game.best_response(2, xb)[0]
        g1 = game.gradient(1, yb)
        if use_lp:
            status, cbr, _ = constrained_best_response(s1, g1, cs, limit)
            exact = status == OPTIMAL
        else:
            cbr, exact = game.best_response(1, yb)[0], False
        lhs1 = cbr - guaranteed
        rl = solver.lambda_regret
        tb = guarantee_bounds(solver.report, t, solver.beta, rl, lam_star)
        f = cs.values(xb) if len(cs) else np.zeros(0)
        row = {"iteration": t, "expl_lhs": lhs1, "expl_rhs": tb.expl, "expl_exact_lhs": exact,
               "lambda_regret": rl, "max_violation": float(np.max(f, initial=-math.inf)),
               "viol_rhs": tb.viol,
               "expl_ok": (not math.isfinite(lhs1)) or lhs1 <= tb.expl + BOUND_TOL,
               "viol_ok": bool(np.all(f <= tb.viol + BOUND_TOL))}
        if lam_star is not None:
            row["dual_viol_rhs"] = float(np.min(tb.dual_viol))
            row["dual_viol_ok"] = bool(np.all(f <= tb.dual_viol + BOUND_TOL))
        if ccfg.step == "corollary":
            row["corollary_lambda_regret"] = corollary_lambda_regret(solver.report, t, solver.beta)
            row["corollary_ok"] = rl <= row["corollary_lambda_regret"] + BOUND_TOL
        rows.append(row)
    return rows


def cmd_bound_audit(cfg: io.ExperimentConfig, out: Path, args) -> int:
    game = io.make_game(cfg.game)
    view = io.solver_view(game)
    cs = io.make_constraints(game, cfg.constraints, cfg.solver.constrained_player)
    ccfg = cfg.solver.ccfr(cfg.seed)
    rows = audit_bounds(view, cs, ccfg, cfg.bound_audit.lp_constrained_br, _scale_limit(args))
    cols = list(rows[0])
    units = {"expl_lhs": "utility", "expl_rhs": "utility", "lambda_regret": "utility",
             "max_violation": "constraint units", "viol_rhs": "constraint units",
             "dual_viol_rhs": "constraint units", "corollary_lambda_regret": "utility"}
    _write_csv(out / "bounds.csv", _header(cfg, game), cols,
               [[r[c] for c in cols] for r in rows], units)
    bad = [r["iteration"] for r in rows
           if not all(v for k, v in r.items() if k.endswith("_ok"))]
    if bad:
        print(f"bound violated at iterations {bad}", file=sys.stderr)
        return 1
    print(f"all bounds hold at {len(rows)} checkpoints")
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "transit-sweep": cmd_transit_sweep,
    "lp-compare": cmd_lp_compare,
    "opponent-model": cmd_opponent_model,
    "bound-audit": cmd_bound_audit,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccfr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--override-scale-guard", action="store_true",
                        help="run past the desk-scale size limits")
        sp.add_argument("--no-plots", action="store_true", help="skip figure rendering")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = io.load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        kind = args.command.replace("-", "_")
        if cfg.experiment != kind:
            raise CliError(f"config is for experiment {cfg.experiment!r}, not {kind!r}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (io.ConfigError, CliError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
