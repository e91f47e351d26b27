"""Umbrella command line: serve the HTTP API, chat in the terminal, and
run every grid study or experiment directly.

Usage errors exit with code 2 (click's convention); operational failures
(solver errors, infeasible verdicts where the command promises success,
unreachable backends) exit with code 1.
"""

from __future__ import annotations

import csv as csv_mod
import json
import sys
from pathlib import Path

import click
import numpy as np

from .acpf import ConnectionRequest, SecurityLimits, check_connection, security_label, solve_ac
from .fixtures import GRID9G_CONTINGENCIES, duck_curve
from .model import apply_load_step, load_calendar_csv, load_network
from .residential import ApplianceUsage, HourlyProfile, estimate_consumption, heterogeneity_sweep
from .scopf import (
    OutageRequest,
    ScopfProblem,
    feasibility_map,
    plan_outage,
    solve_scopf,
)

__all__ = ["main"]


def _read_profile(path: str, expected: int) -> list[float]:
    """One number per line or comma-separated; length-checked."""
    text = Path(path).read_text().replace(",", "\n")
    values = [float(v) for v in text.split() if v.strip()]
    if len(values) != expected:
        raise click.UsageError(
            f"profile file has {len(values)} values, expected {expected}"
        )
    return values


def _parse_grid(spec: str) -> list[float]:
    """'a:step:b' inclusive grid, or comma-separated values."""
    if ":" in spec:
        try:
            lo, step, hi = (float(x) for x in spec.split(":"))
        except ValueError:
            raise click.UsageError(f"bad grid spec {spec!r}; use lo:step:hi")
        if step <= 0 or hi < lo:
            raise click.UsageError("grid requires step > 0 and hi >= lo")
        n = int(round((hi - lo) / step))
        return [round(lo + i * step, 10) for i in range(n + 1)]
    return [float(x) for x in spec.split(",")]


def _contingencies(option: str | None) -> tuple[int, ...]:
    if option is None:
        return GRID9G_CONTINGENCIES
    return tuple(int(x) for x in option.split(",") if x.strip())


@click.group()
def main():
    """Electricity-contract negotiation engine: grid kernels, chat loop,
    HTTP service and experiment harness."""


@main.command()
@click.option("--config", "config_path", default=None, help="TOML config file.")
@click.option("--host", default=None, help="override bind host")
@click.option("--port", default=None, type=int, help="override bind port")
def serve(config_path, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app, load_config

    try:
        cfg = load_config(config_path)
    except (FileNotFoundError, ValueError) as exc:
        raise click.UsageError(str(exc))
    app = create_app(cfg)
    uvicorn.run(app, host=host or cfg.host, port=port or cfg.port)


@main.command()
@click.option("--persona", default="residential",
              type=click.Choice(["residential", "dso", "tso"]))
@click.option("--backend", "backend_kind", default="command",
              type=click.Choice(["command", "live"]))
@click.option("--endpoint", default="", help="live backend endpoint")
@click.option("--model", default="", help="live backend model name")
@click.option("--temperature", default=0.0, type=float)
def chat(persona, backend_kind, endpoint, model, temperature):
    """Terminal chat REPL against the selected backend."""
    import os

    from .orchestrator import ChatContext, LiveBackend, Orchestrator
    from .service.app import CommandBackend
    from .tools import default_setup

    registry, personas, _ = default_setup()
    if backend_kind == "live":
        if not endpoint or not model:
            raise click.UsageError("--endpoint and --model required for live backend")
        backend = LiveBackend(endpoint, os.environ.get("GRIDCHAT_BACKEND_API_KEY", ""),
                              model, temperature)
    else:
        backend = CommandBackend()
    orch = Orchestrator(registry, personas, backend)
    ctx = ChatContext("cli", persona)
    click.echo(f"[{persona}] chat started; empty line to quit.")
    while True:
        try:
            line = input("> ").strip()
        except (EOFError, KeyboardInterrupt):
            break
        if not line:
            break
        try:
            response, _trace = orch.step(ctx, line)
        except ConnectionError as exc:
            click.echo(f"backend error: {exc}", err=True)
            sys.exit(1)
        click.echo(response)


@main.command()
@click.option("--network", "network_path", required=True, type=click.Path(exists=True))
@click.option("--step", default=0, type=int, help="load-series step index")
def pf(network_path, step):
    """Solve one AC power flow and print the solution as JSON."""
    net = load_network(network_path)
    try:
        loads = apply_load_step(net, step)
    except IndexError as exc:
        raise click.UsageError(str(exc))
    sol = solve_ac(net, loads)
    s, violations = security_label(sol, net, SecurityLimits())
    click.echo(json.dumps({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "max_mismatch": sol.max_mismatch,
        "v_magnitudes": [round(float(v), 8) for v in sol.v_magnitudes],
        "line_loadings_percent": [round(float(v), 4) for v in sol.line_loadings],
        "secure": bool(s),
        "violations": [str(v) for v in violations],
    }, indent=1))
    if not sol.converged:
        sys.exit(1)


@main.command()
@click.option("--network", "network_path", required=True, type=click.Path(exists=True))
@click.option("--bus", required=True, type=int)
@click.option("--profile", "profile_path", required=True, type=click.Path(exists=True))
@click.option("--limits", default="0.975,1.03,60",
              help="vmin,vmax,lmax (per-unit, per-unit, percent)")
@click.option("--power-factor", default=0.95, type=float)
def connect(network_path, bus, profile_path, limits, power_factor):
    """Check an MV connection request; exits nonzero when infeasible."""
    net = load_network(network_path)
    try:
        vmin, vmax, lmax = (float(x) for x in limits.split(","))
    except ValueError:
        raise click.UsageError("limits must be vmin,vmax,lmax")
    horizon = max(net.horizon, 1)
    profile = _read_profile(profile_path, horizon)
    try:
        verdict = check_connection(
            net,
            ConnectionRequest(bus=bus, profile_mw=tuple(profile),
                              power_factor=power_factor),
            SecurityLimits(v_min=vmin, v_max=vmax, l_max=lmax),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    click.echo(json.dumps({
        "feasible": verdict.feasible,
        "infeasible_steps": list(verdict.infeasible_steps),
        "labels": list(verdict.labels),
        "message": verdict.message,
    }, indent=1))
    click.echo(verdict.message)
    if not verdict.feasible:
        sys.exit(1)


@main.command()
@click.option("--network", "network_path", required=True, type=click.Path(exists=True))
@click.option("--calendar", "calendar_path", required=True, type=click.Path(exists=True))
@click.option("--day", required=True, type=int)
@click.option("--contingencies", default=None, help="comma-separated line ids")
def scopf(network_path, calendar_path, day, contingencies):
    """Solve one daily security-constrained OPF and print dispatch/slack."""
    net = load_network(network_path)
    cal = load_calendar_csv(calendar_path, len(net.generators))
    if not (0 <= day < cal.horizon_days):
        raise click.UsageError(f"day must be in [0, {cal.horizon_days})")
    sol = solve_scopf(ScopfProblem(
        network=net, day=day, availability=cal.availability[:, day],
        contingencies=_contingencies(contingencies),
    ))
    click.echo(json.dumps({
        "status": sol.status,
        "dispatch_pu": [round(float(v), 8) for v in sol.dispatch],
        "slack_norm": sol.slack_norm,
        "feasible": sol.feasible,
        "objective": sol.objective,
    }, indent=1))
    if sol.status != "optimal":
        sys.exit(1)


@main.command(name="outage-plan")
@click.option("--network", "network_path", required=True, type=click.Path(exists=True))
@click.option("--calendar", "calendar_path", required=True, type=click.Path(exists=True))
@click.option("--asset", required=True, type=int)
@click.option("--start", required=True, type=int)
@click.option("--days", required=True, type=int)
@click.option("--scan-later", is_flag=True, default=False)
@click.option("--contingencies", default=None, help="comma-separated line ids")
def outage_plan(network_path, calendar_path, asset, start, days, scan_later, contingencies):
    """Assess a generator-outage request and print the verdict."""
    net = load_network(network_path)
    cal = load_calendar_csv(calendar_path, len(net.generators))
    try:
        result = plan_outage(
            net, cal, OutageRequest(start_day=start, duration_days=days, asset=asset),
            _contingencies(contingencies), scan_later=scan_later,
        )
    except (ValueError, KeyError) as exc:
        raise click.UsageError(str(exc))
    click.echo(json.dumps({
        "verdict": result.verdict,
        "alternative_start": result.alternative_start,
        "message": result.message,
        "day_slack_norms": {str(k): v for k, v in result.day_slack_norms.items()},
    }, indent=1))
    click.echo(result.message)


@main.command(name="feasibility-map")
@click.option("--network", "network_path", required=True, type=click.Path(exists=True))
@click.option("--calendar", "calendar_path", required=True, type=click.Path(exists=True))
@click.option("--asset", required=True, type=int)
@click.option("--days", required=True, type=int)
@click.option("--contingencies", default=None, help="comma-separated line ids")
@click.option("--out", "out_path", default=None, type=click.Path())
def feasibility_map_cmd(network_path, calendar_path, asset, days, contingencies, out_path):
    """Feasibility of every start day for an outage of the given length."""
    net = load_network(network_path)
    cal = load_calendar_csv(calendar_path, len(net.generators))
    try:
        vector = feasibility_map(net, cal, asset, days, _contingencies(contingencies))
    except (ValueError, KeyError) as exc:
        raise click.UsageError(str(exc))
    doc = {"asset": asset, "duration_days": days,
           "feasible_by_start": [bool(v) for v in vector]}
    text = json.dumps(doc, indent=1)
    if out_path:
        Path(out_path).write_text(text)
    click.echo(text)


@main.command(name="ev-study")
@click.option("--epsilon-grid", default="0:0.1:1")
@click.option("--repeats", default=10, type=int)
@click.option("--seed", default=7, type=int)
@click.option("--out", "out_path", default=None, type=click.Path())
def ev_study(epsilon_grid, repeats, seed, out_path):
    """Heterogeneity sweep of maximal EV admission; CSV output."""
    grid = _parse_grid(epsilon_grid)
    if any(not (0 <= e <= 1) for e in grid):
        raise click.UsageError("epsilon values must lie in [0, 1]")
    base = HourlyProfile(tuple(duck_curve()), "neighbourhood base")
    rows = heterogeneity_sweep(grid, repeats, seed, base)
    lines = [["epsilon", "mean_admitted"] + [f"run_{i}" for i in range(repeats)]]
    for r in rows:
        lines.append([r["epsilon"], r["mean_admitted"]] + r["counts"])
    writer = csv_mod.writer(open(out_path, "w", newline="") if out_path else sys.stdout)
    writer.writerows(lines)


@main.command()
@click.option("--usage", "usage_json", required=True,
              help="JSON file or inline JSON with appliance usage hours")
def consume(usage_json):
    """Estimate a household's hourly consumption profile."""
    path = Path(usage_json)
    text = path.read_text() if path.exists() else usage_json
    try:
        doc = json.loads(text)
        usage = ApplianceUsage(**doc)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise click.UsageError(f"bad usage spec: {exc}")
    profile = estimate_consumption(usage)
    click.echo(json.dumps({"profile_kwh": [round(v, 4) for v in profile.values]}))


@main.command(name="sweep")
@click.option("--grid", "grid_spec", required=True,
              help="condition grid, e.g. failure probabilities 0:0.1:0.5")
@click.option("--repeats", default=10, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--backend", "backend_kind", default="scripted",
              type=click.Choice(["scripted"]))
@click.option("--out", "out_path", default=None, type=click.Path())
def sweep_cmd(grid_spec, repeats, seed, backend_kind, out_path):
    """Scripted-backend robustness sweep; one CSV row per condition."""
    from .harness import calibrated_mv_runner, sweep

    grid = _parse_grid(grid_spec)
    rows = []
    for i, p in enumerate(grid):
        if not (0 <= p <= 1):
            raise click.UsageError("failure probabilities must lie in [0, 1]")
        run = calibrated_mv_runner(p, seed)
        rows.extend(sweep([{"cell": i, "failure_p": p}], repeats, run))
    cols = ["failure_p", "g_accuracy", "h_accuracy", "v_accuracy", "f_accuracy",
            "runs", "failures"]
    writer = csv_mod.writer(open(out_path, "w", newline="") if out_path else sys.stdout)
    writer.writerow(cols)
    for r in rows:
        writer.writerow([r[c] for c in cols])


@main.command(name="inject-typos")
@click.option("--rate", required=True, type=float, help="typos per 100 characters")
@click.option("--seed", default=0, type=int)
@click.argument("text", required=False)
def inject_typos_cmd(rate, seed, text):
    """Mutate TEXT (or stdin) with seeded typos."""
    from .harness import MutationSpec, inject_typos

    if rate < 0:
        raise click.UsageError("rate must be >= 0")
    if text is None:
        text = sys.stdin.read()
    click.echo(inject_typos(text, MutationSpec(rate=rate, seed=seed)), nl=False)
    click.echo()


@main.command(name="probe-privacy")
@click.option("--network", "network_path", required=True, type=click.Path(exists=True))
@click.option("--calendar", "calendar_path", required=True, type=click.Path(exists=True))
@click.option("--days", default=7, type=int, help="probe outage duration")
@click.option("--budget", default=None, type=int)
@click.option("--contingencies", default=None, help="comma-separated line ids")
@click.option("--out", "out_path", default=None, type=click.Path())
def probe_privacy(network_path, calendar_path, days, budget, contingencies, out_path):
    """Brute-force the outage planner to reconstruct feasibility timelines."""
    from .harness import privacy_probe

    net = load_network(network_path)
    cal = load_calendar_csv(calendar_path, len(net.generators))
    cont = _contingencies(contingencies)
    assets = [g.id for g in net.generators]
    n_starts = cal.horizon_days - days + 1

    def planner(asset: int, start: int, duration: int) -> bool:
        result = plan_outage(
            net, cal, OutageRequest(start_day=start, duration_days=duration,
                                    asset=asset), cont,
        )
        return result.verdict == "possible"

    report = privacy_probe(planner, assets, days, n_starts, budget=budget)
    doc = {
        "request_count": report.request_count,
        "complete": report.complete,
        "congestion_summary": report.congestion_summary,
        "timelines": {str(a): list(tl) for a, tl in report.timelines.items()},
    }
    text = json.dumps(doc, indent=1)
    if out_path:
        Path(out_path).write_text(text)
    click.echo(text)
