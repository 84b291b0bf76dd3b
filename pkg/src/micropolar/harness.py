"""Run directories, sweeps, resumption and convergence studies.

A run directory holds

* ``config.txt``       the configuration that produced it,
* ``diagnostics.csv``  one row per output time (accumulators integrate every step),
* ``bounds.jsonl``     fitted growth constants, the transport bound and the blow-up monitor,
* ``*.ccnv``           checkpoints (physical Omega, omega, theta plus scalar headers).
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import checkpoint as ck
from . import field as fd
from . import solver as sv
from .config import RunConfig, _BY_KEY, _convert
from .diagnostics import (COLUMNS, QUANTITIES, DiagnosticsRecord, blowup_indicator,
                          exponential_bound_fit, record, theta_transport_bound)
from .lp import DyadicPartition
from .synth import initial_fields

EXIT_COMPLETED = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2
EXIT_EXHAUSTED = 3

STATUS_CODES = {"completed": EXIT_COMPLETED, "error": EXIT_ERROR,
                "blow-up": EXIT_BLOWUP, "resolution-exhausted": EXIT_EXHAUSTED}

_TIME_TOL = 1e-12
_SNAP = 1e-9  # relative tolerance for landing on output times


@dataclass
class RunResult:
    status: str
    directory: Path
    t_final: float
    records: list = field(default_factory=list, repr=False)
    rows: list = field(default_factory=list, repr=False)
    bounds: list = field(default_factory=list, repr=False)
    blowup_time: float | None = None
    message: str = ""

    @property
    def exit_code(self) -> int:
        return STATUS_CODES[self.status]

    def constant(self, quantity: str = "energy_with_dissipation") -> float | None:
        for entry in self.bounds:
            if entry.get("name") == f"exp_fit:{quantity}":
                return entry.get("constant")
        return None


def initial_state(config: RunConfig) -> sv.State:
    Omega, omega, theta = initial_fields(config.family, config.n, config.amplitude, config.seed)
    return sv.clean(sv.State(0.0, Omega, omega, theta))


# --------------------------------------------------------------------------
# checkpoints


def save_state(path, state: sv.State, params: sv.Params) -> Path:
    Omega, omega, theta = state.physical()
    scalars = {"t": state.t, "chi": params.chi, "nu": params.nu, "beta": params.beta, "alpha": params.alpha}
    return ck.write_checkpoint(path, {"Omega": Omega, "omega": omega, "theta": theta}, scalars)


def load_state(path) -> tuple[sv.State, dict[str, float]]:
    data = ck.read_checkpoint(path)
    missing = {"Omega", "omega", "theta", "t"} - set(data)
    if missing:
        raise ck.CheckpointError(f"{path}: missing entries {sorted(missing)}")
    scalars = {name: ck.scalar(data, name) for name in ("t", "chi", "nu", "beta", "alpha") if name in data}
    state = sv.State.from_physical(scalars["t"], data["Omega"], data["omega"], data["theta"])
    return state, scalars


# --------------------------------------------------------------------------
# CSV


def _format_value(v: float) -> str:
    return repr(float(v))


def write_rows(path, rows, append: bool = False) -> None:
    path = Path(path)
    mode = "a" if append else "w"
    with path.open(mode, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not append:
            w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_format_value(v) for v in r.as_row()])


def read_rows(path) -> list[DiagnosticsRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected diagnostics columns")
        return [DiagnosticsRecord(*(float(v) for v in row)) for row in reader]


# --------------------------------------------------------------------------
# running


def _next_dt(state: sv.State, stepper: sv.StepperConfig, remaining: float) -> float:
    """Ladder step within CFL; the step that reaches the next stop lands on it exactly.

    A remaining distance that matches a ladder value up to roundoff uses that
    ladder value, so cached propagators are reused across output intervals.
    """
    dt = sv.choose_dt(state, stepper)
    if remaining > dt * (1 + _SNAP):
        return dt
    while dt > remaining * (1 + _SNAP):
        dt *= 0.5
    return dt if abs(dt - remaining) <= _SNAP * dt else remaining


def _bounds(records, status: str, t_final: float, blowup_time) -> list[dict]:
    out = [{"name": "status", "status": status, "t_final": t_final, "blowup_time": blowup_time}]
    if records:
        out.append(theta_transport_bound(records).to_json())
        if len(records) >= 16:
            for q in QUANTITIES:
                e = exponential_bound_fit(records, q)
                out.append({"name": e.name, "constant": e.constant, "degenerate": e.degenerate,
                            "min_margin": float(min(e.margins)) if e.margins else None})
        out.append({"name": "blowup_indicator", **blowup_indicator(records)})
    return out


def _write_bounds(path, entries) -> None:
    with Path(path).open("w") as fh:
        for e in entries:
            fh.write(json.dumps(e, sort_keys=True, allow_nan=True) + "\n")


def run(config: RunConfig, out_dir=None, *, start: sv.State | None = None,
        history: list[DiagnosticsRecord] | None = None) -> RunResult:
    """Advance the configured trajectory to ``t_end`` and write the run directory.

    ``start``/``history`` continue an earlier run (see :func:`resume`).
    """
    directory = Path(out_dir or config.out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.txt").write_text(config.to_text())
    params, stepper, dcfg = config.params, config.stepper, config.diagnostics
    quick = replace(dcfg, residuals=False)
    state = start if start is not None else initial_state(config)
    grid = state.grid
    if grid.n != config.n:
        raise ValueError(f"start state lives on n={grid.n}, config says grid.n={config.n}")
    P = DyadicPartition(grid)
    prop = sv.Propagator(grid, params)

    rows = list(history or [])
    if rows:
        rec = rows[-1]
        write_rows(directory / "diagnostics.csv", rows)
    else:
        rec = record(state, None, P, params, dcfg)
        rows.append(rec)
        write_rows(directory / "diagnostics.csv", rows)
    new_rows: list[DiagnosticsRecord] = []

    def stops(t0, every):
        k = math.floor(t0 / every + 1e-9) + 1
        while k * every < config.t_end - _TIME_TOL:
            yield k * every
            k += 1
        yield config.t_end

    ck_every = config.checkpoint_every
    next_ck = (math.floor(state.t / ck_every + 1e-9) + 1) * ck_every if ck_every > 0 else math.inf
    status, blowup_time, message = "completed", None, ""
    try:
        for t_stop in stops(state.t, config.every):
            while t_stop - state.t > _TIME_TOL:
                dt = _next_dt(state, stepper, t_stop - state.t)
                state = sv.step(state, params, dt, stepper, prop)
                if abs(t_stop - state.t) <= _SNAP * dt:
                    state = replace(state, t=t_stop)
                rec = record(state, rec, P, params, dcfg if state.t == t_stop else quick)
            new_rows.append(rec)
            if state.t >= next_ck - _TIME_TOL:
                save_state(directory / f"checkpoint_t{state.t:.6f}.ccnv", state, params)
                next_ck += ck_every
    except sv.BlowUpError as exc:
        status, blowup_time, message = "blow-up", exc.t, str(exc)
        state = exc.last_state
    except sv.CFLError as exc:
        status, blowup_time, message = "blow-up", state.t, str(exc)
    if status == "blow-up" and rec.t > rows[-1].t and (not new_rows or new_rows[-1] is not rec):
        new_rows.append(rec)
    rows.extend(new_rows)
    write_rows(directory / "diagnostics.csv", new_rows, append=True)
    save_state(directory / "final.ccnv", state, params)
    bounds = _bounds(rows, status, state.t, blowup_time)
    if status == "completed":
        monitor = next(b for b in bounds if b["name"] == "blowup_indicator")
        if monitor["resolution_exhausted"]:
            status = "resolution-exhausted"
            bounds[0]["status"] = status
    _write_bounds(directory / "bounds.jsonl", bounds)
    return RunResult(status, directory, state.t, rows, [r.as_row() for r in new_rows], bounds, blowup_time, message)


def resume(checkpoint_path, config: RunConfig | None = None, out_dir=None) -> RunResult:
    """Continue a run from a checkpoint in its run directory.

    The configuration defaults to the ``config.txt`` next to the checkpoint
    and the diagnostics history to the rows of its ``diagnostics.csv`` up to
    the checkpoint time.
    """
    checkpoint_path = Path(checkpoint_path)
    run_dir = checkpoint_path.parent
    if config is None:
        from .config import load_config
        config = load_config(run_dir / "config.txt")
    state, scalars = load_state(checkpoint_path)
    for name in ("chi", "nu", "beta", "alpha"):
        if name in scalars and scalars[name] != getattr(config, name):
            raise ValueError(f"checkpoint {name}={scalars[name]} disagrees with config {name}={getattr(config, name)}")
    history = []
    csv_path = run_dir / "diagnostics.csv"
    if csv_path.exists():
        history = [r for r in read_rows(csv_path) if r.t <= state.t + _TIME_TOL]
    if history:
        state = replace(state, t=history[-1].t) if abs(history[-1].t - state.t) <= 1e-9 else state
    if state.t >= config.t_end - _TIME_TOL:
        raise ValueError(f"checkpoint time {state.t} is already at or past t_end={config.t_end}")
    return run(config, out_dir or run_dir, start=state, history=history)


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepPlan:
    base: RunConfig
    axis: str
    values: tuple
    workers: int = 1

    def __post_init__(self):
        if self.axis not in _BY_KEY:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        _, typ = _BY_KEY[self.axis]
        converted = tuple(_convert(self.axis, typ, str(v)) for v in self.values)
        for v in converted:
            self.config_for(v)
        object.__setattr__(self, "values", tuple(sorted(set(converted))))

    def config_for(self, value) -> RunConfig:
        return self.base.with_overrides({self.axis: str(value)})


SUMMARY_COLUMNS = ("value", "status", "exit_code", "t_final", "blowup_time",
                   "c_energy_with_dissipation", "tail_slope_theta", "tail_slope_Omega", "message")


def _sweep_member(args):
    config, directory = args
    try:
        res = run(config, directory)
        monitor = next((b for b in res.bounds if b["name"] == "blowup_indicator"), {})
        return {"status": res.status, "exit_code": res.exit_code, "t_final": res.t_final,
                "blowup_time": res.blowup_time, "c_energy_with_dissipation": res.constant(),
                "tail_slope_theta": monitor.get("tail_slope_theta"),
                "tail_slope_Omega": monitor.get("tail_slope_Omega"), "message": res.message}
    except Exception as exc:  # a failing member must not abort its siblings
        return {"status": "error", "exit_code": EXIT_ERROR, "t_final": None, "blowup_time": None,
                "c_energy_with_dissipation": None, "tail_slope_theta": None,
                "tail_slope_Omega": None, "message": f"{type(exc).__name__}: {exc}"}


def sweep(plan: SweepPlan, out_dir=None) -> list[dict]:
    """One run per axis value; summary rows ordered by value."""
    root = Path(out_dir or plan.base.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(plan.config_for(v), root / f"{plan.axis}={v}") for v in plan.values]
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(plan.workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_member, jobs))
    else:
        results = [_sweep_member(j) for j in jobs]
    summary = [{"value": v, **r} for v, r in zip(plan.values, results)]
    with (root / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summary:
            w.writerow(["" if row[c] is None else row[c] for c in SUMMARY_COLUMNS])
    return summary


# --------------------------------------------------------------------------
# convergence


def fixed_step_run(state: sv.State, params: sv.Params, t_end: float, dt: float) -> sv.State:
    """Final state of a fixed-step run (CFL limits disabled)."""
    stepper = sv.StepperConfig(cfl=1.0, dt_max=dt)
    last = state
    for last in sv.integrate(state, params, t_end, replace(stepper), dt=dt):
        pass
    return last


def _distance(a: sv.State, b: sv.State) -> float:
    return math.sqrt(sum(fd.l2_norm_spectral(x - y) ** 2 for x, y in zip(a.stack(), b.stack())))


def temporal_order(state: sv.State, params: sv.Params, t_end: float, dt: float) -> dict:
    """Errors at dt, dt/2, dt/4 against a dt/8 reference, with two order estimates."""
    dts = [dt, dt / 2, dt / 4]
    finals = [fixed_step_run(state, params, t_end, h) for h in dts]
    ref = fixed_step_run(state, params, t_end, dt / 8)
    errors = [_distance(f, ref) for f in finals]
    ratio_orders = [math.log2(errors[i] / errors[i + 1]) if errors[i + 1] > 0 else math.inf
                    for i in range(len(errors) - 1)]
    d1, d2 = _distance(finals[0], finals[1]), _distance(finals[1], finals[2])
    richardson = math.log2(d1 / d2) if d2 > 0 else math.inf
    return {"dts": dts, "errors": errors, "error_ratios": [errors[i] / errors[i + 1] for i in range(2)],
            "ratio_orders": ratio_orders, "richardson_order": richardson}


def linear_diffusion_case(n: int, t_end: float = 0.5, dt: float = 0.01) -> float:
    """Max relative error of a decoupled run against the analytic exponentials."""
    g = fd.get_grid(n)
    params = sv.Params(beta=1.0, coupling=False)
    x1, x2 = g.coords
    omega0 = np.cos(2 * x1 + x2) + 0.5 * np.sin(3 * x2)
    theta0 = np.sin(x1 - 2 * x2) + 0.25 * np.cos(4 * x1)
    state = sv.State.from_physical(0.0, np.zeros_like(x1), omega0, theta0)
    final = fixed_step_run(state, params, t_end, dt)
    rate_omega = params.nu * g.ksq + 4 * params.chi
    rate_theta = g.kabs ** params.beta
    exact_omega = np.exp(-rate_omega * t_end) * state.omega
    exact_theta = np.exp(-rate_theta * t_end) * state.theta
    err = max(fd.l2_norm_spectral(final.omega - exact_omega) / fd.l2_norm_spectral(exact_omega),
              fd.l2_norm_spectral(final.theta - exact_theta) / fd.l2_norm_spectral(exact_theta))
    # also compare in physical space, where the grid representation enters
    t = t_end
    phys_omega = (math.exp(-(5 * params.nu + 4 * params.chi) * t) * np.cos(2 * x1 + x2)
                  + 0.5 * math.exp(-(9 * params.nu + 4 * params.chi) * t) * np.sin(3 * x2))
    phys_theta = (math.exp(-math.sqrt(5) * t) * np.sin(x1 - 2 * x2) + 0.25 * math.exp(-4 * t) * np.cos(4 * x1))
    om, th = (fd.transform_inverse(F) for F in (final.omega, final.theta))
    err_phys = max(np.max(np.abs(om - phys_omega)) / np.max(np.abs(phys_omega)),
                   np.max(np.abs(th - phys_theta)) / np.max(np.abs(phys_theta)))
    return float(max(err, err_phys))


def convergence(config: RunConfig, t_end: float | None = None) -> dict:
    """Temporal order on the configured coupled case plus spatial checks at n = 32, 64."""
    t_end = t_end if t_end is not None else min(config.t_end, 0.5)
    state = initial_state(config)
    dt = config.dt_max
    nsteps = round(t_end / dt)
    t_end = nsteps * dt
    report = {"case": "coupled", "n": config.n, "t_end": t_end, **temporal_order(state, config.params, t_end, dt)}
    report["linear_temporal_error"] = linear_diffusion_case(config.n, t_end, dt)
    report["spatial_errors"] = {str(n): linear_diffusion_case(n, t_end, dt) for n in (32, 64)}
    return report


def worker_count(requested: int | None) -> int:
    if requested is None or requested < 1:
        return 1
    return min(requested, os.cpu_count() or 1)
