"""Experiment plans and the runners behind the command line.

A plan is a JSON object with a ``kind`` and the parameters of that kind.
Missing keys are filled from :data:`DEFAULT_PLANS` before anything runs and
the resolved plan is written to the manifest, so the manifest alone is
enough to reproduce a run.  Each plan cell (one map, controller and robot
count, say) draws its seed from the master seed and the cell's key, so cells
can run in any order or in parallel without changing results.
"""
from __future__ import annotations

import copy
import csv
import gzip
import hashlib
import io
import json
import math
import platform
import time
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import joblib
import numpy as np
import scipy

from . import __version__
from .ldp import CostParams, DemandSpec, PslpHyper, Scenario, SearchBox, brute_force_ldp, pslp_solve
from .ldp.problem import facility_cost, operations_cost
from .ldp.sweep import SweepRow, demand_sweep
from .model import (
    AttenuationCoeffs,
    calibrate_attenuation,
    measured_attenuation,
    n_vp_total,
    throughput_estimate,
    throughput_upper_bound,
    workforce_factor,
)
from .network import build_layout
from .rcs.controller import RcsConfig
from .sim import SimConfig, replicate

PLAN_KINDS = ("simulate", "benchmark", "estimate", "calibrate", "optimize", "sweep", "validate")

_DESK_TIMING = {"warmup": 120.0, "measure": 600.0}

DEFAULT_PLANS: dict[str, dict] = {
    "simulate": {
        "map": [12, 12], "n_stations": None, "controller": "rcs", "n_robots": 80, "reps": 3,
        **_DESK_TIMING, "rcs": {}, "castar": {}, "trace": False,
    },
    "benchmark": {
        "maps": [[12, 12]], "n_robots": {"12x12": [40, 80, 120]}, "controllers": ["rcs", "castar"],
        "reps": 3, **_DESK_TIMING, "rcs": {}, "castar": {},
    },
    "estimate": {
        "maps": [[12, 12], [16, 16], [20, 20]], "n_w_step": 1, "n_r": [None],
        "D": 1.0, "tau_e": 0.5, "coeffs": {"a": 1.4, "b": 0.012},
    },
    "calibrate": {
        "maps": [[8, 8], [10, 10], [12, 12], [14, 14], [16, 16]], "reps": 3, **_DESK_TIMING,
        "extra_robots_per_station": 5, "rcs": {},
    },
    "optimize": {
        "scenario": json.loads(Scenario(DemandSpec(3000.0, 2400.0, 100)).to_text()),
        "method": "pslp",
    },
    "sweep": {
        "T_H": [3000 * k for k in range(1, 11)], "off_peak_ratio": 0.8, "N_o": [100, 400],
        "M_s": [10.0, 20.0, 30.0], "M_w": [5000.0, 8500.0, 12000.0],
        "base_costs": {}, "method": "pslp",
    },
    "validate": {
        "sizes": [12], "n_w_start": 2, "n_w_step": 2, "reps": 3, **_DESK_TIMING,
        "extra_robots_per_station": 5, "rcs": {},
    },
}

# what --paper-scale changes; everything else stays as planned
FULL_SCALE: dict[str, dict] = {
    "simulate": {"warmup": 600.0, "measure": 3000.0, "reps": 10},
    "benchmark": {
        "warmup": 600.0, "measure": 3000.0, "reps": 10, "maps": [[12, 12], [20, 20]],
        "n_robots": {"12x12": [40, 80, 120, 160, 200], "20x20": [50, 100, 200, 300, 400]},
    },
    "calibrate": {"warmup": 3600.0, "measure": 10800.0, "reps": 20},
    "validate": {"warmup": 3600.0, "measure": 10800.0, "reps": 20, "sizes": [12, 14, 16, 18, 20]},
}

# metrics that are wall-clock measurements and so differ between runs
TIMING_COLUMNS = ("runtime_ms",)


class PlanError(ValueError):
    pass


# ---------------------------------------------------------------------------
# plans
# ---------------------------------------------------------------------------

@dataclass
class ExperimentPlan:
    kind: str
    params: dict
    seed: int = 0
    workers: int = 1
    paper_scale: bool = False

    def resolved(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "paper_scale": self.paper_scale, **self.params}

    @property
    def config_hash(self) -> str:
        # workers only change scheduling, never results
        text = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_plan(kind: str | None = None, path: str | Path | None = None, seed: int | None = None,
              workers: int = 1, paper_scale: bool = False) -> ExperimentPlan:
    doc: dict = {}
    base_dir = Path(".")
    if path is not None:
        path = Path(path)
        doc = json.loads(path.read_text())
        base_dir = path.parent
        if not isinstance(doc, dict):
            raise PlanError("plan file must hold a JSON object")
    kind = kind or doc.get("kind")
    if kind not in PLAN_KINDS:
        raise PlanError(f"unknown plan kind {kind!r}")
    if doc.get("kind", kind) != kind:
        raise PlanError(f"plan file is a {doc['kind']!r} plan, not {kind!r}")
    params = copy.deepcopy(DEFAULT_PLANS[kind])
    if paper_scale:
        params.update(copy.deepcopy(FULL_SCALE.get(kind, {})))
    user = {k: v for k, v in doc.items() if k not in ("kind", "seed", "paper_scale")}
    unknown = set(user) - set(params) - {"scenario_file"}
    if unknown:
        raise PlanError(f"unknown {kind} plan keys: {sorted(unknown)}")
    params.update(user)
    if paper_scale:
        # the scale switch wins over timing written in the file
        params.update(copy.deepcopy(FULL_SCALE.get(kind, {})))
    if "scenario_file" in params:
        # inline the scenario so the config hash covers its content
        params["scenario"] = json.loads((base_dir / params.pop("scenario_file")).read_text())
    master = int(doc.get("seed", 0)) if seed is None else int(seed)
    if not 0 <= master < 2 ** 64:
        raise PlanError("seed must be an unsigned 64-bit integer")
    return ExperimentPlan(kind, params, master, max(1, int(workers)), paper_scale)


def cell_seed(master: int, key: str) -> int:
    """Seed of one plan cell, independent of which other cells the plan holds."""
    seq = np.random.SeedSequence(master, spawn_key=(zlib.crc32(key.encode()),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _map_key(m) -> str:
    return f"{int(m[0])}x{int(m[1])}"


def _robots_for(plan_robots, m) -> list[int]:
    if isinstance(plan_robots, dict):
        if _map_key(m) not in plan_robots:
            raise PlanError(f"no robot counts given for map {_map_key(m)}")
        return [int(x) for x in plan_robots[_map_key(m)]]
    return [int(x) for x in plan_robots]


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

@dataclass
class Table:
    name: str
    rows: list[dict]
    deterministic: bool = True


@dataclass
class RunResult:
    tables: list[Table]
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    files: dict[str, bytes] = field(default_factory=dict)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(table: Table, plan: ExperimentPlan) -> str:
    buf = io.StringIO()
    buf.write(f"# robosort {plan.kind} config_hash={plan.config_hash} seed={plan.seed}\n")
    if not table.rows:
        return buf.getvalue()
    header = list(table.rows[0])
    for r in table.rows[1:]:
        header += [k for k in r if k not in header]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in table.rows:
        w.writerow([_fmt(r.get(k)) for k in header])
    return buf.getvalue()


def write_outputs(result: RunResult, plan: ExperimentPlan, out_dir: str | Path,
                  elapsed: float | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digests = {}
    for t in result.tables:
        data = csv_text(t, plan).encode()
        (out / f"{t.name}.csv").write_bytes(data)
        digests[f"{t.name}.csv"] = {"sha256": hashlib.sha256(data).hexdigest(), "deterministic": t.deterministic}
    for name, data in result.files.items():
        (out / name).write_bytes(data)
        digests[name] = {"sha256": hashlib.sha256(data).hexdigest(), "deterministic": True}
    manifest = {
        "kind": plan.kind,
        "config_hash": plan.config_hash,
        "seed": plan.seed,
        "plan": plan.resolved(),
        "workers": plan.workers,
        "outputs": digests,
        "notes": result.notes,
        "extra": result.extra,
        "versions": {"robosort": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "joblib": joblib.__version__},
    }
    if elapsed is not None:
        manifest["elapsed_s"] = round(elapsed, 3)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n")
    return out


# ---------------------------------------------------------------------------
# simulation helpers
# ---------------------------------------------------------------------------

def _sim_config(p: dict, n_h: int, n_v: int, controller: str, n_robots: int, seed: int,
                n_stations: int | None = None, trace: bool = False) -> SimConfig:
    layout = build_layout(n_h, n_v, n_stations=n_stations)
    return SimConfig(layout, controller=controller, n_robots=n_robots, warmup=float(p["warmup"]),
                     measure=float(p["measure"]), seed=seed, rcs=RcsConfig(**p.get("rcs", {})),
                     castar=dict(p.get("castar", {})), record_trace=trace, check_invariants=trace)


def _parallel(fn, jobs: list[tuple], workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        return joblib.Parallel(n_jobs=min(workers, len(jobs)))(joblib.delayed(fn)(*j) for j in jobs)
    return [fn(*j) for j in jobs]


def _replicate_cell(cfg: SimConfig, reps: int):
    """Mean/stderr of one cell, or the error message if the cell failed."""
    try:
        return replicate(cfg, reps)
    except Exception as exc:  # rows of failed cells are marked, the plan goes on
        return f"{type(exc).__name__}: {exc}"


def _metric_cols(rep) -> dict:
    out = {}
    for k, v in rep.mean.items():
        out[k] = v
        out[k + "_se"] = rep.stderr[k]
    return out


def provisioned_robots(n_h: int, n_v: int, n_w: int, extra_per_station: int = 5) -> int:
    """Robots for a validation run: VPs eligible under the staffing plus a few per station."""
    alpha = n_w / (n_h + n_v)
    return int(math.ceil(workforce_factor(alpha) * n_vp_total(n_h, n_v) - 1e-9)) + extra_per_station * n_w


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def run_simulate(plan: ExperimentPlan) -> RunResult:
    p = plan.params
    n_h, n_v = p["map"]
    seed = cell_seed(plan.seed, "simulate")
    cfg = _sim_config(p, n_h, n_v, p["controller"], int(p["n_robots"]), seed, p.get("n_stations"),
                      bool(p["trace"]))
    rep = replicate(cfg, int(p["reps"]), workers=plan.workers)
    runs, timing = [], []
    for i, m in enumerate(rep.runs):
        row = {"rep": i, "seed": m.info["seed"]}
        row.update({k: v for k, v in m.as_row().items() if k not in TIMING_COLUMNS})
        if m.conflicts:
            row.update({f"conflicts_{k}": v for k, v in m.conflicts.items()})
        runs.append(row)
        timing.append({"rep": i, "runtime_ms": m.decision_runtime})
    summary = [{"config_hash": plan.config_hash, "metric": k, "mean": rep.mean[k], "stderr": rep.stderr[k]}
               for k in rep.mean if k not in TIMING_COLUMNS]
    files = {}
    if p["trace"]:
        files["trace.csv.gz"] = _trace_bytes(rep.runs, cfg.layout)
    return RunResult([Table("summary", summary), Table("runs", runs), Table("runtime", timing, False)],
                     files=files)


def _trace_bytes(runs, layout) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rep", "trip", "robot", "phase", "row", "col"])
    for i, m in enumerate(runs):
        for j, trip in enumerate(m.trips):
            if trip.moves is None:
                continue
            for t, c in trip.moves.tolist():
                r, cc = layout.cell_of_id(c)
                w.writerow([i, j, trip.robot, t, r, cc])
    raw = io.BytesIO()
    # fixed mtime keeps the archive bytes reproducible
    with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
        gz.write(buf.getvalue().encode())
    return raw.getvalue()


def run_benchmark(plan: ExperimentPlan) -> RunResult:
    p = plan.params
    cells = []
    for m in p["maps"]:
        for nr in _robots_for(p["n_robots"], m):
            for ctl in p["controllers"]:
                key = f"benchmark/{_map_key(m)}/{ctl}/{nr}"
                cells.append((m, nr, ctl, _sim_config(p, int(m[0]), int(m[1]), ctl, nr, cell_seed(plan.seed, key))))
    results = _parallel(_replicate_cell, [(c[-1], int(p["reps"])) for c in cells], plan.workers)
    rows, timing = [], []
    for (m, nr, ctl, _), rep in zip(cells, results):
        base = {"map": _map_key(m), "n_r": nr, "controller": ctl}
        if isinstance(rep, str):
            rows.append({**base, "status": "failed: " + rep})
            timing.append({**base, "status": "failed"})
            continue
        cols = _metric_cols(rep)
        rows.append({**base, "status": "ok", **{k: v for k, v in cols.items()
                                                if not k.startswith(TIMING_COLUMNS)}})
        timing.append({**base, "status": "ok", "runtime_ms": cols["runtime_ms"],
                       "runtime_ms_se": cols["runtime_ms_se"]})
    return RunResult([Table("benchmark", rows), Table("runtime", timing, False)])


def run_estimate(plan: ExperimentPlan) -> RunResult:
    p = plan.params
    coeffs = AttenuationCoeffs(**p["coeffs"])
    rows = []
    for m in p["maps"]:
        n_h, n_v = int(m[0]), int(m[1])
        for n_w in range(1, n_h + n_v + 1, int(p["n_w_step"])):
            upper = throughput_upper_bound(n_h, n_v, n_w, p["D"], p["tau_e"], coeffs)
            for n_r in p["n_r"]:
                est = throughput_estimate(n_h, n_v, n_w, math.inf if n_r is None else n_r, p["D"],
                                          p["tau_e"], coeffs)
                rows.append({"n_h": n_h, "n_v": n_v, "n_w": n_w, "n_r": "inf" if n_r is None else n_r,
                             "kappa": est.kappa, "beta": est.beta, "l_bar": est.avg_travel_distance,
                             "T_O": est.throughput, "T_M": upper})
    return RunResult([Table("estimate", rows)])


def run_calibrate(plan: ExperimentPlan) -> RunResult:
    p = plan.params
    cells = []
    for m in p["maps"]:
        n_h, n_v = int(m[0]), int(m[1])
        n_w = n_h + n_v
        nr = provisioned_robots(n_h, n_v, n_w, int(p["extra_robots_per_station"]))
        cfg = _sim_config(p, n_h, n_v, "rcs", nr, cell_seed(plan.seed, f"calibrate/{_map_key(m)}"))
        cells.append((n_h, n_v, nr, cfg))
    results = _parallel(_replicate_cell, [(c[-1], int(p["reps"])) for c in cells], plan.workers)
    rows, xs, ys = [], [], []
    for (n_h, n_v, nr, _), rep in zip(cells, results):
        if isinstance(rep, str):
            rows.append({"n_h": n_h, "n_v": n_v, "n_r": nr, "status": "failed: " + rep})
            continue
        for i, run in enumerate(rep.runs):
            # Little's law: robots in the aisles = completion rate x time in the aisles
            in_net = run.throughput / 3600.0 * run.avg_network_time
            beta = measured_attenuation(in_net, n_h, n_v, 1.0)
            rows.append({"n_h": n_h, "n_v": n_v, "n_r": nr, "rep": i, "status": "ok",
                         "throughput": run.throughput, "network_time": run.avg_network_time,
                         "in_network": in_net, "beta": beta})
            xs.append(n_h + n_v)
            ys.append(beta)
    notes, fit_rows = [], []
    try:
        cal = calibrate_attenuation(xs, ys)
        fit_rows.append({"a": cal.coeffs.a, "b": cal.coeffs.b, "r2": cal.r2, "n_obs": len(xs)})
    except ValueError as exc:
        notes.append(f"no fit: {exc}")
    return RunResult([Table("calibrate", rows), Table("coefficients", fit_rows)], notes)


def _design_row(T_H, T_L, N_o, design, costs: CostParams, D: float) -> dict:
    cf = facility_cost(design, costs, D)
    co = operations_cost(design, costs)
    return SweepRow(T_H, T_L, N_o, costs.M_s, costs.M_w, design, cf, co, cf + co, True).as_row(costs)


def run_optimize(plan: ExperimentPlan) -> RunResult:
    p = plan.params
    sc = Scenario.from_text(json.dumps(p["scenario"]))
    dem = sc.demand
    if p["method"] == "pslp":
        res = pslp_solve(dem, sc.costs, sc.system, hyper=PslpHyper(**sc.hyper))
        row = _design_row(dem.T_H, dem.T_L, dem.N_o, res.design, sc.costs, sc.system.D)
        row.update({"method": "pslp", "feasible": int(res.feasible), "iterations": res.iterations,
                    "pslp_cost": res.pslp_cost, "message": res.message})
    elif p["method"] == "exhaustive":
        design, _ = brute_force_ldp(dem, sc.costs, sc.system, SearchBox(40, 40, 80))
        row = _design_row(dem.T_H, dem.T_L, dem.N_o, design, sc.costs, sc.system.D)
        row.update({"method": "exhaustive", "feasible": 1})
    else:
        raise PlanError(f"unknown method {p['method']!r}")
    return RunResult([Table("design", [row])])


def _sweep_cell(study: str, N_o: int, costs: CostParams, T_values, ratio: float, method: str):
    return study, N_o, costs, demand_sweep(T_values, costs, N_o, ratio, method=method)


def run_sweep(plan: ExperimentPlan) -> RunResult:
    p = plan.params
    base = CostParams(**p["base_costs"])
    jobs = []
    for N_o in p["N_o"]:
        for M_s in p["M_s"]:
            jobs.append(("M_s", int(N_o), replace(base, M_s=float(M_s))))
        for M_w in p["M_w"]:
            jobs.append(("M_w", int(N_o), replace(base, M_w=float(M_w))))
    results = _parallel(_sweep_cell, [(*j, p["T_H"], float(p["off_peak_ratio"]), p["method"]) for j in jobs],
                        plan.workers)
    rows = []
    for study, N_o, costs, sweep in results:
        for r in sweep:
            rows.append({"study": study, **r.as_row(costs)})
    return RunResult([Table("sweep", rows)])


def run_validate(plan: ExperimentPlan) -> RunResult:
    p = plan.params
    rows: list[dict] = []
    notes: list[str] = []
    cells = []
    for n in p["sizes"]:
        n = int(n)
        for n_w in range(int(p["n_w_start"]), 2 * n + 1, int(p["n_w_step"])):
            if n_w <= 0:
                notes.append(f"{n}x{n}: n_w={n_w} skipped, no staffed station")
                continue
            nr = provisioned_robots(n, n, n_w, int(p["extra_robots_per_station"]))
            cfg = _sim_config(p, n, n, "rcs", nr, cell_seed(plan.seed, f"validate/{n}/{n_w}"), n_stations=n_w)
            cells.append((n, n_w, nr, cfg))
    results = _parallel(_replicate_cell, [(c[-1], int(p["reps"])) for c in cells], plan.workers)
    for (n, n_w, nr, cfg), rep in zip(cells, results):
        base = {"n_h": n, "n_v": n, "n_w": n_w, "n_r": nr}
        if isinstance(rep, str):
            rows.append({**base, "status": "failed: " + rep})
            continue
        D = cfg.layout.cell_len_D
        est = throughput_estimate(n, n, n_w, nr, D, cfg.params.tau_e)
        sim_l = rep.mean["distance_cells"] * D
        sim_t = rep.mean["throughput"]
        rows.append({**base, "status": "ok",
                     "sim_distance": sim_l, "formula_distance": est.avg_travel_distance,
                     "distance_error": est.avg_travel_distance / sim_l - 1.0,
                     "sim_throughput": sim_t, "formula_throughput": est.throughput,
                     "throughput_error": est.throughput / sim_t - 1.0})
    return RunResult([Table("validate", rows)], notes)


RUNNERS = {
    "simulate": run_simulate,
    "benchmark": run_benchmark,
    "estimate": run_estimate,
    "calibrate": run_calibrate,
    "optimize": run_optimize,
    "sweep": run_sweep,
    "validate": run_validate,
}


def run_plan(plan: ExperimentPlan, out_dir: str | Path | None = None) -> RunResult:
    t0 = time.perf_counter()
    result = RUNNERS[plan.kind](plan)
    if out_dir is not None:
        write_outputs(result, plan, out_dir, time.perf_counter() - t0)
    return result
