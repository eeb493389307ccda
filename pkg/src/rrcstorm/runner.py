"""Sweeps over (pch, attacker fraction, tau) for both engines, CSV output,
engine comparison and calibration of the analytic model."""
from __future__ import annotations

import csv
import math
import multiprocessing as mp
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from scipy import optimize

from .analytic import solve_congestion
from .metrics import MetricsFrame, aggregate_runs
from .scenario import Point, Scenario
from .sim import simulate

KEY_COLS = ["tau_mean_s", "attacker_fraction", "pch"]
ANALYTIC_COLS = KEY_COLS + ["w_s", "gamma_r_normal", "gamma_r_attack", "gamma_c_normal",
                            "gamma_c_attack", "big_gamma_r", "rho", "converged",
                            "big_gamma_c", "nu", "iterations", "m_normal", "m_attack",
                            "dch_fraction_normal"]
SIM_COLS = KEY_COLS + ["seed"] + MetricsFrame.field_names()
SIM_HEADER = ("# ran/cn message counts: every message counted once, at the RNC; "
              "rows with seed=mean|stderr aggregate the per-seed rows")


class EngineError(RuntimeError):
    def __init__(self, point, cause):
        super().__init__(f"engine failed at tau_mean_s={point.tau_mean_s}, "
                         f"attacker_fraction={point.attacker_fraction}, pch={point.pch}: {cause}")
        self.point = point


class GridMismatch(ValueError):
    pass


def n_attackers(n_ues: int, fraction: float) -> int:
    return int(math.floor(fraction * n_ues + 1e-9))


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# -- analytic engine ----------------------------------------------------------

def analytic_point(scn: Scenario, point: Point, normal=None, delays=None):
    a = scn["analytic"]
    normal = normal if normal is not None else scn.normal_params()
    delays = delays if delays is not None else scn.delay_profile()
    m_a = n_attackers(scn.n_ues, point.attacker_fraction)
    attack = normal.with_attack(scn["attack"]["kind"], point.tau_mean_s, float(a["tau_floor_s"]))
    try:
        return solve_congestion(normal, attack, scn.n_ues - m_a, m_a, scn.timers(point.pch),
                                delays, point.pch, int(scn["rnc"]["k_servers"]),
                                float(a["damping"]), float(a["tolerance"]),
                                int(a["max_iterations"]))
    except Exception as exc:      # noqa: BLE001 - re-raised with the point attached
        raise EngineError(point, exc) from exc


def _dch_fraction(pi) -> float:
    return pi["D0"] + pi["DL"] + pi["DH"]


def analytic_row(point: Point, sol) -> dict:
    return {"tau_mean_s": point.tau_mean_s, "attacker_fraction": point.attacker_fraction,
            "pch": point.pch, "w_s": sol.w, "gamma_r_normal": sol.gamma_r_normal,
            "gamma_r_attack": sol.gamma_r_attack if sol.m_attack else 0.0,
            "gamma_c_normal": sol.gamma_c_normal,
            "gamma_c_attack": sol.gamma_c_attack if sol.m_attack else 0.0,
            "big_gamma_r": sol.big_gamma_r, "rho": sol.rho, "converged": sol.converged,
            "big_gamma_c": sol.big_gamma_c, "nu": sol.nu, "iterations": sol.iterations,
            "m_normal": int(sol.m_normal), "m_attack": int(sol.m_attack),
            "dch_fraction_normal": _dch_fraction(sol.pi_normal)}


def run_analytic(scn: Scenario) -> list[dict]:
    normal, delays = scn.normal_params(), scn.delay_profile()
    return [analytic_row(p, analytic_point(scn, p, normal, delays)) for p in scn.points()]


# -- simulation engine --------------------------------------------------------

def _sim_task(args):
    data, key, seed = args
    scn = Scenario(data)
    point = Point(*key)
    try:
        res = simulate(scn.sim_point(point, seed))
    except Exception as exc:      # noqa: BLE001
        raise EngineError(point, exc) from exc
    return key, seed, res.frame


def simulate_grid(scn: Scenario, points=None, jobs: int = 1) -> dict:
    """Frames keyed by ``(point.key, seed)``.  Zero-fraction points do not
    depend on tau, so they are simulated once per (pch, seed)."""
    points = scn.points() if points is None else points
    canon = {}
    for p in points:
        c = Point(0.0, 0.0, p.pch) if p.attacker_fraction == 0 else p
        canon[p.key] = c.key
    tasks = [(scn.data, k, s) for k in dict.fromkeys(canon.values()) for s in scn.seeds]
    if jobs > 1 and len(tasks) > 1:
        ctx = mp.get_context("fork") if hasattr(mp, "get_context") else mp
        with ctx.Pool(min(jobs, len(tasks))) as pool:
            done = pool.map(_sim_task, tasks, chunksize=1)
    else:
        done = [_sim_task(t) for t in tasks]
    frames = {(k, s): f for k, s, f in done}
    return {(pk, s): frames[(ck, s)] for pk, ck in canon.items() for s in scn.seeds}


def simulation_rows(scn: Scenario, frames: dict) -> list[dict]:
    rows = []
    for p in scn.points():
        per_seed = [frames[(p.key, s)] for s in scn.seeds]
        key = {"tau_mean_s": p.tau_mean_s, "attacker_fraction": p.attacker_fraction, "pch": p.pch}
        for s, fr in zip(scn.seeds, per_seed):
            rows.append({**key, "seed": s, **fr.as_dict()})
        mean, se = aggregate_runs(per_seed)
        rows.append({**key, "seed": "mean", **mean.as_dict()})
        rows.append({**key, "seed": "stderr", **se.as_dict()})
    return rows


def run_simulation(scn: Scenario, jobs: int = 1) -> list[dict]:
    return simulation_rows(scn, simulate_grid(scn, jobs=jobs))


# -- files --------------------------------------------------------------------

def write_csv(path, rows, cols, header: str | None = None):
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([fmt(r[c]) for c in cols])


def _parse(v: str):
    if v in ("true", "false"):
        return v == "true"
    try:
        return float(v)
    except ValueError:
        return v


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [{k: _parse(v) for k, v in r.items()} for r in csv.DictReader(lines)]


def _inv(tau):
    return math.inf if tau == 0 else 1.0 / tau


PLOTS = {
    # file stem -> (simulation column, analytic column or None)
    "fig6_ran_load": ("ran_msgs_per_s", "big_gamma_r"),
    "fig7_cn_load": ("cn_msgs_per_s", "big_gamma_c"),
    "fig8a_response_time": ("app_response_time_mean_s", None),
    "fig8b_rnc_wait": ("rnc_queue_wait_mean_s", "w_s"),
}


def write_plot_data(out: Path, sim_rows=None, an_rows=None):
    """Long-format tables, one per figure: x is 1/tau (inf for tau = 0) and
    series are keyed by (engine, pch, attacker_fraction)."""
    cols = ["engine", "pch", "attacker_fraction", "tau_mean_s", "inv_tau_mean_per_s",
            "value", "stderr"]
    written = []
    mean = [r for r in sim_rows or () if r["seed"] == "mean"]
    se = {(r["tau_mean_s"], r["attacker_fraction"], r["pch"]): r
          for r in sim_rows or () if r["seed"] == "stderr"}
    for stem, (scol, acol) in PLOTS.items():
        rows = []
        for r in mean:
            k = (r["tau_mean_s"], r["attacker_fraction"], r["pch"])
            rows.append({"engine": "simulation", "pch": r["pch"], "attacker_fraction": k[1],
                         "tau_mean_s": k[0], "inv_tau_mean_per_s": _inv(k[0]),
                         "value": r[scol], "stderr": se[k][scol]})
        if acol:
            for r in an_rows or ():
                rows.append({"engine": "analytic", "pch": r["pch"],
                             "attacker_fraction": r["attacker_fraction"],
                             "tau_mean_s": r["tau_mean_s"],
                             "inv_tau_mean_per_s": _inv(r["tau_mean_s"]),
                             "value": r[acol], "stderr": 0.0})
        if rows:
            write_csv(out / f"{stem}.csv", rows, cols)
            written.append(f"{stem}.csv")
    if mean:
        rows = []
        for r in mean:
            for cls in ("normal", "attack"):
                for b in ("fach_busy", "fach_idle", "dch_busy", "dch_idle"):
                    rows.append({"pch": r["pch"], "attacker_fraction": r["attacker_fraction"],
                                 "tau_mean_s": r["tau_mean_s"],
                                 "inv_tau_mean_per_s": _inv(r["tau_mean_s"]), "ue_class": cls,
                                 "bucket": b, "fraction": r[f"{b}_{cls}"]})
        write_csv(out / "fig9_channel_utilization.csv", rows,
                  ["pch", "attacker_fraction", "tau_mean_s", "inv_tau_mean_per_s", "ue_class",
                   "bucket", "fraction"])
        written.append("fig9_channel_utilization.csv")
    return written


def run(scn: Scenario, out, jobs: int = 1, engine: str | None = None) -> dict:
    """Run the requested engines and write everything under ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    engine = engine or scn.engine
    files = []
    sim_rows = an_rows = None
    if engine in ("analytic", "both"):
        an_rows = run_analytic(scn)
        write_csv(out / "analytic.csv", an_rows, ANALYTIC_COLS)
        files.append("analytic.csv")
    if engine in ("simulation", "both"):
        sim_rows = run_simulation(scn, jobs)
        write_csv(out / "simulation.csv", sim_rows, SIM_COLS, SIM_HEADER)
        files.append("simulation.csv")
    files += write_plot_data(out, sim_rows, an_rows)
    if sim_rows and an_rows:
        rep = compare_rows(sim_rows, an_rows)
        write_csv(out / "comparison.csv", rep.rows, rep.cols)
        files.append("comparison.csv")
    (out / "manifest.yaml").write_text(scn.dump({"engine_run": engine, "files": files}))
    return {"files": files, "simulation": sim_rows, "analytic": an_rows}


# -- comparison ---------------------------------------------------------------

@dataclass
class Comparison:
    rows: list[dict]
    mean_dev_r: float
    max_dev_r: float
    mean_dev_c: float
    max_dev_c: float
    cols = KEY_COLS + ["gamma_r_a", "gamma_r_b", "dev_r", "gamma_c_a", "gamma_c_b", "dev_c"]

    def summary(self) -> str:
        return (f"points={len(self.rows)} gamma_r mean={self.mean_dev_r:.4f} "
                f"max={self.max_dev_r:.4f}  gamma_c mean={self.mean_dev_c:.4f} "
                f"max={self.max_dev_c:.4f}")


def _loads(rows):
    """Total RAN and CN loads per grid point from either kind of output file."""
    out = {}
    for r in rows:
        if "seed" in r and r["seed"] != "mean":
            continue
        key = (float(r["tau_mean_s"]), float(r["attacker_fraction"]), bool(r["pch"]))
        if "big_gamma_r" in r:
            out[key] = (r["big_gamma_r"], r["big_gamma_c"])
        else:
            out[key] = (r["ran_msgs_per_s"], r["cn_msgs_per_s"])
    return out


def _rel(a, b):
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return abs(a - b) / abs(b)


def compare_rows(a_rows, b_rows) -> Comparison:
    """Relative deviation of ``b`` from ``a`` (the reference, normally the
    simulation) at every grid point."""
    a, b = _loads(a_rows), _loads(b_rows)
    if not a or not b:
        raise GridMismatch("empty grid")
    if set(a) != set(b):
        missing = sorted(set(a) ^ set(b))
        raise GridMismatch(f"grids differ at {missing[:5]}")
    rows = []
    for key in sorted(a):
        (ra, ca), (rb, cb) = a[key], b[key]
        rows.append({"tau_mean_s": key[0], "attacker_fraction": key[1], "pch": key[2],
                     "gamma_r_a": ra, "gamma_r_b": rb, "dev_r": _rel(rb, ra),
                     "gamma_c_a": ca, "gamma_c_b": cb, "dev_c": _rel(cb, ca)})
    dr = np.array([r["dev_r"] for r in rows])
    dc = np.array([r["dev_c"] for r in rows])
    return Comparison(rows, float(dr.mean()), float(dr.max()), float(dc.mean()), float(dc.max()))


def compare(sim_csv, analytic_csv) -> Comparison:
    return compare_rows(read_csv(sim_csv), read_csv(analytic_csv))


# -- calibration ----------------------------------------------------------------

@dataclass
class Calibration:
    lambda_h: float
    mu_h: float
    processing_scale: float
    targets: dict
    fitted: dict

    def overlay(self) -> dict:
        lam, mu, scale = float(self.lambda_h), float(self.mu_h), float(self.processing_scale)
        return {"analytic": {"lambda_l_per_s": 0.0, "lambda_h_per_s": lam,
                             "mu_l_per_s": mu, "mu_h_per_s": mu, "processing_scale": scale}}


def baseline_targets(scn: Scenario, jobs: int = 1) -> dict:
    """Per-normal-UE RAN rate, DCH time fraction and RNC utilisation of the
    no-attack simulation, per pch mode (seed means)."""
    points = [Point(0.0, 0.0, p) for p in dict.fromkeys(scn["rrc"]["pch_enabled"])]
    frames = simulate_grid(scn, points, jobs)
    out = {}
    for p in points:
        mean, _ = aggregate_runs([frames[(p.key, s)] for s in scn.seeds])
        out[p.pch] = {"gamma_r": mean.ran_per_ue_normal, "gamma_c": mean.cn_per_ue_normal,
                      "dch": mean.dch_busy_normal + mean.dch_idle_normal,
                      "util": mean.rnc_utilization}
    return out


def calibrate(scn: Scenario, jobs: int = 1, targets: dict | None = None,
              rounds: int = 4) -> Calibration:
    """Fit the normal-class session rates to the no-attack simulation, then
    scale the RNC processing times until analytic and simulated utilisation
    agree.  The two steps alternate a few times since each moves the other."""
    targets = targets or baseline_targets(scn, jobs)
    pchs = list(targets)
    a = scn["analytic"]
    lam, mu, scale = float(a["lambda_h_per_s"]) or 0.004, float(a["mu_h_per_s"]) or 0.5, 1.0

    def with_values(lam_h, mu_h, s):
        d = scn.manifest()
        d["analytic"].update({"lambda_l_per_s": 0.0, "lambda_h_per_s": float(lam_h),
                              "mu_l_per_s": float(mu_h), "mu_h_per_s": float(mu_h),
                              "processing_scale": float(s)})
        return Scenario(d)

    def predict(lam_h, mu_h, s):
        sc = with_values(lam_h, mu_h, s)
        return {p: analytic_point(sc, Point(0.0, 0.0, p)) for p in pchs}

    for _ in range(rounds):
        def resid(x):
            sols = predict(math.exp(x[0]), math.exp(x[1]), scale)
            r = []
            for p in pchs:
                t, sol = targets[p], sols[p]
                r.append(sol.gamma_r_normal / t["gamma_r"] - 1.0)
                r.append(_dch_fraction(sol.pi_normal) / t["dch"] - 1.0)
            return r

        fit = optimize.least_squares(resid, [math.log(lam), math.log(mu)], method="lm")
        lam, mu = math.exp(fit.x[0]), math.exp(fit.x[1])
        for _ in range(20):
            sols = predict(lam, mu, scale)
            ratio = np.mean([targets[p]["util"] / sols[p].rho for p in pchs])
            scale *= float(ratio)
            if abs(ratio - 1) < 1e-4:
                break
    sols = predict(lam, mu, scale)
    fitted = {p: {"gamma_r": s.gamma_r_normal, "gamma_c": s.gamma_c_normal,
                  "dch": _dch_fraction(s.pi_normal), "util": s.rho} for p, s in sols.items()}
    return Calibration(lam, mu, scale, targets, fitted)


def write_calibration(cal: Calibration, out) -> list[str]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "calibration.yaml").write_text(yaml.safe_dump(cal.overlay(), sort_keys=False))
    rows = []
    for p in cal.targets:
        for k in ("gamma_r", "gamma_c", "dch", "util"):
            rows.append({"pch": p, "quantity": k, "simulation": cal.targets[p][k],
                         "analytic": cal.fitted[p][k]})
    write_csv(out / "calibration_fit.csv", rows, ["pch", "quantity", "simulation", "analytic"])
    return ["calibration.yaml", "calibration_fit.csv"]
