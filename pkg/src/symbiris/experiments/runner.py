"""Scenario orchestration and CSV emission.

One task is one (sweep point, seed) pair: the channels are drawn once
from ``default_rng(seed)`` and every policy runs on them, each policy
with its own generator ``default_rng([seed, policy_index])``. Rows are
sorted by sweep point, policy (in configuration order) and seed before
writing, so the output does not depend on the number of workers.

Wall-clock times go to ``timings.csv``; every other file is a pure
function of the configuration and seeds.
"""

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..analysis import condition_and_eigengain, effective_rank, mp_asymptotic_rates
from ..ao import initialize_phi, run_ao
from ..baselines import (
    one_dimensional_search_ao,
    pure_assist_ao,
    random_beamforming,
    random_initialization_ao,
    water_filling_no_ris,
)
from ..channels import generate_channels, path_loss, write_channel_set
from ..linalg import NumericalFailure, crandn, log2det_pd
from ..metrics import evaluate
from ..sdr import RandomizationSettings, run_low_complexity
from ..types import BeamformerSolution, Status
from .config import POLICIES, ExperimentConfig, parse_config

__all__ = [
    "RESULT_COLUMNS",
    "point_channels",
    "run_policy",
    "run_experiment",
    "run_rank_table",
    "run_mp_check",
    "generate_channel_files",
    "audit",
]

RESULT_COLUMNS = (
    "scenario", "K", "R_s", "policy", "seed", "power_w", "R_p", "R_bs", "gamma_bc",
    "status", "iters", "cond_expected", "gain_expected", "cond_plus", "gain_plus",
)
SUMMARY_COLUMNS = (
    "scenario", "K", "R_s", "policy", "n_seeds", "n_ok", "mean_power_w", "mean_R_p",
    "mean_R_bs", "mean_gamma_bc", "mean_iters",
)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, Status):
        return v.value
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def point_channels(cfg, point, seed):
    """Channels for one sweep point and seed, with the scenario modifiers applied."""
    ch = generate_channels(point, cfg.geometry, np.random.default_rng(seed))
    if cfg.blocked_direct:
        ch = ch.replace(H1=np.zeros_like(ch.H1), H2=np.zeros_like(ch.H2))
    if cfg.colocated:
        ch = ch.replace(H2=ch.H1, G2=ch.G1)
    return ch


def run_policy(name, channels, point, cfg, seed):
    """Run one policy; returns ``(solution, extra)``."""
    rng = np.random.default_rng([seed, POLICIES.index(name)])
    extra = {}
    if name == "AO":
        sol, trace = run_ao(channels, point, cfg.ao, rng)
        extra["trace"] = trace
    elif name == "LowComplexity":
        rs = RandomizationSettings(cfg.randomization.num_candidates, rng_seed=seed)
        sol, report = run_low_complexity(channels, point, cfg.solver, rs)
        extra["report"] = report
    elif name == "RandomBeam":
        sol = random_beamforming(channels, point, cfg.solver, rng)
    elif name == "NoRIS":
        sol = water_filling_no_ris(channels.H1, point)
    elif name == "RandomInit":
        sol = random_initialization_ao(channels, point, cfg.ao, rng)
    elif name == "GridSearchAO":
        sol = one_dimensional_search_ao(channels, point, cfg.ao, cfg.ao.grid_resolution)
    elif name == "PureAssist":
        sol = pure_assist_ao(channels, point, cfg.ao)
    else:
        raise ValueError(f"unknown policy {name!r}")
    return sol, extra


def _row(cfg, point, name, seed, sol, channels):
    alpha = 0.0 if name == "NoRIS" else point.alpha
    ce, ge = condition_and_eigengain(channels, sol.phi, alpha, "expected")
    cp, gp = condition_and_eigengain(channels, sol.phi, alpha, "plus")
    return {
        "scenario": cfg.scenario, "K": point.K, "R_s": float(point.R_s), "policy": name,
        "seed": seed, "power_w": float(sol.power), "R_p": float(sol.R_p),
        "R_bs": float(sol.R_bs), "gamma_bc": float(sol.gamma_bc), "status": sol.status,
        "iters": int(sol.iterations), "cond_expected": ce, "gain_expected": ge,
        "cond_plus": cp, "gain_plus": gp,
    }


def _record(point_index, name, seed, sol):
    return {
        "point": point_index, "policy": name, "seed": seed,
        "W": [[z.real, z.imag] for z in np.asarray(sol.W).ravel()],
        "W_shape": list(np.asarray(sol.W).shape),
        "phi": [[z.real, z.imag] for z in np.asarray(sol.phi)],
        "power_w": sol.power, "R_p": sol.R_p, "R_bs": sol.R_bs, "gamma_bc": sol.gamma_bc,
    }


def _task(cfg, point_index, seed):
    point = cfg.points()[point_index]
    channels = point_channels(cfg, point, seed)
    out = []
    for name in cfg.policies:
        t0 = time.perf_counter()
        try:
            sol, extra = run_policy(name, channels, point, cfg, seed)
        except NumericalFailure as exc:
            sol, extra = BeamformerSolution.failed(point, Status.NUMERICAL_FAILURE, error=str(exc)), {}
        wall = 1e3 * (time.perf_counter() - t0)
        out.append({
            "row": _row(cfg, point, name, seed, sol, channels),
            "record": _record(point_index, name, seed, sol),
            "wall_ms": wall,
            "extra": _serializable_extra(extra),
        })
    return point_index, seed, out


def _serializable_extra(extra):
    res = {}
    if "trace" in extra:
        tr = extra["trace"]
        res["trace"] = {"rows": tr.rows(), "slacks": tr.slacks, "accepted": tr.accepted}
    if "report" in extra:
        rep = extra["report"]
        res["report"] = {k: rep[k] for k in ("seed", "t_sdr", "t_best_candidate", "power_w")}
    return res


def _run_tasks(cfg, jobs):
    tasks = [(i, s) for i in range(len(cfg.points())) for s in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_task, cfg, i, s) for i, s in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_task(cfg, i, s) for i, s in tasks]
    order = {name: j for j, name in enumerate(cfg.policies)}
    flat = []
    for point_index, seed, items in results:
        for item in items:
            flat.append(((point_index, order[item["row"]["policy"]], seed), item))
    flat.sort(key=lambda kv: kv[0])
    return [item for _, item in flat]


def _summary(cfg, rows):
    groups = {}
    for r in rows:
        groups.setdefault((r["K"], r["R_s"], r["policy"]), []).append(r)
    out = []
    for (K, R_s, policy), rs in groups.items():
        ok = [r for r in rs if math.isfinite(r["power_w"])]
        mean = lambda key: float(np.mean([r[key] for r in ok])) if ok else float("nan")
        out.append({
            "scenario": cfg.scenario, "K": K, "R_s": R_s, "policy": policy,
            "n_seeds": len(rs), "n_ok": len(ok), "mean_power_w": mean("power_w"),
            "mean_R_p": mean("R_p"), "mean_R_bs": mean("R_bs"),
            "mean_gamma_bc": mean("gamma_bc"), "mean_iters": mean("iters"),
        })
    return out


def run_experiment(config, out_dir=None, jobs=1):
    """Run a configured experiment and write its CSV files.

    Parameters
    ----------
    config : ExperimentConfig or path
    out_dir : str, optional
        Overrides the configured output directory.
    jobs : int
        Worker processes.

    Returns
    -------
    dict
        ``exit_code`` (0, or 2 when any solve failed numerically), ``files``,
        and ``rows``.
    """
    cfg = config if isinstance(config, ExperimentConfig) else parse_config(config)
    out_dir = out_dir or cfg.output
    os.makedirs(out_dir, exist_ok=True)
    if cfg.scenario == "RankTable":
        return run_rank_table(cfg, out_dir)
    if cfg.scenario == "MPCheck":
        return run_mp_check(cfg, out_dir)

    items = _run_tasks(cfg, jobs)
    rows = [it["row"] for it in items]
    files = {}
    files["results"] = os.path.join(out_dir, "results.csv")
    _write_csv(files["results"], RESULT_COLUMNS, rows)
    files["summary"] = os.path.join(out_dir, "summary.csv")
    _write_csv(files["summary"], SUMMARY_COLUMNS, _summary(cfg, rows))
    files["timings"] = os.path.join(out_dir, "timings.csv")
    _write_csv(files["timings"], ("K", "R_s", "policy", "seed", "wall_ms"),
               [{"K": it["row"]["K"], "R_s": it["row"]["R_s"], "policy": it["row"]["policy"],
                 "seed": it["row"]["seed"], "wall_ms": it["wall_ms"]} for it in items])
    files["solutions"] = os.path.join(out_dir, "solutions.jsonl")
    with open(files["solutions"], "w", encoding="utf-8") as f:
        for it in items:
            f.write(json.dumps(it["record"], sort_keys=True) + "\n")

    reports = [dict(it["extra"]["report"], K=it["row"]["K"], R_s=it["row"]["R_s"])
               for it in items if "report" in it["extra"]]
    if reports:
        files["sdr_report"] = os.path.join(out_dir, "sdr_report.csv")
        _write_csv(files["sdr_report"], ("K", "R_s", "seed", "t_sdr", "t_best_candidate", "power_w"),
                   reports)
    traces = [it for it in items if "trace" in it["extra"]]
    if traces:
        conv, slack = [], []
        for it in traces:
            base = {"K": it["row"]["K"], "R_s": it["row"]["R_s"], "seed": it["row"]["seed"]}
            tr = it["extra"]["trace"]
            for r in tr["rows"]:
                conv.append({**base, **{k: r[k] for k in ("iter", "power_w", "min_slack",
                                                            "elements_accepted")}})
            for i, (ss, aa) in enumerate(zip(tr["slacks"], tr["accepted"])):
                for k, (s, a) in enumerate(zip(ss, aa)):
                    slack.append({**base, "iter": i + 1, "element": k + 1, "slack": float(s),
                                  "accepted": bool(a)})
        files["convergence"] = os.path.join(out_dir, "convergence.csv")
        _write_csv(files["convergence"], ("K", "R_s", "seed", "iter", "power_w", "min_slack",
                                          "elements_accepted"), conv)
        files["slacks"] = os.path.join(out_dir, "slacks.csv")
        _write_csv(files["slacks"], ("K", "R_s", "seed", "iter", "element", "slack", "accepted"),
                   slack)
    failed = any(r["status"] is Status.NUMERICAL_FAILURE for r in rows)
    return {"exit_code": 2 if failed else 0, "files": files, "rows": rows}


# -- rank table ---------------------------------------------------------------------

RANK_CASES = (
    ("without_ris", {"h1": math.inf}, 0.0),
    ("ris_los_cascade", {"h1": math.inf, "g1": math.inf, "h3": math.inf}, None),
    ("ris_rician_cascade", {"h1": math.inf}, None),
)


def rank_table_rows(cfg):
    rows = []
    point = cfg.system
    for seed in cfg.seeds:
        rng = np.random.default_rng(seed)
        for name, kappas, alpha in RANK_CASES:
            geom = cfg.geometry
            for link, k in kappas.items():
                geom = geom.with_link(link, kappa=k)
            ch = generate_channels(point, geom, rng)
            a = point.alpha if alpha is None else alpha
            phi = initialize_phi(ch, point.replace(alpha=a))
            rows.append({"seed": seed, "case": name, "alpha": a,
                         "rank": effective_rank(ch, phi, a)})
    return rows


def run_rank_table(cfg, out_dir):
    rows = rank_table_rows(cfg)
    path = os.path.join(out_dir, "rank_table.csv")
    _write_csv(path, ("seed", "case", "alpha", "rank"), rows)
    return {"exit_code": 0, "files": {"rank_table": path}, "rows": rows}


# -- large-system rates ----------------------------------------------------------------


def mp_check_rows(cfg):
    """Asymptotic rates against a Rayleigh Monte Carlo with random phases."""
    pt = cfg.system
    geo = cfg.geometry
    eta = {n: path_loss(geo.links[n].distance, geo.beta_db, geo.gamma_e) for n in ("h1", "g1", "h3")}
    rng = np.random.default_rng(cfg.seeds[0])
    rows = []
    for P in cfg.mp_P:
        for K in cfg.mp_K:
            casc = pt.alpha * eta["g1"] * eta["h3"] * K
            r_with, r_without = mp_asymptotic_rates(
                pt.M, pt.N1, P, pt.sigma2, eta["h1"], casc, cfg.mp_quad_points
            )
            mc_with, mc_without = [], []
            for _ in range(cfg.mp_trials):
                H1 = math.sqrt(eta["h1"]) * crandn(rng, pt.N1, pt.M)
                Heff = H1
                if K > 0:
                    G1 = math.sqrt(eta["g1"]) * crandn(rng, pt.N1, K)
                    H3 = math.sqrt(eta["h3"]) * crandn(rng, K, pt.M)
                    phi = np.exp(2j * np.pi * rng.random(K))
                    Heff = H1 + math.sqrt(pt.alpha) * G1 @ (phi[:, None] * H3)
                I = np.eye(pt.N1)
                mc_with.append(log2det_pd(I + P / pt.sigma2 * Heff @ Heff.conj().T))
                mc_without.append(log2det_pd(I + P / pt.sigma2 * H1 @ H1.conj().T))
            rows.append({
                "P": P, "K": K, "rate_with": r_with, "rate_without": r_without,
                "mc_with": float(np.mean(mc_with)), "mc_without": float(np.mean(mc_without)),
            })
    return rows


def run_mp_check(cfg, out_dir):
    rows = mp_check_rows(cfg)
    path = os.path.join(out_dir, "mp_check.csv")
    _write_csv(path, ("P", "K", "rate_with", "rate_without", "mc_with", "mc_without"), rows)
    return {"exit_code": 0, "files": {"mp_check": path}, "rows": rows}


# -- channel export and audit ----------------------------------------------------------


def generate_channel_files(cfg, out_dir):
    """Write the channel matrices of every sweep point and seed as text files."""
    written = []
    for i, point in enumerate(cfg.points()):
        for seed in cfg.seeds:
            d = os.path.join(out_dir, "channels", f"point{i}_K{point.K}", f"seed{seed}")
            write_channel_set(d, point_channels(cfg, point, seed))
            written.append(d)
    return written


def audit(cfg, out_dir, rtol=1e-9):
    """Re-evaluate every stored solution from regenerated channels.

    Returns a list of mismatch descriptions (empty when every stored
    metric matches within ``rtol``).
    """
    points = cfg.points()
    with open(os.path.join(out_dir, "results.csv"), newline="", encoding="utf-8") as f:
        stored = {(int(r["K"]), float(r["R_s"]), r["policy"], int(r["seed"])): r
                  for r in csv.DictReader(f)}
    problems = []
    with open(os.path.join(out_dir, "solutions.jsonl"), encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            point = points[rec["point"]]
            key = (point.K, float(point.R_s), rec["policy"], rec["seed"])
            row = stored.get(key)
            if row is None:
                problems.append(f"{key}: no CSV row")
                continue
            if not math.isfinite(float(row["power_w"])):
                continue
            W = np.array([complex(a, b) for a, b in rec["W"]]).reshape(rec["W_shape"])
            phi = np.array([complex(a, b) for a, b in rec["phi"]])
            ch = point_channels(cfg, point, rec["seed"])
            Q = W @ W.conj().T
            if rec["policy"] == "NoRIS":
                vals = {"power_w": float(np.real(np.trace(Q))),
                        "R_p": log2det_pd(np.eye(point.N1) + ch.H1 @ Q @ ch.H1.conj().T / point.sigma2)}
            else:
                R_p, R_bs, snr = evaluate(Q, ch, phi, point)
                vals = {"power_w": float(np.real(np.trace(Q))), "R_p": R_p, "R_bs": R_bs,
                        "gamma_bc": snr}
            for name, v in vals.items():
                ref = float(row[name])
                if not abs(v - ref) <= rtol * abs(ref) + 1e-300:
                    problems.append(f"{key}: {name} stored {ref!r}, recomputed {v!r}")
    return problems
