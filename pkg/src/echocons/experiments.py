"""Experiment recipes: configuration, per-run measurements and artifact output.

Every run is identified by a cell ``(rho, r, lam)`` and a realization index
``k``. All randomness of realization ``k`` derives from
``rng.derive_seed(master_seed, REALIZATION, k, role)``:

====  ===========================================
role  use
====  ===========================================
0     network seed (``attempt`` appended on retry)
1     drive seed
2     replica seed (initial conditions and noise)
3     measurement-noise seed (profile regularization)
====  ===========================================

The network of realization ``k`` is drawn once and rescaled for every rho,
so a rho sweep walks through one wiring.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import os
from functools import lru_cache
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, rng
from .errors import DegenerateConnectivity
from .lyapunov import cle_spectrum
from .profile import covariance, pc_readout_consistencies, profile, test_system_audit
from .readout import memory_task
from .replica import consistency, replica_run
from .reservoir import NetworkSpec, build_network, initial_state, run
from .signals import gaussian_drive, perturbed_family


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 1)."""


@dataclass
class ExperimentConfig:
    experiment: str = "sweep"
    size: int = 200
    p: float = 0.025
    bias: float = 1.0
    T: int = 100_000
    washout: int = 1000
    rho: list = field(default_factory=lambda: [1.0])
    noise: list = field(default_factory=lambda: [0.0])
    lam: list = field(default_factory=lambda: [0.0])
    replicas: int = 2
    tau_max: int = 50
    section_lags: list = field(default_factory=lambda: [0, 1, 2, 3])
    section_grid: list = field(default_factory=lambda: [-3.0, 3.0, 61])
    section_rhos: list = field(default_factory=lambda: [2.2, 3.0])
    section_nodes: list | None = None
    section_length: int = 2000
    realizations: int = 1
    seed: int = 0
    out: str = "out"
    threads: int = 0
    lyap_steps: int = 10_000
    reortho: int = 1
    metrics: list = field(default_factory=lambda: ["gamma"])
    match_rho: float | None = None
    match_chaos_rho: float | None = None  # None: largest rho of the grid
    match_tol: float = 0.01
    profile_rhos: list = field(default_factory=lambda: [1.0, 3.0])
    profile_target_gamma: float | None = None
    profile_threshold: float = 0.5
    null_threshold: float = 1e-10
    input_lag: int = 0

    def validate(self) -> "ExperimentConfig":
        for name in ("rho", "noise", "lam", "metrics", "section_lags", "section_rhos", "profile_rhos"):
            if not getattr(self, name):
                raise ConfigError(f"field '{name}': grid must be nonempty")
        if self.realizations < 1:
            raise ConfigError("field 'realizations': must be >= 1")
        if self.replicas < 2:
            raise ConfigError("field 'replicas': must be >= 2")
        if not 0 <= self.washout < self.T:
            raise ConfigError("field 'washout': must satisfy 0 <= washout < T")
        if self.size < 1 or not 0 <= self.p <= 1:
            raise ConfigError("fields 'size'/'p': need size >= 1 and 0 <= p <= 1")
        if any(r < 0 or r > 1 for r in self.noise):
            raise ConfigError("field 'noise': values must lie in [0, 1]")
        if any(x < 0 for x in self.rho) or any(x < 0 for x in self.lam):
            raise ConfigError("fields 'rho'/'lam': values must be >= 0")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("field 'seed': must be an unsigned 64-bit integer")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ConfigError(f"field 'metrics': unknown metric(s) {sorted(unknown)}; "
                              f"choose from {sorted(METRICS)}")
        if len(self.section_grid) != 3:
            raise ConfigError("field 'section_grid': expected [start, stop, count]")
        if self.tau_max < 0:
            raise ConfigError("field 'tau_max': must be >= 0")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


# Consistency, section and Lyapunov recipes use N=200 at p=2.5%, memory uses
# N=500 at p=10%, and the consistency profile uses N=100 at p=5%.
RECIPES = {
    "sections": {"size": 200, "p": 0.025},
    "memory": {"size": 500, "p": 0.10, "lam": [1e-6], "metrics": ["memory"]},
    "lyapunov": {"size": 200, "p": 0.025, "metrics": ["lyapunov"]},
    "profile": {"size": 100, "p": 0.05, "profile_target_gamma": 0.15,
                "lam": [1e-3, 1e-2, 3e-2, 1e-1]},
    "sweep": {},
    "generate-net": {},
}

FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def resolve_config(experiment: str, config_path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Recipe defaults, then the JSON config file, then explicit overrides."""
    if experiment not in RECIPES:
        raise ConfigError(f"unknown experiment {experiment!r}")
    values = {"experiment": experiment, **RECIPES[experiment]}
    if config_path is not None:
        text = Path(config_path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{config_path}: top level must be a JSON object")
        for key in doc:
            if key not in FIELDS:
                raise ConfigError(f"{config_path}: unknown field '{key}'")
        doc.pop("experiment", None)
        values.update(doc)
    for key, val in (overrides or {}).items():
        if key not in FIELDS:
            raise ConfigError(f"unknown field '{key}'")
        values[key] = val
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# -- realization plumbing ------------------------------------------------------


def realization_seed(cfg: ExperimentConfig, k: int, role: int) -> int:
    return rng.derive_seed(cfg.seed, rng.REALIZATION, k, role)


def realization_network(cfg: ExperimentConfig, k: int, rho: float, size=None, p=None):
    size = cfg.size if size is None else size
    p = cfg.p if p is None else p
    return _base_network(cfg.seed, k, size, p, cfg.bias).scaled(rho)


@lru_cache(maxsize=32)
def _base_network(master: int, k: int, size: int, p: float, bias: float):
    for attempt in range(100):
        seed = rng.derive_seed(master, rng.REALIZATION, k, 0, attempt)
        try:
            return build_network(NetworkSpec(size, p, 1.0, 1, bias, seed))
        except DegenerateConnectivity:
            continue
    raise DegenerateConnectivity("degenerate connectivity after 100 attempts")


def realization_drive(cfg: ExperimentConfig, k: int, T=None):
    return gaussian_drive(cfg.T if T is None else T, 1, realization_seed(cfg, k, 1))


def first_below(rhos, values, threshold):
    """First grid point whose value drops below ``threshold`` (None if never)."""
    for x, v in zip(rhos, values):
        if v < threshold:
            return x
    return None


def first_positive(rhos, values):
    for x, v in zip(rhos, values):
        if v > 0:
            return x
    return None


def bisect(fn, lo, hi, target, tol, max_iter=40, decreasing=True):
    """Bisection for ``fn(x) == target`` on a monotone ``fn``; stops within ``tol``.

    Returns ``(x, fn(x))`` for the best point visited.
    """
    best = None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = fn(mid)
        if best is None or abs(val - target) < abs(best[1] - target):
            best = (mid, val)
        if abs(val - target) <= tol:
            break
        if (val > target) == decreasing:
            lo = mid
        else:
            hi = mid
    return best


def match_noise(net, drive, target: float, washout: int, seed: int, tol: float = 0.01,
                input_lag: int = 0):
    """Noise mix ``r`` at which the global consistency of ``net`` equals ``target``."""
    def gamma(r):
        ens = replica_run(net, drive, 2, washout, r, seed, input_lag=input_lag)
        return consistency(ens).global_gamma_sq
    return bisect(gamma, 0.0, 1.0, target, tol)


def tune_rho(cfg: ExperimentConfig, k: int, target: float, drive, lo=1.0, hi=10.0, tol=0.01):
    """Spectral radius at which realization ``k`` reaches global consistency ``target``."""
    seed = realization_seed(cfg, k, 2)

    def gamma(rho):
        net = realization_network(cfg, k, rho)
        ens = replica_run(net, drive, 2, cfg.washout, 0.0, seed)
        return consistency(ens).global_gamma_sq
    return bisect(gamma, lo, hi, target, tol)


# -- per-cell measurements -----------------------------------------------------


def _tag(rho, r, lam, k):
    return f"rho{rho:g}_r{r:g}_lam{lam:g}_k{k}"


def measure_gamma(cfg, rho, r, lam, k, outdir=None) -> dict:
    net = realization_network(cfg, k, rho)
    ens = replica_run(net, realization_drive(cfg, k), cfg.replicas, cfg.washout, r,
                      realization_seed(cfg, k, 2), input_lag=cfg.input_lag)
    rep = consistency(ens)
    if outdir is not None:
        rep.meta.update({"config": cfg.to_dict(), "version": __version__, "rho": rho})
        rep.write_csv(Path(outdir) / f"consistency_{_tag(rho, r, lam, k)}.csv")
        rep.write_json(Path(outdir) / f"consistency_{_tag(rho, r, lam, k)}.json")
    return {"gamma_hat_sq": rep.global_gamma_sq}


def measure_memory(cfg, rho, r, lam, k, outdir=None) -> dict:
    net = realization_network(cfg, k, rho)
    drive = realization_drive(cfg, k)
    ens = replica_run(net, drive, 2, cfg.washout, r, realization_seed(cfg, k, 2),
                      input_lag=cfg.input_lag)
    g = consistency(ens).global_gamma_sq
    prof = memory_task(net, drive, cfg.tau_max, lam, cfg.washout, replica=ens, r=r)
    if outdir is not None:
        path = Path(outdir) / f"memory_{_tag(rho, r, lam, k)}.csv"
        prof.write_csv(path)
        write_sidecar(path, cfg, {**prof.summary(), "gamma_hat_sq": g, "realization": k})
    return {"gamma_hat_sq": g, "I_MC": prof.capacity}


def measure_lyapunov(cfg, rho, r, lam, k, outdir=None) -> dict:
    net = realization_network(cfg, k, rho)
    drive = realization_drive(cfg, k, max(cfg.T, cfg.washout + cfg.lyap_steps))
    rep = cle_spectrum(net, drive, cfg.lyap_steps, cfg.washout, cfg.reortho,
                       seed=realization_seed(cfg, k, 2), r=r)
    ens = replica_run(net, drive.samples[:cfg.T], 2, cfg.washout, 0.0, realization_seed(cfg, k, 2))
    return {
        "gamma_hat_sq": consistency(ens).global_gamma_sq,
        "lambda_1": rep.max_exponent,
        "D_KY": rep.ky_dimension,
        "D_KY_over_N": rep.ky_dimension / net.size,
        "negative_fraction": rep.negative_fraction,
        "drift": rep.drift,
        "converged": float(rep.converged),
        "exponents": rep.exponents.tolist(),
    }


def measure_profile(cfg, rho, r, lam, k, outdir=None) -> dict:
    net = realization_network(cfg, k, rho)
    ens = replica_run(net, realization_drive(cfg, k), cfg.replicas, cfg.washout, r,
                      realization_seed(cfg, k, 2), input_lag=cfg.input_lag)
    prof = profile(ens, lam, cfg.null_threshold, seed=realization_seed(cfg, k, 3),
                   threshold=cfg.profile_threshold)
    return {"gamma_hat_sq": prof.global_gamma_sq, "effective_dimension": prof.effective_dimension,
            "fraction_above_global": prof.fraction_above_global}


METRICS = {
    "gamma": measure_gamma,
    "memory": measure_memory,
    "lyapunov": measure_lyapunov,
    "profile": measure_profile,
}


# -- output ----------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_sidecar(path, cfg: ExperimentConfig, extra: dict | None = None) -> None:
    meta = {"artifact": Path(path).name, "version": __version__, "config": cfg.to_dict()}
    if extra:
        meta.update(extra)
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def write_table(path, header, rows, cfg, extra=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    write_sidecar(path, cfg, extra)
    return path


def _workers(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def map_ordered(fn, tasks, threads: int):
    """Apply ``fn(*task)``; results come back in task order whatever the worker count."""
    n = _workers(threads)
    if n == 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


def summarize(records, metric_names):
    """Group per-realization records by (rho, r, lam); mean and standard error per metric."""
    groups = {}
    for rec in records:
        groups.setdefault((rec["rho"], rec["noise"], rec["lambda"]), []).append(rec)
    rows = []
    for key in sorted(groups, key=lambda t: tuple(t)):
        recs = groups[key]
        row = list(key) + [len(recs)]
        for m in metric_names:
            vals = np.array([r[m] for r in recs if m in r], dtype=float)
            mean = float(vals.mean()) if vals.size else float("nan")
            sem = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
            row += [mean, sem]
        rows.append(row)
    header = ["rho", "noise", "lambda", "n"]
    for m in metric_names:
        header += [f"{m}_mean", f"{m}_sem"]
    return header, rows


SUMMARY_METRICS = {
    "gamma": ["gamma_hat_sq"],
    "memory": ["gamma_hat_sq", "I_MC"],
    "lyapunov": ["gamma_hat_sq", "lambda_1", "D_KY_over_N", "negative_fraction"],
    "profile": ["gamma_hat_sq", "effective_dimension", "fraction_above_global"],
}


def _summary_names(metrics):
    names = []
    for m in metrics:
        for n in SUMMARY_METRICS[m]:
            if n not in names:
                names.append(n)
    return names


# -- commands --------------------------------------------------------------------


def cmd_generate_net(cfg: ExperimentConfig) -> list[Path]:
    from .reservoir import save
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(cfg.realizations):
        net = realization_network(cfg, k, cfg.rho[0])
        path = out / f"network_k{k}.json"
        save(net, path)
        write_sidecar(path, cfg, {"realization": k, "spectral_radius": net.radius})
        paths.append(path)
    return paths


def section_responses(net, reference, lag, grid, nodes, seed):
    """``x_i(T)`` for each grid value; run ``j`` starts from its own random state."""
    fam = perturbed_family(reference, lag, grid)
    out = np.empty((len(fam), len(nodes)))
    for j, drv in enumerate(fam):
        x0 = initial_state(net.size, seed, j)
        traj = run(net, drv, x0=x0, washout=drv.length - 1)
        out[j] = traj[-1, nodes]
    return out


def cmd_sections(cfg: ExperimentConfig) -> list[Path]:
    out = Path(cfg.out)
    start, stop, num = cfg.section_grid
    grid = np.linspace(float(start), float(stop), int(num))
    reference = realization_drive(cfg, 0, cfg.section_length)
    seed = realization_seed(cfg, 0, 2)
    nodes = cfg.section_nodes
    if nodes is None:
        net0 = realization_network(cfg, 0, cfg.section_rhos[0])
        tr = run(net0, reference, washout=min(100, cfg.section_length - 1), noise_seed=seed)
        nodes = sorted(np.argsort(tr.var(axis=0))[::-1][:3].tolist())
    paths = []
    for lag in cfg.section_lags:
        rows = []
        for rho in cfg.section_rhos:
            net = realization_network(cfg, 0, rho)
            resp = section_responses(net, reference, lag, grid, nodes, seed)
            for j, val in enumerate(grid):
                for c, node in enumerate(nodes):
                    rows.append([rho, val, node, resp[j, c]])
        paths.append(write_table(out / f"sections_lag{lag}.csv", ["rho", "value", "node", "x_T"],
                                 rows, cfg, {"lag": lag, "nodes": nodes, "node_selection":
                                             "explicit" if cfg.section_nodes else "top-3 variance"}))
    return paths


def _cells(cfg):
    return [(rho, r, lam, k) for rho, r, lam in itertools.product(cfg.rho, cfg.noise, cfg.lam)
            for k in range(cfg.realizations)]


def _records(cfg, fn, outdir=None):
    cells = _cells(cfg)
    results = map_ordered(fn, [(cfg, *c, outdir) for c in cells], cfg.threads)
    return [{"rho": c[0], "noise": c[1], "lambda": c[2], "realization": c[3], **res}
            for c, res in zip(cells, results)]


def matched_pair(cfg: ExperimentConfig, k: int, rho_chaos: float, rho_noise: float):
    """Memory profiles of a chaotic network and a noise-driven one at equal consistency."""
    drive = realization_drive(cfg, k)
    seed = realization_seed(cfg, k, 2)
    lam = cfg.lam[0]
    chaos = realization_network(cfg, k, rho_chaos)
    ens_c = replica_run(chaos, drive, 2, cfg.washout, 0.0, seed, input_lag=cfg.input_lag)
    g_c = consistency(ens_c).global_gamma_sq
    quiet = realization_network(cfg, k, rho_noise)
    r_star, g_n = match_noise(quiet, drive, g_c, cfg.washout, seed, cfg.match_tol, cfg.input_lag)
    ens_n = replica_run(quiet, drive, 2, cfg.washout, r_star, seed, input_lag=cfg.input_lag)
    p_c = memory_task(chaos, drive, cfg.tau_max, lam, cfg.washout, replica=ens_c)
    p_n = memory_task(quiet, drive, cfg.tau_max, lam, cfg.washout, replica=ens_n, r=r_star)
    return {"realization": k, "r_star": r_star, "gamma_chaos": g_c, "gamma_noise": g_n,
            "profile_chaos": p_c, "profile_noise": p_n}


def cmd_memory(cfg: ExperimentConfig) -> list[Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    records = _records(cfg, measure_memory, out)
    header, rows = summarize(records, ["gamma_hat_sq", "I_MC"])
    paths = [write_table(out / "summary.csv", header, rows, cfg)]
    if cfg.match_rho is not None:
        chaos_rho = max(cfg.rho) if cfg.match_chaos_rho is None else cfg.match_chaos_rho
        pairs = map_ordered(matched_pair, [(cfg, k, chaos_rho, cfg.match_rho)
                                           for k in range(cfg.realizations)], cfg.threads)
        mrows = []
        for pr in pairs:
            k = pr["realization"]
            for name in ("chaos", "noise"):
                path = out / f"matched_{name}_k{k}.csv"
                pr[f"profile_{name}"].write_csv(path)
                write_sidecar(path, cfg, {"realization": k, "r_star": pr["r_star"]})
            mrows.append([k, chaos_rho, cfg.match_rho, pr["r_star"], pr["gamma_chaos"],
                          pr["gamma_noise"], pr["profile_chaos"].capacity, pr["profile_noise"].capacity])
        paths.append(write_table(out / "matched.csv",
                                 ["realization", "rho_chaos", "rho_noise", "r_star", "gamma_chaos",
                                  "gamma_noise", "I_MC_chaos", "I_MC_noise"], mrows, cfg))
    return paths


def cmd_lyapunov(cfg: ExperimentConfig) -> list[Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg1 = dataclasses.replace(cfg, noise=[0.0], lam=[0.0])
    records = _records(cfg1, measure_lyapunov)
    n = cfg.size
    header = (["rho", "realization", "gamma_hat_sq", "lambda_1", "D_KY", "D_KY_over_N",
               "negative_fraction", "drift", "converged"] + [f"l{i + 1}" for i in range(n)])
    rows = [[r["rho"], r["realization"], r["gamma_hat_sq"], r["lambda_1"], r["D_KY"],
             r["D_KY_over_N"], r["negative_fraction"], r["drift"], int(r["converged"])] + r["exponents"]
            for r in records]
    paths = [write_table(out / "lyapunov.csv", header, rows, cfg)]
    crow = []
    for k in range(cfg.realizations):
        recs = sorted((r for r in records if r["realization"] == k), key=lambda r: r["rho"])
        rhos = [r["rho"] for r in recs]
        crow.append([k, first_positive(rhos, [r["lambda_1"] for r in recs]),
                     first_below(rhos, [r["gamma_hat_sq"] for r in recs], 0.99)])
    paths.append(write_table(out / "crossings.csv", ["realization", "rho_lambda1_positive",
                                                     "rho_gamma_below_0.99"], crow, cfg))
    return paths


def _pc_rows(ens, lam, seed):
    """sigma and per-PC readout consistency of one replica pair (after optional measurement noise)."""
    X = ens.trajectories
    if lam > 0:
        X = np.stack([X[k] + lam * rng.stream(seed, rng.MEASURE, k).standard_normal(X[k].shape)
                      for k in range(2)])
    dec = covariance(X[0])
    g = pc_readout_consistencies(X[0], X[1], dec.Q)
    return [[i, float(np.sqrt(s)), float(s), g[i]] for i, s in enumerate(dec.sigma_sq)]


def cmd_profile(cfg: ExperimentConfig) -> list[Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    drive = realization_drive(cfg, 0)
    seed = realization_seed(cfg, 0, 2)
    mseed = realization_seed(cfg, 0, 3)
    pc_header = ["pc", "sigma", "sigma_sq", "Gamma_sq"]

    # (a) response profile with PC readout consistencies
    for rho in cfg.profile_rhos:
        ens = replica_run(realization_network(cfg, 0, rho), drive, 2, cfg.washout, 0.0, seed)
        g = consistency(ens).global_gamma_sq
        paths.append(write_table(out / f"pc_rho{rho:g}.csv", pc_header, _pc_rows(ens, 0.0, mseed),
                                 cfg, {"rho": rho, "lambda": 0.0, "gamma_hat_sq": g}))
    base_rho = min(cfg.profile_rhos)
    ens = replica_run(realization_network(cfg, 0, base_rho), drive, 2, cfg.washout, 0.0, seed)
    reg_rows = []
    for lam in cfg.lam:
        prof = profile(ens, lam, cfg.null_threshold, seed=mseed, threshold=cfg.profile_threshold)
        paths.append(write_table(out / f"pc_rho{base_rho:g}_lam{lam:g}.csv", pc_header,
                                 _pc_rows(ens, lam, mseed), cfg, {"rho": base_rho, "lambda": lam}))
        reg_rows.append([lam, prof.effective_dimension, prof.discarded, prof.global_gamma_sq])
    paths.append(write_table(out / "regularized.csv",
                             ["lambda", "retained_directions", "discarded_null", "gamma_hat_sq"],
                             reg_rows, cfg, {"rho": base_rho, "retained_rule":
                                             f"consistency level > {cfg.profile_threshold}"}))

    # (b) test system geometry
    audit = test_system_audit(min(cfg.T * 10, 10**6), realization_seed(cfg, 0, 3))
    audit["config"] = cfg.to_dict()
    audit["version"] = __version__
    (out / "test_system.json").write_text(json.dumps(audit, indent=2))
    paths.append(out / "test_system.json")
    paths.append(_write_axes(out / "test_system_axes.csv", audit, cfg))

    # (c) consistency profile
    if cfg.profile_target_gamma is not None:
        rho_p, _ = tune_rho(cfg, 0, cfg.profile_target_gamma, drive)
    else:
        rho_p = max(cfg.profile_rhos)
    ens = replica_run(realization_network(cfg, 0, rho_p), drive, 2, cfg.washout, 0.0, seed)
    prof = profile(ens, 0.0, cfg.null_threshold, threshold=cfg.profile_threshold)
    gd = pc_readout_consistencies(ens[0], ens[1], prof.directions)
    rows = []
    for i, s in enumerate(prof.sigma_sq):
        lvl = prof.levels[i] if i < prof.levels.size else None
        gr = gd[i] if i < gd.size else None
        rows.append([i, s, lvl, gr, int(prof.retained_mask[i])])
    paths.append(write_table(out / "profile.csv",
                             ["direction", "sigma_sq", "consistency_level", "direction_Gamma_sq",
                              "retained"], rows, cfg, {"rho": rho_p, **prof.summary()}))
    return paths


def _write_axes(path, audit, cfg):
    emp = audit["empirical"]
    rows = []
    for coords, key_full, key_c in (("original", "C_xx", "C_c"), ("whitened", "whitened_full", "Cbar_c")):
        for comp, key in (("full", key_full), ("consistent", key_c)):
            s, V = np.linalg.eigh(np.array(emp[key]))
            for i in np.argsort(s)[::-1]:
                rows.append([coords, comp, float(np.sqrt(max(s[i], 0.0))), V[0, i], V[1, i]])
    return write_table(path, ["coordinates", "component", "semi_axis", "dir_x", "dir_y"], rows, cfg)


# -- sweep -------------------------------------------------------------------------


def _cell_id(rho, r, lam, k):
    return f"rho{rho!r}_r{r!r}_lam{lam!r}_k{k}"


def _sweep_cell(cfg, rho, r, lam, k, celldir):
    path = Path(celldir) / f"{_cell_id(rho, r, lam, k)}.json"
    result = {"rho": rho, "noise": r, "lambda": lam, "realization": k}
    try:
        for m in cfg.metrics:
            res = METRICS[m](cfg, rho, r, lam, k)
            res.pop("exponents", None)
            result.update(res)
        result["status"] = "done"
    except Exception as exc:  # recorded per cell; the sweep continues
        result["status"] = "error"
        result["error"] = f"{type(exc).__name__}: {exc}"
    path.write_text(json.dumps(result, default=_json_default))
    return result


def cmd_sweep(cfg: ExperimentConfig):
    """Product sweep over (rho, r, lam, realization); returns (paths, n_failed).

    Completed cells leave a JSON marker in ``<out>/cells`` and are skipped on
    rerun; failed cells are retried.
    """
    out = Path(cfg.out)
    celldir = out / "cells"
    celldir.mkdir(parents=True, exist_ok=True)
    cells = _cells(cfg)
    todo, done = [], {}
    for c in cells:
        path = celldir / f"{_cell_id(*c)}.json"
        if path.exists():
            rec = json.loads(path.read_text())
            if rec.get("status") == "done":
                done[c] = rec
                continue
        todo.append(c)
    results = map_ordered(_sweep_cell, [(cfg, *c, str(celldir)) for c in todo], cfg.threads)
    done.update(zip(todo, results))
    records = [done[c] for c in cells]
    failed = [r for r in records if r.get("status") != "done"]
    names = _summary_names(cfg.metrics)
    header = ["rho", "noise", "lambda", "realization", "status"] + names + ["error"]
    rows = [[r["rho"], r["noise"], r["lambda"], r["realization"], r["status"]]
            + [r.get(n) for n in names] + [r.get("error", "")] for r in records]
    paths = [write_table(out / "sweep.csv", header, rows, cfg)]
    sh, srows = summarize([r for r in records if r.get("status") == "done"], names)
    paths.append(write_table(out / "summary.csv", sh, srows, cfg))
    return paths, len(failed)
