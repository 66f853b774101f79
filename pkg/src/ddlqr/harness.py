"""Config-driven experiment runner.

Experiments are described by flat INI-style text files: one ``[system]`` and
one ``[cost]`` section, and one ``[run:<id>]`` section per run. The schema is
validated up front and unknown keys are rejected, so a config either runs
fully or fails with exit code 2 before touching the plant.

Every run is seeded and single-threaded internally; the sweep executes runs
in a worker pool but outputs are keyed by run id, so the on-disk result is
independent of completion order. Re-running the same config reproduces every
CSV byte for byte (floats are printed with 17 significant digits).
"""

from __future__ import annotations

import concurrent.futures
import configparser
import csv
import hashlib
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import dpi as dpi_mod
from . import ipi as ipi_mod
from .bounds import equal_budget_episodes
from .exceptions import ConfigError, DdlqrError, Underdetermined
from .lti import CostSpec, DitherPolicy, LinearSystem
from .persistency import build_persistency_report
from .riccati import pi_run

OUTPUT_ROOT_ENV = "DDLQR_OUTPUT_ROOT"

_COMMON_KEYS = {"method", "seed", "seeds", "k1", "x0", "episodes"}
_RUN_KEYS = {
    "ipi": _COMMON_KEYS | {"tau", "dither", "dither_cov", "h0_scale", "theta0"},
    "dpi": _COMMON_KEYS | {"tau", "dither_cov"},
    "model-based": _COMMON_KEYS | {"iters", "tol"},
}
_REQUIRED = {
    "ipi": {"tau", "episodes"},
    "dpi": {"tau", "episodes"},
    "model-based": set(),
}
_EXPERIMENT_KEYS = {"name", "total_steps", "conv_tol", "output"}
_SYSTEM_KEYS = {"a", "b"}
_COST_KEYS = {"q", "r"}

SUMMARY_COLUMNS = [
    "run_id", "method", "tau", "seed", "episodes_configured",
    "episodes_completed", "min_episode_length_required", "final_err_P",
    "final_err_K", "episodes_to_tol", "delta_theta_upper_final",
    "persistency_verdict", "bounds_dominate", "status",
]


def parse_matrix(text: str) -> np.ndarray:
    """Rows separated by ';', entries by whitespace or commas."""
    rows = []
    for row in text.strip().split(";"):
        entries = row.replace(",", " ").split()
        if entries:
            rows.append([float(v) for v in entries])
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ConfigError(f"malformed matrix literal: {text!r}")
    return np.array(rows)


def parse_vector(text: str, dim: int) -> np.ndarray:
    if text.strip() == "ones":
        return np.ones(dim)
    if text.strip() == "zeros":
        return np.zeros(dim)
    v = parse_matrix(text).ravel()
    if v.size != dim:
        raise ConfigError(f"vector literal {text!r} has {v.size} entries, expected {dim}")
    return v


@dataclass
class RunSpec:
    run_id: str
    method: str
    seed: int
    options: dict


@dataclass
class ExperimentConfig:
    name: str
    system: LinearSystem
    cost: CostSpec
    runs: list[RunSpec]
    total_steps: int | None
    conv_tol: float
    output: str | None
    raw_text: str

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()


def _section_dict(parser: configparser.ConfigParser, section: str,
                  allowed: set[str]) -> dict:
    items = dict(parser.items(section))
    unknown = set(items) - allowed
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys: {sorted(unknown)}")
    return items


def load_config(path) -> ExperimentConfig:
    path = resolve_config_path(path)
    raw = Path(path).read_text()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(raw)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    for section in parser.sections():
        if section not in ("experiment", "system", "cost") \
                and not section.startswith("run:"):
            raise ConfigError(f"unknown section [{section}]")
    for section in ("system", "cost"):
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    exp = (_section_dict(parser, "experiment", _EXPERIMENT_KEYS)
           if parser.has_section("experiment") else {})
    sysd = _section_dict(parser, "system", _SYSTEM_KEYS)
    costd = _section_dict(parser, "cost", _COST_KEYS)
    for key in _SYSTEM_KEYS - set(sysd):
        raise ConfigError(f"[system] missing key {key!r}")
    for key in _COST_KEYS - set(costd):
        raise ConfigError(f"[cost] missing key {key!r}")

    try:
        system = LinearSystem(parse_matrix(sysd["a"]), parse_matrix(sysd["b"]))
        cost = CostSpec(parse_matrix(costd["q"]), parse_matrix(costd["r"]))
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"invalid system/cost: {exc}") from exc

    runs: list[RunSpec] = []
    for section in parser.sections():
        if not section.startswith("run:"):
            continue
        run_id = section[4:].strip()
        if not run_id:
            raise ConfigError("run section needs a non-empty id")
        items = dict(parser.items(section))
        method = items.get("method")
        if method not in _RUN_KEYS:
            raise ConfigError(f"[{section}] method must be one of "
                              f"{sorted(_RUN_KEYS)}, got {method!r}")
        unknown = set(items) - _RUN_KEYS[method]
        if unknown:
            raise ConfigError(f"[{section}] has unknown keys: {sorted(unknown)}")
        missing = _REQUIRED[method] - set(items)
        if missing:
            raise ConfigError(f"[{section}] missing keys: {sorted(missing)}")
        if "seed" in items and "seeds" in items:
            raise ConfigError(f"[{section}] give either seed or seeds, not both")
        seeds = ([int(s) for s in items["seeds"].split()] if "seeds" in items
                 else [int(items.get("seed", "0"))])
        for seed in seeds:
            rid = run_id if len(seeds) == 1 else f"{run_id}-s{seed}"
            runs.append(RunSpec(run_id=rid, method=method, seed=seed,
                                options=dict(items)))

    total_steps = int(exp["total_steps"]) if "total_steps" in exp else None
    return ExperimentConfig(
        name=exp.get("name", Path(path).stem),
        system=system, cost=cost, runs=runs, total_steps=total_steps,
        conv_tol=float(exp.get("conv_tol", "1e-3")),
        output=exp.get("output"), raw_text=raw)


def resolve_config_path(path) -> Path:
    """Use the file if it exists, else fall back to a bundled config of the
    same name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("ddlqr").joinpath("configs", p.name)
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config file not found: {path}")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _build_ipi_config(cfg: ExperimentConfig, spec: RunSpec) -> ipi_mod.IpiConfig:
    o = spec.options
    n_x, n_u = cfg.system.n_x, cfg.system.n_u
    kind = o.get("dither", "gaussian")
    if kind not in ("gaussian", "zero"):
        raise ConfigError(f"run {spec.run_id}: dither must be gaussian or zero")
    if kind == "gaussian":
        if "dither_cov" not in o:
            raise ConfigError(f"run {spec.run_id}: gaussian dither needs dither_cov")
        dither = DitherPolicy("gaussian", parse_matrix(o["dither_cov"]), spec.seed)
    else:
        dither = DitherPolicy("zero", seed=spec.seed)
    theta0 = None
    if o.get("theta0", "zeros") != "zeros":
        theta0 = parse_matrix(o["theta0"])
    return ipi_mod.IpiConfig(
        tau=int(o["tau"]), episodes=int(o["episodes"]),
        K1=parse_matrix(o["k1"]), dither=dither,
        a=float(o.get("h0_scale", "1.0")), theta0=theta0,
        x0=parse_vector(o.get("x0", "ones"), n_x), seed=spec.seed)


def _build_dpi_config(cfg: ExperimentConfig, spec: RunSpec) -> dpi_mod.DpiConfig:
    o = spec.options
    if "dither_cov" not in o:
        raise ConfigError(f"run {spec.run_id}: dpi needs dither_cov")
    return dpi_mod.DpiConfig(
        tau=int(o["tau"]), episodes=int(o["episodes"]),
        K1=parse_matrix(o["k1"]), dither_cov=parse_matrix(o["dither_cov"]),
        x0=parse_vector(o.get("x0", "ones"), cfg.system.n_x), seed=spec.seed)


def _episodes_to_tol(errs, tol) -> int | None:
    for i, e in enumerate(errs, start=1):
        if e <= tol:
            return i
    return None


def _execute_run(cfg: ExperimentConfig, spec: RunSpec, out_dir: Path) -> dict:
    row = {c: "" for c in SUMMARY_COLUMNS}
    row["run_id"] = spec.run_id
    row["method"] = spec.method
    row["seed"] = spec.seed
    trace_path = out_dir / f"trace_{spec.run_id}.csv"
    try:
        if spec.method == "model-based":
            row["tau"] = ""
            row["min_episode_length_required"] = ""
            iters = int(spec.options.get("iters", "50"))
            tol = float(spec.options.get("tol", "1e-12"))
            k1 = parse_matrix(spec.options["k1"])
            trace = pi_run(cfg.system, cfg.cost, k1, max_iters=iters, tol=tol)
            row["episodes_configured"] = iters
            row["episodes_completed"] = len(trace)
            row["final_err_P"] = _fmt(trace.errors[-1])
            row["final_err_K"] = _fmt(np.linalg.norm(trace.Ks[-1] - trace.K_star, "fro"))
            row["episodes_to_tol"] = _episodes_to_tol(trace.errors, cfg.conv_tol) or ""
            with open(trace_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["iteration", "err_P"])
                for i, e in enumerate(trace.errors, start=1):
                    writer.writerow([i, _fmt(e)])
        elif spec.method == "ipi":
            run_cfg = _build_ipi_config(cfg, spec)
            row["tau"] = run_cfg.tau
            row["min_episode_length_required"] = 1
            trace = ipi_mod.ipi_run(cfg.system, cfg.cost, run_cfg)
            report = build_persistency_report(trace.episode_gramians())
            inputs = trace.bound_inputs()
            err_p = np.asarray(trace.err_P)
            dominates = bool(
                np.all(ipi_mod.interconnection_bound_series(trace, inputs) >= err_p)
                and np.all(ipi_mod.composed_error_bound_series(
                    trace, report, inputs) >= err_p))
            row["episodes_configured"] = run_cfg.episodes
            row["episodes_completed"] = trace.episodes
            row["final_err_P"] = _fmt(trace.err_P[-1])
            row["final_err_K"] = _fmt(trace.err_K_post[-1])
            row["episodes_to_tol"] = _episodes_to_tol(trace.err_K_post, cfg.conv_tol) or ""
            row["delta_theta_upper_final"] = _fmt(trace.delta_theta_upper[-1])
            verdict = ("locally_persistent" if report.locally_persistent
                       else f"non_persistent(count={report.max_nonpersistent})")
            row["persistency_verdict"] = (
                f"{verdict};n_max={report.n_max};"
                f"alpha_min={format(report.alpha_min, '.3e')}")
            row["bounds_dominate"] = "yes" if dominates else "no"
            ipi_mod.export_ipi_trace(trace, trace_path)
        else:  # dpi
            run_cfg = _build_dpi_config(cfg, spec)
            row["tau"] = run_cfg.tau
            row["min_episode_length_required"] = dpi_mod.min_episode_length(
                cfg.system.n_x, cfg.system.n_u)
            trace = dpi_mod.dpi_run(cfg.system, cfg.cost, run_cfg)
            row["episodes_configured"] = run_cfg.episodes
            row["episodes_completed"] = trace.episodes
            row["final_err_P"] = _fmt(trace.err_P[-1])
            row["final_err_K"] = _fmt(trace.err_K_post[-1])
            row["episodes_to_tol"] = _episodes_to_tol(trace.err_K_post, cfg.conv_tol) or ""
            n_ep = trace.episodes
            row["persistency_verdict"] = (
                f"phi_windows={sum(trace.phi_persistent)}/{n_ep};"
                f"gamma_windows={sum(trace.gamma_persistent)}/{n_ep}")
            trace.to_csv(trace_path)
        row["status"] = "ok" if not getattr(trace, "diverged", False) else "diverged"
    except Underdetermined as exc:
        row["status"] = f"underdetermined:{exc.stage}:episode{exc.episode}"
    except (DdlqrError, ValueError) as exc:
        row["status"] = f"error:{type(exc).__name__}"
    row["_trace_file"] = trace_path.name if trace_path.exists() else ""
    return row


def run_experiment(config_path, output_root=None, max_workers=None) -> Path:
    """Execute every run in the config; returns the manifest path.

    Per-run failures are recorded in the summary, not raised; exit-code
    policy is handled by the CLI.
    """
    cfg = load_config(config_path)
    root = Path(output_root or os.environ.get(OUTPUT_ROOT_ENV)
                or cfg.output or "runs")
    out_dir = root / cfg.name
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = {}
    workers = max_workers or min(4, max(1, len(cfg.runs)))
    if cfg.runs:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_execute_run, cfg, spec, out_dir): spec
                       for spec in cfg.runs}
            for fut in concurrent.futures.as_completed(futures):
                row = fut.result()
                rows[row["run_id"]] = row

    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS,
                                extrasaction="ignore")
        writer.writeheader()
        for run_id in sorted(rows):
            writer.writerow(rows[run_id])

    manifest = {
        "experiment": cfg.name,
        "config_sha256": cfg.sha256,
        "config_text": cfg.raw_text,
        "conv_tol": cfg.conv_tol,
        "total_steps": cfg.total_steps,
        "summary_csv": summary_path.name,
        "runs": [{
            "id": rid,
            "method": rows[rid]["method"],
            "seed": rows[rid]["seed"],
            "status": rows[rid]["status"],
            "trace_csv": rows[rid]["_trace_file"],
        } for rid in sorted(rows)],
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def has_failures(manifest_path) -> bool:
    manifest = json.loads(Path(manifest_path).read_text())
    return any(r["status"] != "ok" for r in manifest["runs"])


def summarize(manifest_path) -> str:
    """Build the cross-method comparison table from a completed manifest;
    writes ``comparison.csv`` next to the manifest and returns rendered text."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise ConfigError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    out_dir = manifest_path.parent
    summary_path = out_dir / manifest["summary_csv"]
    if not summary_path.exists():
        raise ConfigError("manifest is incomplete: summary CSV missing")
    with open(summary_path, newline="") as fh:
        rows = list(csv.DictReader(fh))

    cols = ["run_id", "method", "tau", "min_episode_length_required",
            "persistency_verdict", "episodes_to_tol", "final_err_K",
            "bounds_dominate", "status"]
    lines = ["\t".join(cols)]
    for row in rows:
        lines.append("\t".join(str(row[c]) for c in cols))

    taus = {m: sorted({int(r["tau"]) for r in rows
                       if r["method"] == m and r["tau"]})
            for m in ("ipi", "dpi")}
    budget = manifest.get("total_steps")
    if budget is None:
        used = [int(r["tau"]) * int(r["episodes_configured"]) for r in rows
                if r["tau"] and r["episodes_configured"]]
        budget = max(used) if used else 0
    if budget and taus["ipi"] and taus["dpi"]:
        n_ipi, n_dpi = equal_budget_episodes(budget, min(taus["ipi"]),
                                             min(taus["dpi"]))
        lines.append(f"equal_budget_steps={budget}\tipi_episodes={n_ipi}"
                     f"\tdpi_episodes={n_dpi}")

    with open(out_dir / "comparison.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([row[c] for c in cols])
    return "\n".join(lines)
