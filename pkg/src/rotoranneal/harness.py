"""Deterministic parallel ensemble execution, sweeps, and the adiabatic
equilibrium scan.

Trajectories are processed in fixed-size batches; workers own whole batches,
so the thread count can never change what any trajectory computes. Output
files are written in trajectory-index order with canonical encoding.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .analysis import default_correlation_window, fit_correlation_length
from .config import ExperimentConfig, ResolvedConfig, resolve
from .errors import IntegrationFailureError, InsufficientDataError, InvalidParameterError
from .integrator import BatchResult, IntegrationConfig, derive_trajectory_seed, run_batch
from .model import control_parameter
from .observables import CorrelationProfile
from .runio import (
    MANIFEST_NAME,
    RunManifest,
    SERIES_NAME,
    SUMMARY_NAME,
    TRAJECTORIES_NAME,
    profile_to_dict,
    read_manifest,
    read_summary_csv,
    summary_rows,
    trajectory_line,
    utc_stamp,
    write_manifest,
    write_series_csv,
    write_summary_csv,
)
from .stats import EnsembleSummary, summarize

THREADS_ENV_VAR = "ROTORANNEAL_THREADS"
OBSERVABLE_NAMES = ("n1", "n2", "rho_e", "mz")
MAX_FAILURE_FRACTION = 0.01


def resolve_threads(explicit: int | None, rc: ResolvedConfig) -> int:
    """Worker count precedence: explicit argument, then the environment
    override, then the config, then a small default."""
    if explicit is not None and explicit > 0:
        return explicit
    env = os.environ.get(THREADS_ENV_VAR, "")
    if env.strip():
        try:
            val = int(env)
        except ValueError as exc:
            raise InvalidParameterError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}") from exc
        if val > 0:
            return val
    if rc.max_parallelism > 0:
        return rc.max_parallelism
    return min(4, os.cpu_count() or 1)


@dataclass
class EnsembleResult:
    rc: ResolvedConfig
    out_dir: Path | None
    seeds: np.ndarray
    finals: dict[str, np.ndarray]
    failed: np.ndarray
    fail_step: np.ndarray
    fail_site: np.ndarray
    summaries: list[EnsembleSummary]
    series_times: np.ndarray | None = None
    series_mean: dict[str, np.ndarray] | None = None
    series_se: dict[str, np.ndarray] | None = None
    series_rho_e: np.ndarray | None = None
    series_mz: np.ndarray | None = None
    profiles: list[dict[str, Any]] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return int(self.failed.sum())

    def summary(self, observable: str) -> EnsembleSummary:
        for s in self.summaries:
            if s.observable == observable:
                return s
        raise KeyError(observable)


def _batch_ranges(n: int, batch_size: int) -> list[tuple[int, int]]:
    return [(i, min(i + batch_size, n)) for i in range(0, n, batch_size)]


def run_ensemble(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                 threads: int | None = None, keep_series: bool = False) -> EnsembleResult:
    """Run n_trajectories independent trajectories and write NDJSON + CSV.

    seed_i derives from (base_seed, i) only; any degree of parallelism yields
    byte-identical outputs. Per-trajectory integration failures are recorded
    and skipped in the summaries; more than 1% of them fails the whole run.
    """
    rc = resolve(cfg)
    n_workers = resolve_threads(threads, rc)
    seeds = [derive_trajectory_seed(rc.base_seed, i) for i in range(rc.n_trajectories)]
    g = rc.graph_obj()
    schedule = rc.schedule_obj()
    params = rc.params_obj()
    icfg = IntegrationConfig(dt=rc.dt, scheme=rc.scheme, sample_times=rc.sample_times, seed=rc.base_seed)

    out_path: Path | None = None
    manifest = RunManifest(config_resolved=rc.to_dict(), started=utc_stamp())
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        write_manifest(out_path / MANIFEST_NAME, manifest)

    ranges = _batch_ranges(rc.n_trajectories, rc.batch_size)

    def work(span: tuple[int, int]) -> BatchResult:
        i0, i1 = span
        return run_batch(
            g, schedule, params, icfg, seeds[i0:i1],
            record_series=rc.record_series,
            correlator_times=rc.correlator_times,
            d_max=rc.d_max,
        )

    if n_workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            batches = list(pool.map(work, ranges))
    else:
        batches = [work(span) for span in ranges]

    finals = {k: np.concatenate([getattr(b, k) for b in batches]) for k in OBSERVABLE_NAMES}
    failed = np.concatenate([b.failed for b in batches])
    fail_step = np.concatenate([b.fail_step for b in batches])
    fail_site = np.concatenate([b.fail_site for b in batches])
    n_fail = int(failed.sum())

    series_times = series_mean = series_se = None
    series_rho_e = series_mz = None
    if rc.record_series:
        series_times = batches[0].series_times
        series_rho_e = np.concatenate([b.series_rho_e for b in batches], axis=0)
        series_mz = np.concatenate([b.series_mz for b in batches], axis=0)
        ok = ~failed
        n_ok = max(int(ok.sum()), 1)
        series_mean = {"rho_e": series_rho_e[ok].mean(axis=0), "mz": series_mz[ok].mean(axis=0)}
        series_se = {
            "rho_e": series_rho_e[ok].std(axis=0, ddof=1) / np.sqrt(n_ok) if n_ok > 1 else np.full_like(series_times, np.nan),
            "mz": series_mz[ok].std(axis=0, ddof=1) / np.sqrt(n_ok) if n_ok > 1 else np.full_like(series_times, np.nan),
        }

    profiles: list[dict[str, Any]] = []
    if rc.correlator_times:
        for ci, (x_val, t_corr) in enumerate(zip(rc.correlator_eps, rc.correlator_times)):
            acc = batches[0].corr_accums[ci]
            for b in batches[1:]:
                acc.merge(b.corr_accums[ci])
            acc.epsilon = control_parameter(schedule, g, t_corr)
            profile = acc.finalize()
            xi = r2 = None
            window = None
            try:
                window = default_correlation_window(profile, rc.r)
                xi, r2 = fit_correlation_length(profile, d_window=window)
            except InsufficientDataError:
                pass
            profiles.append({
                "eps_over_2r": x_val, "time": t_corr, "profile": profile,
                "xi": xi, "r_squared": r2, "window": window,
            })

    ok_mask = ~failed
    summaries = []
    for name in OBSERVABLE_NAMES:
        values = finals[name][ok_mask]
        if values.size >= 3:
            summaries.append(summarize(values, name, rc.fingerprint(), seed=rc.base_seed))

    result = EnsembleResult(
        rc=rc, out_dir=out_path, seeds=np.asarray(seeds, dtype=np.uint64),
        finals=finals, failed=failed, fail_step=fail_step, fail_site=fail_site,
        summaries=summaries,
        series_times=series_times, series_mean=series_mean, series_se=series_se,
        series_rho_e=series_rho_e if keep_series else None,
        series_mz=series_mz if keep_series else None,
        profiles=profiles,
    )

    if out_path is not None:
        _write_outputs(result, series_rho_e, series_mz)
        manifest.finished = utc_stamp()
        manifest.n_failed = n_fail
        write_manifest(out_path / MANIFEST_NAME, manifest)

    if n_fail > MAX_FAILURE_FRACTION * rc.n_trajectories:
        first = int(np.argmax(failed))
        raise IntegrationFailureError(
            f"{n_fail}/{rc.n_trajectories} trajectories failed integration "
            f"(first: index {first}, seed {int(result.seeds[first])}, step {int(fail_step[first])})",
            step_index=int(fail_step[first]), site_index=int(fail_site[first]),
            seed=int(result.seeds[first]),
        )
    return result


def _write_outputs(result: EnsembleResult, series_rho_e, series_mz) -> None:
    rc = result.rc
    out = result.out_dir
    assert out is not None
    lines = []
    for i in range(rc.n_trajectories):
        series = None
        if rc.record_series and not result.failed[i]:
            series = {
                "t": [float(t) for t in result.series_times],
                "rho_e": [float(v) for v in series_rho_e[i]],
                "mz": [float(v) for v in series_mz[i]],
            }
        lines.append(trajectory_line(
            index=i, seed=int(result.seeds[i]), failed=bool(result.failed[i]),
            n1=result.finals["n1"][i], n2=result.finals["n2"][i],
            rho_e=result.finals["rho_e"][i], mz=result.finals["mz"][i],
            fail_step=int(result.fail_step[i]), fail_site=int(result.fail_site[i]),
            series=series,
        ))
    (out / TRAJECTORIES_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")

    write_summary_csv(out / SUMMARY_NAME, summary_rows(rc, result.summaries, result.n_failed))

    if rc.record_series:
        write_series_csv(out / SERIES_NAME, result.series_times, result.series_mean, result.series_se)

    for k, info in enumerate(result.profiles):
        payload = profile_to_dict(
            info["profile"], info["eps_over_2r"], info["xi"], info["r_squared"], info["window"],
        )
        (out / f"correlation_{k:02d}.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cell_complete(cell_dir: Path) -> bool:
    manifest_path = cell_dir / MANIFEST_NAME
    if not manifest_path.exists() or not (cell_dir / SUMMARY_NAME).exists():
        return False
    try:
        data = read_manifest(manifest_path)
    except Exception:
        return False
    return bool(data.get("finished"))


def cell_slug(rc: ResolvedConfig) -> str:
    return f"N{rc.n}_r{rc.r}_tq{rc.tau_q:g}_g{rc.gamma:g}_{rc.fingerprint()[:8]}"


@dataclass
class SweepReport:
    out_dir: Path
    cells: list[dict[str, Any]]
    n_errors: int


def sweep(base: ExperimentConfig, deltas: Sequence[dict[str, Any]], out_dir: str | Path,
          threads: int | None = None, force: bool = False) -> SweepReport:
    """Run every cell (base config + delta); cells are independent and
    restartable: completed cells are skipped unless forced."""
    if not deltas:
        raise InvalidParameterError("sweep needs a non-empty list of deltas")
    out = Path(out_dir)
    cells_dir = out / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    all_rows = []
    cells = []
    n_errors = 0
    for delta in deltas:
        cfg = base.with_overrides(delta)
        rc = resolve(cfg)
        cdir = cells_dir / cell_slug(rc)
        status: dict[str, Any] = {"cell": cdir.name, "delta": delta}
        try:
            if force or not cell_complete(cdir):
                run_ensemble(cfg, cdir, threads=threads)
                status["state"] = "ran"
            else:
                status["state"] = "skipped"
            rows = read_summary_csv(cdir / SUMMARY_NAME)
            all_rows.extend(rows)
        except IntegrationFailureError as exc:
            status["state"] = "failed"
            status["error"] = str(exc)
            n_errors += 1
        cells.append(status)

    if all_rows:
        cols = list(all_rows[0].keys())
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in all_rows:
            writer.writerow(row)
        (out / "sweep_summary.csv").write_text(buf.getvalue(), encoding="utf-8")
    return SweepReport(out_dir=out, cells=cells, n_errors=n_errors)


def auto_slow_tau_q(r: int, gamma: float, mass: float, x_min: float,
                    margin: float = 3.0, min_ratio: float = 40.0) -> float:
    """Annealing time slow enough that every requested control-parameter value
    is sampled in equilibrium.

    Solves tau_q = ratio * t_hat(tau_q) with ratio = max(40, 2*margin/x_min):
    the closest sample then sits margin freeze-out widths outside the frozen
    window, and the whole ramp spans at least 40 freeze-out times.
    """
    if not 0 < x_min < 1:
        raise InvalidParameterError(f"x_min must be in (0, 1), got {x_min}")
    z_nu = 1.0 if gamma >= 1.0 else 0.5
    tau0 = gamma if gamma >= 1.0 else float(np.sqrt(mass))
    ratio = max(min_ratio, 2.0 * margin / x_min)
    a = z_nu / (z_nu + 1.0)
    return float(ratio ** (1.0 / (1.0 - a)) * tau0 * (4.0 * r) ** (-a / (1.0 - a)))


@dataclass
class EquilibriumReport:
    out_dir: Path | None
    tau_q: float
    profiles: list[dict[str, Any]]
    warnings: list[str]
    result: EnsembleResult


def equilibrium_scan(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                     threads: int | None = None, auto_slow: bool = True) -> EquilibriumReport:
    """Adiabatically slow anneal accumulating the correlator at the instants
    whose control parameter matches each requested eps/(2r); emits profiles
    plus the fitted correlation length per profile."""
    eps = cfg.outputs.correlator_eps
    if not eps:
        raise InvalidParameterError("equilibrium_scan needs outputs.correlator_eps")
    tau_q = cfg.schedule.tau_q
    if auto_slow:
        tau_q = max(tau_q, auto_slow_tau_q(cfg.graph.r, cfg.physics.gamma, cfg.physics.mass, min(eps)))
        cfg = cfg.with_overrides({"schedule": {"tau_q": tau_q}})
    result = run_ensemble(cfg, out_dir, threads=threads)
    warnings = []
    for info in result.profiles:
        requested = 2.0 * result.rc.r * info["eps_over_2r"]
        actual = info["profile"].epsilon
        if abs(actual - requested) > 1e-6 * max(1.0, abs(requested)):
            warnings.append(
                f"requested eps {requested:g} not on the sample grid; nearest sample has eps {actual:g}"
            )
    if result.out_dir is not None:
        _write_xi_fits(result)
    return EquilibriumReport(out_dir=result.out_dir, tau_q=tau_q, profiles=result.profiles,
                             warnings=warnings, result=result)


def _write_xi_fits(result: EnsembleResult) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["format_version", "r", "eps_over_2r", "epsilon", "xi", "r_squared",
                     "window_lo", "window_hi", "n_trajectories"])
    for info in result.profiles:
        p: CorrelationProfile = info["profile"]
        writer.writerow([
            1, result.rc.r, repr(info["eps_over_2r"]), repr(float(p.epsilon)),
            repr(info["xi"]) if info["xi"] is not None else "",
            repr(info["r_squared"]) if info["r_squared"] is not None else "",
            info["window"][0] if info["window"] else "", info["window"][1] if info["window"] else "",
            p.n_trajectories,
        ])
    (result.out_dir / "xi_fits.csv").write_text(buf.getvalue(), encoding="utf-8")
