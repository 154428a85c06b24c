"""Persistent output formats: run manifests (JSON), per-trajectory records
(NDJSON), summaries (CSV) and correlation profiles (JSON).

Every file embeds a format_version; readers reject unknown versions. The
NDJSON and CSV bytes are a pure function of the resolved config: records are
written in trajectory-index order with canonical JSON encoding, so re-runs at
any parallelism level reproduce them byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__ as _code_version
from .config import ResolvedConfig
from .errors import FormatVersionError
from .integrator import RNG_ALGORITHM
from .observables import CorrelationProfile

MANIFEST_VERSION = 1
TRAJECTORY_VERSION = 1
SUMMARY_VERSION = 1
SERIES_VERSION = 1
CORRELATION_VERSION = 1
REPORT_VERSION = 1

MANIFEST_NAME = "manifest.json"
TRAJECTORIES_NAME = "trajectories.ndjson"
SUMMARY_NAME = "summary.csv"
SERIES_NAME = "series_mean.csv"

SUMMARY_COLUMNS = [
    "format_version", "fingerprint", "n", "r", "connectance", "tau_q", "gamma",
    "temperature", "dt", "scheme", "base_seed", "observable", "count", "n_fail",
    "kappa1", "kappa2", "kappa3", "se_kappa1", "se_kappa2", "se_kappa3",
]


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _float(x: float) -> float | None:
    x = float(x)
    return None if not np.isfinite(x) else x


@dataclass
class RunManifest:
    config_resolved: dict[str, Any]
    code_version: str = _code_version
    numpy_version: str = np.__version__
    rng_algorithm: str = RNG_ALGORITHM
    seed_rule: str = "seed_i = SeedSequence(base_seed, spawn_key=(i,)).generate_state(1, uint64)[0]"
    started: str = ""
    finished: str = ""
    n_failed: int = 0
    format_version: int = MANIFEST_VERSION
    kind: str = "run_manifest"
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": self.format_version,
            "kind": self.kind,
            "code_version": self.code_version,
            "numpy_version": self.numpy_version,
            "rng_algorithm": self.rng_algorithm,
            "seed_rule": self.seed_rule,
            "config_resolved": self.config_resolved,
            "started": self.started,
            "finished": self.finished,
            "n_failed": self.n_failed,
            **self.extra,
        }


def utc_stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def write_manifest(path: Path, manifest: RunManifest) -> None:
    path.write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: Path) -> dict[str, Any]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format_version") != MANIFEST_VERSION:
        raise FormatVersionError(f"{path}: unknown manifest format_version {data.get('format_version')!r}")
    return data


def trajectory_line(index: int, seed: int, failed: bool, n1: float, n2: float,
                    rho_e: float, mz: float,
                    fail_step: int = -1, fail_site: int = -1,
                    series: dict[str, list[float]] | None = None) -> str:
    rec: dict[str, Any] = {
        "format_version": TRAJECTORY_VERSION,
        "index": index,
        "seed": int(seed),
        "failed": bool(failed),
        "n1": None if failed else _float(n1),
        "n2": None if failed else _float(n2),
        "rho_e": None if failed else _float(rho_e),
        "mz": None if failed else _float(mz),
    }
    if failed:
        rec["fail_step"] = int(fail_step)
        rec["fail_site"] = int(fail_site)
    if series is not None and not failed:
        rec["series"] = series
    return canonical_json(rec)


def read_trajectories(path: Path) -> list[dict[str, Any]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("format_version") != TRAJECTORY_VERSION:
                raise FormatVersionError(
                    f"{path}:{line_no + 1}: unknown trajectory format_version {rec.get('format_version')!r}"
                )
            out.append(rec)
    return out


def summary_rows(rc: ResolvedConfig, summaries: Iterable, n_fail: int) -> list[dict[str, Any]]:
    rows = []
    for s in summaries:
        rows.append({
            "format_version": SUMMARY_VERSION,
            "fingerprint": rc.fingerprint(),
            "n": rc.n, "r": rc.r, "connectance": repr(rc.connectance),
            "tau_q": repr(rc.tau_q), "gamma": repr(rc.gamma),
            "temperature": repr(rc.temperature), "dt": repr(rc.dt),
            "scheme": rc.scheme, "base_seed": rc.base_seed,
            "observable": s.observable, "count": s.count, "n_fail": n_fail,
            "kappa1": repr(s.kappa1), "kappa2": repr(s.kappa2), "kappa3": repr(s.kappa3),
            "se_kappa1": repr(s.se_kappa1), "se_kappa2": repr(s.se_kappa2), "se_kappa3": repr(s.se_kappa3),
        })
    return rows


def write_summary_csv(path: Path, rows: list[dict[str, Any]]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_summary_csv(path: Path) -> list[dict[str, Any]]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            if int(row.get("format_version", -1)) != SUMMARY_VERSION:
                raise FormatVersionError(f"{path}: unknown summary format_version {row.get('format_version')!r}")
            for key in ("connectance", "tau_q", "gamma", "temperature", "dt",
                        "kappa1", "kappa2", "kappa3", "se_kappa1", "se_kappa2", "se_kappa3"):
                row[key] = float(row[key])
            for key in ("n", "r", "count", "n_fail", "base_seed"):
                row[key] = int(row[key])
            rows.append(row)
    return rows


def write_series_csv(path: Path, times: np.ndarray, means: dict[str, np.ndarray],
                     ses: dict[str, np.ndarray]) -> None:
    buf = io.StringIO()
    names = sorted(means)
    cols = ["format_version", "time"] + [f"{k}_mean" for k in names] + [f"{k}_se" for k in names]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for i, t in enumerate(times):
        row = [SERIES_VERSION, repr(float(t))]
        row += [repr(float(means[k][i])) for k in names]
        row += [repr(float(ses[k][i])) for k in names]
        writer.writerow(row)
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_series_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise FormatVersionError(f"{path}: empty series file")
    if int(rows[0]["format_version"]) != SERIES_VERSION:
        raise FormatVersionError(f"{path}: unknown series format_version {rows[0]['format_version']!r}")
    out: dict[str, list[float]] = {k: [] for k in rows[0] if k != "format_version"}
    for row in rows:
        for k in out:
            out[k].append(float(row[k]))
    return {k: np.asarray(v) for k, v in out.items()}


def profile_to_dict(profile: CorrelationProfile, eps_over_2r: float, xi: float | None,
                    xi_r2: float | None, window: tuple[float, float] | None) -> dict[str, Any]:
    return {
        "format_version": CORRELATION_VERSION,
        "kind": "correlation_profile",
        "epsilon": _float(profile.epsilon),
        "eps_over_2r": _float(eps_over_2r),
        "n_trajectories": profile.n_trajectories,
        "distances": profile.distances.tolist(),
        "g_values": [_float(x) for x in profile.g_values],
        "g_errors": [_float(x) for x in profile.g_errors],
        "xi": _float(xi) if xi is not None else None,
        "xi_r_squared": _float(xi_r2) if xi_r2 is not None else None,
        "fit_window": list(window) if window is not None else None,
    }


def read_profile(path: Path) -> dict[str, Any]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format_version") != CORRELATION_VERSION:
        raise FormatVersionError(f"{path}: unknown correlation format_version {data.get('format_version')!r}")
    return data
