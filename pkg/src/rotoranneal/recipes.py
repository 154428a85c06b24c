"""Analysis recipes over persisted run outputs: KZ exponent fits, exponential
fits, scaling collapses, cumulant ratios, and scale predictions.

Each recipe writes a machine-readable JSON result echoing its inputs and
windows, a short text report, and (by default) a rendered figure.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .analysis import collapse_score, fit_exponential, fit_power_law, kz_fit_mask, kz_predict
from .errors import InsufficientDataError, InvalidParameterError
from .graph import new_circulant
from .runio import REPORT_VERSION, read_manifest, read_series_csv, read_summary_csv
from .stats import EnsembleSummary, cumulant_ratios
from . import plots

RECIPES = ("kzfit", "expfit", "collapse", "cumulantratios", "predict")

COUNT_SCALES = {"n1": lambda n, r: n, "n2": lambda n, r: n * r,
                "rho_e": lambda n, r: 1.0, "mz": lambda n, r: 1.0}


@dataclass
class RecipeReport:
    name: str
    data: dict[str, Any]
    text: str

    def write(self, out_dir: Path, figures: bool = True) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {"format_version": REPORT_VERSION, "recipe": self.name, **self.data}
        (out_dir / f"{self.name}.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2, default=_jsonable) + "\n", encoding="utf-8")
        (out_dir / f"{self.name}.txt").write_text(self.text, encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def load_summary_rows(paths: Sequence[str | Path], observable: str) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for p in paths:
        rows.extend(r for r in read_summary_csv(Path(p)) if r["observable"] == observable)
    if not rows:
        raise InsufficientDataError(f"no rows for observable {observable!r} in {list(map(str, paths))}")
    return rows


def kzfit_recipe(inputs: Sequence[str | Path], observable: str = "n1",
                 z_nu: float | None = None, tau0: float | None = None,
                 out_dir: Path | None = None, figures: bool = True) -> RecipeReport:
    """Per-range power-law fits of the final defect density against tau_q.

    Points flagged fast-quench (tau_q < 3 tau_fast, when tau0 and z_nu are
    given) or adiabatic (kappa1 < 3/N) are excluded from the fit windows.
    """
    rows = load_summary_rows(inputs, observable)
    groups: dict[int, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["r"], []).append(row)

    out_groups = []
    for r, grp in sorted(groups.items()):
        grp = sorted(grp, key=lambda row: row["tau_q"])
        tq = np.array([row["tau_q"] for row in grp])
        k1 = np.array([row["kappa1"] for row in grp])
        n_sites = grp[0]["n"]
        tau_fast = None
        if tau0 is not None and z_nu is not None:
            tau_fast = tau0 ** ((z_nu + 1.0) / z_nu) * r ** (-z_nu)
        mask = kz_fit_mask(tq, k1, n_sites, tau_fast=tau_fast)
        entry: dict[str, Any] = {
            "r": r, "n": n_sites, "observable": observable,
            "tau_q": tq.tolist(), "kappa1": k1.tolist(),
            "excluded": tq[~mask].tolist(),
        }
        try:
            fit = fit_power_law(tq[mask], k1[mask])
            entry.update(exponent=fit.exponent, prefactor=fit.prefactor,
                         r_squared=fit.r_squared, window=list(fit.window),
                         n_points=fit.n_points)
        except (InsufficientDataError, InvalidParameterError) as exc:
            entry.update(exponent=None, prefactor=None, error=str(exc))
        out_groups.append(entry)

    prefactor_check = None
    fitted = [g for g in out_groups if g.get("exponent") is not None]
    if len(fitted) >= 2:
        rs = np.array([g["r"] for g in fitted], dtype=float)
        pre = np.array([g["prefactor"] for g in fitted])
        slope = float(np.polyfit(np.log(rs), np.log(pre), 1)[0])
        base = fitted[0]
        ratios = {
            f"r{int(g['r'])}/r{int(base['r'])}": g["prefactor"] / base["prefactor"]
            for g in fitted[1:]
        }
        prefactor_check = {"r_exponent": slope, "ratios": ratios}

    lines = [f"KZ power-law fits for {observable}"]
    for g in out_groups:
        if g.get("exponent") is not None:
            lines.append(
                f"  r={g['r']:>3}: exponent={g['exponent']:+.4f}  prefactor={g['prefactor']:.4g}  "
                f"R^2={g['r_squared']:.4f}  points={g['n_points']}  excluded={g['excluded']}"
            )
        else:
            lines.append(f"  r={g['r']:>3}: fit unavailable ({g.get('error')})")
    if prefactor_check:
        lines.append(f"  prefactor r-exponent: {prefactor_check['r_exponent']:+.3f}")
        for k, v in prefactor_check["ratios"].items():
            lines.append(f"    prefactor ratio {k}: {v:.4g}")
    report = RecipeReport("kzfit", {
        "observable": observable, "inputs": [str(p) for p in inputs],
        "groups": out_groups, "prefactor_check": prefactor_check,
    }, "\n".join(lines) + "\n")
    if out_dir is not None:
        report.write(out_dir)
        if figures:
            plot_groups = [dict(g, observable=observable) for g in out_groups]
            plots.save_kz_fit(out_dir / "kzfit.png", plot_groups)
    return report


def expfit_recipe(inputs: Sequence[str | Path], observable: str = "n1",
                  r_power: float = 0.5, out_dir: Path | None = None,
                  figures: bool = True, min_kappa1: float = 0.0) -> RecipeReport:
    """Exponential fit of the defect density against the r^p tau_q axis."""
    rows = load_summary_rows(inputs, observable)
    rows = [row for row in rows if row["kappa1"] > min_kappa1]
    if len(rows) < 3:
        raise InsufficientDataError("need at least 3 usable points for the exponential fit")
    x = np.array([row["r"] ** r_power * row["tau_q"] for row in rows])
    y = np.array([row["kappa1"] for row in rows])
    order = np.argsort(x)
    x, y = x[order], y[order]
    fit = fit_exponential(x, y)
    text = (
        f"exponential fit of {observable} vs r^{r_power:.3g} * tau_q\n"
        f"  rate = {fit.rate:+.4f}   |rate| = {abs(fit.rate):.4f}\n"
        f"  prefactor = {fit.prefactor:.4g}   R^2 = {fit.r_squared:.4f}   points = {fit.n_points}\n"
    )
    report = RecipeReport("expfit", {
        "observable": observable, "inputs": [str(p) for p in inputs],
        "r_power": r_power, "rate": fit.rate, "prefactor": fit.prefactor,
        "r_squared": fit.r_squared, "n_points": fit.n_points,
        "x": x.tolist(), "kappa1": y.tolist(),
    }, text)
    if out_dir is not None:
        report.write(out_dir)
        if figures:
            plots.save_exp_fit(out_dir / "expfit.png", x, y, fit.rate, fit.prefactor,
                               xlabel=f"r^{r_power:.3g} tau_q", ylabel=observable)
    return report


def _load_series_run(run_dir: Path) -> dict[str, Any]:
    manifest = read_manifest(run_dir / "manifest.json")
    rc = manifest["config_resolved"]
    series = read_series_csv(run_dir / "series_mean.csv")
    return {"r": rc["r"], "n": rc["n"], "tau_q": rc["tau_q"], "gamma": rc["gamma"],
            "times": series["time"], "rho_e": series["rho_e_mean"], "mz": series["mz_mean"]}


def collapse_series_recipe(run_dirs: Sequence[str | Path], x_mode: str = "t_hat",
                           z_nu: float = 1.0, tau0: float = 1.0,
                           window_widths: float = 2.0, y_mode: str = "peak",
                           out_dir: Path | None = None, figures: bool = True) -> RecipeReport:
    """Collapse of the excess-energy time series around the critical time.

    x is (t - t_c) over the freeze-out time (or over tau_q for the control
    comparison); y is the mean rho_e(t), peak-normalized by default so the
    score tests the universal shape rather than the amplitude prefactor.
    """
    if x_mode not in ("t_hat", "tau_q"):
        raise InvalidParameterError(f"x_mode must be 't_hat' or 'tau_q', got {x_mode!r}")
    runs = [_load_series_run(Path(d)) for d in run_dirs]
    curves = []
    for run in runs:
        t_c = 0.5 * run["tau_q"]
        t_hat = kz_predict(z_nu, 0.5, max(run["r"], 1), run["n"], run["tau_q"], tau0=tau0).t_hat
        sel = np.abs(run["times"] - t_c) <= window_widths * t_hat
        if sel.sum() < 4:
            raise InsufficientDataError(
                f"run with tau_q={run['tau_q']} has {int(sel.sum())} samples inside the window"
            )
        x = (run["times"][sel] - t_c) / (t_hat if x_mode == "t_hat" else run["tau_q"])
        y = run["rho_e"][sel]
        if y_mode == "peak":
            y = y / np.max(np.abs(y))
        label = f"r={run['r']}, tau_q={run['tau_q']:g}"
        curves.append((x, y, label))
    score = collapse_score(curves)
    text = (
        f"rho_E(t) collapse, x = (t - t_c)/{x_mode}, y = {y_mode}\n"
        f"  runs: {[c[2] for c in curves]}\n  score = {score:.5f}\n"
    )
    report = RecipeReport("collapse", {
        "mode": "series", "x_mode": x_mode, "y_mode": y_mode, "z_nu": z_nu, "tau0": tau0,
        "inputs": [str(d) for d in run_dirs], "score": score,
    }, text)
    if out_dir is not None:
        report.write(out_dir)
        if figures:
            plots.save_collapse(out_dir / "collapse.png", curves, score,
                                xlabel=f"(t - t_c)/{x_mode}", ylabel="rho_e (rescaled)")
    return report


def collapse_scaling_recipe(inputs: Sequence[str | Path], observable: str = "n1",
                            r_exponent: float = 5.0, out_dir: Path | None = None,
                            figures: bool = True) -> RecipeReport:
    """Collapse of final densities on the r^a tau_q axis (log-x interpolation)."""
    rows = load_summary_rows(inputs, observable)
    groups: dict[int, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["r"], []).append(row)
    if len(groups) < 2:
        raise InsufficientDataError("scaling collapse needs at least two interaction ranges")
    curves = []
    for r, grp in sorted(groups.items()):
        grp = sorted(grp, key=lambda row: row["tau_q"])
        x = np.array([np.log(row["r"] ** r_exponent * row["tau_q"]) for row in grp])
        y = np.array([row["kappa1"] for row in grp])
        curves.append((x, y, f"r={r}"))
    score = collapse_score(curves)
    text = (
        f"{observable} collapse on the r^{r_exponent:g} tau_q axis\n"
        f"  ranges: {sorted(groups)}\n  score = {score:.5f}\n"
    )
    report = RecipeReport("collapse", {
        "mode": "scaling", "observable": observable, "r_exponent": r_exponent,
        "inputs": [str(p) for p in inputs], "score": score,
    }, text)
    if out_dir is not None:
        report.write(out_dir)
        if figures:
            plots.save_collapse(out_dir / "collapse.png", curves, score,
                                xlabel=f"ln(r^{r_exponent:g} tau_q)", ylabel=observable, logy=True)
    return report


def cumulant_ratio_recipe(inputs: Sequence[str | Path], observable: str = "n1",
                          scale: str = "counts", out_dir: Path | None = None,
                          figures: bool = True) -> RecipeReport:
    """kappa2/kappa1 and kappa3/kappa1 per cell, defect densities rescaled to
    counts (n1 -> N n1, n2 -> N r n2) so ratios are comparable to the chain
    reference value."""
    rows = load_summary_rows(inputs, observable)
    entries = []
    for row in sorted(rows, key=lambda row: (row["r"], row["tau_q"])):
        factor = COUNT_SCALES[observable](row["n"], row["r"]) if scale == "counts" else 1.0
        summ = EnsembleSummary(
            observable=observable, count=row["count"],
            kappa1=row["kappa1"] * factor, kappa2=row["kappa2"] * factor ** 2,
            kappa3=row["kappa3"] * factor ** 3,
            se_kappa1=row["se_kappa1"] * factor, se_kappa2=row["se_kappa2"] * factor ** 2,
            se_kappa3=row["se_kappa3"] * factor ** 3,
        )
        (r21, se21), (r31, se31) = cumulant_ratios(summ)
        entries.append({
            "r": row["r"], "n": row["n"], "connectance": row["connectance"],
            "tau_q": row["tau_q"], "ratio21": r21, "se21": se21,
            "ratio31": r31, "se31": se31, "count": row["count"],
        })
    lines = [f"cumulant ratios for {observable} (scale = {scale})"]
    for e in entries:
        lines.append(
            f"  r={e['r']:>3} tau_q={e['tau_q']:<8g} c={e['connectance']:.4f}  "
            f"k2/k1 = {e['ratio21']:+.4f} +- {e['se21']:.4f}   k3/k1 = {e['ratio31']:+.4f} +- {e['se31']:.4f}"
        )
    report = RecipeReport("cumulantratios", {
        "observable": observable, "scale": scale,
        "inputs": [str(p) for p in inputs], "entries": entries,
    }, "\n".join(lines) + "\n")
    if out_dir is not None:
        report.write(out_dir)
        if figures:
            cs = np.array([e["connectance"] for e in entries])
            ratios = np.array([e["ratio21"] for e in entries])
            errs = np.array([e["se21"] for e in entries])
            plots.save_ratio_trend(out_dir / "cumulantratios.png", cs, ratios, errs,
                                   ylabel=f"kappa2/kappa1 ({observable})")
    return report


def predict_recipe(z_nu: float, nu: float, r: int, n: int, tau_q: float,
                   tau0: float = 1.0, xi0: float = 1.0,
                   out_dir: Path | None = None, figures: bool = True) -> RecipeReport:
    """Freeze-out scales, thresholds and breakdown margin for one configuration."""
    pred = kz_predict(z_nu, nu, r, n, tau_q, tau0=tau0, xi0=xi0)
    g = new_circulant(n, r)
    c = 2.0 * r / (n - 1)
    if tau_q < pred.tau_fast:
        regime = "fast-quench"
    elif tau_q > pred.tau_ad:
        regime = "adiabatic"
    else:
        regime = "kibble-zurek"
    text = (
        f"prediction for z*nu={z_nu:g}, nu={nu:g}, N={n}, r={r}, tau_q={tau_q:g}\n"
        f"  connectance c        = {c:.4f}\n"
        f"  freeze-out time t^   = {pred.t_hat:.6g}\n"
        f"  freeze-out length xi^= {pred.xi_hat:.6g}\n"
        f"  tau_fast             = {pred.tau_fast:.6g}\n"
        f"  tau_ad               = {pred.tau_ad:.6g}\n"
        f"  breakdown r/N scale  = {pred.breakdown_ratio:.6g}\n"
        f"  n1 ~ tau_q^{pred.n1_tau_exponent:+.4f} r^{pred.n1_r_exponent:+.4f}\n"
        f"  regime of tau_q      = {regime}\n"
    )
    report = RecipeReport("predict", {
        "z_nu": z_nu, "nu": nu, "r": r, "n": n, "tau_q": tau_q,
        "tau0": tau0, "xi0": xi0, "connectance": c, "t_hat": pred.t_hat,
        "xi_hat": pred.xi_hat, "tau_fast": pred.tau_fast, "tau_ad": pred.tau_ad,
        "breakdown_ratio": pred.breakdown_ratio, "regime": regime,
        "n1_tau_exponent": pred.n1_tau_exponent, "n1_r_exponent": pred.n1_r_exponent,
    }, text)
    if out_dir is not None:
        report.write(out_dir)
    return report
