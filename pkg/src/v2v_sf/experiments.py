"""Named figure reproductions and single-key parameter sweeps.

Every run writes CSV files (canonical) plus a JSON metadata sidecar and a
gnuplot script for convenience. Output is deterministic for a fixed
configuration: floats are written with ``repr`` and no timestamps are
recorded.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .config import ExperimentConfig, build_config, load_config
from .errors import ParameterError
from .lane_geometry import AntennaCase
from .link_analysis import (
    approx_large,
    approx_small,
    coverage_ccdf,
    mh_inverse,
    mh_transform,
    sf_ccdf,
    upper_limit,
)
from .monte_carlo import baseline_ppp_ccdf, run_campaigns

log = logging.getLogger(__name__)

CASES = (AntennaCase.C1, AntennaCase.C2)

UNITS = {
    "sigma": "SF threshold (1)",
    "mh": "SF threshold in MH units (1)",
    "gamma_t": "SINR threshold (linear)",
    "pt_w": "transmit power (W)",
    "index": "sweep point (1)",
    "d_s": "safety distance (m)",
    "alpha": "path-loss exponent (1)",
    "target": "exact CCDF level (1)",
    "relative_error_pct": "relative error (%)",
}


@dataclass
class ResultTable:
    name: str
    columns: list
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.rows.shape[1] != len(self.columns):
            raise ParameterError(f"{self.name}: {self.rows.shape[1]} values per row for {len(self.columns)} columns")

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def to_csv(self, path) -> Path:
        path = Path(path)
        lines = [f"# {self.name}"]
        for col in self.columns:
            lines.append(f"# {col}: {UNITS.get(col, 'probability (1)')}")
        if "config_hash" in self.metadata:
            lines.append(f"# config_hash: {self.metadata['config_hash']}")
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(repr(float(v)) for v in row))
        path.write_text("\n".join(lines) + "\n")
        return path

    def write_sidecar(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.metadata, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, AntennaCase):
        return obj.value
    return str(obj)


def _emit(table: ResultTable, out_dir: Path | None, plot_x: str | None = None, logscale: bool = False) -> None:
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = table.to_csv(out_dir / f"{table.name}.csv")
    table.write_sidecar(out_dir / f"{table.name}.json")
    if plot_x is not None:
        write_plot_script(csv_path, table.columns, plot_x, logscale)


def write_plot_script(csv_path: Path, columns, x: str, logscale: bool = False) -> Path:
    """Gnuplot script drawing every non-x column of ``csv_path`` against ``x``."""
    xi = columns.index(x) + 1
    plots = [
        f"'{csv_path.name}' using {xi}:{i + 1} with lines title '{c}'"
        for i, c in enumerate(columns)
        if c != x
    ]
    text = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set xlabel '{UNITS.get(x, x)}'",
        "set ylabel 'CCDF'",
        "set yrange [0:1]",
        "set terminal pngcairo size 900,600",
        f"set output '{csv_path.stem}.png'",
    ]
    if logscale:
        text.append("set logscale x")
    text.append("plot " + ", \\\n     ".join(plots))
    path = csv_path.with_suffix(".gp")
    path.write_text("\n".join(text) + "\n")
    return path


def _base_meta(cfg: ExperimentConfig) -> dict:
    return {"config": cfg.snapshot(), "config_hash": cfg.digest(), "rho": cfg.radio.rho}


# --- fig 1 --------------------------------------------------------------------


def fig1(cfg: ExperimentConfig, out_dir: Path | None = None, alphas=(3.0, 4.0)) -> list[ResultTable]:
    """Analytic, Monte Carlo and replacement-PPP SF CCDFs for both antennas."""
    grid = cfg.sigma_grid
    sim = cfg.sim()
    curves = run_campaigns(sim, CASES, alphas, workers=cfg.workers)
    tables = []
    for a in alphas:
        c = replace(cfg, alpha=a)
        cols = {"sigma": grid}
        meta = _base_meta(c)
        for case in CASES:
            cols[f"analytic_{case.value}"] = sf_ccdf(case, c.radio, c.geometry, grid)
        for case in CASES:
            mc = curves[(case, a)]
            cols[f"mc_{case.value}"] = mc.values
            meta[f"mc_{case.value}"] = mc.metadata
        for case in CASES:
            cols[f"baseline_{case.value}"] = baseline_ppp_ccdf(c.sim(case)).values
        for case in CASES:
            meta[f"sup_error_analytic_{case.value}"] = float(np.max(np.abs(cols[f"analytic_{case.value}"] - cols[f"mc_{case.value}"])))
            meta[f"sup_error_baseline_{case.value}"] = float(np.max(np.abs(cols[f"baseline_{case.value}"] - cols[f"mc_{case.value}"])))
        name = f"fig1_alpha{a:g}"
        table = ResultTable(name, list(cols), np.column_stack(list(cols.values())), meta)
        _emit(table, out_dir, plot_x="sigma")
        tables.append(table)
    return tables


# --- fig 2 --------------------------------------------------------------------


def _solve_gamma(fn, target: float, lo: float = 1e-12, hi: float = 1e12) -> float:
    """Threshold at which a decreasing CCDF crosses ``target`` (bracketed root search in log space)."""
    f = lambda lg: fn(10.0**lg) - target  # noqa: E731
    return 10.0 ** brentq(f, np.log10(lo), np.log10(hi), xtol=1e-13, rtol=1e-13)


def approximation_probe(cfg: ExperimentConfig, case=AntennaCase.C1) -> dict:
    """Relative errors of the small- and large-threshold approximations at the
    points where the exact CCDF equals 0.99 and 0.05."""
    radio, geo = cfg.radio, cfg.geometry
    exact = lambda g: float(coverage_ccdf(case, radio, geo, g))  # noqa: E731
    out = {}
    for label, target, approx in (("F1", 0.99, approx_small), ("F2", 0.05, approx_large)):
        g = _solve_gamma(exact, target)
        ex = exact(g)
        ap = float(approx(case, radio, geo, g))
        out[label] = {
            "target": target,
            "gamma_t": g,
            "sigma": float(mh_inverse(g)),
            "exact": ex,
            "approx": ap,
            "relative_error_pct": 100.0 * (ap - ex) / ex,
        }
    return out


def fig2(cfg: ExperimentConfig, out_dir: Path | None = None) -> list[ResultTable]:
    """Exact SF CCDF against its small- and large-threshold approximations."""
    case = AntennaCase.C1
    radio, geo = cfg.radio, cfg.geometry
    mh = np.concatenate([[0.0], np.logspace(-5, 5, cfg.sigma_points - 1)])
    sigma = mh_inverse(mh)
    cols = {
        "sigma": sigma,
        "mh": mh,
        "exact": coverage_ccdf(case, radio, geo, mh),
        "approx_F1": approx_small(case, radio, geo, mh),
        "approx_F2": approx_large(case, radio, geo, mh),
    }
    meta = _base_meta(cfg)
    curve = ResultTable("fig2", list(cols), np.column_stack(list(cols.values())), meta)
    _emit(curve, out_dir, plot_x="mh", logscale=True)

    probe = approximation_probe(cfg, case)
    rows = [[v["target"], v["gamma_t"], v["sigma"], v["exact"], v["approx"], v["relative_error_pct"]] for v in probe.values()]
    probe_table = ResultTable(
        "fig2_probe",
        ["target", "gamma_t", "sigma", "exact", "approx", "relative_error_pct"],
        rows,
        {**meta, "approximations": list(probe)},
    )
    _emit(probe_table, out_dir)
    return [curve, probe_table]


# --- fig 3 --------------------------------------------------------------------


def fig3(cfg: ExperimentConfig, out_dir: Path | None = None, sigma_mh: float = 0.5, pt_w=None) -> list[ResultTable]:
    """SF CCDF at a fixed threshold against transmit power, with the noise-free ceiling."""
    pt_w = np.logspace(-2, 1, 31) if pt_w is None else np.asarray(pt_w, dtype=float)
    sigma = float(mh_inverse(sigma_mh))
    cols = {"pt_w": pt_w}
    for case in CASES:
        cols[f"sf_{case.value}"] = np.array(
            [sf_ccdf(case, replace(cfg.radio, P_t=p), cfg.geometry, sigma) for p in pt_w]
        )
    for case in CASES:
        cols[f"limit_{case.value}"] = np.full(pt_w.shape, upper_limit(case, cfg.radio, cfg.geometry, sigma))
    meta = {**_base_meta(cfg), "sigma": sigma, "sigma_mh": sigma_mh}
    table = ResultTable("fig3", list(cols), np.column_stack(list(cols.values())), meta)
    _emit(table, out_dir, plot_x="pt_w", logscale=True)
    return [table]


NAMED = {
    "fig1": (fig1, {"d_s": 145.0}),
    "fig2": (fig2, {"lambda_p": 0.2, "d_s": 45.0}),
    "fig3": (fig3, {"d_s": 95.0}),
}


def named_config(name: str, overrides: dict | None = None) -> ExperimentConfig:
    if name not in NAMED:
        raise KeyError(name)
    _, preset = NAMED[name]
    base = build_config(preset, notify_defaults=False)
    return build_config(overrides or {}, base=base, notify_defaults=False)


def run_named(name: str, overrides: dict | None = None, out_dir=None) -> list[ResultTable]:
    """Reproduce one of the figures; ``overrides`` maps config keys to values."""
    if name not in NAMED:
        raise ParameterError(f"unknown experiment {name!r}; choose from {sorted(NAMED)}")
    cfg = named_config(name, overrides)
    fn, _ = NAMED[name]
    return fn(cfg, None if out_dir is None else Path(out_dir))


# --- sweeps -------------------------------------------------------------------


def _curves_for(cfg: ExperimentConfig) -> dict:
    grid = cfg.sigma_grid
    case = AntennaCase.parse(cfg.case)
    radio, geo = cfg.radio, cfg.geometry
    cols = {"sigma": grid}
    meta = {}
    for kind in cfg.curves:
        if kind == "analytic":
            cols["analytic"] = sf_ccdf(case, radio, geo, grid)
        elif kind == "approx-F1":
            cols["approx_F1"] = approx_small(case, radio, geo, mh_transform(grid))
        elif kind == "approx-F2":
            cols["approx_F2"] = approx_large(case, radio, geo, mh_transform(grid))
        elif kind == "baseline-ppp":
            cols["baseline"] = baseline_ppp_ccdf(cfg.sim()).values
        elif kind == "monte-carlo":
            curve = run_campaigns(cfg.sim(), [case], [cfg.alpha], workers=cfg.workers)[(case, cfg.alpha)]
            cols["mc"] = curve.values
            meta["mc"] = curve.metadata
    return cols, meta


def run_sweep(config_path, output_dir) -> list[ResultTable]:
    """Sweep ``sweep_key`` over ``sweep_values``, one CSV per value plus a summary."""
    cfg = load_config(config_path)
    out = Path(output_dir)
    values = cfg.sweep_values if cfg.sweep_key else ("",)
    tables = []
    summary = []
    for i, raw in enumerate(values):
        c = cfg.with_value(cfg.sweep_key, raw) if cfg.sweep_key else cfg
        cols, extra = _curves_for(c)
        label = f"{cfg.sweep_key}={raw}" if cfg.sweep_key else "base"
        name = f"sweep_{i:02d}_{cfg.sweep_key}_{raw}" if cfg.sweep_key else "sweep"
        meta = {**_base_meta(c), **extra, "sweep_point": label}
        table = ResultTable(name.replace(" ", ""), list(cols), np.column_stack(list(cols.values())), meta)
        _emit(table, out, plot_x="sigma")
        tables.append(table)
        srow = [i, float(c.d_s), float(c.alpha)]
        srow += [float(np.mean(v)) for k, v in cols.items() if k != "sigma"]
        summary.append(srow)
    scols = ["index", "d_s", "alpha"] + [f"mean_{k}" for k in tables[0].columns if k != "sigma"]
    summary_table = ResultTable("sweep_summary", scols, summary, {**_base_meta(cfg), "points": [str(v) for v in values]})
    _emit(summary_table, out)
    return tables + [summary_table]
