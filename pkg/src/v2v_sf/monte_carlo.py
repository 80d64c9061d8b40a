"""Monte Carlo ground truth for the inter-lane link and the PPP baseline.

A trial deploys a two-lane field (typical vehicle of lane 1 at the origin),
picks the serving lane-2 vehicle, draws unit-mean exponential fading powers
for every vehicle and evaluates

    SINR = h_s r_s^-alpha / (sum_u h_u |u|^-alpha + rho),   SF = SINR / (SINR + 1)

with the sum over the case-visible transmitters other than the typical
vehicle and the server. Powers are normalised by ``P_t C``.

Trial ``i`` of a campaign with master seed ``s`` draws everything from
``realization_rng(s, i)``, so a campaign is reproducible bit for bit no
matter how it is chunked or how many worker processes run it.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ParameterError
from .hardcore_process import realization_rng, retained_mask
from .lane_geometry import (
    AntennaCase,
    Geometry,
    VehicleField,
    generate_palm,
    generate_stationary,
    integrate_piecewise,
)
from .link_analysis import CcdfCurve, LinkModel, RadioConfig, ccdf_from_model, mh_inverse, mh_transform

log = logging.getLogger(__name__)

CHUNK = 500
SF_ONE_MINUS = float(np.nextafter(1.0, 0.0))
DISCARD_WARN_RATE = 0.2


def default_sigma_grid(n: int = 199, mh_min: float = 1e-4, mh_max: float = 1e4, spacing: str = "log") -> np.ndarray:
    """SF grid built in MH space and mapped back to sigma.

    ``spacing="log"`` gives zero followed by ``n - 1`` log-spaced MH values
    on ``[mh_min, mh_max]``, which resolves both the steep drop near zero
    and the tail towards one. ``spacing="uniform"`` spreads ``n`` points
    evenly on ``[0, mh_max]``.
    """
    if spacing == "log":
        mh = np.concatenate([[0.0], np.logspace(np.log10(mh_min), np.log10(mh_max), n - 1)])
    elif spacing == "uniform":
        mh = np.linspace(0.0, mh_max, n)
    else:
        raise ParameterError(f"unknown grid spacing {spacing!r}")
    return mh_inverse(mh)


@dataclass(frozen=True)
class SimConfig:
    geometry: Geometry
    radio: RadioConfig
    case: AntennaCase = AntennaCase.C1
    trials: int = 100_000
    half_length: float = 4000.0
    seed: int = 0
    sigma_grid: tuple = field(default_factory=lambda: tuple(default_sigma_grid()))
    interference_radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "case", AntennaCase.parse(self.case))
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        d_max = max(self.geometry.lane1.d, self.geometry.lane2.d)
        if self.half_length < 10 * d_max:
            raise ParameterError(
                f"window half-length {self.half_length} m is shorter than 10 hard-core distances ({10 * d_max} m)"
            )
        s = np.asarray(self.sigma_grid, dtype=float)
        if np.any((s < 0) | (s >= 1)) or np.any(np.diff(s) <= 0):
            raise ParameterError("sigma grid must be increasing inside [0, 1)")
        object.__setattr__(self, "sigma_grid", tuple(float(v) for v in s))


@dataclass(frozen=True)
class TrialOutcome:
    S: float
    I: float
    rho: float
    sinr: float
    sf: float
    sf_clamped: bool = False


def _outcome(S: float, I: float, rho: float) -> TrialOutcome:
    denom = I + rho
    if denom == 0:
        return TrialOutcome(S, I, rho, math.inf, SF_ONE_MINUS, True)
    sinr = S / denom
    return TrialOutcome(S, I, rho, sinr, sinr / (sinr + 1.0))


def draw_fading(field: VehicleField, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Unit-mean exponential power gains, lane 1 then lane 2."""
    return rng.standard_exponential(len(field.lane1)), rng.standard_exponential(len(field.lane2))


def simulate_trial(
    field: VehicleField,
    radio: RadioConfig,
    case,
    rng: np.random.Generator | None = None,
    fading: tuple[np.ndarray, np.ndarray] | None = None,
) -> TrialOutcome | None:
    """One link snapshot on a deployed field; ``None`` if there is no server."""
    case = AntennaCase.parse(case)
    if fading is None:
        if rng is None:
            raise ParameterError("need a generator or explicit fading gains")
        fading = draw_fading(field, rng)
    h1, h2 = fading
    x1, x2 = field.lane1.points, field.lane2.points
    w = field.layout.w_l
    a = radio.alpha

    if case is AntennaCase.C1:
        cand = np.flatnonzero(x2 > 0)
    else:
        cand = np.arange(x2.size)
    if cand.size == 0:
        return None
    server = cand[np.argmin(np.abs(x2[cand]))]

    vis1 = x1 != 0.0
    vis2 = np.ones(x2.size, dtype=bool)
    if case is AntennaCase.C1:
        vis1 &= x1 > 0
        vis2 &= x2 > 0
    vis2[server] = False

    S = h2[server] * (x2[server] ** 2 + w * w) ** (-a / 2)
    I = float(np.sum(h1[vis1] * np.abs(x1[vis1]) ** -a) + np.sum(h2[vis2] * (x2[vis2] ** 2 + w * w) ** (-a / 2)))
    return _outcome(float(S), I, radio.rho)


# --- batched campaign ---------------------------------------------------------


@dataclass
class OutcomeArrays:
    """Per-trial results for one (case, alpha); ``valid`` is False for discarded trials."""

    S: np.ndarray
    I: np.ndarray
    sinr: np.ndarray
    sf: np.ndarray
    valid: np.ndarray
    clamped: np.ndarray

    @classmethod
    def concat(cls, parts) -> "OutcomeArrays":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("S", "I", "sinr", "sf", "valid", "clamped")))


def _group_first(groups: np.ndarray, n_groups: int, order: np.ndarray | None = None):
    """Index of the first element of each group along ``order`` (-1 if empty)."""
    idx = np.arange(groups.size) if order is None else order
    labels, pos = np.unique(groups[idx], return_index=True)
    first = np.full(n_groups, -1, dtype=np.int64)
    first[labels] = idx[pos]
    return first


def _batch_fields(geometry: Geometry, half_length: float, seed: int, start: int, stop: int, lane1: bool = True):
    """Deploy trials ``start..stop-1`` and thin them all in one pass."""
    c1, c2 = geometry.lane1, geometry.lane2
    n = stop - start
    rngs = [realization_rng(seed, i) for i in range(start, stop)]
    p1, m1, o1, g1, p2, m2, g2 = [], [], [], [], [], [], []
    for j, rng in enumerate(rngs):
        if lane1:
            pts, marks, oi = generate_palm(c1.lambda_p, c1.d, half_length, rng)
            orig = np.zeros(pts.size, dtype=bool)
            orig[oi] = True
            p1.append(pts), m1.append(marks), o1.append(orig), g1.append(np.full(pts.size, j))
        pts, marks = generate_stationary(c2.lambda_p, c2.d, half_length, rng)
        p2.append(pts), m2.append(marks), g2.append(np.full(pts.size, j))

    def thin(ps, ms, gs, d, extra=None):
        p, m, g = np.concatenate(ps), np.concatenate(ms), np.concatenate(gs)
        keep = retained_mask(p, m, d, groups=g) & (np.abs(p) <= half_length)
        out = [p[keep], g[keep]]
        if extra is not None:
            out.append(np.concatenate(extra)[keep])
        return out

    lanes = {}
    if lane1:
        lanes[1] = thin(p1, m1, g1, c1.d, o1)
    lanes[2] = thin(p2, m2, g2, c2.d)
    return rngs, lanes, n


def _chunk_outcomes(args):
    geometry, rho, half_length, seed, start, stop, cases, alphas, radii = args
    rngs, lanes, n = _batch_fields(geometry, half_length, seed, start, stop)
    x1, g1, origin = lanes[1]
    x2, g2 = lanes[2]
    w = geometry.w_l

    # fading in the same order as deploy_field + draw_fading on each trial's stream
    n1 = np.bincount(g1, minlength=n)
    n2 = np.bincount(g2, minlength=n)
    h1 = np.concatenate([rng.standard_exponential(k) for rng, k in zip(rngs, n1)])
    h2 = np.concatenate([rng.standard_exponential(k) for rng, k in zip(rngs, n2)])

    results = {}
    for case in cases:
        if case is AntennaCase.C1:
            vis1 = (x1 > 0) & ~origin
            pos = x2 > 0
            server = _group_first(g2, n, np.flatnonzero(pos))
            vis2 = pos.copy()
        else:
            vis1 = ~origin
            server = _group_first(g2, n, np.lexsort((np.abs(x2), g2)))
            vis2 = np.ones(x2.size, dtype=bool)
        valid = server >= 0
        vis2[server[valid]] = False
        for radius in radii:
            if radius is None:
                near1, near2 = vis1, vis2
            else:
                near1, near2 = vis1 & (np.abs(x1) <= radius), vis2 & (np.abs(x2) <= radius)
            for a in alphas:
                pl1 = np.zeros(x1.size)
                pl1[near1] = h1[near1] * np.abs(x1[near1]) ** -a
                pl2 = h2 * (x2 * x2 + w * w) ** (-a / 2)
                I = np.bincount(g1, weights=pl1, minlength=n) + np.bincount(
                    g2, weights=np.where(near2, pl2, 0.0), minlength=n
                )
                S = np.where(valid, pl2[np.where(valid, server, 0)], np.nan)
                denom = I + rho
                with np.errstate(divide="ignore", invalid="ignore"):
                    sinr = np.where(denom > 0, S / denom, np.inf)
                    sf = np.where(np.isinf(sinr), SF_ONE_MINUS, sinr / (sinr + 1.0))
                clamped = valid & np.isinf(sinr)
                results[(case, a, radius)] = OutcomeArrays(S, I, sinr, sf, valid, clamped)
    return results


def simulate_outcomes(config: SimConfig, cases=None, alphas=None, workers: int = 1, chunk: int = CHUNK, radii=None):
    """Per-trial outcomes for every requested (case, alpha) on shared fields.

    Fields and fading are common to all combinations, which keeps curve
    comparisons free of between-curve sampling noise. Passing ``radii``
    (interferer cut-off distances, ``None`` for no cut-off) adds a third
    component to the result keys.
    """
    cases = tuple(AntennaCase.parse(c) for c in (cases or (config.case,)))
    alphas = tuple(float(a) for a in (alphas or (config.radio.alpha,)))
    keyed_by_radius = radii is not None
    radii = tuple(radii) if keyed_by_radius else (config.interference_radius,)
    jobs = [
        (config.geometry, config.radio.rho, config.half_length, config.seed, s, min(s + chunk, config.trials), cases, alphas, radii)
        for s in range(0, config.trials, chunk)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_outcomes, jobs))
    else:
        parts = [_chunk_outcomes(j) for j in jobs]
    merged = {key: OutcomeArrays.concat([p[key] for p in parts]) for key in parts[0]}
    if keyed_by_radius:
        return merged
    return {key[:2]: value for key, value in merged.items()}


def empirical_ccdf(samples: np.ndarray, grid) -> np.ndarray:
    """Fraction of samples strictly above each grid value."""
    s = np.sort(np.asarray(samples, dtype=float))
    grid = np.asarray(grid, dtype=float)
    if s.size == 0:
        return np.full(grid.shape, np.nan)
    return 1.0 - np.searchsorted(s, grid, side="right") / s.size


def _curve_from_outcomes(config: SimConfig, out: OutcomeArrays, case, alpha) -> CcdfCurve:
    grid = np.asarray(config.sigma_grid)
    discarded = int((~out.valid).sum())
    meta = {
        "seed": config.seed,
        "trials": config.trials,
        "discarded": discarded,
        "discard_rate": discarded / config.trials,
        "half_length": config.half_length,
        "alpha": alpha,
        "rho": config.radio.rho,
        "clamped_trials": int(out.clamped.sum()),
    }
    if meta["discard_rate"] > DISCARD_WARN_RATE:
        meta["warning"] = f"discard rate {meta['discard_rate']:.1%} exceeds {DISCARD_WARN_RATE:.0%}"
        log.warning(meta["warning"])
    if discarded:
        log.info("discarded %d of %d trials without a serving vehicle", discarded, config.trials)
    return CcdfCurve(grid, empirical_ccdf(out.sf[out.valid], grid), "monte-carlo", AntennaCase.parse(case), metadata=meta)


def run_campaign(config: SimConfig, workers: int = 1) -> CcdfCurve:
    """Empirical SF CCDF for ``config.case`` over ``config.sigma_grid``."""
    out = simulate_outcomes(config, workers=workers)
    ((key, arrays),) = out.items()
    return _curve_from_outcomes(config, arrays, *key)


def run_campaigns(config: SimConfig, cases, alphas, workers: int = 1) -> dict:
    """Several empirical curves from one set of fields, keyed by ``(case, alpha)``."""
    out = simulate_outcomes(config, cases, alphas, workers=workers)
    return {key: _curve_from_outcomes(config, arrays, *key) for key, arrays in out.items()}


def sample_serving_offsets(geometry: Geometry, trials: int, seed: int, half_length: float | None = None, chunk: int = 2000):
    """Horizontal offset of the serving vehicle, per trial.

    Returns ``(x_c1, x_c2)``: the nearest positive lane-2 coordinate and the
    lane-2 coordinate nearest the origin (signed). Entries are ``nan`` when
    the case has no candidate. Only lane 2 is sampled; the typical lane
    does not affect association.
    """
    L = 20 * geometry.lane2.d if half_length is None else half_length
    xs1, xs2 = [], []
    for s in range(0, trials, chunk):
        e = min(s + chunk, trials)
        _, lanes, n = _batch_fields(geometry, L, seed, s, e, lane1=False)
        x2, g2 = lanes[2]
        pos = np.flatnonzero(x2 > 0)
        f1 = _group_first(g2, n, pos)
        f2 = _group_first(g2, n, np.lexsort((np.abs(x2), g2)))
        xs1.append(np.where(f1 >= 0, x2[np.maximum(f1, 0)], np.nan))
        xs2.append(np.where(f2 >= 0, x2[np.maximum(f2, 0)], np.nan))
    return np.concatenate(xs1), np.concatenate(xs2)


# --- replacement-PPP baseline -------------------------------------------------


@dataclass(frozen=True)
class PoissonDistanceModel:
    """Nearest-neighbour offset law of a PPP of density ``lambda_2``."""

    lambda_2: float
    w_l: float
    case: AntennaCase = AntennaCase.C1
    breakpoints: tuple = ()
    mass: float = 1.0

    @property
    def rate(self) -> float:
        return self.lambda_2 * self.case.beta

    def pdf_x(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, self.rate * np.exp(-self.rate * np.maximum(x, 0)), 0.0)
        return out if out.ndim else float(out)


@lru_cache(maxsize=64)
def baseline_interference(lambda_1: float, d_1: float, lambda_2: float, d_2: float, w_l: float, alpha: float):
    """``(I1, I2)`` with the second-order density flattened to ``lambda**2``
    beyond the hard-core distance and the PPP offset law in the outer integral."""
    I1 = lambda_1 * d_1 ** (1 - alpha) / (alpha - 1)
    near = PoissonDistanceModel(lambda_2, w_l)
    a2 = alpha / 2

    def inner(r1):
        return lambda_2 * integrate.quad(lambda rd: ((r1 + rd) ** 2 + w_l**2) ** -a2, d_2, np.inf, epsabs=0, epsrel=1e-11)[0]

    upper = -math.log(1e-12) / lambda_2
    I2 = integrate_piecewise(lambda r1: inner(r1) * near.pdf_x(r1), (), upper=upper, epsabs=0.0, epsrel=1e-10)
    return I1, I2


def baseline_link_model(case, geometry: Geometry, alpha: float) -> LinkModel:
    case = AntennaCase.parse(case)
    l1, l2 = geometry.lane1, geometry.lane2
    I1, I2 = baseline_interference(l1.density, l1.d, l2.density, l2.d, geometry.w_l, alpha)
    return LinkModel(PoissonDistanceModel(l2.density, geometry.w_l, case), case.beta * (I1 + I2), alpha)


def baseline_ppp_ccdf(config: SimConfig) -> CcdfCurve:
    """Analytic SF CCDF when each MHCP is replaced by a PPP of equal density."""
    model = baseline_link_model(config.case, config.geometry, config.radio.alpha)
    grid = np.asarray(config.sigma_grid)
    values = ccdf_from_model(model, config.radio.rho, mh_transform(grid))
    meta = {"alpha": config.radio.alpha, "rho": config.radio.rho, "interference": model.interference}
    return CcdfCurve(grid, values, "baseline-ppp", config.case, metadata=meta)
