"""Analytic link performance: coverage probability and signal-fraction CCDF.

All received powers are normalised by ``P_t * C`` so the noise enters only
through ``rho = N / (P_t C)``. The coverage probability averages
``exp(-gamma * (rho + beta * (I1 + I2)) * r**alpha)`` over the serving
distance law; every integral over the link distance ``r`` is taken in the
horizontal-offset domain ``r = sqrt(x**2 + w_l**2)`` so the change of
variables introduces no singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import NumericalError, ParameterError
from .hardcore_process import first_order_density, second_order_density
from .lane_geometry import (
    QUAD_EPSABS,
    QUAD_EPSREL,
    AntennaCase,
    DistanceModel,
    Geometry,
    integrate_piecewise,
)

SPEED_OF_LIGHT = 3e8


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class RadioConfig:
    """Transmit/noise powers in watts and free-space path-loss constants."""

    P_t: float
    N: float
    freq: float = 5e9
    d_0: float = 1.0
    alpha: float = 4.0

    def __post_init__(self):
        if not self.P_t > 0:
            raise ParameterError(f"P_t must be positive, got {self.P_t}")
        if not self.N >= 0:
            raise ParameterError(f"N must be non-negative, got {self.N}")
        if not (self.freq > 0 and self.d_0 > 0):
            raise ParameterError("freq and d_0 must be positive")
        if not self.alpha > 1:
            raise ParameterError(f"path-loss exponent must exceed 1, got {self.alpha}")

    @classmethod
    def from_dbm(cls, pt_dbm: float, noise_dbm: float, **kw) -> "RadioConfig":
        return cls(dbm_to_watt(pt_dbm), dbm_to_watt(noise_dbm), **kw)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.freq

    @property
    def C(self) -> float:
        return self.wavelength**2 / (16.0 * math.pi**2 * self.d_0**2)

    @property
    def rho(self) -> float:
        return noise_ratio(self)


def noise_ratio(radio: RadioConfig) -> float:
    """Normalised noise ``N / (P_t C)``."""
    return radio.N / (radio.P_t * radio.C)


def target_sinr(R_t: float, B: float) -> float:
    """Shannon target SINR ``2**(R_t/B) - 1`` for a rate ``R_t`` over bandwidth ``B``."""
    if not B > 0:
        raise ParameterError(f"bandwidth must be positive, got {B}")
    if R_t < 0:
        raise ParameterError(f"target rate must be non-negative, got {R_t}")
    return 2.0 ** (R_t / B) - 1.0


def mh_transform(sigma):
    """SF value to the Möbius-homeomorphic scale ``sigma / (1 - sigma)``.

    ``sigma == 1`` maps to ``inf``.
    """
    s = np.asarray(sigma, dtype=float)
    if np.any((s < 0) | (s > 1)):
        raise ParameterError("sigma must lie in [0, 1)")
    with np.errstate(divide="ignore"):
        out = np.where(s < 1, s / np.where(s < 1, 1 - s, 1.0), np.inf)
    return out if out.ndim else float(out)


def mh_inverse(m):
    m = np.asarray(m, dtype=float)
    if np.any(m < 0):
        raise ParameterError("MH values must be non-negative")
    out = np.where(np.isinf(m), 1.0, m / (1.0 + np.where(np.isinf(m), 0.0, m)))
    return out if out.ndim else float(out)


# --- interference constants -------------------------------------------------


@lru_cache(maxsize=256)
def interference_I1(lambda_p: float, d_1: float, alpha: float) -> float:
    """Mean same-lane interference per unit distance weight, one side.

    ``I1 = (1/lambda_1) * int_{d_1}^inf lambda_1^(2)(r) r**-alpha dr``; the
    flat part beyond ``2 d_1`` is integrated in closed form.
    """
    if not alpha > 1:
        raise ParameterError(f"I1 diverges for alpha <= 1 (alpha={alpha})")
    lam = first_order_density(lambda_p, d_1)
    mid, _ = integrate.quad(
        lambda r: second_order_density(lambda_p, d_1, r) * r**-alpha,
        d_1,
        2 * d_1,
        epsabs=0.0,
        epsrel=1e-12,
    )
    tail = lam * lam * (2 * d_1) ** (1 - alpha) / (alpha - 1)
    return float((mid + tail) / lam)


@lru_cache(maxsize=256)
def interference_I2(lambda_p: float, d_2: float, w_l: float, alpha: float) -> float:
    """Mean adjacent-lane interference beyond the serving vehicle.

    Double integral over the serving offset ``r1`` (weighted by the
    semicircle offset law) and the gap ``r_d`` from the server to an
    interferer (weighted by the second-order density at ``r_d``).
    The outer range stops where the offset law's tail mass drops below 1e-9.
    """
    if not alpha > 1:
        raise ParameterError(f"I2 diverges for alpha <= 1 (alpha={alpha})")
    lam = first_order_density(lambda_p, d_2)
    model = DistanceModel(lam, d_2, w_l, AntennaCase.C1, tail_tol=1e-9)
    w2 = w_l * w_l
    a2 = alpha / 2.0

    def inner(r1):
        mid = integrate.quad(
            lambda rd: second_order_density(lambda_p, d_2, rd) * ((r1 + rd) ** 2 + w2) ** -a2,
            d_2,
            2 * d_2,
            epsabs=0.0,
            epsrel=1e-11,
        )[0]
        # scaled by the value at 2 d_2 so the quadrature sees an O(1) integrand
        edge = ((r1 + 2 * d_2) ** 2 + w2) ** -a2
        # split where the decay sets in so a wide lane gap does not fool the infinite-range rule
        knee = 2 * d_2 + 10.0 * (w_l + r1)
        ratio = lambda rd: (((r1 + rd) ** 2 + w2) ** -a2) / edge  # noqa: E731
        tail = edge * (
            integrate.quad(ratio, 2 * d_2, knee, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
            + integrate.quad(ratio, knee, np.inf, epsabs=1e-14, epsrel=1e-11)[0]
        )
        return (mid + lam * lam * tail) / lam

    total = integrate_piecewise(
        lambda r1: inner(r1) * model.pdf_x(r1),
        model.breakpoints,
        upper=model.support_end,
        epsabs=0.0,
        epsrel=1e-10,
    )
    return float(total)


@dataclass(frozen=True)
class InterferenceConstants:
    I1: float
    I2: float
    beta: int

    @property
    def total(self) -> float:
        return self.beta * (self.I1 + self.I2)


def interference_constants(case, geometry: Geometry, alpha: float) -> InterferenceConstants:
    case = AntennaCase.parse(case)
    l1, l2 = geometry.lane1, geometry.lane2
    return InterferenceConstants(
        interference_I1(l1.lambda_p, l1.d, alpha),
        interference_I2(l2.lambda_p, l2.d, geometry.w_l, alpha),
        case.beta,
    )


# --- CCDFs --------------------------------------------------------------------


@dataclass
class CcdfCurve:
    """Sampled CCDF with provenance.

    ``grid_kind`` is ``"sigma"`` (SF thresholds), ``"gamma"`` (SINR
    thresholds) or ``"P_t"`` (transmit power sweep at a fixed threshold).
    """

    grid: np.ndarray
    values: np.ndarray
    kind: str
    case: AntennaCase
    grid_kind: str = "sigma"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape:
            raise ParameterError("grid and values must have the same shape")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise ParameterError("CCDF values must lie in [0, 1]")

    def sup_distance(self, other: "CcdfCurve") -> float:
        if not np.array_equal(self.grid, other.grid):
            raise ParameterError("curves live on different grids")
        return float(np.max(np.abs(self.values - other.values)))


@dataclass(frozen=True)
class LinkModel:
    """Everything the coverage integral needs: a distance law plus the
    aggregate interference constant ``beta * (I1 + I2)``."""

    distance: object  # anything with pdf_x, breakpoints, w_l
    interference: float
    alpha: float

    def path_gain_exponent(self, x):
        return (x * x + self.distance.w_l**2) ** (self.alpha / 2.0)


def link_model(case, geometry: Geometry, alpha: float, renormalize: bool = True) -> LinkModel:
    case = AntennaCase.parse(case)
    return LinkModel(
        geometry.distance_model(case, renormalize),
        interference_constants(case, geometry, alpha).total,
        alpha,
    )


def _check_gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(np.isnan(g)) or np.any(g < 0):
        raise ParameterError("gamma_t must be non-negative")
    return g


def _average(model: LinkModel, weight, upper=None) -> float:
    dist = model.distance
    try:
        with np.errstate(over="ignore", under="ignore"):
            val = integrate_piecewise(lambda x: weight(x) * dist.pdf_x(x), dist.breakpoints, upper)
    except integrate.IntegrationWarning as exc:  # pragma: no cover - escalated only under -W error
        raise NumericalError(f"coverage quadrature failed: {exc}") from exc
    if not np.isfinite(val):
        raise NumericalError(f"coverage quadrature returned {val}")
    return val


def ccdf_from_model(model: LinkModel, rho: float, gamma):
    """``int exp(-gamma (rho + interference) (x^2 + w^2)^(alpha/2)) f_x(x) dx``."""
    g = _check_gamma(gamma)
    k = rho + model.interference
    out = np.empty(g.shape)
    for idx, gi in np.ndenumerate(g):
        if gi == 0 or k == 0:
            out[idx] = _average(model, lambda x: np.ones_like(x))
        elif np.isinf(gi):
            out[idx] = 0.0
        else:
            s = gi * k
            out[idx] = _average(model, lambda x, s=s: np.exp(-s * model.path_gain_exponent(x)))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def coverage_ccdf(case, radio: RadioConfig, geometry: Geometry, gamma_t, rho: float | None = None):
    """Coverage probability ``P[SINR > gamma_t]`` under nearest-vehicle association."""
    model = link_model(case, geometry, radio.alpha)
    return ccdf_from_model(model, radio.rho if rho is None else rho, gamma_t)


def sf_ccdf(case, radio: RadioConfig, geometry: Geometry, sigma, rho: float | None = None):
    """Signal-fraction CCDF, ``coverage_ccdf`` at ``gamma_t = sigma / (1 - sigma)``."""
    s = np.asarray(sigma, dtype=float)
    if np.any((s < 0) | (s >= 1)):
        raise ParameterError("sigma must lie in [0, 1)")
    return coverage_ccdf(case, radio, geometry, mh_transform(sigma), rho=rho)


def approx_small(case, radio: RadioConfig, geometry: Geometry, gamma_t, clamp_info: dict | None = None):
    """First-order expansion of the coverage integral, clamped to [0, 1].

    If ``clamp_info`` is given, ``clamp_info["clamped"]`` records whether any
    value fell outside [0, 1] before clamping.
    """
    g = _check_gamma(gamma_t)
    model = link_model(case, geometry, radio.alpha)
    k = radio.rho + model.interference
    # mean of (x^2 + w^2)^(alpha/2) under the offset law, once
    moment = _average(model, model.path_gain_exponent)
    mass = _average(model, lambda x: np.ones_like(x))
    raw = mass - g * k * moment
    if clamp_info is not None:
        # the renormalised mass may exceed 1 by rounding; that is not clamping
        clamp_info["clamped"] = bool(np.any((raw < 0) | (raw > 1 + 1e-9)))
    out = np.clip(raw, 0.0, 1.0)
    return out if out.ndim else float(out)


def approx_large(case, radio: RadioConfig, geometry: Geometry, gamma_t):
    """Coverage restricted to the uniform segment ``0 < x <= d_2`` of density ``lambda_2``."""
    g = _check_gamma(gamma_t)
    case = AntennaCase.parse(case)
    model = link_model(case, geometry, radio.alpha)
    lam, d2 = geometry.lane2.density, geometry.lane2.d
    k = radio.rho + model.interference
    out = np.empty(g.shape)
    for idx, gi in np.ndenumerate(g):
        if np.isinf(gi):
            out[idx] = 0.0
            continue
        out[idx] = lam * integrate.quad(
            lambda x: np.exp(-gi * k * model.path_gain_exponent(x)),
            0.0,
            d2,
            epsabs=QUAD_EPSABS,
            epsrel=QUAD_EPSREL,
        )[0]
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def upper_limit(case, radio: RadioConfig, geometry: Geometry, sigma):
    """Interference-limited ceiling of the SF CCDF (noise set to zero)."""
    return sf_ccdf(case, replace(radio, N=0.0), geometry, sigma)


def analytic_curve(case, radio: RadioConfig, geometry: Geometry, sigma_grid, kind: str = "analytic") -> CcdfCurve:
    """SF CCDF on a grid, wrapped with its configuration snapshot."""
    case = AntennaCase.parse(case)
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    if kind == "analytic":
        values = sf_ccdf(case, radio, geometry, sigma_grid)
    elif kind == "approx-F1":
        values = approx_small(case, radio, geometry, mh_transform(sigma_grid))
    elif kind == "approx-F2":
        values = approx_large(case, radio, geometry, mh_transform(sigma_grid))
    else:
        raise ParameterError(f"unknown analytic curve kind {kind!r}")
    model = geometry.distance_model(case)
    meta = {
        "rho": radio.rho,
        "alpha": radio.alpha,
        "distance_mass": model.mass,
        "renormalized": model.renormalize,
    }
    return CcdfCurve(sigma_grid, values, kind, case, metadata=meta)
