"""Two-lane vehicle field, nearest-vehicle association and distance laws.

Lane 1 carries the typical receiver at the origin, lane 2 sits ``w_l`` away.
The analytic distance model covers the horizontal offset ``x_NV`` of the
serving vehicle (semicircle and omnidirectional antennas) and the Euclidean
link distance ``sqrt(x_NV**2 + w_l**2)``.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import ParameterError
from .hardcore_process import (
    HardCoreConfig,
    PointSet1D,
    Window1D,
    first_order_density,
    retained_mask,
)

log = logging.getLogger(__name__)

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-8


class AntennaCase(enum.Enum):
    """Receive antenna pattern of the typical vehicle.

    ``C1`` is the semicircle antenna: only transmitters ahead (x > 0) are
    heard. ``C2`` is omnidirectional.
    """

    C1 = "c1"
    C2 = "c2"

    @property
    def beta(self) -> int:
        return 1 if self is AntennaCase.C1 else 2

    @classmethod
    def parse(cls, value) -> "AntennaCase":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown antenna case {value!r}; use c1 or c2") from None


@dataclass(frozen=True)
class LaneLayout:
    w_l: float

    def __post_init__(self):
        if not self.w_l > 0:
            raise ParameterError(f"inter-lane distance must be positive, got {self.w_l}")


@dataclass(frozen=True)
class Geometry:
    """Both lanes' hard-core parameters plus the lane spacing."""

    lane1: HardCoreConfig
    lane2: HardCoreConfig
    layout: LaneLayout

    @classmethod
    def symmetric(cls, lane: HardCoreConfig, w_l: float) -> "Geometry":
        return cls(lane, lane, LaneLayout(w_l))

    @property
    def w_l(self) -> float:
        return self.layout.w_l

    def distance_model(self, case, renormalize: bool = True) -> "DistanceModel":
        return DistanceModel(self.lane2.density, self.lane2.d, self.w_l, AntennaCase.parse(case), renormalize)


@dataclass(frozen=True)
class VehicleField:
    lane1: PointSet1D
    lane2: PointSet1D
    layout: LaneLayout
    configs: tuple[HardCoreConfig, HardCoreConfig]

    def positions(self) -> np.ndarray:
        """All vehicle positions as an ``(n, 2)`` array, lane 1 first."""
        xs = np.concatenate([self.lane1.points, self.lane2.points])
        ys = np.concatenate([np.zeros(len(self.lane1)), np.full(len(self.lane2), self.layout.w_l)])
        return np.column_stack([xs, ys])

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lane", "x", "y"])
            for lane, pat, y in ((1, self.lane1, 0.0), (2, self.lane2, self.layout.w_l)):
                for x in pat.points:
                    w.writerow([lane, repr(float(x)), repr(y)])


# --- sampling ---------------------------------------------------------------


def generate_stationary(lambda_p: float, d: float, half_length: float, rng: np.random.Generator):
    """Generating PPP for a stationary lane on ``[-L-d, L+d]``.

    Returns ``(points, marks)``, points sorted.
    """
    lo, hi = -half_length - d, half_length + d
    n = rng.poisson(lambda_p * (hi - lo))
    points = np.sort(rng.uniform(lo, hi, size=n))
    return points, rng.random(n)


def generate_palm(lambda_p: float, d: float, half_length: float, rng: np.random.Generator):
    """Generating PPP for the typical lane, conditioned on the origin surviving.

    Under the Palm law the ball ``[-d, d]`` holds ``K`` generating points
    including the origin, with ``K`` zero-truncated Poisson(``2 lambda_p d``),
    and the origin carries the largest of the ``K`` marks. Outside the ball
    the PPP is unaffected. Returns ``(points, marks, origin_index)``.
    """
    lo, hi = -half_length - d, half_length + d
    mu = 2.0 * lambda_p * d
    k = 0
    while k == 0:
        k = rng.poisson(mu)
    inner = rng.uniform(-d, d, size=k - 1)
    inner_marks = rng.random(k)
    top = int(np.argmax(inner_marks))
    origin_mark = inner_marks[top]
    inner_marks = np.delete(inner_marks, top)

    outer_len = (hi - lo) - 2.0 * d
    n_out = rng.poisson(lambda_p * outer_len)
    u = rng.uniform(0.0, outer_len, size=n_out)
    left_len = -d - lo
    outer = np.where(u < left_len, lo + u, d + (u - left_len))
    outer_marks = rng.random(n_out)

    pts = np.concatenate([[0.0], inner, outer])
    marks = np.concatenate([[origin_mark], inner_marks, outer_marks])
    order = np.argsort(pts, kind="stable")
    pts, marks = pts[order], marks[order]
    origin_index = int(np.flatnonzero(order == 0)[0])
    return pts, marks, origin_index


def deploy_field(
    configs: tuple[HardCoreConfig, HardCoreConfig] | Geometry,
    layout: LaneLayout | None = None,
    rng: np.random.Generator | None = None,
    half_length: float = 4000.0,
) -> VehicleField:
    """Sample a two-lane field with a typical vehicle of lane 1 at the origin."""
    if isinstance(configs, Geometry):
        layout = configs.layout if layout is None else layout
        configs = (configs.lane1, configs.lane2)
    if layout is None or rng is None:
        raise ParameterError("deploy_field needs a layout and a generator")
    c1, c2 = configs
    for c in configs:
        if not c.heavy_traffic:
            log.warning("lambda_p*d = %.3g < 1, outside the heavy-traffic regime", c.lambda_p * c.d)
    window = Window1D.centered(half_length)

    p1, m1, _ = generate_palm(c1.lambda_p, c1.d, half_length, rng)
    keep1 = retained_mask(p1, m1, c1.d)
    lane1 = PointSet1D(p1[keep1], m1[keep1], window.expand(c1.d)).restrict(window)

    p2, m2 = generate_stationary(c2.lambda_p, c2.d, half_length, rng)
    keep2 = retained_mask(p2, m2, c2.d)
    lane2 = PointSet1D(p2[keep2], m2[keep2], window.expand(c2.d)).restrict(window)
    return VehicleField(lane1, lane2, layout, (c1, c2))


def nearest_vehicle(field: VehicleField, case) -> tuple[float, float] | None:
    """Serving vehicle under nearest-vehicle association, or ``None``.

    ``None`` means no lane-2 vehicle is visible (only possible for the
    semicircle antenna with nothing ahead inside the window).
    """
    case = AntennaCase.parse(case)
    xs = field.lane2.points
    if case is AntennaCase.C1:
        xs = xs[xs > 0]
    if xs.size == 0:
        return None
    return float(xs[np.argmin(np.abs(xs))]), field.layout.w_l


# --- analytic distance laws -------------------------------------------------


def lambda_r(lambda_2: float, d_2: float) -> float:
    """Rate of the exponential tail that carries the mass beyond ``2 d_2``."""
    q = (lambda_2 * d_2 - 2.0) ** 2 - 2.0
    if not q > 0:
        raise ParameterError(f"(lambda_2 d_2 - 2)^2 - 2 must be positive, got {q}")
    return float(np.log(2.0 / q) / (2.0 * d_2))


def cdf_within_two_d(lambda_2: float, d_2: float) -> float:
    """Mass of the first two branches, ``F_C(2 d_2) = 2 - (2 - lambda_2 d_2)**2 / 2``."""
    return 2.0 - (2.0 - lambda_2 * d_2) ** 2 / 2.0


def overlap_probability_bound(lambda_p: float, d_2: float, r1: float) -> float:
    """Upper bound on the probability that the two conditions of the middle
    branch overlap, as a function of the offset ``r1`` in ``(d_2, 2 d_2]``."""
    if not d_2 < r1 <= 2 * d_2:
        raise ParameterError(f"r1 must lie in (d_2, 2 d_2], got {r1}")
    a = lambda_p * d_2
    b = lambda_p * (r1 - d_2)

    def inner(m):
        # closed form of int_0^m exp(-(1 - m2) b) dm2
        if b == 0:
            return m
        return np.exp(-b) * np.expm1(b * m) / b

    val, _ = integrate.quad(lambda m: np.exp(-(1.0 - m) * a) * inner(m), 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)
    return float(val)


@dataclass(frozen=True)
class DistanceModel:
    """Piecewise analytic law of the serving vehicle's horizontal offset.

    For ``C1`` the offset is positive; for ``C2`` the model describes
    ``|x_NV|``. ``pdf_x`` is renormalised by its numeric mass when
    ``renormalize`` is set (the ``C1`` mass is one by construction).
    """

    lambda_2: float
    d_2: float
    w_l: float
    case: AntennaCase = AntennaCase.C1
    renormalize: bool = True
    tail_tol: float = field(default=1e-12, compare=False)

    def __post_init__(self):
        ld = self.lambda_2 * self.d_2
        if not (0 < ld < 0.5 + 1e-12):
            raise ParameterError(f"lambda_2*d_2 must lie in (0, 1/2), got {ld}")
        if not self.w_l > 0:
            raise ParameterError("w_l must be positive")
        object.__setattr__(self, "case", AntennaCase.parse(self.case))

    @classmethod
    def from_config(cls, lane2: HardCoreConfig, w_l: float, case=AntennaCase.C1, **kw) -> "DistanceModel":
        return cls(first_order_density(lane2.lambda_p, lane2.d), lane2.d, w_l, AntennaCase.parse(case), **kw)

    @cached_property
    def lambda_r(self) -> float:
        return lambda_r(self.lambda_2, self.d_2)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        d = self.d_2
        if self.case is AntennaCase.C1:
            return (d, 2 * d)
        return (d / 2, 1.5 * d)

    @property
    def support_end(self) -> float:
        """Offset beyond which the tail mass is below ``tail_tol``."""
        rate = self.lambda_r if self.case is AntennaCase.C1 else 2 * self.lambda_r
        return max(self.breakpoints[-1], self.breakpoints[-1] - np.log(self.tail_tol) / rate)

    def _g(self, r1):
        lam, d = self.lambda_2, self.d_2
        ld = lam * d
        poly = (
            1.5 * ld
            - 3.0 * ld * ld / 8.0
            + np.exp(-2.0 * self.lambda_r * d)
            - (lam + lam * lam * d / 2.0) * r1
            + lam * lam * r1 * r1 / 2.0
        )
        return 2.0 * lam * (1.0 + ld / 2.0 - lam * r1) / (1.0 - ld) * poly

    def raw_pdf_x(self, r1):
        """Printed piecewise density, without renormalisation."""
        if np.ndim(r1) == 0:
            # quadrature calls with scalars; np.select would dominate the cost
            return self._scalar_pdf(float(r1))
        r1 = np.asarray(r1, dtype=float)
        lam, d, lr = self.lambda_2, self.d_2, self.lambda_r
        if self.case is AntennaCase.C1:
            out = np.select(
                [r1 <= 0, r1 <= d, r1 <= 2 * d],
                [0.0, lam, lam * (1.0 - lam * (r1 - d))],
                lr * np.exp(-lr * r1),
            )
        else:
            # the tail's bare length symbol is read as d_2
            out = np.select(
                [r1 <= 0, r1 <= d / 2, r1 <= 1.5 * d],
                [0.0, 2 * lam, self._g(r1)],
                2 * lr * np.exp(-lr * (2 * r1 + d)) / (1.0 - lam * d),
            )
        return out if out.ndim else float(out)

    def _scalar_pdf(self, r1: float) -> float:
        lam, d, lr = self.lambda_2, self.d_2, self.lambda_r
        if r1 <= 0:
            return 0.0
        if self.case is AntennaCase.C1:
            if r1 <= d:
                return lam
            if r1 <= 2 * d:
                return lam * (1.0 - lam * (r1 - d))
            return lr * math.exp(-lr * r1)
        if r1 <= d / 2:
            return 2 * lam
        if r1 <= 1.5 * d:
            return float(self._g(r1))
        return 2 * lr * math.exp(-lr * (2 * r1 + d)) / (1.0 - lam * d)

    @cached_property
    def mass(self) -> float:
        """Numeric total mass of the printed density."""
        if self.case is AntennaCase.C1:
            # first two branches in closed form, exponential tail exactly
            return cdf_within_two_d(self.lambda_2, self.d_2) + float(np.exp(-2 * self.lambda_r * self.d_2))
        d = self.d_2
        total = self.lambda_2 * d
        total += integrate.quad(self.raw_pdf_x, d / 2, 1.5 * d, epsabs=1e-14, epsrel=1e-12)[0]
        lr = self.lambda_r
        total += np.exp(-lr * (3 * d + d)) / (1.0 - self.lambda_2 * d)
        return float(total)

    @property
    def scale(self) -> float:
        return 1.0 / self.mass if self.renormalize else 1.0

    def pdf_x(self, r1):
        out = self.raw_pdf_x(r1)
        return out * self.scale

    def cdf_x(self, r1) -> float:
        """CDF of the horizontal offset (quadrature over the pieces)."""
        r1 = float(r1)
        if r1 <= 0:
            return 0.0
        edges = [0.0] + [b for b in self.breakpoints if b < r1] + [r1]
        return float(sum(integrate.quad(self.pdf_x, a, b, epsabs=1e-13, epsrel=1e-11)[0] for a, b in zip(edges, edges[1:])))

    def pdf_r(self, r):
        """Density of the link distance ``sqrt(x**2 + w_l**2)``; zero on ``r <= w_l``."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        ok = r > self.w_l
        x = np.sqrt(r[ok] ** 2 - self.w_l**2)
        out[ok] = r[ok] / x * self.pdf_x(x)
        return out if out.ndim else float(out)

    def integrate_x(self, func, upper: float | None = None) -> float:
        """``int_0^upper func(x) pdf_x(x) dx`` split at the branch points.

        The semi-infinite tail is handed to QUADPACK's infinite-range rule.
        """
        return integrate_piecewise(lambda x: func(x) * self.pdf_x(x), self.breakpoints, upper)


def integrate_piecewise(func, breakpoints, upper=None, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL) -> float:
    edges = [0.0] + list(breakpoints)
    if upper is not None:
        edges = [e for e in edges if e < upper] + [upper]
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        total += integrate.quad(func, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    if upper is None:
        total += integrate.quad(func, edges[-1], np.inf, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
    return float(total)
