"""Closed-form throughput and travel-distance model of the rhythmic controller.

Distances are in metres (``D`` is the cell length), rates in sorts per hour.
``alpha`` is the staffed fraction of aisle entrances, ``n_w / (n_h + n_v)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AttenuationCoeffs:
    a: float = 1.4
    b: float = 0.012

    def __post_init__(self):
        if not self.a > 1 or not self.b > 0:
            raise ValueError("attenuation needs a > 1 and b > 0")


DEFAULT_COEFFS = AttenuationCoeffs(1.4, 0.012)


@dataclass(frozen=True)
class ThroughputEstimate:
    n_vp_total: float
    kappa: float
    beta: float
    n_vp_occupied: float
    avg_travel_distance: float  # m
    vehicle_metres_per_s: float
    throughput: float  # sorts/h

    cell_len: float = 1.0

    @property
    def avg_travel_cells(self) -> float:
        return self.avg_travel_distance / self.cell_len


def n_vp_total(n_h: int, n_v: int) -> float:
    """VPs in the aisle network: half of the aisle cells."""
    return (n_h * (n_v - 1) + n_v * (n_h - 1)) / 2


def staffing_ratio(n_w: float, n_h: int, n_v: int) -> float:
    return n_w / (n_h + n_v)


def workforce_factor(alpha: float) -> float:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return 1.0 - (1.0 - alpha) ** 2


def attenuation(n_h: int, n_v: int, coeffs: AttenuationCoeffs = DEFAULT_COEFFS) -> float:
    return 1.0 / (coeffs.a + coeffs.b * (n_h + n_v))


def occupied_vps(alpha: float, n_r: float, n_h: int, n_v: int,
                 coeffs: AttenuationCoeffs = DEFAULT_COEFFS) -> float:
    if n_r <= 0:
        return 0.0
    cap = workforce_factor(alpha) * attenuation(n_h, n_v, coeffs) * n_vp_total(n_h, n_v)
    return float(min(cap, n_r))


# ---------------------------------------------------------------------------
# travel distance
# ---------------------------------------------------------------------------

def area_proportions(alpha: float) -> tuple[float, float, float, float]:
    """Share of outlets served by one-turn, two-turn, three-turn and central paths."""
    return alpha * (1 - alpha), alpha * (1 - alpha), (1 - alpha) ** 2, alpha ** 2


def _check_shape(n_h: int, n_v: int):
    if min(n_h, n_v) < 4 or max(n_h, n_v) / min(n_h, n_v) >= 2:
        warnings.warn(f"distance model assumes min(n_h, n_v) >= 4 and aspect ratio < 2, got ({n_h}, {n_v})",
                      stacklevel=3)


def expected_lengths(n_h: int, n_v: int, alpha: float, D: float = 1.0,
                     spread: float | None = None) -> tuple[float, float, float, float]:
    """Mean path length for each outlet area.

    ``spread`` is the coefficient squared in the one-turn term; it defaults
    to ``alpha`` (the spread of staffed stations along a side).  Pass the
    attenuation coefficient ``a`` to evaluate the alternative reading.
    """
    s = n_h + n_v
    q = n_h ** 2 + n_v ** 2
    p = n_h * n_v
    c = alpha if spread is None else spread
    l1 = 2 * D * (((9 + c ** 2) / 6 * q - p - 1 / 3) / s + 1)
    l2 = 2 * D * (alpha * q / (3 * s) - 2 / (3 * alpha * s) + 3 * p / (2 * s))
    l3 = 2 * D * (s / 2 + (1 + alpha) / 4 * p / s)
    l4 = 0.5 * (l1 + l2)
    return l1, l2, l3, l4


def avg_travel_distance(n_h: int, n_v: int, alpha: float, D: float = 1.0,
                        spread: float | None = None) -> float:
    """Area-weighted mean delivery path length (m)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    _check_shape(n_h, n_v)
    ls = expected_lengths(n_h, n_v, alpha, D, spread)
    return float(sum(pi * li for pi, li in zip(area_proportions(alpha), ls)))


def avg_travel_distance_collected(n_h: int, n_v: int, alpha: float, D: float = 1.0) -> float:
    """The same mean length expanded as a polynomial in ``alpha``.

    The expansion printed with the model does not equal the term-by-term sum:
    the two differ by ``2D (1-alpha)^2 (1+alpha) (n_h n_v - 1) / (4 (n_h + n_v))``.
    Kept as published so the discrepancy stays visible.
    """
    s = n_h + n_v
    a = alpha
    return 2 * D * ((n_h ** 2 + n_v ** 2) / s * (-a ** 4 - 5 * a ** 2 + 18 * a) / 12
                    + n_h * n_v / s * (-a ** 2 + 2 * a) / 4
                    + 1 / s * (3 * a ** 3 - a ** 2 - 3 * a - 5) / 12
                    + s * (a ** 2 - 2 * a + 1) / 2
                    + (-a ** 2 + 2 * a) / 2)


def collected_form_gap(n_h: int, n_v: int, alpha: float, D: float = 1.0) -> float:
    """Closed form of ``avg_travel_distance - avg_travel_distance_collected``."""
    return 2 * D * (1 - alpha) ** 2 * (1 + alpha) * (n_h * n_v - 1) / (4 * (n_h + n_v))


# ---------------------------------------------------------------------------
# throughput
# ---------------------------------------------------------------------------

def throughput_estimate(n_h: int, n_v: int, n_w: float, n_r: float, D: float = 1.0,
                        tau_e: float = 0.5, coeffs: AttenuationCoeffs = DEFAULT_COEFFS,
                        spread: float | None = None) -> ThroughputEstimate:
    alpha = staffing_ratio(n_w, n_h, n_v)
    occ = occupied_vps(alpha, n_r, n_h, n_v, coeffs)
    l_bar = avg_travel_distance(n_h, n_v, alpha, D, spread)
    v_vp = D / tau_e
    m_bar = occ * v_vp
    return ThroughputEstimate(
        n_vp_total=n_vp_total(n_h, n_v),
        kappa=workforce_factor(alpha),
        beta=attenuation(n_h, n_v, coeffs),
        n_vp_occupied=occ,
        avg_travel_distance=l_bar,
        vehicle_metres_per_s=m_bar,
        throughput=3600.0 * m_bar / l_bar,
        cell_len=D,
    )


def throughput_upper_bound(n_h: int, n_v: int, n_l: float, D: float = 1.0, tau_e: float = 0.5,
                           coeffs: AttenuationCoeffs = DEFAULT_COEFFS) -> float:
    """Throughput with ``n_l`` staffed stations and unlimited robots (sorts/h)."""
    return throughput_estimate(n_h, n_v, n_l, math.inf, D, tau_e, coeffs).throughput


def critical_station_count(n_h: int, n_v: int, coeffs: AttenuationCoeffs = DEFAULT_COEFFS) -> int:
    """Station count in ``1..n_h+n_v`` that maximises the throughput bound."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals = [throughput_upper_bound(n_h, n_v, n, coeffs=coeffs) for n in range(1, n_h + n_v + 1)]
    return int(np.argmax(vals)) + 1


def is_unimodal(values) -> bool:
    """True if the sequence rises (weakly) and then falls (weakly), with a single peak."""
    d = np.sign(np.diff(np.asarray(values, dtype=float)))
    d = d[d != 0]
    falling = np.flatnonzero(d < 0)
    return len(falling) == 0 or bool((d[falling[0]:] < 0).all())


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    coeffs: AttenuationCoeffs
    r2: float
    residuals: np.ndarray  # in 1/beta units


def measured_attenuation(mean_in_network: float, n_h: int, n_v: int, alpha: float = 1.0) -> float:
    """Observed beta: robots in the aisle network over the staffed VP capacity."""
    return mean_in_network / (workforce_factor(alpha) * n_vp_total(n_h, n_v))


def calibrate_attenuation(aisle_sums, betas) -> Calibration:
    """Least-squares fit of ``1/beta = a + b (n_h + n_v)``."""
    x = np.asarray(aisle_sums, dtype=float)
    y = 1.0 / np.asarray(betas, dtype=float)
    if len(x) != len(y):
        raise ValueError("aisle_sums and betas differ in length")
    if len(np.unique(x)) < 2 or len(x) < 3:
        raise ValueError("need at least three observations over two or more network scales")
    A = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ np.array([a, b])
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((res ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return Calibration(AttenuationCoeffs(float(a), float(b)), r2, res)
