"""Robot kinematics and the rhythm constants derived from them."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


@dataclass(frozen=True)
class KinematicParams:
    v_max: float  # m/s
    c_max: float  # m/s^2, may be inf
    omega_r: float  # rad/s, may be inf
    r_ls: float  # loads/s, may be inf

    def __post_init__(self):
        for name in ("v_max", "c_max", "omega_r", "r_ls"):
            val = getattr(self, name)
            if not val > 0:
                raise ValueError(f"{name} must be strictly positive, got {val}")


@dataclass(frozen=True)
class RcsParams:
    tau_e: float  # phase length, s
    tau_c: float  # cycle length, s
    v_vp: float  # platoon speed, m/s

    @classmethod
    def from_phase(cls, tau_e: float, D: float = 1.0) -> RcsParams:
        return cls(tau_e, 4.0 * tau_e, D / tau_e)


class InfeasibleKinematics(ValueError):
    pass


def max_accel_distance(tau_e: float, v_vp: float, v_max: float, c_max: float) -> float:
    """Longest distance covered in ``2*tau_e`` starting at rest and ending at ``v_vp``.

    Returns ``nan`` when no speed profile can reach ``v_vp`` from rest in time.
    ``c_max`` may be ``inf`` (instant speed changes).
    """
    if v_vp > v_max * (1 + 1e-12):
        raise ValueError("v_vp must not exceed v_max")
    if math.isinf(c_max):
        return 2.0 * tau_e * v_max
    if 2.0 * v_max - v_vp >= 2.0 * tau_e * c_max:
        # triangular profile peaked below v_max; needs enough time to reach v_vp at all
        if v_vp > 2.0 * tau_e * c_max:
            return math.nan
        # area under the triangle c*t then v_vp + c*(2*tau_e - t); the peak sits at
        # tau_e + v_vp/(2c), which leaves a minus sign on the v_vp^2 term
        return c_max * tau_e**2 + tau_e * v_vp - v_vp**2 / (4.0 * c_max)
    return 2.0 * tau_e * v_max - (2.0 * v_max**2 - 2.0 * v_max * v_vp + v_vp**2) / (2.0 * c_max)


def speed_profile(tau_e: float, v_vp: float, v_max: float, c_max: float):
    """Piecewise-linear speed profile behind :func:`max_accel_distance`, as a vectorised callable."""
    if 2.0 * v_max - v_vp >= 2.0 * tau_e * c_max:
        t_peak = tau_e + v_vp / (2.0 * c_max)

        def v(t):
            t = np.asarray(t, dtype=float)
            return np.where(t <= t_peak, c_max * t, v_vp + c_max * (2.0 * tau_e - t))
    else:
        t_up = v_max / c_max
        t_down = 2.0 * tau_e - (v_max - v_vp) / c_max

        def v(t):
            t = np.asarray(t, dtype=float)
            return np.where(t <= t_up, c_max * t,
                            np.where(t <= t_down, v_max, v_vp + c_max * (2.0 * tau_e - t)))
    return v


def _catch_up_margin(tau_e: float, kin: KinematicParams, D: float) -> float:
    v_vp = D / tau_e
    if v_vp > kin.v_max:
        return -math.inf
    d = max_accel_distance(tau_e, v_vp, kin.v_max, kin.c_max)
    return -math.inf if math.isnan(d) else d - 2.0 * D


def derive_rcs_params(kin: KinematicParams, D: float = 1.0, max_factor: float = 1e4) -> RcsParams:
    """Smallest phase length compatible with speed, turning, loading and catch-up limits.

    The cycle is always four phases; the loading-rate limit is folded into the
    phase lower bound so that the cycle covers one load.
    """
    lower = max(D / kin.v_max, math.pi / (2.0 * kin.omega_r), 1.0 / (4.0 * kin.r_ls))
    if _catch_up_margin(lower, kin, D) >= 0:
        return RcsParams.from_phase(lower, D)
    # geometric scan for a bracket, then refine the root
    prev = lower
    tau = lower
    while tau < lower * max_factor:
        tau *= 1.05
        if _catch_up_margin(tau, kin, D) >= 0:
            g = lambda x: _catch_up_margin(x, kin, D) if math.isfinite(_catch_up_margin(x, kin, D)) else -1.0
            root = brentq(g, prev, tau, xtol=1e-14, rtol=1e-14)
            # brentq may land a hair on the infeasible side
            while _catch_up_margin(root, kin, D) < 0:
                root = math.nextafter(root, math.inf)
            return RcsParams.from_phase(root, D)
        prev = tau
    raise InfeasibleKinematics(
        "no phase length satisfies the catch-up constraint d(tau_e, D/tau_e) >= 2D "
        f"for tau_e up to {lower * max_factor:.3g} s"
    )
