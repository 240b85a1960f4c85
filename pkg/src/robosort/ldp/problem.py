"""Costs, decision variables and constraint functions of the layout design problem."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from ..model import DEFAULT_COEFFS, AttenuationCoeffs, attenuation, avg_travel_distance, n_vp_total

# order of the continuous decision vector
VARIABLES = ("n_h", "n_v", "n_w_H", "n_r_H", "n_w_L", "n_r_L")


def discount(monthly: float, gamma0: float = 0.005, horizon: int = 60) -> float:
    """Present value of a monthly payment over months ``0..horizon`` inclusive."""
    if gamma0 == 0:
        return monthly * (horizon + 1)
    v = 1.0 / (1.0 + gamma0)
    return monthly * (1.0 - v ** (horizon + 1)) / (1.0 - v)


@dataclass(frozen=True)
class CostParams:
    M_s: float = 10.0  # per m2 and month
    M_l: float = 400.0  # per station and month
    M_w: float = 5000.0  # per worker and month
    M_r: float = 200.0  # per robot and month
    W_w: float = 5.0  # waiting zone width, m
    W_l: float = 5.0  # loading zone width, m
    theta: float = 1 / 6  # share of peak months
    gamma0: float = 0.005
    horizon_months: int = 60

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be non-negative")

    def present(self, monthly: float) -> float:
        return discount(monthly, self.gamma0, self.horizon_months)

    @property
    def P_s(self) -> float:
        return self.present(self.M_s)

    @property
    def P_l(self) -> float:
        return self.present(self.M_l)

    @property
    def P_w(self) -> float:
        return self.present(self.M_w)

    @property
    def P_r(self) -> float:
        return self.present(self.M_r)

    def scaled(self, k: float) -> CostParams:
        return CostParams(self.M_s * k, self.M_l * k, self.M_w * k, self.M_r * k, self.W_w, self.W_l,
                          self.theta, self.gamma0, self.horizon_months)


@dataclass(frozen=True)
class DemandSpec:
    T_H: float  # sorts/h, peak
    T_L: float  # sorts/h, off-peak
    N_o: int = 100

    def __post_init__(self):
        if self.T_L > self.T_H:
            raise ValueError("off-peak demand exceeds peak demand")
        if self.N_o < 1:
            raise ValueError("N_o must be at least 1")


@dataclass(frozen=True)
class SystemParams:
    """Controller timing and cell size used by the throughput constraints."""
    tau_e: float = 0.5
    tau_c: float = 2.0
    D: float = 1.0
    coeffs: AttenuationCoeffs = DEFAULT_COEFFS


@dataclass(frozen=True)
class LayoutDesign:
    n_h: int
    n_v: int
    n_w_H: int
    n_r_H: int
    n_w_L: int
    n_r_L: int

    @property
    def n_l(self) -> int:
        # one station per peak worker
        return self.n_w_H

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in VARIABLES], dtype=float)

    @classmethod
    def from_vector(cls, w) -> LayoutDesign:
        w = [int(round(float(x))) for x in w]
        return cls(*w)

    def structural_errors(self) -> list[str]:
        msgs = []
        if min(self.n_h, self.n_v, self.n_w_H, self.n_r_H, self.n_w_L, self.n_r_L) < 1:
            msgs.append("all counts must be positive")
        if self.n_h % 2 or self.n_v % 2:
            msgs.append("aisle counts must be even")
        if self.n_l > self.n_h + self.n_v:
            msgs.append("more stations than aisle entrances")
        if self.n_w_L > self.n_l:
            msgs.append("more off-peak workers than stations")
        return msgs


# ---------------------------------------------------------------------------
# costs
# ---------------------------------------------------------------------------

def footprint(n_h: float, n_v: float, costs: CostParams, D: float = 1.0) -> float:
    """Site area including the waiting and loading zones on both axes (m2)."""
    pad = costs.W_w + costs.W_l
    return (2 * D * (n_h - 1) + pad) * (2 * D * (n_v - 1) + pad)


def facility_cost(design: LayoutDesign, costs: CostParams, D: float = 1.0) -> float:
    return costs.P_s * footprint(design.n_h, design.n_v, costs, D) + costs.P_l * design.n_l


def operations_cost(design: LayoutDesign, costs: CostParams) -> float:
    th = costs.theta
    return (costs.P_w * (th * design.n_w_H + (1 - th) * design.n_w_L)
            + costs.P_r * (th * design.n_r_H + (1 - th) * design.n_r_L))


def total_cost(design: LayoutDesign, costs: CostParams, D: float = 1.0) -> float:
    return facility_cost(design, costs, D) + operations_cost(design, costs)


def cost_of_vector(w: np.ndarray, costs: CostParams, D: float = 1.0) -> float:
    n_h, n_v, nwh, nrh, nwl, nrl = w
    th = costs.theta
    return (costs.P_s * footprint(n_h, n_v, costs, D) + costs.P_l * nwh
            + costs.P_w * (th * nwh + (1 - th) * nwl) + costs.P_r * (th * nrh + (1 - th) * nrl))


def cost_gradient(w: np.ndarray, costs: CostParams, D: float = 1.0) -> np.ndarray:
    n_h, n_v = w[0], w[1]
    pad = costs.W_w + costs.W_l
    th = costs.theta
    return np.array([
        costs.P_s * 2 * D * (2 * D * (n_v - 1) + pad),
        costs.P_s * 2 * D * (2 * D * (n_h - 1) + pad),
        costs.P_l + costs.P_w * th,
        costs.P_r * th,
        costs.P_w * (1 - th),
        costs.P_r * (1 - th),
    ])


# ---------------------------------------------------------------------------
# constraints g(w) <= 0
# ---------------------------------------------------------------------------

N_CONSTRAINTS = 7


def _vp_capacity(n_h, n_v, n_w, sp: SystemParams) -> float:
    """Robots the staffed network can hold in VPs."""
    alpha = n_w / (n_h + n_v)
    kappa = 1.0 - (1.0 - alpha) ** 2
    return (attenuation(n_h, n_v, sp.coeffs) * kappa
            * 2 * sp.tau_e * (n_h * (n_v - 1) + n_v * (n_h - 1)) / sp.tau_c)


def _robot_throughput(n_h, n_v, n_w, n_r, sp: SystemParams) -> float:
    """Sorts/h delivered by ``n_r`` robots circulating at VP speed."""
    alpha = min(max(n_w / (n_h + n_v), 1e-9), 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        l_bar = avg_travel_distance(n_h, n_v, alpha, sp.D)
    return 3600.0 * sp.D * n_r / (sp.tau_e * l_bar)


def constraint_values(w, demand: DemandSpec, sp: SystemParams = SystemParams()) -> np.ndarray:
    """Residuals, feasible iff all <= 0.

    0, 1: robots within VP capacity (peak, off-peak)
    2, 3: throughput meets demand (peak, off-peak)
    4: enough outlets
    5: peak workers within aisle entrances
    6: off-peak workers within the stations opened for the peak
    """
    if isinstance(w, LayoutDesign):
        w = w.as_vector()
    n_h, n_v, nwh, nrh, nwl, nrl = (float(x) for x in w)
    return np.array([
        nrh - _vp_capacity(n_h, n_v, nwh, sp),
        nrl - _vp_capacity(n_h, n_v, nwl, sp),
        demand.T_H - _robot_throughput(n_h, n_v, nwh, nrh, sp),
        demand.T_L - _robot_throughput(n_h, n_v, nwl, nrl, sp),
        demand.N_o - (n_h - 1) * (n_v - 1),
        nwh - n_h - n_v,
        nwl - nwh,
    ])


def constraint_jacobian(w, demand: DemandSpec, sp: SystemParams = SystemParams(),
                        h: float = 1e-4) -> np.ndarray:
    """Rows are constraint gradients: central differences for the capacity and
    throughput rows, exact for the linear and bilinear ones."""
    w = np.asarray(w, dtype=float)
    J = np.zeros((N_CONSTRAINTS, len(VARIABLES)))
    for j in range(len(VARIABLES)):
        e = np.zeros(len(VARIABLES))
        e[j] = h
        J[:4, j] = (constraint_values(w + e, demand, sp)[:4] - constraint_values(w - e, demand, sp)[:4]) / (2 * h)
    n_h, n_v = w[0], w[1]
    J[4] = [-(n_v - 1), -(n_h - 1), 0, 0, 0, 0]
    J[5] = [-1, -1, 1, 0, 0, 0]
    J[6] = [0, 0, -1, 0, 1, 0]
    return J


def is_feasible(design: LayoutDesign, demand: DemandSpec, sp: SystemParams = SystemParams(),
                tol: float = 1e-9) -> bool:
    return not design.structural_errors() and bool((constraint_values(design, demand, sp) <= tol).all())


def min_robots(n_h: int, n_v: int, n_w: int, T: float, sp: SystemParams = SystemParams()) -> int:
    """Fewest robots meeting throughput ``T`` (ignores the VP capacity)."""
    per_robot = _robot_throughput(n_h, n_v, n_w, 1.0, sp)
    return max(1, math.ceil(T / per_robot - 1e-9))


def max_robots(n_h: int, n_v: int, n_w: int, sp: SystemParams = SystemParams()) -> int:
    return math.floor(_vp_capacity(n_h, n_v, n_w, sp) + 1e-9)


def smallest_site(N_o: int) -> tuple[int, int]:
    """Fewest-outlet even grid with at least ``N_o`` outlets and aspect ratio below 2
    (ties: more square)."""
    best = None
    for n_h in range(2, 2 * int(math.isqrt(N_o)) + 8, 2):
        for n_v in range(n_h, 2 * n_h, 2):
            if (n_h - 1) * (n_v - 1) >= N_o:
                key = ((n_h - 1) * (n_v - 1), n_v - n_h)
                if best is None or key < best[0]:
                    best = (key, (n_h, n_v))
                break
    return best[1]


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    demand: DemandSpec
    costs: CostParams = field(default_factory=CostParams)
    system: SystemParams = field(default_factory=SystemParams)
    hyper: dict = field(default_factory=dict)

    def to_text(self) -> str:
        sysd = asdict(self.system)
        doc = {"format": "robosort-ldp/1", "demand": asdict(self.demand), "costs": asdict(self.costs),
               "system": sysd, "hyper": self.hyper}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Scenario:
        doc = json.loads(text)
        sysd = dict(doc.get("system", {}))
        if "coeffs" in sysd:
            sysd["coeffs"] = AttenuationCoeffs(**sysd["coeffs"])
        return cls(DemandSpec(**doc["demand"]), CostParams(**doc.get("costs", {})),
                   SystemParams(**sysd), doc.get("hyper", {}))
