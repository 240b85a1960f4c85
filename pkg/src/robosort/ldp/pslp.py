"""Penalty successive linear programming for the layout design problem."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problem import (
    CostParams,
    DemandSpec,
    LayoutDesign,
    SystemParams,
    constraint_jacobian,
    constraint_values,
    cost_gradient,
    cost_of_vector,
    is_feasible,
    max_robots,
    min_robots,
    smallest_site,
    total_cost,
)
from .simplex import LpError, linprog_min


@dataclass(frozen=True)
class PslpHyper:
    rho0: float = 0.1
    rho1: float = 0.25
    rho2: float = 0.75
    phi: float = 0.5  # trust-region shrink/expand factor
    mu: float = 3e4  # penalty per unit of (scaled) constraint violation
    delta1: float = 4.0
    delta_lb: float = 1.0
    max_iter: int = 200
    max_inner: int = 40
    polish: bool = True


@dataclass
class PslpResult:
    design: LayoutDesign
    cost: float
    feasible: bool
    iterations: int
    converged: bool
    relaxed: LayoutDesign  # rounded iterate before repair
    pslp_design: LayoutDesign  # repaired PSLP result before the integer polish
    pslp_cost: float
    merit_history: list[float] = field(default_factory=list)
    delta_history: list[float] = field(default_factory=list)
    message: str = ""


# ---------------------------------------------------------------------------
# LP subproblem
# ---------------------------------------------------------------------------

def lp_subproblem(grad_f: np.ndarray, g: np.ndarray, J: np.ndarray, delta, mu: float
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Direction ``d`` and artificials ``y`` minimising ``grad_f @ d + mu * sum(y)``
    with ``y >= g + J d``, ``y >= 0`` and ``|d| <= delta``."""
    n = len(grad_f)
    m = len(g)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (n,))
    if (delta == 0).all():
        return np.zeros(n), np.maximum(g, 0.0)
    # d = u - delta with 0 <= u <= 2 delta; variables [u, y]
    c = np.concatenate([grad_f, np.full(m, mu)])
    A = np.zeros((m + n, n + m))
    b = np.zeros(m + n)
    A[:m, :n] = J
    A[:m, n:] = -np.eye(m)
    b[:m] = -g + J @ delta
    A[m:, :n] = np.eye(n)
    b[m:] = 2 * delta
    res = linprog_min(c, A, b)
    if res.status != "optimal":
        raise LpError(f"direction LP returned {res.status}")
    u, y = res.x[:n], res.x[n:]
    return u - delta, y


# ---------------------------------------------------------------------------
# merit functions
# ---------------------------------------------------------------------------

def constraint_scale(demand: DemandSpec) -> np.ndarray:
    """Throughput rows are measured as a fraction of demand, the others in counts."""
    s = np.ones(7)
    s[2] = max(demand.T_H, 1.0)
    s[3] = max(demand.T_L, 1.0)
    return s


def merit(w, costs: CostParams, demand: DemandSpec, sp: SystemParams, mu: float) -> float:
    g = constraint_values(w, demand, sp) / constraint_scale(demand)
    return cost_of_vector(w, costs, sp.D) + mu * float(np.maximum(g, 0).sum())


def linear_merit(w, d, f0, grad_f, g0, J, mu: float) -> float:
    return f0 + grad_f @ d + mu * float(np.maximum(g0 + J @ d, 0).sum())


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------

# the search runs on (n_h/2, n_v/2, n_w_H, n_r_H, n_w_L, n_r_L) so that every
# integer point is a design with even aisle counts
SCALE = np.array([2.0, 2.0, 1.0, 1.0, 1.0, 1.0])


def _round_up(z: np.ndarray) -> np.ndarray:
    """Componentwise ceiling, every count at least one."""
    return np.maximum(np.ceil(z - 1e-9), 1.0)


def _clip(z: np.ndarray) -> np.ndarray:
    """Keep iterates where the distance model is defined."""
    z = np.maximum(z, 1.0)
    entrances = 2 * (z[0] + z[1])
    z[2] = min(z[2], entrances)
    z[4] = min(z[4], entrances)
    return z


def repair(design: LayoutDesign, demand: DemandSpec, sp: SystemParams = SystemParams(),
           max_steps: int = 10_000) -> LayoutDesign:
    """Cheapest-first fixes: robots, then workers, then grow the grid by two aisles."""
    n_h, n_v, nwh, nrh, nwl, nrl = (design.n_h, design.n_v, design.n_w_H, design.n_r_H,
                                    design.n_w_L, design.n_r_L)
    for _ in range(max_steps):
        n_h += n_h % 2
        n_v += n_v % 2
        while (n_h - 1) * (n_v - 1) < demand.N_o:
            if n_h <= n_v:
                n_h += 2
            else:
                n_v += 2
        nwh = min(max(nwh, 1), n_h + n_v)
        nwl = min(max(nwl, 1), nwh)
        ok = True
        for season in ("H", "L"):
            T = demand.T_H if season == "H" else demand.T_L
            nw = nwh if season == "H" else nwl
            need = min_robots(n_h, n_v, nw, T, sp)
            cap = max_robots(n_h, n_v, nw, sp)
            have = nrh if season == "H" else nrl
            have = max(have, 1)
            if need <= cap:
                have = min(max(have, need), cap)
                if season == "H":
                    nrh = have
                else:
                    nrl = have
                continue
            ok = False
            if nw < n_h + n_v:
                # more workers open more VPs
                if season == "H":
                    nwh += 1
                elif nwl < nwh:
                    nwl += 1
                else:
                    nwh += 1
                    nwl += 1
            else:
                if n_h <= n_v:
                    n_h += 2
                else:
                    n_v += 2
            break
        if ok:
            return LayoutDesign(n_h, n_v, nwh, nrh, nwl, nrl)
    raise RuntimeError("repair did not reach a feasible design")


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def initial_design(demand: DemandSpec, sp: SystemParams = SystemParams()) -> LayoutDesign:
    """Smallest site with enough outlets, every entrance staffed, and per season the
    fewest robots meeting demand (capped at the VP capacity)."""
    n_h, n_v = smallest_site(demand.N_o)
    n = n_h + n_v
    cap = max(1, max_robots(n_h, n_v, n, sp))
    r_h = min(min_robots(n_h, n_v, n, demand.T_H, sp), cap)
    r_l = min(min_robots(n_h, n_v, n, demand.T_L, sp), cap)
    return LayoutDesign(n_h, n_v, n, r_h, n, r_l)


def pslp_solve(demand: DemandSpec, costs: CostParams = CostParams(), sp: SystemParams = SystemParams(),
               init: LayoutDesign | None = None, hyper: PslpHyper = PslpHyper()) -> PslpResult:
    z = (init or initial_design(demand, sp)).as_vector() / SCALE
    delta = hyper.delta1
    mu = hyper.mu

    def merit_z(v):
        return merit(v * SCALE, costs, demand, sp, mu)

    merits = [merit_z(z)]
    deltas = [delta]
    converged = False
    message = "iteration limit"
    it = 0
    for it in range(1, hyper.max_iter + 1):
        w = z * SCALE
        f0 = cost_of_vector(w, costs, sp.D)
        grad = cost_gradient(w, costs, sp.D) * SCALE
        cs = constraint_scale(demand)
        g0 = constraint_values(w, demand, sp) / cs
        J = constraint_jacobian(w, demand, sp) * SCALE / cs[:, None]
        accepted = None
        for _ in range(hyper.max_inner):
            d, _y = lp_subproblem(grad, g0, J, delta, mu)
            predicted = (linear_merit(z, np.zeros_like(d), f0, grad, g0, J, mu)
                         - linear_merit(z, d, f0, grad, g0, J, mu))
            cand = _round_up(_clip(z + d))
            if predicted <= 1e-9 * max(1.0, abs(f0)):
                message = "no predicted decrease"
                break
            if np.array_equal(cand, z):
                message = "rounded iterate unchanged"
                break
            # actual and predicted decrease are both taken on the rounded step,
            # the one that is really made
            step = cand - z
            predicted = (linear_merit(z, np.zeros_like(step), f0, grad, g0, J, mu)
                         - linear_merit(z, step, f0, grad, g0, J, mu))
            actual = merits[-1] - merit_z(cand)
            ratio = actual / predicted if predicted > 0 else (1.0 if actual > 0 else -np.inf)
            if ratio >= hyper.rho0:
                accepted = cand
                break
            if delta <= hyper.delta_lb:
                message = "no acceptable step at the smallest trust region"
                break
            delta = max(delta * hyper.phi, hyper.delta_lb)
            deltas.append(delta)
        if accepted is None:
            converged = True
            break
        z = accepted
        merits.append(merit_z(z))
        if ratio < hyper.rho1:
            delta = hyper.phi * delta
        elif ratio >= hyper.rho2:
            delta = delta / hyper.phi
        delta = max(delta, hyper.delta_lb)
        deltas.append(delta)
    relaxed = LayoutDesign.from_vector(z * SCALE)
    base = relaxed if is_feasible(relaxed, demand, sp) else repair(relaxed, demand, sp)
    design = polish(base, demand, costs, sp) if hyper.polish else base
    return PslpResult(design, total_cost(design, costs, sp.D), is_feasible(design, demand, sp), it,
                      converged, relaxed, base, total_cost(base, costs, sp.D), merits, deltas, message)


def _cheapest_staffing(n_h: int, n_v: int, nwh: int, nwl: int, demand: DemandSpec,
                       sp: SystemParams) -> LayoutDesign | None:
    """Design with the fewest robots for the given grid and staffing, if any is feasible."""
    if n_h < 2 or n_v < 2 or not 1 <= nwl <= nwh <= n_h + n_v:
        return None
    if (n_h - 1) * (n_v - 1) < demand.N_o:
        return None
    rh = min_robots(n_h, n_v, nwh, demand.T_H, sp)
    rl = min_robots(n_h, n_v, nwl, demand.T_L, sp)
    if rh > max_robots(n_h, n_v, nwh, sp) or rl > max_robots(n_h, n_v, nwl, sp):
        return None
    return LayoutDesign(n_h, n_v, nwh, rh, nwl, rl)


def polish(design: LayoutDesign, demand: DemandSpec, costs: CostParams = CostParams(),
           sp: SystemParams = SystemParams(), max_rounds: int = 1000) -> LayoutDesign:
    """Integer descent over grid moves of up to two aisles per side combined with
    staffing moves of up to two workers per season; robot counts are re-derived
    for each neighbour and the best improving one is kept."""
    best = _cheapest_staffing(design.n_h, design.n_v, design.n_w_H, design.n_w_L, demand, sp)
    if best is None or total_cost(best, costs, sp.D) > total_cost(design, costs, sp.D):
        best = design
    best_cost = total_cost(best, costs, sp.D)
    moves = [(dh, dv, dwh, dwl) for dh in (-2, 0, 2) for dv in (-2, 0, 2)
             for dwh in range(-2, 3) for dwl in range(-2, 3) if (dh, dv, dwh, dwl) != (0, 0, 0, 0)]
    for _ in range(max_rounds):
        step = None
        for dh, dv, dwh, dwl in moves:
            cand = _cheapest_staffing(best.n_h + dh, best.n_v + dv, best.n_w_H + dwh, best.n_w_L + dwl,
                                      demand, sp)
            if cand is None:
                continue
            c = total_cost(cand, costs, sp.D)
            if c < best_cost - 1e-6 and (step is None or c < step[1]):
                step = (cand, c)
        if step is None:
            return best
        best, best_cost = step
    return best
