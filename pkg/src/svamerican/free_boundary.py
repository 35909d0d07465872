"""Optimal-exercise boundary of a solved surface and its structural checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HorizonTooShortError, TruncationError
from .grid import build_grid
from .model import SVModel
from .penalty import PenaltyParams
from .solver import SolveConfig, SolveResult, psor_solve, solve


@dataclass(eq=False)
class FreeBoundary:
    """Log-price boundary h[j, k] on (y_j, theta_k); -inf marks an empty exercise column."""

    h: np.ndarray
    y_nodes: np.ndarray
    theta_nodes: np.ndarray
    ds: float
    K: float
    T: float
    tol_used: float = 0.0
    gap_offset: float = 0.0
    g: np.ndarray = field(init=False)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.h.shape != (len(self.y_nodes), len(self.theta_nodes)):
            raise ValueError("h must have shape (n_y + 1, n_theta + 1)")
        with np.errstate(under="ignore"):
            self.g = np.exp(self.h)

    @property
    def log_strike(self) -> float:
        return math.log(self.K)

    @property
    def t_nodes(self) -> np.ndarray:
        return self.T - self.theta_nodes

    def interpolator(self):
        """Callable g(y, t) by bilinear interpolation in (y, t)."""
        from .mc_oracle import exercise_boundary_interpolator

        order = np.argsort(self.t_nodes)
        return exercise_boundary_interpolator(self.y_nodes, self.t_nodes[order], self.g[:, order])


def penalty_gap_offset(result: SolveResult) -> float:
    """Height of the penalised solution above the intrinsic value deep in the exercise region.

    There the generator maps K - e^s to -rK, so the penalty settles where
    beta(u - payoff) = -rK, i.e. at u - (K - e^s) = eps ln(C0 / (rK)).
    Zero for projected SOR results, which touch the obstacle exactly.
    """
    if result.method == "psor" or result.model.r <= 0:
        return 0.0
    p = PenaltyParams.for_put(result.config.epsilon, result.model.r, result.model.K)
    return max(p.epsilon * math.log(p.C0 / (result.model.r * result.model.K)), 0.0)


def default_contact_tol(result: SolveResult) -> float:
    if result.method == "psor":
        return 1e-8
    return 0.5 * result.config.epsilon * result.model.K


def extract(result: SolveResult, contact_tol: float | None = None) -> FreeBoundary:
    """Largest log-price in contact with the obstacle, per (y_j, theta_k).

    A node is in contact when its excess u - (K - e^s) - offset is at most
    ``contact_tol``, where offset is the penalty equilibrium height from
    :func:`penalty_gap_offset`.  The node position is refined by linear
    interpolation of the excess towards the next node.  The Dirichlet column
    at s_min holds boundary data and never counts as contact.
    """
    grid = result.grid
    tol = default_contact_tol(result) if contact_tol is None else float(contact_tol)
    if not tol > 0:
        raise ValueError("contact_tol must be positive")
    offset = penalty_gap_offset(result)
    s = grid.s_nodes
    intrinsic = (grid.K - np.exp(s))[:, None]
    h = np.full((grid.n_y + 1, len(result.surfaces)), -np.inf)
    for k, surf in enumerate(result.surfaces):
        gap = surf.values - intrinsic - offset
        contact = gap <= tol
        contact[0, :] = False
        hit = contact.any(axis=0)
        last = len(s) - 1 - np.argmax(contact[::-1, :], axis=0)
        if np.any(hit & (last == len(s) - 1)):
            j = int(np.flatnonzero(hit & (last == len(s) - 1))[0])
            raise TruncationError(
                f"exercise region touches s_max at y={grid.y_nodes[j]:.4g}, "
                f"theta={surf.theta:.4g}; enlarge s_half_width")
        for j in np.flatnonzero(hit):
            i = last[j]
            g0, g1 = gap[i, j], gap[i + 1, j]
            frac = (tol - g0) / (g1 - g0) if g1 > g0 else 0.0
            h[j, k] = s[i] + grid.ds * min(max(frac, 0.0), 1.0)
    return FreeBoundary(h=h, y_nodes=grid.y_nodes.copy(), theta_nodes=grid.theta_nodes.copy(),
                        ds=grid.ds, K=grid.K, T=grid.T, tol_used=tol, gap_offset=offset)


@dataclass(frozen=True)
class StructureCheck:
    name: str
    passed: bool
    worst: float
    cells: list[tuple[int, int]]


@dataclass(frozen=True)
class StructureReport:
    checks: dict[str, StructureCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, key: str) -> StructureCheck:
        return self.checks[key]


def _violations(excess: np.ndarray, offset=(0, 0)) -> tuple[float, list[tuple[int, int]]]:
    excess = np.where(np.isnan(excess), -np.inf, excess)
    bad = np.argwhere(excess > 0)
    worst = float(np.max(excess)) if excess.size else -np.inf
    return worst, [(int(j) + offset[0], int(k) + offset[1]) for j, k in bad[:20]]


def check_structure(fb: FreeBoundary, jump_factor: float = 5.0) -> StructureReport:
    """Executable versions of the boundary's structural properties.

    (a) nonincreasing in theta and (b) in y, both up to one ds; (c) strictly
    below ln K for theta > 0; (d) neighbouring jumps at most ``jump_factor``
    ds; (e) within 2 ds of ln K at the first positive theta.  Only columns
    with y > 0 are checked.  Cells are reported as (j, k) index pairs.
    """
    h = fb.h[1:, :]
    ds, lnK = fb.ds, fb.log_strike
    out = {}
    with np.errstate(invalid="ignore"):
        worst, cells = _violations(h[:, 1:] - h[:, :-1] - ds, (1, 1))
        out["theta_monotone"] = StructureCheck("theta_monotone", not cells, worst, cells)

        worst, cells = _violations(h[1:, :] - h[:-1, :] - ds, (2, 0))
        out["y_monotone"] = StructureCheck("y_monotone", not cells, worst, cells)

        below = h[:, 1:] - lnK
        worst, cells = _violations(np.where(below >= 0, below + 1e-300, below), (1, 1))
        out["below_strike"] = StructureCheck("below_strike", not cells, worst, cells)

        fin = np.isfinite(h)
        dth = np.where(fin[:, 1:] & fin[:, :-1], np.abs(np.diff(h, axis=1)), 0.0)
        dyy = np.where(fin[1:, :] & fin[:-1, :], np.abs(np.diff(h, axis=0)), 0.0)
        w1, c1 = _violations(dth - jump_factor * ds, (1, 1))
        w2, c2 = _violations(dyy - jump_factor * ds, (2, 0))
        out["continuity"] = StructureCheck("continuity", not (c1 or c2), max(w1, w2), c1 + c2)

        if h.shape[1] > 1:
            dev = np.abs(h[:, 1] - lnK) - 2.0 * ds
            dev = np.where(np.isfinite(dev), dev, np.inf)
            worst, cells = _violations(dev[:, None], (1, 1))
        else:
            worst, cells = np.inf, [(0, 0)]
        out["initial_strike"] = StructureCheck("initial_strike", not cells, worst, cells)
    return StructureReport(out)


def check_partition(result: SolveResult, fb: FreeBoundary) -> list[tuple[int, int, int]]:
    """Nodes (k, i, j) contradicting the split into exercise {s <= h} and continuation {s > h}.

    Nodes within one ds of the boundary are not judged.
    """
    grid = result.grid
    s = grid.s_nodes[:, None]
    intrinsic = (grid.K - np.exp(grid.s_nodes))[:, None]
    bad = []
    for k, surf in enumerate(result.surfaces):
        gap = surf.values - intrinsic - fb.gap_offset
        h = fb.h[:, k][None, :]
        inside = (s <= h - grid.ds) & (gap > fb.tol_used)
        outside = (s >= h + grid.ds) & (gap <= fb.tol_used)
        inside[0, :] = outside[0, :] = False
        for i, j in np.argwhere(inside | outside):
            bad.append((k, int(i), int(j)))
    return bad


def perpetual_boundary(model: SVModel, grid, config: SolveConfig = SolveConfig(),
                       horizon_factor: float = 4.0, method: str = "penalty",
                       contact_tol: float | None = None,
                       stationarity_tol: float | None = None) -> np.ndarray:
    """Long-horizon approximation h0(y_j) of the stationary exercise boundary.

    Marches to T' = horizon_factor * T with the grid's time step and checks
    that the boundary moved by at most ``stationarity_tol`` (default 2 ds)
    over the final 1/horizon_factor of the horizon.
    """
    if horizon_factor < 4:
        raise ValueError("horizon_factor must be at least 4")
    T_long = horizon_factor * model.T
    n_long = int(round(horizon_factor * grid.n_theta))
    long_model = model.replace(T=T_long)
    offset = grid.s_min - (math.log(model.K) - 0.5 * grid.ds * grid.n_s)
    g = build_grid(long_model, 0.5 * grid.ds * grid.n_s, grid.y_max, grid.n_s, grid.n_y,
                   n_long, offset=offset)
    res = psor_solve(long_model, g, config) if method == "psor" else solve(long_model, g, config)
    fb = extract(res, contact_tol)
    k_prev = int(round(n_long * (1.0 - 1.0 / horizon_factor)))
    h_end, h_prev = fb.h[:, -1], fb.h[:, k_prev]
    with np.errstate(invalid="ignore"):
        diff = np.abs(h_end - h_prev)
    diff = np.where(np.isneginf(h_end) & np.isneginf(h_prev), 0.0, diff)
    drift = float(np.max(diff[1:]))
    limit = 2.0 * g.ds if stationarity_tol is None else float(stationarity_tol)
    if not drift <= limit:
        raise HorizonTooShortError(
            f"boundary still moving by {drift:.3g} (> {limit:.3g}) at T'={T_long:g}; "
            "increase horizon_factor")
    return h_end
