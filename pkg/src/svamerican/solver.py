"""Finite-difference solvers for the American put variational inequality.

Unknowns live on every node of the (s, y) lattice, flattened with y varying
fastest.  Row types:

* interior nodes carry the discretised generator with theta-weighting;
* y = 0 and s = s_min carry Dirichlet rows holding the payoff;
* y = y_max and s = s_max carry second-order one-sided Neumann rows, and the
  corner (s_max, y_max) averages the two Neumann forms.

``solve`` treats the obstacle with a penalty term and Newton iteration;
``psor_solve`` solves the discrete linear complementarity problem of each
step directly by projected SOR and is kept independent of the penalty path.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, DegenerateBoundaryUnsupported, OracleFailure, StepFailure
from .grid import Grid, Surface
from .model import SVModel, fichera_classify
from .penalty import PenaltyParams, beta, beta_prime, pi_smooth

logger = logging.getLogger(__name__)

LINEAR_SOLVERS = ("banded-lu", "sparse-lu", "bicgstab-ilu")


@dataclass(frozen=True)
class SolveConfig:
    epsilon: float = 1e-3
    newton_tol: float = 1e-9
    newton_max_iter: int = 50
    theta_scheme: float = 0.5
    rannacher_steps: int = 5
    linear_solver: str = "banded-lu"
    epsilon_schedule: tuple[float, ...] | None = None
    strict: bool = True
    psor_omega: float = 1.5
    psor_tol: float = 1e-10
    psor_max_iter: int = 20000

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ConfigurationError("newton_tol must be positive")
        if not 0.5 <= self.theta_scheme <= 1.0:
            raise ConfigurationError("theta_scheme must lie in [0.5, 1]")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if self.linear_solver not in LINEAR_SOLVERS:
            raise ConfigurationError(f"linear_solver must be one of {LINEAR_SOLVERS}")
        if not 0.0 < self.psor_omega < 2.0:
            raise ConfigurationError("psor_omega must lie in (0, 2)")
        if self.epsilon_schedule is not None:
            sched = tuple(float(e) for e in self.epsilon_schedule)
            if not sched or any(e <= 0 for e in sched) or any(np.diff(sched) >= 0):
                raise ConfigurationError("epsilon_schedule must be positive and strictly decreasing")
            object.__setattr__(self, "epsilon_schedule", sched)
            object.__setattr__(self, "epsilon", sched[-1])

    def weight(self, step: int) -> float:
        """Implicitness of step ``step`` (0-based): fully implicit start, then theta_scheme."""
        return 1.0 if step < self.rannacher_steps else self.theta_scheme


# -- operator ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OperatorStencil:
    grid: Grid
    epsilon: float
    a_ss: np.ndarray
    a_sy: np.ndarray
    a_yy: np.ndarray
    b_s: np.ndarray
    b_y: np.ndarray
    c: float
    L: sp.csr_matrix            # generator on interior rows, zero elsewhere
    interior: np.ndarray        # bool, flattened
    dirichlet: np.ndarray       # bool, flattened
    neumann: sp.csr_matrix      # Neumann equations on their rows, zero elsewhere
    obstacle: np.ndarray        # smoothed payoff pi_eps(K - e^s) on every node, flattened

    @property
    def boundary_values(self) -> np.ndarray:
        return np.where(self.dirichlet, self.obstacle, 0.0)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Generator applied to a node array; zero on boundary nodes."""
        return (self.L @ np.asarray(u, dtype=float).ravel()).reshape(self.grid.shape)


def _node_index(grid: Grid):
    ny1 = grid.n_y + 1
    return lambda i, j: i * ny1 + j


def _fitted_s_weights(a, b, ds):
    """Three-point weights for a u_ss + b u_s that are exact on 1 and e^s.

    Central weights are used while both stay nonnegative; otherwise the
    downwind weight is dropped and the upwind one is fixed by exactness on
    e^s.  Either way the row has nonnegative off-diagonals.
    """
    A = a / (2.0 * np.cosh(ds) - 2.0)
    B = b / (2.0 * np.sinh(ds))
    w_up, w_dn = A + B, A - B
    fwd = w_dn < 0
    bwd = w_up < 0
    w_up = np.where(fwd, (a + b) / np.expm1(ds), np.where(bwd, 0.0, w_up))
    w_dn = np.where(fwd, 0.0, np.where(bwd, (a + b) / np.expm1(-ds), w_dn))
    return w_up, w_dn


def assemble(grid: Grid, model: SVModel, epsilon: float, strict: bool = True,
             s_scheme: str = "fitted") -> OperatorStencil:
    """Nine-point discretisation of the epsilon-regularised generator.

    The y second derivative and the cross derivative are centred and the y
    drift is upwinded by its sign.  In s the default ``"fitted"`` weights
    reproduce the generator exactly on 1 and e^s, so the discrete generator
    maps the intrinsic value K - e^s to -rK just as the continuous one does;
    ``"upwind"`` gives the textbook centred/upwind pair.
    """
    report = fichera_classify(model)
    if not report.impose_boundary:
        msg = (f"Fichera function F={report.F_value:.4g} >= 0 at y=0 (case F2): no boundary "
               "datum should be imposed, which this solver does not support")
        if strict:
            raise DegenerateBoundaryUnsupported(msg)
        warnings.warn(msg + "; imposing the Dirichlet row anyway", RuntimeWarning, stacklevel=2)

    ns1, ny1 = grid.shape
    s, y = grid.s_nodes, grid.y_nodes
    sig, bb, mu = model.sigma(y), model.b(y), model.mu(y)
    ones = np.ones((ns1, 1))
    a_ss = ones * (0.5 * (sig ** 2 + epsilon))[None, :]
    a_sy = ones * (model.rho * (sig * bb + epsilon))[None, :]
    a_yy = ones * (0.5 * (bb ** 2 + epsilon))[None, :]
    b_s = ones * (model.r - 0.5 * sig ** 2 - 0.5 * epsilon)[None, :]
    b_y = ones * np.asarray(mu, dtype=float)[None, :]
    c = -model.r

    ds, dy = grid.ds, grid.dy
    idx = _node_index(grid)
    I, J = np.meshgrid(np.arange(1, ns1 - 1), np.arange(1, ny1 - 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    row = idx(I, J)
    ass, asy, ayy = a_ss[I, J], a_sy[I, J], a_yy[I, J]
    bs, by = b_s[I, J], b_y[I, J]
    if s_scheme == "fitted":
        w_up, w_dn = _fitted_s_weights(ass, bs, ds)
    elif s_scheme == "upwind":
        w_up = ass / ds ** 2 + np.maximum(bs, 0.0) / ds
        w_dn = ass / ds ** 2 - np.minimum(bs, 0.0) / ds
    else:
        raise ConfigurationError(f"unknown s_scheme {s_scheme!r}")
    by_p, by_m = np.maximum(by, 0.0) / dy, np.minimum(by, 0.0) / dy
    cross = asy / (4.0 * ds * dy)

    entries = [
        (row, -w_up - w_dn - 2.0 * ayy / dy ** 2 - by_p + by_m + c),
        (idx(I + 1, J), w_up),
        (idx(I - 1, J), w_dn),
        (idx(I, J + 1), ayy / dy ** 2 + by_p),
        (idx(I, J - 1), ayy / dy ** 2 - by_m),
        (idx(I + 1, J + 1), cross),
        (idx(I + 1, J - 1), -cross),
        (idx(I - 1, J + 1), -cross),
        (idx(I - 1, J - 1), cross),
    ]
    rows = np.concatenate([row] * len(entries))
    cols = np.concatenate([e[0] for e in entries])
    vals = np.concatenate([e[1] for e in entries])
    n = grid.size
    L = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    kind = np.zeros(grid.shape, dtype=int)  # 0 interior, 1 dirichlet, 2 neumann
    kind[:, 0] = 1
    kind[0, :] = 1
    kind[-1, 1:] = 2
    kind[1:-1, -1] = 2
    kind = kind.ravel()

    nrows, ncols, nvals = [], [], []

    def add(r, cs, vs):
        nrows.extend([r] * len(cs))
        ncols.extend(cs)
        nvals.extend(vs)

    N, M = ns1 - 1, ny1 - 1
    for j in range(1, M):
        add(idx(N, j), [idx(N, j), idx(N - 1, j), idx(N - 2, j)], [3.0, -4.0, 1.0])
    for i in range(1, N):
        add(idx(i, M), [idx(i, M), idx(i, M - 1), idx(i, M - 2)], [3.0, -4.0, 1.0])
    add(idx(N, M), [idx(N, M), idx(N - 1, M), idx(N - 2, M), idx(N, M - 1), idx(N, M - 2)],
        [3.0, -2.0, 0.5, -2.0, 0.5])
    B = sp.csr_matrix((nvals, (nrows, ncols)), shape=(n, n))

    intrinsic = model.K - np.exp(s)
    obstacle = pi_smooth(intrinsic, epsilon) if epsilon > 0 else np.maximum(intrinsic, 0.0)
    psi_eps = np.repeat(obstacle, ny1)
    return OperatorStencil(
        grid=grid, epsilon=epsilon, a_ss=a_ss, a_sy=a_sy, a_yy=a_yy, b_s=b_s, b_y=b_y, c=c,
        L=L, interior=kind == 0, dirichlet=kind == 1, neumann=B,
        obstacle=psi_eps,
    )


def system_matrix(stencil: OperatorStencil, dtheta: float, weight: float) -> sp.csr_matrix:
    """Left-hand side (I - w dtheta L) on interior rows, boundary equations elsewhere."""
    diag = (stencil.interior | stencil.dirichlet).astype(float)
    A = sp.diags(diag) - (weight * dtheta) * stencil.L + stencil.neumann
    return A.tocsr()


def explicit_rhs(stencil: OperatorStencil, u_prev: np.ndarray, dtheta: float, weight: float,
                 dirichlet_values: np.ndarray) -> np.ndarray:
    u = u_prev.ravel()
    rhs = np.where(stencil.interior, u, 0.0)
    if weight < 1.0:
        rhs = rhs + (1.0 - weight) * dtheta * (stencil.L @ u)
    return np.where(stencil.dirichlet, dirichlet_values, rhs)


# -- linear algebra -------------------------------------------------------------

class _LinearSolver:
    """Solves (A + diag(d)) x = f for a fixed sparse A and varying diagonal d."""

    def __init__(self, A: sp.csr_matrix, method: str, ny1: int):
        self.A = A
        self.method = method
        if method == "banded-lu":
            self.l, self.u = 2 * ny1, ny1 + 1
            n = A.shape[0]
            ab = np.zeros((self.l + self.u + 1, n))
            coo = A.tocoo()
            ab[self.u + coo.row - coo.col, coo.col] = coo.data
            self.ab = ab

    def solve(self, d: np.ndarray, f: np.ndarray) -> np.ndarray:
        if self.method == "banded-lu":
            ab = self.ab.copy()
            ab[self.u] += d
            return sla.solve_banded((self.l, self.u), ab, f, check_finite=False)
        J = (self.A + sp.diags(d)).tocsc()
        if self.method == "sparse-lu":
            return spla.splu(J).solve(f)
        ilu = spla.spilu(J, drop_tol=1e-6, fill_factor=20)
        x, info = spla.bicgstab(J, f, M=spla.LinearOperator(J.shape, ilu.solve), rtol=1e-13,
                                atol=0.0, maxiter=500)
        if info != 0:
            raise StepFailure(f"BiCGStab did not converge (info={info})", float("nan"))
        return x


# -- penalty time stepping -----------------------------------------------------

def _newton(solver: _LinearSolver, rhs: np.ndarray, psi: np.ndarray, mask: np.ndarray,
            dtheta: float, penalty: PenaltyParams, u0: np.ndarray, tol: float,
            max_iter: int) -> tuple[np.ndarray, int, float]:
    A = solver.A
    scale = dtheta * mask

    def residual(u):
        pen = np.where(mask, beta(u - psi, penalty), 0.0)
        return A @ u + dtheta * pen - rhs

    u = u0.copy()
    F = residual(u)
    norm = np.max(np.abs(F))
    for it in range(1, max_iter + 1):
        if norm < tol:
            return u, it - 1, norm
        d = scale * np.where(mask, beta_prime(u - psi, penalty), 0.0)
        delta = solver.solve(d, -F)
        t = 1.0
        while True:
            trial = u + t * delta
            F_trial = residual(trial)
            n_trial = np.max(np.abs(F_trial))
            # a saturated penalty (-inf) counts as an increase
            if np.isfinite(n_trial) and (n_trial < norm or t < 2 ** -10):
                break
            t *= 0.5
            if t < 2 ** -12:
                break
        if not np.isfinite(n_trial):
            raise StepFailure("penalty saturated during line search", float(norm))
        u, F, norm = trial, F_trial, n_trial
    if norm < tol:
        return u, max_iter, norm
    raise StepFailure(f"Newton did not converge in {max_iter} iterations "
                      f"(residual {norm:.3e})", float(norm))


def step(u_prev: Surface, stencil: OperatorStencil, config: SolveConfig,
         penalty: PenaltyParams, dtheta: float | None = None, weight: float = 1.0,
         guess: np.ndarray | None = None) -> tuple[Surface, int]:
    """Advance one penalised implicit step; returns the new slice and the Newton count."""
    grid = stencil.grid
    dtheta = grid.dtheta if dtheta is None else dtheta
    if not u_prev.finite:
        raise StepFailure("previous slice is not finite", float("nan"))
    A = system_matrix(stencil, dtheta, weight)
    solver = _LinearSolver(A, config.linear_solver, grid.n_y + 1)
    u_new, its = _step_with(solver, stencil, u_prev.values, dtheta, weight, penalty, config, guess)
    return Surface(u_new, theta=u_prev.theta + dtheta, grid=grid, epsilon=stencil.epsilon), its


def _step_with(solver, stencil, u_prev, dtheta, weight, penalty, config, guess=None):
    psi = stencil.obstacle
    rhs = explicit_rhs(stencil, u_prev, dtheta, weight, stencil.boundary_values)
    u0 = (u_prev if guess is None else guess).ravel()
    u0 = np.where(stencil.dirichlet, stencil.boundary_values, u0)
    u, its, _ = _newton(solver, rhs, psi, stencil.interior, dtheta, penalty, u0,
                        config.newton_tol, config.newton_max_iter)
    return u.reshape(stencil.grid.shape), its


# -- results -----------------------------------------------------------------------

@dataclass(eq=False)
class SolveResult:
    surfaces: list[Surface]
    newton_iterations: list[int]
    complementarity_residual: np.ndarray
    wallclock: float
    grid: Grid
    model: SVModel
    config: SolveConfig
    method: str = "penalty"
    schedule_residuals: list[float] = field(default_factory=list)

    @property
    def final(self) -> Surface:
        return self.surfaces[-1]

    @property
    def values(self) -> np.ndarray:
        """Stacked solution, shape (n_theta + 1, n_s + 1, n_y + 1)."""
        return np.stack([s.values for s in self.surfaces])

    def price_at(self, x: float, y: float, t: float = 0.0, method: str = "linear") -> float:
        """Value at spot x, variance y and calendar time t (must be a slice time)."""
        g = self.grid
        theta = g.T - t
        k = int(np.argmin(np.abs(g.theta_nodes - theta)))
        if abs(g.theta_nodes[k] - theta) > 1e-12 * max(1.0, g.T):
            raise ValueError(f"t={t} is not on the time lattice")
        return interpolate_surface(self.surfaces[k].values, g, np.log(x), y, method)


def interpolate_surface(values: np.ndarray, grid: Grid, s: float, y: float,
                        method: str = "linear") -> float:
    from scipy.interpolate import RegularGridInterpolator

    if not (grid.s_min <= s <= grid.s_max and 0.0 <= y <= grid.y_max):
        raise ValueError(f"point (s={s}, y={y}) outside the grid")
    interp = RegularGridInterpolator((grid.s_nodes, grid.y_nodes), values, method=method)
    return float(interp([[s, y]])[0])


def complementarity_residual(stencil0: OperatorStencil, u_prev: np.ndarray, u_new: np.ndarray,
                             dtheta: float, weight: float) -> np.ndarray:
    """Nodewise |min(d_theta u - L u, u - payoff)| with the unregularised operator.

    Boundary nodes are reported as zero.
    """
    g = stencil0.grid
    up, un = u_prev.ravel(), u_new.ravel()
    pde = (un - up) / dtheta - stencil0.L @ (weight * un + (1.0 - weight) * up)
    gap = un - np.repeat(g.payoff(), g.n_y + 1)
    res = np.where(stencil0.interior, np.abs(np.minimum(pde, gap)), 0.0)
    return res.reshape(g.shape)


@dataclass(frozen=True)
class SignCheck:
    name: str
    worst: float
    passed: bool
    where: tuple[int, int, int]


def monotonicity_report(result: "SolveResult", slack: float | None = None,
                        theta_slack: float | None = None) -> dict[str, SignCheck]:
    """Discrete sign checks of d_theta u >= 0, -e^s <= d_s u <= 0 and d_y u >= 0.

    Each check reports its worst margin (negative means violated) and the
    (k, i, j) index where it occurs.  ``slack`` defaults to 1e-6 K and
    ``theta_slack`` to ``slack``.  The lower s-bound uses the exact increment
    e^{s_{i+1}} - e^{s_i} of the payoff slope.
    """
    g = result.grid
    slack = 1e-6 * g.K if slack is None else float(slack)
    theta_slack = slack if theta_slack is None else float(theta_slack)
    U = result.values
    dexp = np.diff(np.exp(g.s_nodes))[None, :, None]
    du_s = np.diff(U, axis=1)
    margins = {
        "theta": (np.diff(U, axis=0), theta_slack),
        "s_upper": (-du_s, slack),
        "s_lower": (du_s + dexp, slack),
        "y": (np.diff(U, axis=2), slack),
    }
    out = {}
    for name, (m, tol) in margins.items():
        if m.size == 0:
            out[name] = SignCheck(name, np.inf, True, (0, 0, 0))
            continue
        idx = np.unravel_index(int(np.argmin(m)), m.shape)
        worst = float(m[idx])
        out[name] = SignCheck(name, worst, worst >= -tol, tuple(int(v) for v in idx))
    return out


def _march(model, grid, config, epsilon, guess_slices=None):
    stencil = assemble(grid, model, epsilon, strict=config.strict)
    stencil0 = assemble(grid, model, 0.0, strict=config.strict)
    penalty = PenaltyParams.for_put(epsilon, model.r, model.K)
    u0 = stencil.obstacle.reshape(grid.shape).copy()
    surfaces = [Surface(u0, theta=0.0, grid=grid, epsilon=epsilon,
                        residual=np.zeros(grid.shape))]
    iters: list[int] = []
    res = [0.0]
    solvers: dict[tuple[float, float], _LinearSolver] = {}

    def solver_for(w, dt):
        key = (w, dt)
        if key not in solvers:
            solvers[key] = _LinearSolver(system_matrix(stencil, dt, w), config.linear_solver,
                                         grid.n_y + 1)
        return solvers[key]

    for k in range(grid.n_theta):
        w = config.weight(k)
        u_prev = surfaces[-1].values
        guess = None if guess_slices is None else guess_slices[k + 1]
        try:
            u_new, its = _step_with(solver_for(w, grid.dtheta), stencil, u_prev, grid.dtheta,
                                    w, penalty, config, guess)
        except StepFailure as exc:
            logger.warning("step %d failed (%s); retrying with two half steps", k, exc)
            half = 0.5 * grid.dtheta
            try:
                u_mid, i1 = _step_with(solver_for(1.0, half), stencil, u_prev, half, 1.0,
                                       penalty, config)
                u_new, i2 = _step_with(solver_for(1.0, half), stencil, u_mid, half, 1.0,
                                       penalty, config)
            except StepFailure as exc2:
                exc2.step = k
                raise
            its, w = i1 + i2, 1.0
        r = complementarity_residual(stencil0, u_prev, u_new, grid.dtheta, w)
        surfaces.append(Surface(u_new, theta=float(grid.theta_nodes[k + 1]), grid=grid,
                                epsilon=epsilon, residual=r))
        iters.append(its)
        res.append(float(r.max()))
    return surfaces, iters, np.array(res)


def solve(model: SVModel, grid: Grid, config: SolveConfig = SolveConfig()) -> SolveResult:
    """Penalty solve of the truncated problem, with optional epsilon continuation."""
    t0 = time.perf_counter()
    schedule = config.epsilon_schedule or (config.epsilon,)
    guess = None
    sched_res = []
    for eps in schedule:
        surfaces, iters, res = _march(model, grid, config, eps, guess)
        guess = [s.values for s in surfaces]
        sched_res.append(float(res.max()))
    return SolveResult(surfaces=surfaces, newton_iterations=iters, complementarity_residual=res,
                       wallclock=time.perf_counter() - t0, grid=grid, model=model,
                       config=config, method="penalty", schedule_residuals=sched_res)


# -- projected SOR oracle -------------------------------------------------------

@numba.njit(cache=True)
def _psor_kernel(indptr, indices, data, b, psi, x, omega, relax, tol, max_iter):
    n = b.shape[0]
    for it in range(1, max_iter + 1):
        err = 0.0
        for i in range(n):
            diag = 0.0
            acc = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j == i:
                    diag = data[k]
                else:
                    acc -= data[k] * x[j]
            gs = acc / diag
            w = omega if relax[i] else 1.0
            xn = x[i] + w * (gs - x[i])
            if xn < psi[i]:
                xn = psi[i]
            d = abs(xn - x[i])
            if d > err:
                err = d
            x[i] = xn
        if err < tol:
            return it
    return -1


def psor_lcp(A: sp.csr_matrix, b: np.ndarray, psi: np.ndarray, x0: np.ndarray,
             omega: float = 1.5, tol: float = 1e-10, max_iter: int = 20000,
             relax: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """Projected SOR for: A x >= b, x >= psi, (A x - b) . (x - psi) = 0.

    Rows with ``psi = -inf`` are plain equations.  ``relax`` selects the rows
    that get over-relaxation; the rest use Gauss-Seidel.
    """
    A = sp.csr_matrix(A)
    x = np.maximum(np.asarray(x0, dtype=float).copy(), psi)
    if relax is None:
        relax = np.ones(len(b), dtype=np.bool_)
    its = _psor_kernel(A.indptr.astype(np.int64), A.indices.astype(np.int64),
                       A.data.astype(float), np.asarray(b, dtype=float),
                       np.asarray(psi, dtype=float), x, float(omega),
                       np.asarray(relax, dtype=np.bool_), float(tol), int(max_iter))
    if its < 0:
        raise OracleFailure(f"projected SOR did not converge in {max_iter} iterations")
    return x, its


def psor_solve(model: SVModel, grid: Grid, config: SolveConfig = SolveConfig()) -> SolveResult:
    """Same truncated problem, sharp payoff and no penalty, one LCP per step."""
    t0 = time.perf_counter()
    stencil = assemble(grid, model, 0.0, strict=config.strict)
    payoff = np.repeat(grid.payoff(), grid.n_y + 1)
    dirichlet_values = np.where(stencil.dirichlet, payoff, 0.0)
    psi = np.where(stencil.interior, payoff, -np.inf)
    u = payoff.reshape(grid.shape).copy()
    surfaces = [Surface(u, theta=0.0, grid=grid, epsilon=0.0, residual=np.zeros(grid.shape))]
    iters, res = [], [0.0]
    mats: dict[float, sp.csr_matrix] = {}
    for k in range(grid.n_theta):
        w = config.weight(k)
        if w not in mats:
            mats[w] = system_matrix(stencil, grid.dtheta, w)
        u_prev = surfaces[-1].values
        rhs = explicit_rhs(stencil, u_prev, grid.dtheta, w, dirichlet_values)
        x, its = psor_lcp(mats[w], rhs, psi, u_prev.ravel(), config.psor_omega,
                          config.psor_tol, config.psor_max_iter, relax=stencil.interior)
        u_new = x.reshape(grid.shape)
        r = complementarity_residual(stencil, u_prev, u_new, grid.dtheta, w)
        surfaces.append(Surface(u_new, theta=float(grid.theta_nodes[k + 1]), grid=grid,
                                epsilon=0.0, residual=r))
        iters.append(its)
        res.append(float(r.max()))
    return SolveResult(surfaces=surfaces, newton_iterations=iters,
                       complementarity_residual=np.array(res),
                       wallclock=time.perf_counter() - t0, grid=grid, model=model,
                       config=config, method="psor")
