"""Monte Carlo optimal-stopping estimates for the American put.

Paths use log-Euler for the stock (strictly positive by construction) and
full-truncation Euler for the variance factor.  Random numbers come from
independent ``SeedSequence`` children, one per block of paths, so a run is
reproducible bit for bit regardless of how blocks are scheduled.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError, RegressionDegenerateError
from .model import SVModel

BLOCK_SIZE = 50_000
MIN_ITM_PATHS = 50


class Method(str, enum.Enum):
    LSMC = "LSMC"
    policy = "policy"
    european = "european"


@dataclass(frozen=True, eq=False)
class PathBundle:
    X: np.ndarray        # (n_paths, n_steps + 1)
    Y: np.ndarray        # (n_paths, n_steps + 1)
    times: np.ndarray    # calendar times t0 .. T
    hit_nu: np.ndarray   # first step index with Y == 0, or -1
    seed: int
    antithetic: bool = False

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]

    @property
    def n_steps(self) -> int:
        return self.X.shape[1] - 1

    def split(self) -> tuple["PathBundle", "PathBundle"]:
        """Two disjoint halves; antithetic pairs stay together."""
        n = self.n_paths
        if self.antithetic:
            pairs = n // 2
            cut = 2 * (pairs // 2)
        else:
            cut = n // 2
        return self._take(slice(0, cut)), self._take(slice(cut, n))

    def _take(self, sl) -> "PathBundle":
        return PathBundle(self.X[sl], self.Y[sl], self.times, self.hit_nu[sl], self.seed,
                          self.antithetic)


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n_paths: int
    n_steps: int
    method: Method
    seed: int | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_paths": self.n_paths,
                "n_steps": self.n_steps, "method": self.method.value, "seed": self.seed}


class _NormalStream:
    """Per-step standard normal pairs, drawn block by block from spawned seeds."""

    def __init__(self, seed: int, n_paths: int, antithetic: bool):
        self.n_paths = n_paths
        self.antithetic = antithetic
        n_draw = (n_paths + 1) // 2 if antithetic else n_paths
        n_blocks = max(1, math.ceil(n_draw / BLOCK_SIZE))
        children = np.random.SeedSequence(seed).spawn(n_blocks)
        self.gens = [np.random.default_rng(c) for c in children]
        self.sizes = [min(BLOCK_SIZE, n_draw - b * BLOCK_SIZE) for b in range(n_blocks)]

    def draw(self) -> tuple[np.ndarray, np.ndarray]:
        z = np.concatenate([g.standard_normal((2, n)) for g, n in zip(self.gens, self.sizes)],
                           axis=1)
        if self.antithetic:
            z = np.stack([z, -z], axis=2).reshape(2, -1)[:, :self.n_paths]
        return z[0], z[1]


def simulate(model: SVModel, x0: float, y0: float, t0: float, n_paths: int, n_steps: int,
             seed: int, antithetic: bool = False) -> PathBundle:
    """Simulate (X, Y) on an equidistant grid from t0 to maturity."""
    if not x0 > 0:
        raise ParameterDomainError(f"x0 must be positive, got {x0}")
    if y0 < 0:
        raise ParameterDomainError(f"y0 must be nonnegative, got {y0}")
    if n_paths < 1 or n_steps < 1:
        raise ParameterDomainError("n_paths and n_steps must be at least 1")
    if not t0 < model.T:
        raise ParameterDomainError(f"t0={t0} must precede maturity T={model.T}")

    dt = (model.T - t0) / n_steps
    sq = math.sqrt(dt)
    rho = model.rho
    rho_c = math.sqrt(max(0.0, 1.0 - rho * rho))
    stream = _NormalStream(seed, n_paths, antithetic)

    X = np.empty((n_paths, n_steps + 1))
    Y = np.empty((n_paths, n_steps + 1))
    logx = np.full(n_paths, math.log(x0))
    y = np.full(n_paths, float(y0))
    X[:, 0], Y[:, 0] = x0, y0
    for n in range(n_steps):
        yp = np.maximum(y, 0.0)
        sig = model.sigma(yp)
        w, z = stream.draw()
        bz = rho * w + rho_c * z
        logx = logx + (model.r - 0.5 * sig * sig) * dt + sig * sq * w
        y = np.maximum(y + model.mu(yp) * dt + model.b(yp) * sq * bz, 0.0)
        X[:, n + 1] = np.exp(logx)
        Y[:, n + 1] = y

    hit = Y[:, 1:] == 0.0
    hit_nu = np.where(hit.any(axis=1), hit.argmax(axis=1) + 1, -1)
    if y0 == 0.0:
        hit_nu[:] = 0
    times = t0 + dt * np.arange(n_steps + 1)
    return PathBundle(X=X, Y=Y, times=times, hit_nu=hit_nu, seed=seed, antithetic=antithetic)


def _mean_se(values: np.ndarray, antithetic: bool) -> tuple[float, float]:
    if antithetic and values.size >= 4 and values.size % 2 == 0:
        values = values.reshape(-1, 2).mean(axis=1)
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _basis(x: np.ndarray, y: np.ndarray, degree: int) -> np.ndarray:
    cols = [np.ones_like(x)]
    for d in range(1, degree + 1):
        for k in range(d + 1):
            cols.append(x ** (d - k) * y ** k)
    return np.column_stack(cols)


def _fit_policy(paths: PathBundle, model: SVModel, degree: int, scale: float):
    """Backward induction on training paths; returns regression coefficients per step."""
    K, r = model.K, model.r
    dt = paths.times[1] - paths.times[0]
    disc = math.exp(-r * dt)
    n_steps = paths.n_steps
    cash = np.maximum(K - paths.X[:, -1], 0.0)
    coefs: list[np.ndarray | None] = [None] * (n_steps + 1)
    for n in range(n_steps - 1, 0, -1):
        cash *= disc
        x = paths.X[:, n]
        exercise = K - x
        itm = exercise > 0
        count = int(itm.sum())
        if count == 0:
            continue
        if count < MIN_ITM_PATHS:
            raise RegressionDegenerateError(
                f"only {count} in-the-money paths at step {n} (need {MIN_ITM_PATHS})")
        A = _basis(x[itm] / scale, paths.Y[itm, n], degree)
        beta, *_ = np.linalg.lstsq(A, cash[itm], rcond=None)
        coefs[n] = beta
        cont = A @ beta
        stop = exercise[itm] >= cont
        idx = np.flatnonzero(itm)[stop]
        cash[idx] = exercise[itm][stop]
    cash *= disc
    return coefs, float(cash.mean())


def _apply_policy(paths: PathBundle, model: SVModel, coefs, degree: int, scale: float,
                  continuation_t0: float) -> np.ndarray:
    K, r = model.K, model.r
    t = paths.times - paths.times[0]
    n_paths, n_steps = paths.n_paths, paths.n_steps
    payoff = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    if K - paths.X[0, 0] > 0 and K - paths.X[0, 0] >= continuation_t0:
        return np.full(n_paths, K - paths.X[0, 0])
    for n in range(1, n_steps):
        beta = coefs[n]
        if beta is None:
            continue
        x = paths.X[:, n]
        exercise = K - x
        cand = alive & (exercise > 0)
        if not cand.any():
            continue
        cont = _basis(x[cand] / scale, paths.Y[cand, n], degree) @ beta
        stop = exercise[cand] >= cont
        idx = np.flatnonzero(cand)[stop]
        payoff[idx] = math.exp(-r * t[n]) * exercise[idx]
        alive[idx] = False
    payoff[alive] = math.exp(-r * t[-1]) * np.maximum(K - paths.X[alive, -1], 0.0)
    return payoff


def lsmc_value(paths: PathBundle, model: SVModel, basis_degree: int = 2) -> MCEstimate:
    """Longstaff-Schwartz estimate with regression and valuation on disjoint halves.

    Continuation values are regressed on monomials in (X, Y) up to
    ``basis_degree`` using in-the-money training paths only; the resulting
    exercise rule is then applied to the other half, so the estimate carries
    no foresight bias.  Exercise at the start date is allowed.
    """
    if basis_degree not in (2, 3):
        raise ParameterDomainError("basis_degree must be 2 or 3")
    train, valid = paths.split() if paths.n_paths >= 2 else (paths, paths)
    scale = model.K
    coefs, cont0 = _fit_policy(train, model, basis_degree, scale)
    pathwise = _apply_policy(valid, model, coefs, basis_degree, scale, cont0)
    value, se = _mean_se(pathwise, valid.antithetic)
    return MCEstimate(value, se, valid.n_paths, paths.n_steps, Method.LSMC, paths.seed)


def european_value(paths: PathBundle, model: SVModel) -> MCEstimate:
    tau = paths.times[-1] - paths.times[0]
    pathwise = math.exp(-model.r * tau) * np.maximum(model.K - paths.X[:, -1], 0.0)
    value, se = _mean_se(pathwise, paths.antithetic)
    return MCEstimate(value, se, paths.n_paths, paths.n_steps, Method.european, paths.seed)


def exercise_boundary_interpolator(y_nodes: np.ndarray, t_nodes: np.ndarray, g: np.ndarray):
    """Bilinear interpolation of an exercise boundary g[j, k] given on (y_j, t_k).

    ``t_nodes`` must be increasing.  Queries outside the lattice are clamped.
    """
    from scipy.interpolate import RegularGridInterpolator

    g = np.where(np.isfinite(g), g, 0.0)
    interp = RegularGridInterpolator((y_nodes, t_nodes), g, method="linear")

    def boundary(y, t):
        y = np.clip(y, y_nodes[0], y_nodes[-1])
        t = np.clip(np.broadcast_to(t, np.shape(y)), t_nodes[0], t_nodes[-1])
        return interp(np.column_stack([np.ravel(y), np.ravel(t)])).reshape(np.shape(y))

    return boundary


def policy_value(paths: PathBundle, fb, model: SVModel, return_stops: bool = False):
    """Value of stopping the first time X falls to the exercise boundary g(Y, t).

    ``fb`` is a ``FreeBoundary`` or any callable ``g(y, t)``.  Entries of an
    empty exercise column (h = -inf) map to g = 0, i.e. never exercise.  With
    ``return_stops`` the per-path stopping step indices are returned as well.
    """
    boundary = fb if callable(fb) else fb.interpolator()
    K, r = model.K, model.r
    t = paths.times
    n_paths = paths.n_paths
    payoff = np.zeros(n_paths)
    stops = np.full(n_paths, paths.n_steps)
    alive = np.ones(n_paths, dtype=bool)
    for n in range(paths.n_steps + 1):
        x = paths.X[alive, n]
        g = boundary(paths.Y[alive, n], t[n])
        stop = (x <= g) & (K - x > 0)
        if n == paths.n_steps:
            stop = np.ones_like(stop)
        idx = np.flatnonzero(alive)[stop]
        payoff[idx] = math.exp(-r * (t[n] - t[0])) * np.maximum(K - paths.X[idx, n], 0.0)
        stops[idx] = n
        alive[idx] = False
        if not alive.any():
            break
    value, se = _mean_se(payoff, paths.antithetic)
    est = MCEstimate(value, se, n_paths, paths.n_steps, Method.policy, paths.seed)
    return (est, stops) if return_stops else est


@dataclass(frozen=True)
class DegenerateCheckRow:
    x0: float
    y0: float
    value: float
    std_error: float
    intrinsic: float
    deviation: float
    passed: bool | None  # None for gauge-only rows


@dataclass(frozen=True)
class DegenerateCheckReport:
    rows: list[DegenerateCheckRow]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if r.passed is not None)


def degenerate_boundary_check(model: SVModel, x0_list, t0: float = 0.0, n_paths: int = 20_000,
                              n_steps: int = 50, seed: int = 7, y0: float = 0.0,
                              gauge: bool | None = None) -> DegenerateCheckReport:
    """Compare Monte Carlo values started at (small) variance y0 with the payoff.

    For a model absorbed at y = 0 and y0 = 0, the stock grows deterministically
    and exercising at once is optimal, so the value must equal (K - x0)+ within
    three standard errors.  With ``gauge`` (default: y0 > 0) the deviation is
    only reported.
    """
    gauge = y0 > 0 if gauge is None else gauge
    rows = []
    for i, x0 in enumerate(x0_list):
        paths = simulate(model, x0, y0, t0, n_paths, n_steps, seed + i)
        est = lsmc_value(paths, model)
        intrinsic = max(model.K - x0, 0.0)
        dev = abs(est.value - intrinsic)
        passed = None if gauge else bool(dev <= 3.0 * est.std_error + 1e-12)
        rows.append(DegenerateCheckRow(x0, y0, est.value, est.std_error, intrinsic, dev, passed))
    return DegenerateCheckReport(rows)
