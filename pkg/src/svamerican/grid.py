"""Truncated lattice in log-price s = ln x, variance y and time-to-maturity theta = T - t."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .model import SVModel

DEFAULT_S_HALF_WIDTH = 4.0


def default_y_max(model: SVModel) -> float:
    m = model.params.get("m")
    return max(4.0 * m, 1.0) if m is not None else 1.0


@dataclass(frozen=True, eq=False)
class Grid:
    s_min: float
    s_max: float
    y_max: float
    n_s: int
    n_y: int
    n_theta: int
    ds: float
    dy: float
    dtheta: float
    s_nodes: np.ndarray
    y_nodes: np.ndarray
    theta_nodes: np.ndarray
    K: float
    T: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_s + 1, self.n_y + 1)

    @property
    def size(self) -> int:
        return (self.n_s + 1) * (self.n_y + 1)

    @property
    def log_strike(self) -> float:
        return math.log(self.K)

    def payoff(self) -> np.ndarray:
        return np.maximum(self.K - np.exp(self.s_nodes), 0.0)

    def describe(self) -> dict:
        return {"s_min": self.s_min, "s_max": self.s_max, "y_max": self.y_max,
                "n_s": self.n_s, "n_y": self.n_y, "n_theta": self.n_theta,
                "K": self.K, "T": self.T}


def build_grid(model: SVModel, s_half_width: float = DEFAULT_S_HALF_WIDTH,
               y_max: float | None = None, n_s: int = 101, n_y: int = 51,
               n_theta: int = 100, offset: float | None = None) -> Grid:
    """Uniform grid on [ln K - w, ln K + w] x [0, y_max] x [0, T].

    ``n_s``, ``n_y`` and ``n_theta`` count cells, so there are ``n_s + 1``
    log-price nodes.  The whole s-lattice is shifted by ``offset`` so that the
    strike falls strictly between two nodes; by default the shift is zero for
    odd ``n_s`` and half a cell for even ``n_s``, which puts ln K mid-cell.
    ``n_theta = 0`` gives a lattice holding only the initial slice.
    """
    if y_max is None:
        y_max = default_y_max(model)
    if n_s < 3 or n_y < 3:
        raise ConfigurationError(f"need at least 3 cells per space axis, got n_s={n_s}, n_y={n_y}")
    if n_theta < 0:
        raise ConfigurationError(f"n_theta must be nonnegative, got {n_theta}")
    if not (s_half_width > 0 and y_max > 0):
        raise ConfigurationError("s_half_width and y_max must be positive")

    lnK = math.log(model.K)
    ds = 2.0 * s_half_width / n_s
    if offset is None:
        offset = 0.5 * ds if n_s % 2 == 0 else 0.0
    s_min = lnK - s_half_width + offset
    s_max = s_min + n_s * ds
    if not s_min < lnK < s_max:
        raise ConfigurationError(
            f"strike ln K={lnK:.6g} outside the log-price range ({s_min:.6g}, {s_max:.6g})")
    frac = (lnK - s_min) / ds
    if abs(frac - round(frac)) < 1e-9:
        raise ConfigurationError("offset places the strike on a grid node")

    s_nodes = s_min + ds * np.arange(n_s + 1)
    y_nodes = np.linspace(0.0, y_max, n_y + 1)
    dtheta = model.T / n_theta if n_theta else 0.0
    theta_nodes = np.linspace(0.0, model.T, n_theta + 1) if n_theta else np.zeros(1)
    return Grid(s_min=s_min, s_max=float(s_nodes[-1]), y_max=y_max, n_s=n_s, n_y=n_y,
                n_theta=n_theta, ds=ds, dy=y_max / n_y, dtheta=dtheta,
                s_nodes=s_nodes, y_nodes=y_nodes, theta_nodes=theta_nodes,
                K=model.K, T=model.T)


def to_physical(s, theta, T):
    return np.exp(s), T - np.asarray(theta)


def from_physical(x, t, T):
    return np.log(x), T - np.asarray(t)


@dataclass(eq=False)
class Surface:
    """Solution slice u[i, j] on the (s_i, y_j) nodes at one theta."""

    values: np.ndarray
    theta: float
    grid: Grid
    epsilon: float | None = None
    residual: np.ndarray | None = None
    payoff: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"surface shape {self.values.shape} != grid shape {self.grid.shape}")
        self.payoff = self.grid.payoff()

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))
