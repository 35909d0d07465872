"""Penalty term and smoothed payoff for the penalised obstacle problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# exp(700) is close to the float64 ceiling
SATURATION = -700.0


@dataclass(frozen=True)
class PenaltyParams:
    epsilon: float
    C0: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def for_put(cls, epsilon: float, r: float, K: float) -> "PenaltyParams":
        """Penalty depth 2 r (K + 1), the value of beta at zero."""
        return cls(epsilon=epsilon, C0=2.0 * r * (K + 1.0))


def beta(xi, p: PenaltyParams):
    """-C0 exp(-xi/eps); saturates to -inf once xi/eps < -700."""
    z = np.asarray(xi, dtype=float) / p.epsilon
    with np.errstate(over="ignore"):
        out = np.where(z < SATURATION, -np.inf, -p.C0 * np.exp(-np.maximum(z, SATURATION)))
    return out if out.ndim else float(out)


def beta_prime(xi, p: PenaltyParams):
    z = np.asarray(xi, dtype=float) / p.epsilon
    with np.errstate(over="ignore"):
        out = np.where(z < SATURATION, np.inf,
                       p.C0 / p.epsilon * np.exp(-np.maximum(z, SATURATION)))
    return out if out.ndim else float(out)


def pi_smooth(xi, epsilon: float):
    """C^1 quadratic blend of max(xi, 0) on (-eps, eps)."""
    xi = np.asarray(xi, dtype=float)
    out = np.where(xi >= epsilon, xi,
                   np.where(xi <= -epsilon, 0.0, (xi + epsilon) ** 2 / (4.0 * epsilon)))
    return out if out.ndim else float(out)


def pi_prime(xi, epsilon: float):
    xi = np.asarray(xi, dtype=float)
    out = np.where(xi >= epsilon, 1.0,
                   np.where(xi <= -epsilon, 0.0, (xi + epsilon) / (2.0 * epsilon)))
    return out if out.ndim else float(out)
