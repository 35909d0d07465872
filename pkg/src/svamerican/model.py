"""Stochastic-volatility model definitions.

The stock follows dX = X (r dt + sigma(Y) dW) and the variance-like factor
follows dY = mu(Y) dt + b(Y) dB with corr(dW, dB) = rho.  Coefficient
functions are plain vectorised callables together with their analytic first
derivatives.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import FicheraUncertainError, ParameterDomainError

Coefficient = Callable[[np.ndarray], np.ndarray]

BOUNDARY_TOL = 1e-12
FICHERA_LADDER = 1e-4 * 0.5 ** np.arange(8)
FICHERA_RTOL = 1e-3


@dataclass(frozen=True)
class SVModel:
    r: float
    rho: float
    K: float
    T: float
    mu: Coefficient
    sigma: Coefficient
    b: Coefficient
    dmu: Coefficient
    dsigma: Coefficient
    db: Coefficient
    label: str = "custom"
    # analytic value of lim_{y->0} b(y) b'(y); overrides the numerical ladder
    bb_limit: float | None = None
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ParameterDomainError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.r < 0:
            raise ParameterDomainError(f"r must be nonnegative, got {self.r}")
        if self.K <= 0:
            raise ParameterDomainError(f"K must be positive, got {self.K}")
        if self.T <= 0:
            raise ParameterDomainError(f"T must be positive, got {self.T}")

    def with_scaled_b(self, c: float) -> "SVModel":
        """Same model with the vol-of-vol function multiplied by ``c``."""
        b, db = self.b, self.db
        bb = None if self.bb_limit is None else c * c * self.bb_limit
        return _replace(self, b=lambda y: c * b(y), db=lambda y: c * db(y),
                        bb_limit=bb, label=f"{self.label}*b{c:g}")

    def replace(self, **changes) -> "SVModel":
        return _replace(self, **changes)

    def to_config(self) -> dict:
        if self.label not in _REGISTRY:
            raise ParameterDomainError(f"model {self.label!r} is not registered")
        return {"model": self.label, **dict(self.params),
                "rho": self.rho, "r": self.r, "K": self.K, "T": self.T}


def _replace(model: SVModel, **changes) -> SVModel:
    import dataclasses

    return dataclasses.replace(model, **changes)


def _sqrt_pos(y):
    return np.sqrt(np.maximum(y, 0.0))


def heston_model(kappa: float, m: float, xi: float, rho: float, r: float,
                 K: float, T: float) -> SVModel:
    """Heston dynamics: sigma(y) = sqrt(y), b(y) = xi sqrt(y), mu(y) = kappa (m - y)."""
    for name, v in (("kappa", kappa), ("m", m), ("xi", xi)):
        if not v > 0:
            raise ParameterDomainError(f"{name} must be positive, got {v}")

    def dsqrt(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(y > 0, 0.5 / _sqrt_pos(y), np.inf)

    return SVModel(
        r=r, rho=rho, K=K, T=T,
        mu=lambda y: kappa * (m - np.asarray(y, dtype=float)),
        sigma=_sqrt_pos,
        b=lambda y: xi * _sqrt_pos(y),
        dmu=lambda y: np.full_like(np.asarray(y, dtype=float), -kappa),
        dsigma=dsqrt,
        db=lambda y: xi * dsqrt(y),
        label="heston",
        bb_limit=None,
        params={"kappa": kappa, "m": m, "xi": xi},
    )


def absorbed_model(kappa: float, xi: float, rho: float, r: float, K: float,
                   T: float) -> SVModel:
    """Square-root volatility with mu(y) = -kappa y, so y = 0 is absorbing."""
    for name, v in (("kappa", kappa), ("xi", xi)):
        if not v > 0:
            raise ParameterDomainError(f"{name} must be positive, got {v}")
    h = heston_model(kappa, 1.0, xi, rho, r, K, T)
    return h.replace(
        mu=lambda y: -kappa * np.asarray(y, dtype=float),
        label="absorbed",
        params={"kappa": kappa, "xi": xi},
    )


# -- registry -----------------------------------------------------------------

_REGISTRY: dict[str, Callable[..., SVModel]] = {
    "heston": heston_model,
    "absorbed": absorbed_model,
}


def register_model(name: str, factory: Callable[..., SVModel]) -> None:
    _REGISTRY[name] = factory


def model_from_config(cfg: Mapping) -> SVModel:
    cfg = dict(cfg)
    try:
        name = cfg.pop("model")
    except KeyError:
        raise ParameterDomainError("model config needs a 'model' key") from None
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ParameterDomainError(f"unknown model {name!r}; registered: {sorted(_REGISTRY)}") from None
    try:
        return factory(**{k: float(v) for k, v in cfg.items()})
    except TypeError as exc:
        raise ParameterDomainError(f"bad parameters for model {name!r}: {exc}") from None


# -- Fichera classification ---------------------------------------------------

class FicheraCase(str, enum.Enum):
    F1_imposeBoundary = "F1_imposeBoundary"
    F2_noBoundary = "F2_noBoundary"


@dataclass(frozen=True)
class FicheraReport:
    F_value: float
    limit_estimate: float
    case: FicheraCase
    samples: list[tuple[float, float]]

    @property
    def impose_boundary(self) -> bool:
        return self.case is FicheraCase.F1_imposeBoundary


def _richardson(ys: np.ndarray, fs: np.ndarray) -> np.ndarray:
    # one-step extrapolation assuming f(y) = L + c*y + o(y) on a halving ladder
    ratio = ys[:-1] / ys[1:]
    return (ratio * fs[1:] - fs[:-1]) / (ratio - 1.0)


def fichera_classify(model: SVModel, ladder: Sequence[float] = FICHERA_LADDER) -> FicheraReport:
    """Sign of mu(0) - lim_{y->0} b(y) b'(y) decides whether y = 0 needs a boundary datum."""
    ys = np.asarray(ladder, dtype=float)
    fs = np.asarray(model.b(ys) * model.db(ys), dtype=float)
    samples = [(float(y), float(f)) for y, f in zip(ys, fs)]
    if model.bb_limit is not None:
        limit = float(model.bb_limit)
    else:
        if not np.all(np.isfinite(fs)):
            raise FicheraUncertainError("b(y) b'(y) is not finite on the sample ladder", samples)
        extrap = _richardson(ys, fs)
        limit = float(extrap[-1])
        change = abs(extrap[-1] - extrap[-2])
        if change > FICHERA_RTOL * max(abs(limit), 1e-12):
            raise FicheraUncertainError(
                f"limit of b(y)b'(y) not converged: last relative change "
                f"{change / max(abs(limit), 1e-12):.3g} at y={ys[-1]:.3g}", samples)
    F = float(model.mu(np.array(0.0))) - limit
    case = FicheraCase.F1_imposeBoundary if F < 0 else FicheraCase.F2_noBoundary
    return FicheraReport(F_value=F, limit_estimate=limit, case=case, samples=samples)


# -- assumption checks --------------------------------------------------------

@dataclass(frozen=True)
class Clause:
    name: str
    passed: bool
    witness: float | None = None
    detail: str = ""
    informational: bool = False


@dataclass(frozen=True)
class AssumptionReport:
    clauses: list[Clause]
    growth_constant: float
    notes: list[str]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses if not c.informational)

    def __getitem__(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[Clause]:
        return [c for c in self.clauses if not c.passed and not c.informational]


def _first_fail(ys, ok) -> float | None:
    bad = np.flatnonzero(~ok)
    return float(ys[bad[0]]) if bad.size else None


def _tail_exponent(ys: np.ndarray, vals: np.ndarray) -> float:
    """Least-squares exponent p in vals ~ y^p over the samples with y >= 1.

    Growth is a property at infinity, so samples below 1 are ignored; with
    fewer than two such samples nothing can be said and 0 is returned.
    """
    tail = ys >= 1.0
    if tail.sum() < 2 or np.ptp(np.log(ys[tail])) == 0:
        return 0.0
    v = np.log(np.maximum(np.abs(vals[tail]), 1e-300))
    return float(np.polyfit(np.log(ys[tail]), v, 1)[0])


def validate_assumptions(model: SVModel, y_samples: Sequence[float]) -> AssumptionReport:
    """Sampled checks of the standing assumptions on the coefficients.

    The mu(0) = 0 clause is relaxed to mu(0) >= 0 so mean-reverting models such
    as Heston are accepted; the strict form is kept as an informational line.
    """
    ys = np.asarray(y_samples, dtype=float)
    if ys.size == 0 or np.any(ys <= 0) or np.any(np.diff(ys) < 0):
        raise ParameterDomainError("y_samples must be nonempty, positive and sorted")

    zero = np.array(0.0)
    mu0, sig0, b0 = (float(f(zero)) for f in (model.mu, model.sigma, model.b))
    sig, b, dsig, mu = model.sigma(ys), model.b(ys), model.dsigma(ys), model.mu(ys)
    clauses = [
        Clause("sigma(0)=0", abs(sig0) <= BOUNDARY_TOL, 0.0, f"sigma(0)={sig0:.3g}"),
        Clause("b(0)=0", abs(b0) <= BOUNDARY_TOL, 0.0, f"b(0)={b0:.3g}"),
        Clause("mu(0)>=0", mu0 >= 0, 0.0, f"mu(0)={mu0:.6g} (relaxed form)"),
        Clause("mu(0)=0", abs(mu0) <= BOUNDARY_TOL, 0.0, f"mu(0)={mu0:.6g}", informational=True),
    ]
    ok = sig > 0
    clauses.append(Clause("sigma(y)>0", bool(ok.all()), _first_fail(ys, ok)))
    ok = b > 0
    clauses.append(Clause("b(y)>0", bool(ok.all()), _first_fail(ys, ok)))
    ok = dsig >= 0
    clauses.append(Clause("sigma'(y)>=0", bool(ok.all()), _first_fail(ys, ok)))

    for name, f in (("mu", mu), ("sigma^2", sig ** 2), ("b^2", b ** 2)):
        if ys.size > 1:
            dd = np.abs(np.diff(f) / np.diff(ys))
            ok = np.isfinite(dd)
            witness = _first_fail(ys[1:], ok)
            bound = float(np.max(dd[ok])) if ok.any() else math.inf
        else:
            witness, bound = None, 0.0
        clauses.append(Clause(f"{name} locally Lipschitz", witness is None, witness,
                              f"max divided difference {bound:.3g}"))

    growth = np.abs(mu) + np.abs(b)
    ratios = growth / (1.0 + ys)
    C = float(np.max(ratios))
    slope = _tail_exponent(ys, growth)
    lin_ok = np.isfinite(C) and slope <= 1.1
    clauses.append(Clause("|mu|+b linear growth", bool(lin_ok),
                          float(ys[np.argmax(ratios)]) if not lin_ok else None,
                          f"C={C:.4g}, tail growth exponent {slope:.3g}"))

    dsig2 = 2.0 * sig * dsig
    poly_slope = _tail_exponent(ys, dsig2)
    clauses.append(Clause("(sigma^2)' polynomial growth",
                          bool(np.all(np.isfinite(dsig2)) and poly_slope < 20.0), None,
                          f"tail growth exponent {poly_slope:.3g}"))

    small = ys[ys <= min(0.1, ys[-1])]
    if small.size:
        q = model.b(small) ** 2 / small
        clauses.append(Clause("b^2(y)=O(y) near 0", bool(np.all(np.isfinite(q))),
                              None, f"max b^2/y on small samples {np.max(q):.4g}",
                              informational=True))

    notes = []
    if mu0 > BOUNDARY_TOL:
        notes.append("mu(0) > 0 accepted under the relaxed drift condition at y = 0")
    return AssumptionReport(clauses=clauses, growth_constant=C, notes=notes)
