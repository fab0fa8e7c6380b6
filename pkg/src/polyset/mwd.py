"""Continuous molar-mass distributions matched to a prescribed (Mn, dispersity).

Three right-skewed families are supported:

``lognormal``
    ln M ~ Normal(mu, sigma). Closed-form fit; ``sigma = 0`` encodes a
    monodisperse sample (point mass).
``schulz_zimm``
    Gamma number distribution with shape ``k`` and scale ``theta``.
``weibull``
    Weibull number distribution with shape ``a`` and scale ``lam``; the
    shape is found by bisection.

Every density here is a number-fraction density over M in g/mol, so the
number-average of the distribution is its plain mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from statistics import NormalDist
from typing import Mapping

import numpy as np
from scipy import special

from .errors import DomainError, FitError

__all__ = [
    "Family",
    "MwdSpec",
    "MomentSet",
    "ln_gamma",
    "fit_lognormal",
    "fit_schulz_zimm",
    "fit_weibull",
    "fit_mwd",
    "pdf",
    "logpdf",
    "quantile",
    "analytic_moments",
]

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Lanczos approximation, g = 7, nine terms.
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

WEIBULL_BRACKET = (0.05, 50.0)


class Family(str, Enum):
    LOGNORMAL = "lognormal"
    SCHULZ_ZIMM = "schulz_zimm"
    WEIBULL = "weibull"

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"ln": "lognormal", "sz": "schulz_zimm", "gamma": "schulz_zimm", "wb": "weibull"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"unknown distribution family {name!r}") from None


def ln_gamma(x: float) -> float:
    """Natural logarithm of the gamma function for ``x > 0``."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"ln_gamma requires a finite x > 0, got {x!r}")
    if x < 0.5:
        # reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        return math.log(math.pi / math.sin(math.pi * x)) - ln_gamma(1.0 - x)
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _LN_SQRT_2PI + (x + 0.5) * math.log(t) - t + math.log(acc)


@dataclass(frozen=True)
class MomentSet:
    """Molar-mass averages in g/mol and the dispersity ``mw / mn``."""

    mn: float
    mw: float
    mz: float
    mz_plus_1: float
    dispersity: float

    def as_dict(self) -> dict:
        return {
            "mn": self.mn,
            "mw": self.mw,
            "mz": self.mz,
            "mz_plus_1": self.mz_plus_1,
            "dispersity": self.dispersity,
        }


_PARAM_NAMES = {
    Family.LOGNORMAL: ("mu", "sigma"),
    Family.SCHULZ_ZIMM: ("k", "theta"),
    Family.WEIBULL: ("a", "lam"),
}


@dataclass(frozen=True)
class MwdSpec:
    """A fitted distribution together with the targets it was fitted to."""

    family: Family
    params: Mapping[str, float]
    target_mn: float
    target_dispersity: float
    m0: float
    extra: Mapping[str, float] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        _check_targets(self.target_mn, self.target_dispersity, self.m0)
        names = _PARAM_NAMES[self.family]
        if set(self.params) != set(names):
            raise DomainError(f"{self.family.value} expects parameters {names}, got {sorted(self.params)}")
        params = {k: float(self.params[k]) for k in names}
        for k, v in params.items():
            if not math.isfinite(v):
                raise DomainError(f"parameter {k} must be finite")
        if self.family is Family.LOGNORMAL:
            if params["sigma"] < 0.0:
                raise DomainError("sigma must be >= 0")
        elif min(params.values()) <= 0.0:
            raise DomainError(f"{self.family.value} parameters must be > 0")
        object.__setattr__(self, "params", params)

    @property
    def is_point_mass(self) -> bool:
        return self.family is Family.LOGNORMAL and self.params["sigma"] == 0.0

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "params": dict(self.params),
            "target_mn": self.target_mn,
            "target_dispersity": self.target_dispersity,
            "m0": self.m0,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MwdSpec":
        return cls(
            family=Family.parse(d["family"]),
            params=dict(d["params"]),
            target_mn=float(d["target_mn"]),
            target_dispersity=float(d["target_dispersity"]),
            m0=float(d["m0"]),
        )


def _check_targets(mn, dispersity, m0):
    for name, v in (("mn", mn), ("dispersity", dispersity), ("m0", m0)):
        if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
            raise DomainError(f"{name} must be a finite number, got {v!r}")
    if mn <= 0.0:
        raise DomainError(f"mn must be > 0, got {mn}")
    if m0 <= 0.0:
        raise DomainError(f"m0 must be > 0, got {m0}")
    if dispersity < 1.0:
        raise DomainError(f"dispersity must be >= 1, got {dispersity}")


def fit_lognormal(mn: float, dispersity: float, m0: float) -> MwdSpec:
    """Lognormal with mean ``mn`` and ``E[M^2] / E[M]^2 = dispersity``.

    ``dispersity == 1`` yields the point-mass spec (``sigma = 0``).
    """
    _check_targets(mn, dispersity, m0)
    s2 = math.log(dispersity)
    mu = math.log(mn) - 0.5 * s2
    return MwdSpec(Family.LOGNORMAL, {"mu": mu, "sigma": math.sqrt(s2)}, float(mn), float(dispersity), float(m0))


def fit_schulz_zimm(mn: float, dispersity: float, m0: float) -> MwdSpec:
    _check_targets(mn, dispersity, m0)
    if dispersity <= 1.0:
        raise DomainError("Schulz-Zimm needs dispersity > 1 (shape would be infinite)")
    k = 1.0 / (dispersity - 1.0)
    return MwdSpec(Family.SCHULZ_ZIMM, {"k": k, "theta": mn / k}, float(mn), float(dispersity), float(m0))


def _weibull_dispersity(a: float) -> float:
    return math.exp(ln_gamma(1.0 + 2.0 / a) - 2.0 * ln_gamma(1.0 + 1.0 / a))


def fit_weibull(mn: float, dispersity: float, m0: float, tol: float = 1e-12) -> MwdSpec:
    """Weibull matched to (mn, dispersity); shape found by bisection.

    The dispersity of a Weibull falls monotonically with its shape, so the
    root is bracketed on ``WEIBULL_BRACKET`` and halved until the bracket is
    narrower than ``tol`` relative to its midpoint.

    Raises
    ------
    FitError
        If ``dispersity`` cannot be reached inside the bracket.
    """
    _check_targets(mn, dispersity, m0)
    if not tol > 0.0:
        raise DomainError("tol must be > 0")
    lo, hi = WEIBULL_BRACKET
    target = math.log(dispersity)

    def f(a):
        return ln_gamma(1.0 + 2.0 / a) - 2.0 * ln_gamma(1.0 + 1.0 / a) - target

    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi > 0.0:
        raise FitError(
            f"Weibull fit: dispersity {dispersity} not reachable for shape in [{lo}, {hi}] "
            f"(reachable range {_weibull_dispersity(hi):.6g}..{_weibull_dispersity(lo):.6g})"
        )
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            lo = hi = mid
            break
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= tol * 0.5 * (lo + hi):
            break
    a = 0.5 * (lo + hi)
    lam = mn / math.exp(ln_gamma(1.0 + 1.0 / a))
    return MwdSpec(Family.WEIBULL, {"a": a, "lam": lam}, float(mn), float(dispersity), float(m0))


def fit_mwd(family, mn: float, dispersity: float, m0: float) -> MwdSpec:
    """Fit ``family`` to (mn, dispersity).

    A dispersity of exactly 1 always gives the lognormal point mass,
    whatever family was asked for.
    """
    family = Family.parse(family)
    if dispersity == 1.0:
        return fit_lognormal(mn, dispersity, m0)
    if family is Family.LOGNORMAL:
        return fit_lognormal(mn, dispersity, m0)
    if family is Family.SCHULZ_ZIMM:
        return fit_schulz_zimm(mn, dispersity, m0)
    return fit_weibull(mn, dispersity, m0)


def logpdf(spec: MwdSpec, m):
    """Log of the number-fraction density at ``m`` (scalar or array)."""
    if spec.is_point_mass:
        raise DomainError("point-mass spec has no density; use the point-mass ensemble path")
    m_arr = np.asarray(m, dtype=float)
    if np.any(~(m_arr > 0.0)):
        raise DomainError("density is only defined for m > 0")
    ln_m = np.log(m_arr)
    p = spec.params
    if spec.family is Family.LOGNORMAL:
        z = (ln_m - p["mu"]) / p["sigma"]
        out = -0.5 * z * z - ln_m - math.log(p["sigma"]) - _LN_SQRT_2PI
    elif spec.family is Family.SCHULZ_ZIMM:
        k, theta = p["k"], p["theta"]
        out = (k - 1.0) * ln_m - m_arr / theta - ln_gamma(k) - k * math.log(theta)
    else:
        a, lam = p["a"], p["lam"]
        ln_r = ln_m - math.log(lam)
        out = math.log(a / lam) + (a - 1.0) * ln_r - np.exp(a * ln_r)
    return out if np.ndim(m) else float(out)


def pdf(spec: MwdSpec, m):
    """Number-fraction density in mol/g at ``m`` g/mol."""
    out = np.exp(logpdf(spec, m))
    return out if np.ndim(m) else float(out)


def quantile(spec: MwdSpec, q: float) -> float:
    """Mass below which a number fraction ``q`` of chains lies."""
    if not 0.0 < q < 1.0:
        raise DomainError("quantile level must lie in (0, 1)")
    p = spec.params
    if spec.family is Family.LOGNORMAL:
        return math.exp(p["mu"] + p["sigma"] * NormalDist().inv_cdf(q))
    if spec.family is Family.SCHULZ_ZIMM:
        return float(special.gammaincinv(p["k"], q)) * p["theta"]
    return p["lam"] * (-math.log1p(-q)) ** (1.0 / p["a"])


def _raw_log_moment(spec: MwdSpec, r: int) -> float:
    """ln E[M^r]."""
    p = spec.params
    if spec.family is Family.LOGNORMAL:
        return r * p["mu"] + 0.5 * r * r * p["sigma"] ** 2
    if spec.family is Family.SCHULZ_ZIMM:
        return r * math.log(p["theta"]) + ln_gamma(p["k"] + r) - ln_gamma(p["k"])
    return r * math.log(p["lam"]) + ln_gamma(1.0 + r / p["a"])


def analytic_moments(spec: MwdSpec) -> MomentSet:
    """Mn, Mw, Mz, Mz+1 of the continuous distribution, from its parameters."""
    if spec.is_point_mass:
        m = math.exp(spec.params["mu"])
        return MomentSet(m, m, m, m, 1.0)
    p = spec.params
    if spec.family is Family.SCHULZ_ZIMM:
        # exact ratios avoid lgamma cancellation
        k, theta = p["k"], p["theta"]
        mn = k * theta
        return MomentSet(mn, (k + 1) * theta, (k + 2) * theta, (k + 3) * theta, (k + 1) / k)
    lm = [_raw_log_moment(spec, r) for r in range(5)]
    mn = math.exp(lm[1] - lm[0])
    mw = math.exp(lm[2] - lm[1])
    return MomentSet(mn, mw, math.exp(lm[3] - lm[2]), math.exp(lm[4] - lm[3]), mw / mn)
