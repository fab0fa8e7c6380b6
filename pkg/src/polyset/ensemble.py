"""Finite weighted chain ensembles and their empirical molar-mass averages.

An ensemble is a list of chains (degree of polymerization ``x`` and mass
``m = x * m0``) with number-fraction weights summing to one. Three ways of
building one from an :class:`~polyset.mwd.MwdSpec` are offered:

``grid`` (default)
    Deterministic midpoint nodes on a uniform grid in ln M. Each node is
    weighted by ``p(M) * M``, the density divided by the log-uniform
    proposal, so the weighted nodes are a quadrature of ``p``.
``iid``
    Independent lognormal draws with equal weights.
``literal``
    Draws from ``p`` weighted by the density at the draw. This double
    counts the density and is kept only to study the resulting bias.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import CapabilityError, DomainError
from .mwd import Family, MomentSet, MwdSpec, logpdf, quantile

__all__ = [
    "Chain",
    "PolySetEnsemble",
    "quantize_chain",
    "quantize_masses",
    "grid_support",
    "sample_grid",
    "sample_iid",
    "sample_literal",
    "point_mass_ensemble",
    "sample",
    "empirical_moments",
    "ensemble_to_json",
    "ensemble_from_json",
]

DEFAULT_SPAN_SIGMAS = 8.0
DEFAULT_TAIL = 1e-9
SAMPLING_MODES = ("grid", "iid", "literal")


@dataclass(frozen=True)
class Chain:
    x: int
    m: float


@dataclass(frozen=True, eq=False)
class PolySetEnsemble:
    """Chains stored column-wise: ``x`` (int), ``m`` (g/mol), ``weights``."""

    x: np.ndarray
    weights: np.ndarray
    m0: float
    provenance: Mapping[str, Any] = field(default_factory=dict)
    m: np.ndarray = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        w = np.asarray(self.weights, dtype=float)
        if x.ndim != 1 or x.shape != w.shape:
            raise DomainError("x and weights must be 1-D arrays of equal length")
        if x.size == 0:
            raise DomainError("an ensemble needs at least one chain")
        if np.any(x < 1):
            raise DomainError("degree of polymerization must be >= 1")
        if np.any(~np.isfinite(w)) or np.any(w < 0.0):
            raise DomainError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1, got {w.sum()!r}")
        m = x * float(self.m0)
        for arr in (x, m, w):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "m0", float(self.m0))
        object.__setattr__(self, "provenance", dict(self.provenance))

    @classmethod
    def from_masses(cls, masses, weights, m0, provenance=None, normalize=True):
        """Quantize ``masses`` to whole repeat units and (re)normalize weights."""
        w = np.asarray(weights, dtype=float)
        if normalize:
            total = w.sum()
            if not total > 0.0:
                raise DomainError("weights sum to zero")
            w = w / total
        return cls(quantize_masses(masses, m0), w, m0, provenance or {})

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def chains(self) -> list[Chain]:
        return [Chain(int(xi), float(mi)) for xi, mi in zip(self.x, self.m)]

    def __len__(self):
        return self.n


def quantize_masses(m, m0: float) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if not m0 > 0.0 or np.any(~(m > 0.0)):
        raise DomainError("masses and m0 must be > 0")
    # round half away from zero; all ratios are positive here
    return np.maximum(1, np.floor(m / m0 + 0.5)).astype(np.int64)


def quantize_chain(m: float, m0: float) -> Chain:
    """Snap a mass to the nearest whole number of repeat units (at least one)."""
    if not (m > 0.0 and m0 > 0.0):
        raise DomainError(f"quantize_chain needs m > 0 and m0 > 0, got {m!r}, {m0!r}")
    x = int(quantize_masses([m], m0)[0])
    return Chain(x, x * float(m0))


def grid_support(spec: MwdSpec, span_sigmas: float = DEFAULT_SPAN_SIGMAS, tail: float = DEFAULT_TAIL,
                 lower_span_sigmas: float | None = None):
    """Return ``(ln_lo, ln_hi)``, the ln-mass interval covered by the grid.

    Lognormal: ``[mu - lower_span_sigmas * sigma, mu + span_sigmas * sigma]``
    with the lower span defaulting to ``span_sigmas``. Gamma and Weibull:
    the ``tail`` and ``1 - tail`` quantiles.
    """
    if spec.is_point_mass:
        raise DomainError("point-mass spec: use point_mass_ensemble")
    if spec.family is Family.LOGNORMAL:
        lower = span_sigmas if lower_span_sigmas is None else lower_span_sigmas
        if not (span_sigmas > 0.0 and lower > 0.0):
            raise DomainError("span_sigmas must be > 0")
        mu, sigma = spec.params["mu"], spec.params["sigma"]
        return mu - lower * sigma, mu + span_sigmas * sigma
    return math.log(quantile(spec, tail)), math.log(quantile(spec, 1.0 - tail))


def _normalize_log_weights(log_w: np.ndarray) -> np.ndarray:
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def sample_grid(spec: MwdSpec, n: int, span_sigmas: float = DEFAULT_SPAN_SIGMAS,
                lower_span_sigmas: float | None = None) -> PolySetEnsemble:
    """Deterministic quadrature ensemble of ``n`` chains.

    For the lognormal, a small ``span_sigmas`` with a wide
    ``lower_span_sigmas`` cuts off only the high-mass tail.
    """
    if n < 2:
        raise DomainError("grid sampling needs n >= 2")
    lo, hi = grid_support(spec, span_sigmas, lower_span_sigmas=lower_span_sigmas)
    step = (hi - lo) / n
    ln_m = lo + step * (np.arange(n) + 0.5)
    masses = np.exp(ln_m)
    # p(M) / q(M) with q log-uniform, i.e. p(M) * M
    w = _normalize_log_weights(logpdf(spec, masses) + ln_m)
    prov = {"mode": "grid", "seed": None, "span_sigmas": float(span_sigmas),
            "lower_span_sigmas": None if lower_span_sigmas is None else float(lower_span_sigmas),
            "spec": spec.to_dict()}
    return PolySetEnsemble.from_masses(masses, w, spec.m0, prov)


def _lognormal_draws(spec: MwdSpec, n: int, seed: int) -> np.ndarray:
    if spec.family is not Family.LOGNORMAL:
        raise CapabilityError(f"random sampling is implemented for the lognormal only, not {spec.family.value}")
    if n < 1:
        raise DomainError("n must be >= 1")
    z = np.random.default_rng(seed).standard_normal(n)
    return np.exp(spec.params["mu"] + spec.params["sigma"] * z)


def sample_iid(spec: MwdSpec, n: int, seed: int) -> PolySetEnsemble:
    masses = _lognormal_draws(spec, n, seed)
    prov = {"mode": "iid", "seed": int(seed), "spec": spec.to_dict()}
    return PolySetEnsemble.from_masses(masses, np.full(n, 1.0 / n), spec.m0, prov)


def sample_literal(spec: MwdSpec, n: int, seed: int, density: str = "log") -> PolySetEnsemble:
    """Lognormal draws weighted by the density evaluated at each draw.

    ``density="log"`` weights by the normal density of ln M (how the draw
    itself is generated); the weighted law then tends to
    lognormal(mu, sigma / sqrt(2)) and Mn to ``exp(mu + sigma**2 / 4)``.
    ``density="mass"`` weights by the density over M; Mn then tends to
    ``exp(mu - sigma**2 / 4)``. Either way the result is biased low.
    """
    masses = _lognormal_draws(spec, n, seed)
    if spec.is_point_mass:
        w = np.ones(n)
    else:
        log_w = logpdf(spec, masses)
        if density == "log":
            log_w = log_w + np.log(masses)
        elif density != "mass":
            raise DomainError("density must be 'log' or 'mass'")
        w = _normalize_log_weights(log_w)
    prov = {"mode": "literal", "seed": int(seed), "density": density, "spec": spec.to_dict()}
    return PolySetEnsemble.from_masses(masses, w, spec.m0, prov)


def point_mass_ensemble(spec: MwdSpec) -> PolySetEnsemble:
    mass = math.exp(spec.params["mu"]) if spec.is_point_mass else spec.target_mn
    prov = {"mode": "point", "seed": None, "spec": spec.to_dict()}
    return PolySetEnsemble.from_masses([mass], [1.0], spec.m0, prov)


def sample(spec: MwdSpec, n: int, mode: str = "grid", seed: int | None = None,
           span_sigmas: float = DEFAULT_SPAN_SIGMAS, lower_span_sigmas: float | None = None) -> PolySetEnsemble:
    """Dispatch on ``mode``; point-mass specs always give a single chain."""
    if spec.is_point_mass:
        return point_mass_ensemble(spec)
    if mode == "grid":
        return sample_grid(spec, n, span_sigmas, lower_span_sigmas)
    if mode not in SAMPLING_MODES:
        raise DomainError(f"unknown sampling mode {mode!r}")
    if seed is None:
        raise DomainError(f"{mode} sampling needs a seed")
    if mode == "iid":
        return sample_iid(spec, n, seed)
    return sample_literal(spec, n, seed)


def empirical_moments(e: PolySetEnsemble) -> MomentSet:
    """Weighted Mn, Mw, Mz, Mz+1 of the chain masses.

    Terms are sorted by (mass, weight) and accumulated as powers of
    ``m / max(m)``, so the result does not depend on chain order.
    """
    if e.n == 0:
        raise DomainError("empty ensemble")
    order = np.lexsort((e.weights, e.m))
    m = e.m[order]
    w = e.weights[order]
    scale = m[-1]
    s = m / scale
    p1 = np.sum(w * s)
    p2 = np.sum(w * s * s)
    p3 = np.sum(w * s ** 3)
    p4 = np.sum(w * s ** 4)
    p0 = np.sum(w)
    mn = scale * p1 / p0
    mw = scale * p2 / p1
    return MomentSet(float(mn), float(mw), float(scale * p3 / p2), float(scale * p4 / p3), float(mw / mn))


def ensemble_to_json(e: PolySetEnsemble) -> str:
    doc = {
        "m0": e.m0,
        "mode": e.provenance.get("mode"),
        "seed": e.provenance.get("seed"),
        "chains": [[int(x), float(w)] for x, w in zip(e.x, e.weights)],
    }
    return json.dumps(doc)


def ensemble_from_json(text: str) -> PolySetEnsemble:
    doc = json.loads(text)
    try:
        x = np.array([c[0] for c in doc["chains"]], dtype=np.int64)
        w = np.array([c[1] for c in doc["chains"]], dtype=float)
        m0 = float(doc["m0"])
    except (KeyError, TypeError, IndexError) as exc:
        raise DomainError(f"malformed ensemble document: {exc}") from None
    if w.size == 0 or not w.sum() > 0.0:
        raise DomainError("ensemble document has no positive weights")
    return PolySetEnsemble(x, w / w.sum(), m0, {"mode": doc.get("mode"), "seed": doc.get("seed")})
