"""Synthetic homopolymer corpus with deliberate (Mn, dispersity) degeneracy.

Each group draws one (Mn, dispersity) pair; its variants realize that pair
with different distribution shapes, cycling through

    0. lognormal, full grid span
    1. Schulz-Zimm
    2. Weibull
    3. lognormal whose grid stops a jittered 3-4 sigma above the median
       (high-mass tail cut off, low-mass side untouched)

Targets are log10 moments of each record's own realized ensemble, so a
record's embedding and its labels always describe the same chains.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .encode import EncoderConfig, baseline_embed, polyset_embed
from .ensemble import DEFAULT_SPAN_SIGMAS, PolySetEnsemble, empirical_moments, sample
from .errors import CorpusError, DomainError, FitError
from .mwd import Family, MomentSet, MwdSpec, fit_mwd

__all__ = [
    "DatasetConfig",
    "PolymerRecord",
    "SplitAssignment",
    "generate_corpus",
    "write_records",
    "read_records",
    "read_corpus",
    "split_records",
    "write_split",
    "read_split",
    "polyset_matrix",
    "baseline_matrix",
]

logger = logging.getLogger(__name__)

SCHEMA = "polyset-corpus"
SCHEMA_VERSION = 1
_U64 = (1 << 64) - 1
_MAX_ATTEMPTS = 100

# (family, truncated?) per variant slot
VARIANT_CYCLE = (
    (Family.LOGNORMAL, False),
    (Family.SCHULZ_ZIMM, False),
    (Family.WEIBULL, False),
    (Family.LOGNORMAL, True),
)


@dataclass(frozen=True)
class DatasetConfig:
    n_groups: int = 2500
    variants_per_group: int = 4
    mn_range: tuple[float, float] = (1e4, 1e6)
    dispersity_range: tuple[float, float] = (1.5, 4.0)
    chains_per_ensemble: int = 512
    m0: float = 100.0
    monomer: str = "A"
    master_seed: int = 0
    sampling_mode: str = "grid"
    truncated_span_range: tuple[float, float] = (3.0, 4.0)
    family_cycling: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mn_range", tuple(float(v) for v in self.mn_range))
        object.__setattr__(self, "dispersity_range", tuple(float(v) for v in self.dispersity_range))
        object.__setattr__(self, "truncated_span_range", tuple(float(v) for v in self.truncated_span_range))
        if self.n_groups < 1 or self.variants_per_group < 1:
            raise DomainError("n_groups and variants_per_group must be >= 1")
        lo, hi = self.mn_range
        if not (0.0 < lo <= hi and math.isfinite(hi)):
            raise DomainError(f"mn_range must satisfy 0 < lo <= hi, got {self.mn_range}")
        dlo, dhi = self.dispersity_range
        if not (1.0 < dlo <= dhi and math.isfinite(dhi)):
            raise DomainError(f"dispersity_range must satisfy 1 < lo <= hi, got {self.dispersity_range}")
        slo, shi = self.truncated_span_range
        if not 0.0 < slo <= shi:
            raise DomainError("truncated_span_range must satisfy 0 < lo <= hi")
        if self.chains_per_ensemble < 2:
            raise DomainError("chains_per_ensemble must be >= 2")
        if not self.m0 > 0.0:
            raise DomainError("m0 must be > 0")
        if self.sampling_mode not in ("grid", "iid", "literal"):
            raise DomainError(f"unknown sampling mode {self.sampling_mode!r}")
        if self.sampling_mode != "grid" and self.family_cycling:
            raise DomainError("random sampling modes support the lognormal only; disable family_cycling")

    @property
    def n_records(self) -> int:
        return self.n_groups * self.variants_per_group

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("mn_range", "dispersity_range", "truncated_span_range"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d) -> "DatasetConfig":
        return cls(**d)


@dataclass(frozen=True)
class PolymerRecord:
    id: int
    group_id: int
    variant: int
    monomer: str
    spec: MwdSpec
    mode: str
    n_chains: int
    span_sigmas: float
    lower_span_sigmas: float
    seed: int
    mn: float
    mw: float
    mz: float
    mz_plus_1: float
    dispersity: float
    target_log10_mz: float
    target_log10_mz1: float

    @property
    def family(self) -> Family:
        return self.spec.family

    def ensemble(self) -> PolySetEnsemble:
        """Rebuild the record's chain ensemble (deterministic)."""
        return sample(self.spec, self.n_chains, self.mode, self.seed, self.span_sigmas, self.lower_span_sigmas)

    def moments(self) -> MomentSet:
        return MomentSet(self.mn, self.mw, self.mz, self.mz_plus_1, self.dispersity)

    def target(self, which: str = "mz1") -> float:
        if which == "mz1":
            return self.target_log10_mz1
        if which == "mz":
            return self.target_log10_mz
        raise DomainError(f"unknown target {which!r} (expected 'mz' or 'mz1')")

    def polyset_embedding(self, cfg: EncoderConfig):
        return polyset_embed(self.ensemble(), self.monomer, cfg)

    def baseline_embedding(self, cfg: EncoderConfig):
        # nominal (database) scalars: identical for every record of a group
        return baseline_embed(self.monomer, self.spec.target_mn, self.spec.target_dispersity, cfg)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["spec"] = self.spec.to_dict()
        d["family"] = self.spec.family.value
        return d

    @classmethod
    def from_dict(cls, d) -> "PolymerRecord":
        d = dict(d)
        d.pop("family", None)
        d["spec"] = MwdSpec.from_dict(d["spec"])
        return cls(**d)


def _seed_from(*words: int) -> int:
    ss = np.random.SeedSequence([int(w) & _U64 for w in words])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _draw_group(cfg: DatasetConfig, group: int, attempt: int) -> tuple[float, float]:
    rng = np.random.default_rng(_seed_from(cfg.master_seed, group, attempt))
    lo, hi = cfg.mn_range
    mn = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi))
    dispersity = rng.uniform(*cfg.dispersity_range)
    return float(mn), float(dispersity)


def _make_record(cfg: DatasetConfig, group: int, variant: int, attempt: int,
                 mn: float, dispersity: float) -> PolymerRecord:
    seed = _seed_from(cfg.master_seed, group, variant, attempt)
    family, truncated = VARIANT_CYCLE[variant % len(VARIANT_CYCLE)] if cfg.family_cycling else (Family.LOGNORMAL, False)
    spec = fit_mwd(family, mn, dispersity, cfg.m0)
    span = DEFAULT_SPAN_SIGMAS
    if truncated:
        span = float(np.random.default_rng(seed).uniform(*cfg.truncated_span_range))
    ens = sample(spec, cfg.chains_per_ensemble, cfg.sampling_mode, seed, span, DEFAULT_SPAN_SIGMAS)
    mom = empirical_moments(ens)
    return PolymerRecord(
        id=group * cfg.variants_per_group + variant,
        group_id=group,
        variant=variant,
        monomer=cfg.monomer,
        spec=spec,
        mode=cfg.sampling_mode,
        n_chains=cfg.chains_per_ensemble,
        span_sigmas=span,
        lower_span_sigmas=DEFAULT_SPAN_SIGMAS,
        seed=seed,
        mn=mom.mn,
        mw=mom.mw,
        mz=mom.mz,
        mz_plus_1=mom.mz_plus_1,
        dispersity=mom.dispersity,
        target_log10_mz=math.log10(mom.mz),
        target_log10_mz1=math.log10(mom.mz_plus_1),
    )


def generate_corpus(cfg: DatasetConfig) -> list[PolymerRecord]:
    """Build every record of the corpus; a pure function of ``cfg``."""
    records = []
    for g in range(cfg.n_groups):
        for attempt in range(_MAX_ATTEMPTS):
            mn, dispersity = _draw_group(cfg, g, attempt)
            try:
                group = [_make_record(cfg, g, v, attempt, mn, dispersity) for v in range(cfg.variants_per_group)]
            except FitError as exc:
                logger.warning("group %d attempt %d (Mn=%.4g, D=%.4g) skipped: %s", g, attempt, mn, dispersity, exc)
                continue
            records.extend(group)
            break
        else:
            raise FitError(f"group {g}: no fittable (Mn, D) after {_MAX_ATTEMPTS} attempts")
    records.sort(key=lambda r: r.id)
    return records


def write_records(records: Sequence[PolymerRecord], path, config: DatasetConfig | None = None) -> None:
    header = {"schema": SCHEMA, "version": SCHEMA_VERSION, "config": config.to_dict() if config else None}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_corpus(path) -> tuple[DatasetConfig | None, list[PolymerRecord]]:
    """Return the stored config (if any) and the records of a corpus file."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        return None, []
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorpusError(f"header is not JSON ({exc.msg})", line=1) from None
    if not isinstance(header, dict) or header.get("schema") != SCHEMA:
        raise CorpusError(f"not a {SCHEMA} file", line=1)
    if header.get("version") != SCHEMA_VERSION:
        raise CorpusError(f"unsupported schema version {header.get('version')!r} (expected {SCHEMA_VERSION})", line=1)
    config = DatasetConfig.from_dict(header["config"]) if header.get("config") else None
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            records.append(PolymerRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"malformed record ({exc})", line=lineno) from None
    return config, records


def read_records(path) -> list[PolymerRecord]:
    return read_corpus(path)[1]


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]
    seed: int = 0
    fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    group_aware: bool = True

    def to_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test),
                "seed": self.seed, "fractions": list(self.fractions), "group_aware": self.group_aware}

    @classmethod
    def from_dict(cls, d) -> "SplitAssignment":
        return cls(tuple(d["train"]), tuple(d["val"]), tuple(d["test"]), d.get("seed", 0),
                   tuple(d.get("fractions", (0.7, 0.15, 0.15))), d.get("group_aware", True))


def split_records(records: Sequence[PolymerRecord], fractions=(0.7, 0.15, 0.15), seed: int = 0,
                  group_aware: bool = True) -> SplitAssignment:
    """Partition record ids into train/val/test.

    With ``group_aware`` the shuffle is over groups, so every variant of a
    group lands in the same split.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) < 0.0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise DomainError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    if group_aware:
        keys = sorted({r.group_id for r in records})
    else:
        keys = sorted(r.id for r in records)
    if len(keys) < 3:
        raise DomainError(f"cannot split {len(keys)} {'groups' if group_aware else 'records'} three ways")
    perm = np.random.default_rng(int(seed) & _U64).permutation(len(keys))
    n_train = int(round(fractions[0] * len(keys)))
    n_val = int(round(fractions[1] * len(keys)))
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    which = {}
    for label, idx in zip(("train", "val", "test"), parts):
        for i in idx:
            which[keys[i]] = label
    out = {"train": [], "val": [], "test": []}
    for r in records:
        out[which[r.group_id if group_aware else r.id]].append(r.id)
    return SplitAssignment(tuple(out["train"]), tuple(out["val"]), tuple(out["test"]), int(seed), fractions, group_aware)


def write_split(split: SplitAssignment, path) -> None:
    Path(path).write_text(json.dumps(split.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def read_split(path) -> SplitAssignment:
    try:
        return SplitAssignment.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorpusError(f"malformed split file {path}: {exc}") from None


def polyset_matrix(records: Sequence[PolymerRecord], cfg: EncoderConfig) -> np.ndarray:
    return np.vstack([r.polyset_embedding(cfg).values for r in records])


def baseline_matrix(records: Sequence[PolymerRecord], cfg: EncoderConfig) -> np.ndarray:
    return np.vstack([r.baseline_embedding(cfg).values for r in records])
