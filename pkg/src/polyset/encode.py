"""Chain featurization and ensemble embeddings.

A chain is mapped to a fixed vector: a one-hot block for the monomer, a
bank of Gaussian radial-basis functions over log10(mass), and optionally
the raw log10(mass). The ensemble embedding is the weighted sum of its
chain vectors. The baseline embedding carries only the monomer and the
scalar pair (Mn, dispersity).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ensemble import Chain, PolySetEnsemble
from .errors import DomainError, VocabularyError

__all__ = [
    "EncoderConfig",
    "Embedding",
    "chain_features",
    "chain_feature_matrix",
    "polyset_embed",
    "baseline_embed",
    "write_embeddings",
    "read_embeddings",
]

POLYSET = "polyset"
BASELINE = "baseline"


@dataclass(frozen=True)
class EncoderConfig:
    n_rbf: int = 32
    center_lo: float = 3.0
    center_hi: float = 7.5
    bandwidth: float = 1.0  # in units of center spacing
    monomer_vocab: tuple[str, ...] = ("A",)
    include_raw_logmass: bool = True

    def __post_init__(self):
        object.__setattr__(self, "monomer_vocab", tuple(self.monomer_vocab))
        if self.n_rbf < 2:
            raise DomainError("n_rbf must be >= 2")
        if not self.center_hi > self.center_lo:
            raise DomainError("center_hi must exceed center_lo")
        if not self.bandwidth > 0.0:
            raise DomainError("bandwidth must be > 0")
        if not self.monomer_vocab:
            raise DomainError("monomer_vocab is empty")

    @property
    def centers(self) -> np.ndarray:
        return np.linspace(self.center_lo, self.center_hi, self.n_rbf)

    @property
    def width(self) -> float:
        return self.bandwidth * (self.center_hi - self.center_lo) / (self.n_rbf - 1)

    def dim(self, kind: str = POLYSET) -> int:
        if kind == BASELINE:
            return len(self.monomer_vocab) + 2
        return len(self.monomer_vocab) + self.n_rbf + int(self.include_raw_logmass)

    def one_hot(self, monomer: str) -> np.ndarray:
        try:
            i = self.monomer_vocab.index(monomer)
        except ValueError:
            raise VocabularyError(f"monomer {monomer!r} not in vocabulary {self.monomer_vocab}") from None
        v = np.zeros(len(self.monomer_vocab))
        v[i] = 1.0
        return v

    def to_dict(self) -> dict:
        d = asdict(self)
        d["monomer_vocab"] = list(self.monomer_vocab)
        return d

    @classmethod
    def from_dict(cls, d) -> "EncoderConfig":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Embedding:
    values: np.ndarray
    kind: str = POLYSET

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise DomainError("embedding must be a finite 1-D vector")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return int(self.values.size)


def chain_feature_matrix(masses, monomer: str, cfg: EncoderConfig) -> np.ndarray:
    """Feature rows for an array of chain masses sharing one monomer."""
    onehot = cfg.one_hot(monomer)
    logm = np.log10(np.asarray(masses, dtype=float))
    d = (logm[:, None] - cfg.centers[None, :]) / cfg.width
    blocks = [np.broadcast_to(onehot, (logm.size, onehot.size)), np.exp(-0.5 * d * d)]
    if cfg.include_raw_logmass:
        blocks.append(logm[:, None])
    return np.hstack(blocks)


def chain_features(chain: Chain, monomer: str, cfg: EncoderConfig) -> np.ndarray:
    return chain_feature_matrix([chain.m], monomer, cfg)[0]


def polyset_embed(e: PolySetEnsemble, monomer: str, cfg: EncoderConfig) -> Embedding:
    """Weighted sum of chain feature vectors."""
    feats = chain_feature_matrix(e.m, monomer, cfg)
    return Embedding(e.weights @ feats, POLYSET)


def baseline_embed(monomer: str, mn: float, dispersity: float, cfg: EncoderConfig) -> Embedding:
    if not mn > 0.0 or not dispersity >= 1.0:
        raise DomainError("baseline embedding needs mn > 0 and dispersity >= 1")
    return Embedding(np.concatenate([cfg.one_hot(monomer), [np.log10(mn), float(dispersity)]]), BASELINE)


def write_embeddings(path, ids: Sequence[int], matrix: np.ndarray, cfg: EncoderConfig, kind: str) -> None:
    """JSON header line with the encoder config, then one ``{"id", "values"}`` row per line."""
    matrix = np.asarray(matrix, dtype=float)
    header = {"schema": "polyset-embeddings", "version": 1, "kind": kind,
              "dim": int(matrix.shape[1]) if matrix.ndim == 2 else 0, "config": cfg.to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, row in zip(ids, matrix):
            fh.write(json.dumps({"id": int(i), "values": [float(v) for v in row]}) + "\n")


def read_embeddings(path):
    """Return ``(ids, matrix, cfg, kind)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    if header.get("schema") != "polyset-embeddings":
        raise DomainError(f"{path} is not an embeddings file")
    rows = [json.loads(line) for line in lines[1:] if line.strip()]
    ids = [r["id"] for r in rows]
    matrix = np.array([r["values"] for r in rows], dtype=float).reshape(len(rows), header["dim"])
    return ids, matrix, EncoderConfig.from_dict(header["config"]), header["kind"]
