"""Latent-space and dataset diagnostics: PCA, rank correlation, degeneracy tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError

__all__ = [
    "PcaResult",
    "pca",
    "rankdata",
    "spearman",
    "degeneracy_report",
    "select_iso_subset",
    "iso_subset_manifold_check",
    "coverage_histogram",
    "rows_to_csv",
]


@dataclass(frozen=True, eq=False)
class PcaResult:
    components: np.ndarray  # (n_components, n_features), orthonormal rows
    explained_variance: np.ndarray
    projections: np.ndarray  # (n_samples, n_components)
    mean: np.ndarray
    total_variance: float

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0.0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance


def pca(matrix, n_components: int) -> PcaResult:
    """Principal components from the eigendecomposition of the sample covariance.

    Each component is signed so that its largest-magnitude entry is positive.
    """
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ShapeError("pca needs a (samples, features) matrix with at least 2 samples")
    n, d = X.shape
    if not 1 <= n_components <= min(n, d):
        raise DomainError(f"n_components must lie in [1, {min(n, d)}], got {n_components}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    cov = 0.5 * (cov + cov.T)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:n_components]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order].T
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0.0:
            row *= -1.0
    return PcaResult(comps, evals, Xc @ comps.T, mean, float(np.trace(cov)))


def rankdata(x) -> np.ndarray:
    """1-based ranks with ties given their average rank."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size)
    xs = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise ShapeError("spearman needs two 1-D vectors of equal length >= 3")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if denom == 0.0:
        raise DomainError("spearman is undefined for a constant input")
    return float(np.sum(rx * ry) / denom)


def degeneracy_report(records) -> tuple[list[dict], dict]:
    """Per-group spread of the tail-sensitive targets.

    Returns ``(rows, summary)``; ``rows`` has one dict per group and
    ``summary`` the mean within-group standard deviations (overall and for
    groups with nominal dispersity >= 2.5).
    """
    groups: dict[int, list] = {}
    for r in records:
        groups.setdefault(r.group_id, []).append(r)
    rows = []
    for gid in sorted(groups):
        members = groups[gid]
        mz1 = np.array([r.target_log10_mz1 for r in members])
        mz = np.array([r.target_log10_mz for r in members])
        rows.append({
            "group_id": gid,
            "mn": members[0].spec.target_mn,
            "dispersity": members[0].spec.target_dispersity,
            "count": len(members),
            "log10_mz1_min": float(mz1.min()),
            "log10_mz1_max": float(mz1.max()),
            "log10_mz1_std": float(mz1.std()),
            "log10_mz_min": float(mz.min()),
            "log10_mz_max": float(mz.max()),
            "log10_mz_std": float(mz.std()),
        })

    def mean_of(key, sel=lambda row: True):
        vals = [row[key] for row in rows if sel(row)]
        return float(np.mean(vals)) if vals else float("nan")

    broad = lambda row: row["dispersity"] >= 2.5  # noqa: E731
    summary = {
        "n_groups": len(rows),
        "n_records": sum(row["count"] for row in rows),
        "mean_within_group_std_log10_mz1": mean_of("log10_mz1_std"),
        "mean_within_group_std_log10_mz": mean_of("log10_mz_std"),
        "mean_within_group_std_log10_mz1_disp_ge_2_5": mean_of("log10_mz1_std", broad),
        "mean_within_group_std_log10_mz_disp_ge_2_5": mean_of("log10_mz_std", broad),
    }
    return rows, summary


def select_iso_subset(records, mn: float, dispersity: float, rtol: float = 1e-9) -> list:
    """Records whose nominal (Mn, dispersity) match within relative ``rtol``."""
    return [r for r in records
            if abs(r.spec.target_mn - mn) <= rtol * mn and abs(r.spec.target_dispersity - dispersity) <= rtol * dispersity]


def iso_subset_manifold_check(records, encoder_cfg, representation: str = "polyset",
                              n_components: int = 2) -> dict:
    """How well a leading PC coordinate orders an iso-(Mn, D) subset by log10 Mz+1.

    Returns a dict with ``spearman_pc_vs_logmz1`` (max |rho| over the
    components), per-component values, the projections, and two flags:
    ``degenerate`` (embeddings carry no variance, so ordering is
    impossible) and ``low_diversity`` (fewer than two distinct shapes).
    """
    from .dataset import baseline_matrix, polyset_matrix

    records = list(records)
    if len(records) < 10:
        raise DomainError(f"manifold check needs at least 10 records, got {len(records)}")
    if representation == "polyset":
        X = polyset_matrix(records, encoder_cfg)
    elif representation == "baseline":
        X = baseline_matrix(records, encoder_cfg)
    else:
        raise DomainError(f"unknown representation {representation!r}")
    y = np.array([r.target_log10_mz1 for r in records])
    shapes = {(r.spec.family, round(r.span_sigmas, 12), r.seed if r.mode != "grid" else None) for r in records}
    result = pca(X, min(n_components, *X.shape))
    per_pc = []
    for k in range(result.projections.shape[1]):
        try:
            per_pc.append(spearman(result.projections[:, k], y))
        except DomainError:
            per_pc.append(float("nan"))
    finite = [abs(v) for v in per_pc if np.isfinite(v)]
    degenerate = result.total_variance == 0.0 or not finite
    return {
        "representation": representation,
        "n_records": len(records),
        "n_families": len({r.spec.family for r in records}),
        "spearman_pc_vs_logmz1": max(finite) if finite else float("nan"),
        "spearman_per_component": per_pc,
        "explained_variance_ratio": result.explained_variance_ratio.tolist(),
        "degenerate": bool(degenerate),
        "low_diversity": len(shapes) < 2,
        "projections": result.projections.tolist(),
        "log10_mz1": y.tolist(),
        "ids": [r.id for r in records],
    }


def coverage_histogram(records, bins: int = 10, log10_mn_range=(4.0, 6.0), dispersity_range=(1.5, 4.0)):
    """2-D counts of nominal (log10 Mn, D) per record, with bin edges."""
    x = np.log10([r.spec.target_mn for r in records])
    y = np.array([r.spec.target_dispersity for r in records])
    counts, xe, ye = np.histogram2d(x, y, bins=bins, range=[log10_mn_range, dispersity_range])
    return counts.astype(int), xe, ye


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()
