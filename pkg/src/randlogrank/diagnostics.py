"""Distribution summaries of simulated statistics against N(0, 1)."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr


def ks_distance(x) -> float:
    """sup_x |F_hat(x) - Phi(x)| for the empirical cdf of ``x``."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    if n == 0:
        raise ValueError("no defined statistics")
    cdf = ndtr(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


@dataclass(frozen=True)
class DistributionSummary:
    count: int
    defined_count: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks: float
    bin_edges: np.ndarray
    histogram: np.ndarray
    underflow: int
    overflow: int

    @property
    def undefined_fraction(self) -> float:
        return 1.0 - self.defined_count / self.count

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "defined_count": self.defined_count,
            "undefined_fraction": self.undefined_fraction,
            "mean": self.mean,
            "variance": self.variance,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "ks_distance": self.ks,
            "histogram": {
                "bin_edges": self.bin_edges.tolist(),
                "counts": self.histogram.tolist(),
                "underflow": self.underflow,
                "overflow": self.overflow,
            },
        }


def summarize(samples, lo: float = -5.0, hi: float = 5.0, width: float = 0.25) -> DistributionSummary:
    """Moments, KS distance and histogram over the defined (non-NaN) values.

    Values below ``lo`` or above ``hi`` land in the underflow/overflow bins.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    d = np.sort(x[~np.isnan(x)])
    if d.size == 0:
        raise ValueError("no defined statistics")
    mean = float(np.mean(d))
    c = d - mean
    m2 = float(np.mean(c * c))
    m3 = float(np.mean(c**3))
    m4 = float(np.mean(c**4))
    skew = m3 / m2**1.5 if m2 > 0 else 0.0
    kurt = m4 / m2**2 - 3.0 if m2 > 0 else 0.0
    n_bins = int(round((hi - lo) / width))
    edges = lo + width * np.arange(n_bins + 1)
    counts, _ = np.histogram(d, bins=edges)
    return DistributionSummary(
        count=int(x.size),
        defined_count=int(d.size),
        mean=mean,
        variance=float(np.var(d, ddof=1)) if d.size > 1 else 0.0,
        skewness=skew,
        excess_kurtosis=kurt,
        ks=ks_distance(d),
        bin_edges=edges,
        histogram=counts,
        underflow=int(np.sum(d < lo)),
        overflow=int(np.sum(d > hi)),
    )


def compare(a: DistributionSummary, b: DistributionSummary) -> dict:
    """Paired KS distances and variances, with which summary sits closer to N(0, 1)."""
    if a.ks < b.ks:
        verdict = "a-closer"
    elif b.ks < a.ks:
        verdict = "b-closer"
    else:
        verdict = "tie"
    return {
        "ks_a": a.ks,
        "ks_b": b.ks,
        "variance_a": a.variance,
        "variance_b": b.variance,
        "variance_ratio": a.variance / b.variance if b.variance > 0 else None,
        "verdict": verdict,
    }


def write_histogram_csv(summary: DistributionSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "count"])
        w.writerow(["-inf", repr(float(summary.bin_edges[0])), summary.underflow])
        for left, right, c in zip(summary.bin_edges[:-1], summary.bin_edges[1:], summary.histogram):
            w.writerow([repr(float(left)), repr(float(right)), int(c)])
        w.writerow([repr(float(summary.bin_edges[-1])), "inf", summary.overflow])
