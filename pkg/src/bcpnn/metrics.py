"""Entropy diagnostics and the plain-CSV metrics stream."""

import os
from dataclasses import dataclass, field

import numpy as np

from .plasticity import FlipRecord


def hc_entropy(probs, layer):
    """``-sum p log p`` per hypercolumn (nats), ``0 log 0 = 0``."""
    p = layer.grouped(np.asarray(probs, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return np.maximum(-terms.sum(axis=-1), 0.0)


def marginal_entropy(p_tgt, layer):
    return hc_entropy(p_tgt, layer)


def conditional_entropy(posteriors, layer):
    """Entropy of each sample's posterior per HC, shape ``(n_samples, n_hc)``."""
    return hc_entropy(posteriors, layer)


def histogram(values, upper, n_bins=20):
    counts, edges = np.histogram(np.ravel(values), bins=n_bins, range=(0.0, upper))
    return counts, edges


def histogram_csv(values, upper, n_bins=20):
    counts, edges = histogram(values, upper, n_bins)
    rows = ["bin_lo,bin_hi,count"]
    rows += [f"{lo!r},{hi!r},{c}" for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    return "\n".join(rows) + "\n"


@dataclass
class UnsupEpoch:
    epoch: int
    marginal_entropy: np.ndarray
    mean_conditional_entropy: float


@dataclass
class SupEpoch:
    epoch: int
    errors: int
    updates: int
    val_accuracy: float


@dataclass
class MetricsRecord:
    unsup: list = field(default_factory=list)
    sup: list = field(default_factory=list)
    flips: list = field(default_factory=list)

    def extend(self, other):
        self.unsup += other.unsup
        self.sup += other.sup
        self.flips += other.flips
        return self

    def unsup_csv_rows(self):
        for e in self.unsup:
            yield (f"{e.epoch},{float(e.marginal_entropy.mean())!r},"
                   f"{e.mean_conditional_entropy!r}")

    def marginal_csv_rows(self):
        for e in self.unsup:
            for j, h in enumerate(e.marginal_entropy):
                yield f"{e.epoch},{j},{float(h)!r}"

    def sup_csv_rows(self):
        for e in self.sup:
            yield f"{e.epoch},{e.errors},{e.updates},{e.val_accuracy!r}"

    def flip_csv_rows(self):
        for r in self.flips:
            yield r.csv()


CSV_FILES = {
    "unsup_epochs.csv": ("epoch,mean_marginal_entropy,mean_conditional_entropy",
                         "unsup_csv_rows"),
    "marginal_entropy.csv": ("epoch,hc,marginal_entropy", "marginal_csv_rows"),
    "sup_epochs.csv": ("epoch,errors,updates,val_accuracy", "sup_csv_rows"),
    "flips.csv": (FlipRecord.CSV_HEADER, "flip_csv_rows"),
}


def write_metrics(record, out_dir, append=False, only=None):
    """Write (or append to) the CSV files of ``record`` under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, (header, rows_attr) in CSV_FILES.items():
        if only is not None and name not in only:
            continue
        path = os.path.join(out_dir, name)
        fresh = not (append and os.path.exists(path))
        with open(path, "w" if fresh else "a", encoding="utf-8", newline="\n") as f:
            if fresh:
                f.write(header + "\n")
            for row in getattr(record, rows_attr)():
                f.write(row + "\n")
        written.append(path)
    return written
