"""Brute-force references for tests: exact counts and naive-Bayes enumeration.

Nothing here touches the vectorized inference path; the posterior is
computed with plain Python loops over the sample list.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .network import EPS_PROB, LayerSpec, ProbabilityTraces


@dataclass(frozen=True)
class ToyDataset:
    """Weighted samples ``(source MC per HC, target MC, count)``."""

    src: LayerSpec
    n_target: int
    samples: tuple

    def __post_init__(self):
        if not self.samples:
            raise DataError("toy dataset is empty")
        for assignment, y, count in self.samples:
            if count <= 0:
                raise DataError(f"non-positive count {count}")
            if len(assignment) != self.src.n_hc:
                raise DataError(f"assignment {assignment} has wrong length")
            if any(not 0 <= a < self.src.mc_per_hc for a in assignment):
                raise DataError(f"assignment {assignment} out of range")
            if not 0 <= y < self.n_target:
                raise DataError(f"target {y} out of range")

    @property
    def tgt(self):
        return LayerSpec(1, self.n_target)

    @property
    def total(self):
        return sum(c for _, _, c in self.samples)

    def one_hot(self, assignment):
        v = np.zeros(self.src.n_units)
        for i, a in enumerate(assignment):
            v[i * self.src.mc_per_hc + a] = 1.0
        return v

    @classmethod
    def random(cls, rng, max_hc=3, max_mc=3, max_target=3, max_samples=12):
        n_hc = int(rng.integers(1, max_hc + 1))
        mc = int(rng.integers(2, max_mc + 1))
        n_target = int(rng.integers(2, max_target + 1))
        samples = []
        for _ in range(int(rng.integers(1, max_samples + 1))):
            assignment = tuple(int(a) for a in rng.integers(0, mc, size=n_hc))
            samples.append((assignment, int(rng.integers(n_target)),
                            int(rng.integers(1, 5))))
        return cls(LayerSpec(n_hc, mc), n_target, tuple(samples))


def exact_statistics(toy, tau_p=1.0):
    """Empirical relative frequencies as traces.

    Zero cells stay zero; flooring happens where logarithms are taken,
    which keeps marginal consistency exact.
    """
    src, tgt = toy.src, toy.tgt
    p_src = np.zeros(src.n_units)
    p_tgt = np.zeros(tgt.n_units)
    p_joint = np.zeros((src.n_units, tgt.n_units))
    total = toy.total
    for assignment, y, count in toy.samples:
        w = count / total
        x = toy.one_hot(assignment)
        p_src += w * x
        p_tgt[y] += w
        p_joint[:, y] += w * x
    return ProbabilityTraces(p_src, p_tgt, p_joint, tau_p, k_p=0.0)


def enumerate_posterior(toy, observation, eps=EPS_PROB):
    """``p(y | x) ∝ p(y) prod_i p(x_i, y) / (p(x_i) p(y))`` from raw counts."""
    if len(observation) != toy.src.n_hc:
        raise DataError("observation length does not match the source layer")
    total = toy.total
    count_y = [0] * toy.n_target
    count_x = [0] * toy.src.n_hc
    count_xy = [[0] * toy.n_target for _ in range(toy.src.n_hc)]
    for assignment, y, count in toy.samples:
        count_y[y] += count
        for i, a in enumerate(assignment):
            if a == observation[i]:
                count_x[i] += count
                count_xy[i][y] += count

    def floored(c):
        return max(c / total, eps)

    scores = []
    for y in range(toy.n_target):
        py = floored(count_y[y])
        log_score = math.log(py)
        for i in range(toy.src.n_hc):
            log_score += math.log(floored(count_xy[i][y])) \
                - math.log(floored(count_x[i])) - math.log(py)
        scores.append(log_score)
    top = max(scores)
    unnorm = [math.exp(s - top) for s in scores]
    z = math.fsum(unnorm)
    return np.array([u / z for u in unnorm])
