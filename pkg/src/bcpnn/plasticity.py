"""Bias-gain homeostasis and structural rewiring of the input mask."""

from dataclasses import dataclass

import numpy as np

from .network import sync_parameters


def gain_floor(k_half):
    """Lower clamp for the bias gain (never above ``k_half`` itself)."""
    return min(4.0 * k_half, k_half)


def bias_gain_target(p, k_half, p_maxent, eps_den=None):
    """Target bias gain for a minicolumn with marginal ``p``.

    ``g(p) = 1 + (k_half - 1) q^2 / (p - q)^2`` with ``q = p_maxent / 4``,
    evaluated as ``(1 - r) + r k_half`` so that ``g(p_maxent / 2)`` is
    ``k_half`` bit for bit.  The pole at ``p = q`` is guarded by ``eps_den``
    (default ``p_maxent / 100``) and the result is clamped to
    ``[gain_floor(k_half), 1]``.
    """
    if eps_den is None:
        eps_den = p_maxent / 100.0
    q = p_maxent / 4.0
    p = np.asarray(p, dtype=np.float64)
    r = (q * q) / np.maximum((p - q) ** 2, eps_den * eps_den)
    g = (1.0 - r) + r * k_half
    return np.clip(g, gain_floor(k_half), 1.0)


@dataclass(eq=False)
class BiasRegulator:
    """Per-minicolumn bias gains relaxing toward :func:`bias_gain_target`."""

    k_beta: np.ndarray
    k_half: float
    tau_k: float
    p_maxent: float

    @classmethod
    def for_layer(cls, layer, k_half, tau_k, k_beta=None):
        if k_beta is None:
            k_beta = np.ones(layer.n_units)
        return cls(np.asarray(k_beta, dtype=np.float64), float(k_half),
                   float(tau_k), 1.0 / layer.mc_per_hc)

    @property
    def eps_den(self):
        return self.p_maxent / 100.0

    @property
    def g_floor(self):
        return gain_floor(self.k_half)

    def target(self, p):
        return bias_gain_target(p, self.k_half, self.p_maxent, self.eps_den)


def update_bias_gain(reg, p_tgt, dt):
    """``k <- k + (dt / tau_k)(g(p) - k)``, clamped; updates ``reg.k_beta`` in place."""
    rate = dt / reg.tau_k
    k = reg.k_beta
    k += rate * (reg.target(p_tgt) - k)
    np.clip(k, reg.g_floor, 1.0, out=k)
    return k


@dataclass(eq=False)
class StructuralState:
    """Input-to-hidden connectivity mask with fixed per-target in-degree.

    ``mask`` is normally the very array owned by the projection, so flips
    take effect on the next inference without copying.
    """

    mask: np.ndarray
    in_degree: np.ndarray
    n_flips: int = 16
    flip_interval: int = 100
    events: int = 0

    @classmethod
    def from_mask(cls, mask, n_flips=16, flip_interval=100):
        return cls(mask, mask.sum(axis=0), n_flips, flip_interval)


def init_mask(n_src_hc, n_tgt_hc, p_mask, rng):
    """Bernoulli(p_mask) connectivity; empty targets get one random source.

    Draw order: one ``(n_src_hc, n_tgt_hc)`` block of uniforms, then one
    integer per empty target HC in increasing HC order.
    """
    mask = rng.random((n_src_hc, n_tgt_hc)) < p_mask
    for j in np.flatnonzero(~mask.any(axis=0)):
        mask[rng.integers(n_src_hc), j] = True
    return mask


def mutual_information(proj):
    """MI between every (source HC, target HC) pair from traces and weights.

    ``I[i, j] = sum_ab p_joint[ia, jb] w[ia, jb]`` with unit weight gain,
    for silent pairs as well as active ones.
    """
    if proj.k_w == 1.0:
        w = proj.weights
    else:
        w, _ = sync_parameters(proj.traces, 1.0, 0.0, proj.eps)
    s, t = proj.src, proj.tgt
    terms = proj.traces.p_joint * w
    return terms.reshape(s.n_hc, s.mc_per_hc, t.n_hc, t.mc_per_hc).sum(axis=(1, 3))


def normalized_mi(mi, mask):
    """Divide each source row by ``1 +`` its number of active outgoing connections."""
    return mi / (1.0 + mask.sum(axis=1))[:, None]


@dataclass(frozen=True)
class FlipRecord:
    event: int
    hidden_hc: int
    removed: int
    added: int
    ihat_removed: float
    ihat_added: float

    CSV_HEADER = "event,hidden_hc,removed,added,ihat_removed,ihat_added"

    def csv(self):
        return (f"{self.event},{self.hidden_hc},{self.removed},{self.added},"
                f"{self.ihat_removed!r},{self.ihat_added!r}")


def flip_connections(state, mi):
    """Greedy receptive-field swaps for every target HC, mutating ``state.mask``.

    ``mi`` is the raw mutual-information matrix; the normalization by
    outgoing counts is recomputed after each flip since a flip changes the
    denominators of the two source rows involved.  Per target HC, at most
    ``state.n_flips`` swaps are made and the loop stops at the first
    non-improving candidate.  Returns the list of executed flips.
    """
    mask = state.mask
    n_src, n_tgt = mask.shape
    out_degree = mask.sum(axis=1).astype(np.float64)
    log = []
    for j in range(n_tgt):
        for _ in range(state.n_flips):
            active = mask[:, j]
            if active.all() or not active.any():
                break
            ihat = mi[:, j] / (1.0 + out_degree)
            worst = int(np.argmin(np.where(active, ihat, np.inf)))
            best = int(np.argmax(np.where(active, -np.inf, ihat)))
            if not ihat[best] > ihat[worst]:
                break
            mask[worst, j] = False
            mask[best, j] = True
            out_degree[worst] -= 1
            out_degree[best] += 1
            log.append(FlipRecord(state.events, j, worst, best,
                                  float(ihat[worst]), float(ihat[best])))
    state.events += 1
    return log
