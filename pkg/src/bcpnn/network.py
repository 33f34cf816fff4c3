"""Layer layout, probability traces and the feed-forward BCPNN projection.

Activities are plain float64 arrays over the flattened units of a layer,
ordered hypercolumn-major: unit ``hc * mc_per_hc + mc``.  A leading batch
axis is allowed for anything read-only (support, inference).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NumericDomainError

EPS_PROB = 1e-8


@dataclass(frozen=True)
class LayerSpec:
    """A layer of ``n_hc`` hypercolumns with ``mc_per_hc`` minicolumns each."""

    n_hc: int
    mc_per_hc: int

    def __post_init__(self):
        if self.n_hc < 1:
            raise ConfigError(f"n_hc must be >= 1, got {self.n_hc}")
        if self.mc_per_hc < 2:
            raise ConfigError(f"mc_per_hc must be >= 2, got {self.mc_per_hc}")

    @property
    def n_units(self):
        return self.n_hc * self.mc_per_hc

    @property
    def shape(self):
        return (self.n_hc, self.mc_per_hc)

    def grouped(self, values):
        """View ``(..., n_units)`` as ``(..., n_hc, mc_per_hc)``."""
        values = np.asarray(values)
        if values.shape[-1] != self.n_units:
            raise DimensionError(
                f"expected {self.n_units} units ({self.n_hc}x{self.mc_per_hc}), "
                f"got trailing dimension {values.shape[-1]}"
            )
        return values.reshape(values.shape[:-1] + self.shape)

    def uniform(self):
        return np.full(self.n_units, 1.0 / self.mc_per_hc)


def softmax_normalize(support, layer, gamma=1.0):
    """Per-hypercolumn softmax of ``gamma * support``."""
    h = layer.grouped(np.asarray(support, dtype=np.float64))
    finite = np.isfinite(h)
    if not finite.all():
        bad = np.argwhere(~finite.all(axis=-1))[0]
        raise NumericDomainError(
            f"non-finite support in hypercolumn {int(bad[-1])}", hc=int(bad[-1])
        )
    z = gamma * h
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    e /= e.sum(axis=-1, keepdims=True)
    return e.reshape(h.shape[:-2] + (layer.n_units,))


def check_stability(dt, tau, gain=1.0, name="tau_p"):
    """Reject forward-Euler steps that would overshoot the fixed point."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if tau <= 0:
        raise ConfigError(f"{name} must be positive, got {tau}")
    if gain * dt / tau > 1.0:
        raise ConfigError(
            f"unstable integration: gain*dt/{name} = {gain * dt / tau:g} > 1"
        )


@dataclass(eq=False)
class ProbabilityTraces:
    """Exponentially averaged unary and pairwise activation probabilities.

    ``p_joint[s, t]`` pairs source unit ``s`` with target unit ``t``; the
    block for source HC ``i`` and target HC ``j`` is returned by
    :meth:`joint_block`.
    """

    p_src: np.ndarray
    p_tgt: np.ndarray
    p_joint: np.ndarray
    tau_p: float
    k_p: float = 1.0
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        self.p_src = np.asarray(self.p_src, dtype=np.float64)
        self.p_tgt = np.asarray(self.p_tgt, dtype=np.float64)
        self.p_joint = np.asarray(self.p_joint, dtype=np.float64)
        expected = (self.p_src.size, self.p_tgt.size)
        if self.p_joint.shape != expected:
            raise DimensionError(
                f"p_joint shape {self.p_joint.shape} does not match {expected}"
            )

    @classmethod
    def initial(cls, src, tgt, tau_p, k_p=1.0, rng=None, noise=0.0):
        """Independent traces; uniform source, optionally jittered target.

        With ``noise > 0`` every target marginal is scaled by ``1 + eta``,
        ``eta ~ U(-noise, noise)``, and renormalized per HC.  The joint is
        the outer product, so marginal consistency holds from the start.
        """
        p_src = src.uniform()
        p_tgt = tgt.uniform()
        if noise:
            if rng is None:
                raise ValueError("noisy initialization needs an rng")
            eta = rng.uniform(-noise, noise, size=tgt.n_units)
            g = tgt.grouped(p_tgt * (1.0 + eta))
            p_tgt = (g / g.sum(axis=-1, keepdims=True)).reshape(-1)
        return cls(p_src, p_tgt, np.outer(p_src, p_tgt), tau_p, k_p)

    def joint_block(self, i, j, src, tgt):
        ms, mt = src.mc_per_hc, tgt.mc_per_hc
        return self.p_joint[i * ms:(i + 1) * ms, j * mt:(j + 1) * mt]

    def copy(self):
        return ProbabilityTraces(self.p_src.copy(), self.p_tgt.copy(),
                                 self.p_joint.copy(), self.tau_p, self.k_p)


def update_traces(traces, src_act, tgt_act, dt):
    """One forward-Euler step of the three trace ODEs, in place.

    ``p <- p + (k_p dt / tau_p) (pi - p)`` for both unary traces, and the
    same with ``pi_src pi_tgt`` for the joint.  Stability is validated when
    the configuration is built, not here.
    """
    if traces.k_p == 0:
        return traces
    rate = traces.k_p * dt / traces.tau_p
    src_act = np.asarray(src_act, dtype=np.float64)
    tgt_act = np.asarray(tgt_act, dtype=np.float64)
    if src_act.shape != traces.p_src.shape or tgt_act.shape != traces.p_tgt.shape:
        raise DimensionError(
            f"activities {src_act.shape}/{tgt_act.shape} do not match traces "
            f"{traces.p_src.shape}/{traces.p_tgt.shape}"
        )
    traces.p_src += rate * (src_act - traces.p_src)
    traces.p_tgt += rate * (tgt_act - traces.p_tgt)
    delta = np.outer(src_act, tgt_act)
    delta -= traces.p_joint
    delta *= rate
    traces.p_joint += delta
    traces.version += 1
    return traces


def sync_parameters(traces, k_w, k_beta, eps=EPS_PROB):
    """Weights and biases as instantaneous functions of the traces.

    ``w = k_w log(p_joint / (p_src p_tgt))`` and ``beta = k_beta log p_tgt``,
    with every probability floored at ``eps`` inside the logarithm.
    """
    log_src = np.log(np.maximum(traces.p_src, eps))
    log_tgt = np.log(np.maximum(traces.p_tgt, eps))
    weights = np.log(np.maximum(traces.p_joint, eps))
    weights -= log_src[:, None]
    weights -= log_tgt[None, :]
    if k_w != 1:
        weights *= k_w
    bias = np.asarray(k_beta, dtype=np.float64) * log_tgt
    return weights, bias


class Projection:
    """Feed-forward connection from ``src`` to ``tgt`` with its traces.

    ``mask[i, j]`` gates whether source HC ``i`` contributes support to
    target HC ``j``.  Traces are kept for every pair regardless of the mask.
    ``bias_gain`` may be an array shared with a bias regulator; it is read
    on every call and never cached.
    """

    def __init__(self, src, tgt, traces, mask=None, k_w=1.0, bias_gain=None,
                 eps=EPS_PROB):
        self.src = src
        self.tgt = tgt
        self.traces = traces
        if traces.p_joint.shape != (src.n_units, tgt.n_units):
            raise DimensionError(
                f"traces {traces.p_joint.shape} do not fit layers "
                f"{src.n_units}x{tgt.n_units}"
            )
        if mask is None:
            mask = np.ones((src.n_hc, tgt.n_hc), dtype=bool)
        self.mask = np.asarray(mask, dtype=bool)
        if self.mask.shape != (src.n_hc, tgt.n_hc):
            raise DimensionError(
                f"mask shape {self.mask.shape} != {(src.n_hc, tgt.n_hc)}"
            )
        self.k_w = float(k_w)
        if bias_gain is None:
            bias_gain = np.ones(tgt.n_units)
        self.bias_gain = bias_gain
        self.eps = eps
        self._cache_version = None
        self._weights = None

    @property
    def in_degree(self):
        return self.mask.sum(axis=0)

    @property
    def weights(self):
        if self._cache_version != self.traces.version or self._weights is None:
            self._weights, _ = sync_parameters(self.traces, self.k_w, 0.0, self.eps)
            self._cache_version = self.traces.version
        return self._weights

    @property
    def bias(self):
        log_tgt = np.log(np.maximum(self.traces.p_tgt, self.eps))
        return np.asarray(self.bias_gain, dtype=np.float64) * log_tgt

    def invalidate(self):
        self._cache_version = None

    def masked_weights(self):
        w = self.weights
        if self.mask.all():
            return w
        s, t = self.src, self.tgt
        gated = w.reshape(s.n_hc, s.mc_per_hc, t.n_hc, t.mc_per_hc) \
            * self.mask[:, None, :, None]
        return gated.reshape(w.shape)


def compute_support(src_activity, proj, include_bias=True):
    """Total input ``beta + sum over active source HCs of act * w``."""
    src_activity = np.asarray(src_activity, dtype=np.float64)
    if src_activity.shape[-1] != proj.src.n_units:
        raise DimensionError(
            f"source activity has {src_activity.shape[-1]} units, projection "
            f"expects {proj.src.n_units}"
        )
    h = src_activity @ proj.masked_weights()
    if include_bias:
        h = h + proj.bias
    return h


def infer(src_activity, proj, gamma=1.0):
    """Posterior activity of the target layer given a source activity."""
    return softmax_normalize(compute_support(src_activity, proj), proj.tgt, gamma)
