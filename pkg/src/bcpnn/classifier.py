"""Error-driven read-out with paired Go (k_w=+1) and No-Go (k_w=-1) projections."""

from enum import Enum

import numpy as np

from .errors import DataError
from .network import (
    EPS_PROB,
    LayerSpec,
    ProbabilityTraces,
    Projection,
    compute_support,
    softmax_normalize,
    update_traces,
)


class Mode(str, Enum):
    GO = "go"
    NOGO = "nogo"
    GO_NOGO = "go_nogo"

    @property
    def trains_go(self):
        return self in (Mode.GO, Mode.GO_NOGO)

    @property
    def trains_nogo(self):
        return self in (Mode.NOGO, Mode.GO_NOGO)


class GoNoGoClassifier:
    """Read-out from a (frozen) source layer onto one label hypercolumn.

    Both projections are fully connected.  Prediction sums the weight
    contributions of Go and No-Go but takes the bias from Go only: the
    No-Go bias gain is pinned to zero so the label prior enters once.
    """

    def __init__(self, src, n_classes=10, tau_p=1.0, mode=Mode.GO_NOGO,
                 gamma=1.0, eps=EPS_PROB, go_traces=None, nogo_traces=None):
        self.src = src
        self.out = LayerSpec(1, n_classes)
        self.mode = Mode(mode)
        self.gamma = gamma
        if go_traces is None:
            go_traces = ProbabilityTraces.initial(src, self.out, tau_p)
        if nogo_traces is None:
            nogo_traces = ProbabilityTraces.initial(src, self.out, tau_p)
        self.go = Projection(src, self.out, go_traces, k_w=+1.0,
                             bias_gain=np.ones(n_classes), eps=eps)
        self.nogo = Projection(src, self.out, nogo_traces, k_w=-1.0,
                               bias_gain=np.zeros(n_classes), eps=eps)
        self.updates = 0

    @property
    def n_classes(self):
        return self.out.mc_per_hc

    def support(self, src_activity):
        return compute_support(src_activity, self.go) \
            + compute_support(src_activity, self.nogo, include_bias=False)

    def posterior(self, src_activity):
        return softmax_normalize(self.support(src_activity), self.out, self.gamma)


def predict(src_activity, clf):
    """Label (lowest index on ties) and posterior for one or many samples."""
    post = clf.posterior(src_activity)
    return np.argmax(post, axis=-1), post


def train_step(src_activity, true_label, clf, dt):
    """Present one sample; learn only if it is misclassified.

    Go moves toward the true label, No-Go toward the wrongly predicted one,
    as the mode allows.  Returns the label predicted before any update.
    """
    if not 0 <= true_label < clf.n_classes:
        raise DataError(f"label {true_label} outside [0, {clf.n_classes - 1}]")
    label, _ = predict(src_activity, clf)
    label = int(label)
    if label == true_label:
        return label
    if clf.mode.trains_go:
        update_traces(clf.go.traces, src_activity,
                      _one_hot(true_label, clf.n_classes), dt)
        clf.updates += 1
    if clf.mode.trains_nogo:
        update_traces(clf.nogo.traces, src_activity,
                      _one_hot(label, clf.n_classes), dt)
        clf.updates += 1
    return label


def _one_hot(index, n):
    v = np.zeros(n)
    v[index] = 1.0
    return v
