"""Seeded end-to-end training: unsupervised representation, then read-out.

Random streams.  Everything derives from ``config.seed`` through numpy's
PCG64 generator seeded with ``SeedSequence([seed, stream])``:

* stream 0 (data): the train/validation permutation of :func:`split`;
* stream 1 (model): target-trace jitter, then the mask draw, then one
  integer per empty hidden HC, then one permutation per epoch (all
  unsupervised epochs first, then the supervised ones);
* stream 2 (views): which HCs/MCs :mod:`receptive_fields` renders.

The model stream lives in the model and is checkpointed with it.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classifier import GoNoGoClassifier, train_step
from .errors import ConfigError, NumericDomainError
from .metrics import MetricsRecord, SupEpoch, UnsupEpoch, conditional_entropy, marginal_entropy
from .mnist import encode_sample, input_layer, split
from .network import LayerSpec, ProbabilityTraces, Projection, infer, update_traces
from .plasticity import (
    BiasRegulator,
    StructuralState,
    flip_connections,
    init_mask,
    mutual_information,
    update_bias_gain,
)

log = logging.getLogger(__name__)

DATA_STREAM, MODEL_STREAM, VIEW_STREAM = 0, 1, 2
INIT_NOISE = 0.01
EVAL_CHUNK = 1000

# keys that may differ between a checkpointed model and the config that resumes it
_SCHEDULE_KEYS = {"n_epochs_unsup", "n_epochs_sup", "classifier_mode", "n_val"}


def stream(seed, which):
    return np.random.default_rng([int(seed), which])


def split_for(config, dataset):
    return split(dataset, config.n_train, config.n_val, stream(config.seed, DATA_STREAM))


@dataclass(eq=False)
class Model:
    config: object
    input_layer: LayerSpec
    hidden_layer: LayerSpec
    projection: Projection
    regulator: BiasRegulator
    structure: StructuralState
    initial_mask: np.ndarray
    rng: np.random.Generator
    unsup_epochs: int = 0
    samples_seen: int = 0
    classifier: GoNoGoClassifier = None
    sup_epochs: int = 0

    def freeze(self):
        self.projection.traces.k_p = 0.0

    def hidden_activity(self, images, threads=1):
        """Frozen hidden posteriors for a batch of images, in fixed chunks."""
        chunks = [images[i:i + EVAL_CHUNK] for i in range(0, len(images), EVAL_CHUNK)]
        if not chunks:
            return np.empty((0, self.hidden_layer.n_units))
        proj, gamma = self.projection, self.config.gamma
        proj.weights  # sync once before any fan-out

        def run(chunk):
            return infer(encode_sample(chunk), proj, gamma)

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(run, chunks))
        else:
            parts = [run(c) for c in chunks]
        return np.concatenate(parts)


def build_model(config, n_pixels=784):
    rng = stream(config.seed, MODEL_STREAM)
    inp = input_layer(n_pixels)
    hid = LayerSpec(config.hidden_hcs, config.hidden_mcs)
    traces = ProbabilityTraces.initial(inp, hid, config.tau_p, 1.0, rng, noise=INIT_NOISE)
    mask = init_mask(inp.n_hc, hid.n_hc, config.p_mask, rng)
    regulator = BiasRegulator.for_layer(hid, config.k_half, config.tau_k)
    # start the gains at their fixed point for the initial marginals
    regulator.k_beta[:] = regulator.target(traces.p_tgt)
    proj = Projection(inp, hid, traces, mask, k_w=1.0, bias_gain=regulator.k_beta,
                      eps=config.eps_prob)
    structure = StructuralState.from_mask(proj.mask, config.n_flips, config.flip_interval)
    return Model(config, inp, hid, proj, regulator, structure, mask.copy(), rng)


def check_resumable(config, model):
    for key, value in vars(config).items():
        if key not in _SCHEDULE_KEYS and getattr(model.config, key) != value:
            raise ConfigError(
                f"config key {key}={value!r} differs from the checkpointed "
                f"value {getattr(model.config, key)!r}"
            )


def run_unsupervised(config, dataset, model=None, max_epochs=None, on_rewire=None):
    """Unsupervised epochs over ``dataset`` until ``config.n_epochs_unsup``.

    Per sample: encode, infer the hidden posterior, step the traces, step
    the bias gains; every ``flip_interval`` samples recompute MI and rewire.
    ``max_epochs`` caps how many epochs this call runs (for interrupted
    runs); ``on_rewire(mask_before, mi, flips, mask_after)`` observes every
    rewiring event.
    """
    if model is None:
        model = build_model(config, dataset.images.shape[1])
    else:
        check_resumable(config, model)
        model.config = config
    record = MetricsRecord()
    proj, traces = model.projection, model.projection.traces
    hid, structure = model.hidden_layer, model.structure
    dt, gamma = config.dt, config.gamma
    images = dataset.images
    target = config.n_epochs_unsup
    if max_epochs is not None:
        target = min(target, model.unsup_epochs + max_epochs)

    while model.unsup_epochs < target:
        order = model.rng.permutation(len(dataset))
        cond = np.zeros(hid.n_hc)
        for idx in order:
            x = encode_sample(images[idx])
            try:
                post = infer(x, proj, gamma)
            except NumericDomainError as exc:
                raise NumericDomainError(f"sample {idx}: {exc}", hc=exc.hc,
                                         sample=int(idx)) from exc
            cond += conditional_entropy(post, hid)
            update_traces(traces, x, post, dt)
            update_bias_gain(model.regulator, traces.p_tgt, dt)
            model.samples_seen += 1
            if structure.n_flips and model.samples_seen % structure.flip_interval == 0:
                mi = mutual_information(proj)
                before = structure.mask.copy() if on_rewire else None
                flips = flip_connections(structure, mi)
                record.flips += flips
                if on_rewire:
                    on_rewire(before, mi, flips, structure.mask.copy())
        model.unsup_epochs += 1
        epoch = UnsupEpoch(model.unsup_epochs, marginal_entropy(traces.p_tgt, hid),
                           float(cond.mean() / max(len(dataset), 1)))
        record.unsup.append(epoch)
        log.info("unsup epoch %d: mean H(Z)=%.4f mean H(Z|x)=%.4f flips=%d",
                 epoch.epoch, epoch.marginal_entropy.mean(),
                 epoch.mean_conditional_entropy, len(record.flips))
    return model, record


def accuracy(clf, features, labels):
    if len(labels) == 0:
        return float("nan")
    pred = np.argmax(clf.support(features), axis=-1)
    return float(np.mean(pred == labels))


def train_classifier(clf, features, labels, n_epochs, dt, rng, val=None,
                     start_epoch=0):
    """Error-gated epochs of :func:`train_step`; returns per-epoch metrics."""
    epochs = []
    for epoch in range(start_epoch, n_epochs):
        before = clf.updates
        errors = 0
        for idx in rng.permutation(len(labels)):
            label = int(labels[idx])
            if train_step(features[idx], label, clf, dt) != label:
                errors += 1
        val_acc = accuracy(clf, *val) if val is not None else float("nan")
        epochs.append(SupEpoch(epoch + 1, errors, clf.updates - before, val_acc))
        log.info("sup epoch %d: %d errors, val acc %.4f", epoch + 1, errors, val_acc)
    return epochs


def run_supervised(config, model, dataset, val=None, max_epochs=None, threads=1):
    """Freeze the representation and train the Go/No-Go read-out on it."""
    check_resumable(config, model)
    model.config = config
    model.freeze()
    if model.classifier is None:
        model.classifier = GoNoGoClassifier(
            model.hidden_layer, 10, config.tau_p_sup, config.mode,
            gamma=config.gamma, eps=config.eps_prob)
    clf = model.classifier
    clf.mode = config.mode
    hidden = model.hidden_activity(dataset.images, threads)
    val_pair = None
    if val is not None and len(val):
        val_pair = (model.hidden_activity(val.images, threads), val.labels)
    target = config.n_epochs_sup
    if max_epochs is not None:
        target = min(target, model.sup_epochs + max_epochs)
    record = MetricsRecord()
    record.sup = train_classifier(clf, hidden, dataset.labels, target, config.dt,
                                  model.rng, val_pair, start_epoch=model.sup_epochs)
    model.sup_epochs = max(model.sup_epochs, target)
    return clf, record


def pixel_classifier(config, dataset, val=None, rng=None):
    """Go/No-Go read-out straight from the encoded pixels (no hidden layer)."""
    inp = input_layer(dataset.images.shape[1])
    clf = GoNoGoClassifier(inp, 10, config.tau_p_sup, config.mode,
                           gamma=config.gamma, eps=config.eps_prob)
    if rng is None:
        rng = stream(config.seed, MODEL_STREAM)
    val_pair = None
    if val is not None:
        val_pair = (encode_sample(val.images), val.labels)
    epochs = train_classifier(clf, encode_sample(dataset.images), dataset.labels,
                              config.n_epochs_sup, config.dt, rng, val_pair)
    return clf, epochs


@dataclass
class Evaluation:
    accuracy: float
    predictions: np.ndarray
    marginal_entropy: np.ndarray
    conditional_entropy: np.ndarray


def evaluate(model, dataset, threads=1):
    """Accuracy and entropy diagnostics with all learning disabled."""
    hidden = model.hidden_activity(dataset.images, threads)
    if model.classifier is not None and len(dataset):
        pred = np.argmax(model.classifier.support(hidden), axis=-1)
        acc = float(np.mean(pred == dataset.labels))
    else:
        pred = np.zeros(len(dataset), dtype=np.int64)
        acc = float(np.mean(dataset.labels == 0)) if len(dataset) else float("nan")
    return Evaluation(acc, pred,
                      marginal_entropy(model.projection.traces.p_tgt, model.hidden_layer),
                      conditional_entropy(hidden, model.hidden_layer))
