"""Binary checkpoint of the complete training state.

Layout (little-endian throughout)::

    b"BCPN"            magic
    u32                format version
    u32 x 12           flags, input n_hc, input mc, hidden n_hc, hidden mc,
                       n_classes, unsup epochs, sup epochs, samples seen,
                       flip events, classifier updates, classifier mode
    f64 x 6            tau_p, k_p, k_half, tau_k, tau_p (read-out), gamma
    f64 arrays         p_src, p_tgt, p_joint, k_beta
    u32 array          in_degree (hidden n_hc entries)
    packed bits        current mask, initial mask (np.packbits, little bit order)
    [classifier]       go p_src, p_tgt, p_joint, nogo p_src, p_tgt, p_joint
    RNG                PCG64 state (16 B), increment (16 B), has_uint32 u32,
                       uinteger u32
    u32 + bytes        config echo, UTF-8 ``key = value`` lines

Nothing is constructed until the whole file has been parsed and checked.
"""

import struct

import numpy as np

from .classifier import GoNoGoClassifier, Mode
from .config import TrainConfig, parse_config_text
from .errors import CheckpointError, DimensionError
from .network import LayerSpec, ProbabilityTraces, Projection
from .plasticity import BiasRegulator, StructuralState
from .training import Model

MAGIC = b"BCPN"
VERSION = 1
HAS_CLASSIFIER = 1
_MODES = [Mode.GO, Mode.NOGO, Mode.GO_NOGO]


class _Writer:
    def __init__(self):
        self.parts = []

    def u32(self, *values):
        self.parts.append(struct.pack("<" + "I" * len(values), *values))

    def f64(self, *values):
        self.parts.append(struct.pack("<" + "d" * len(values), *values))

    def array(self, a, dtype="<f8"):
        self.parts.append(np.ascontiguousarray(a, dtype=dtype).tobytes())

    def bits(self, mask):
        self.parts.append(np.packbits(mask.astype(bool).ravel(), bitorder="little").tobytes())

    def u128(self, value):
        self.parts.append(int(value).to_bytes(16, "little"))

    def text(self, s):
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self.parts.append(raw)

    def getvalue(self):
        return b"".join(self.parts)


class _Reader:
    def __init__(self, raw):
        self.raw = raw
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.raw):
            raise CheckpointError(
                f"truncated checkpoint: need {n} bytes at offset {self.pos}, "
                f"file has {len(self.raw)}"
            )
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, n=1):
        values = struct.unpack("<" + "I" * n, self.take(4 * n))
        return values if n > 1 else values[0]

    def f64(self, n=1):
        values = struct.unpack("<" + "d" * n, self.take(8 * n))
        return values if n > 1 else values[0]

    def array(self, count, dtype="<f8"):
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(count * dt.itemsize), dtype=dt).astype(dt.newbyteorder("="))

    def bits(self, shape):
        n = int(np.prod(shape))
        packed = np.frombuffer(self.take((n + 7) // 8), dtype=np.uint8)
        return np.unpackbits(packed, count=n, bitorder="little").astype(bool).reshape(shape)

    def u128(self):
        return int.from_bytes(self.take(16), "little")

    def text(self):
        return self.take(self.u32()).decode("utf-8")


def _traces(w, t):
    w.array(t.p_src)
    w.array(t.p_tgt)
    w.array(t.p_joint)


def dumps(model):
    cfg = model.config
    clf = model.classifier
    proj = model.projection
    w = _Writer()
    w.parts.append(MAGIC)
    w.u32(VERSION)
    w.u32(HAS_CLASSIFIER if clf is not None else 0,
          model.input_layer.n_hc, model.input_layer.mc_per_hc,
          model.hidden_layer.n_hc, model.hidden_layer.mc_per_hc,
          clf.n_classes if clf is not None else 10,
          model.unsup_epochs, model.sup_epochs, model.samples_seen,
          model.structure.events, clf.updates if clf is not None else 0,
          _MODES.index(clf.mode) if clf is not None else _MODES.index(cfg.mode))
    w.f64(proj.traces.tau_p, proj.traces.k_p, model.regulator.k_half,
          model.regulator.tau_k, clf.go.traces.tau_p if clf is not None else cfg.tau_p_sup,
          cfg.gamma)
    _traces(w, proj.traces)
    w.array(model.regulator.k_beta)
    w.array(model.structure.in_degree, "<u4")
    w.bits(proj.mask)
    w.bits(model.initial_mask)
    if clf is not None:
        _traces(w, clf.go.traces)
        _traces(w, clf.nogo.traces)
    state = model.rng.bit_generator.state
    if state["bit_generator"] != "PCG64":
        raise CheckpointError(f"unsupported generator {state['bit_generator']}")
    w.u128(state["state"]["state"])
    w.u128(state["state"]["inc"])
    w.u32(state["has_uint32"], state["uinteger"])
    w.text(cfg.to_text())
    return w.getvalue()


def save_checkpoint(model, path):
    data = dumps(model)
    with open(path, "wb") as f:
        f.write(data)
    return len(data)


def _read_traces(r, n_src, n_tgt, tau_p, k_p):
    p_src = r.array(n_src)
    p_tgt = r.array(n_tgt)
    p_joint = r.array(n_src * n_tgt).reshape(n_src, n_tgt)
    return ProbabilityTraces(p_src, p_tgt, p_joint, tau_p, k_p)


def loads(raw, expect=None):
    """Parse checkpoint bytes; ``expect`` is a config the model must fit."""
    r = _Reader(raw)
    if r.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"checkpoint format version {version}, expected {VERSION}")
    (flags, in_hc, in_mc, hid_hc, hid_mc, n_classes, unsup_epochs, sup_epochs,
     samples_seen, events, updates, mode_idx) = r.u32(12)
    if mode_idx >= len(_MODES):
        raise CheckpointError(f"unknown classifier mode index {mode_idx}")
    if expect is not None and (hid_hc, hid_mc) != (expect.hidden_hcs, expect.hidden_mcs):
        raise DimensionError(
            f"checkpoint hidden layer is {hid_hc}x{hid_mc}, config asks for "
            f"{expect.hidden_hcs}x{expect.hidden_mcs}"
        )
    tau_p, k_p, k_half, tau_k, tau_p_sup, gamma = r.f64(6)
    try:
        inp, hid = LayerSpec(in_hc, in_mc), LayerSpec(hid_hc, hid_mc)
    except ValueError as exc:
        raise CheckpointError(f"invalid layer dimensions: {exc}") from None
    traces = _read_traces(r, inp.n_units, hid.n_units, tau_p, k_p)
    k_beta = r.array(hid.n_units)
    in_degree = r.array(hid_hc, "<u4").astype(np.int64)
    mask = r.bits((in_hc, hid_hc))
    initial_mask = r.bits((in_hc, hid_hc))
    if not np.array_equal(mask.sum(axis=0), in_degree):
        raise CheckpointError("mask does not match the stored in-degree")
    clf_traces = None
    if flags & HAS_CLASSIFIER:
        out = LayerSpec(1, n_classes)
        clf_traces = (_read_traces(r, hid.n_units, out.n_units, tau_p_sup, 1.0),
                      _read_traces(r, hid.n_units, out.n_units, tau_p_sup, 1.0))
    rng_state, rng_inc = r.u128(), r.u128()
    has_uint32, uinteger = r.u32(2)
    try:
        config = parse_config_text(r.text(), TrainConfig())
    except (UnicodeDecodeError, ValueError) as exc:
        raise CheckpointError(f"bad config echo: {exc}") from None
    if r.pos != len(raw):
        raise CheckpointError(f"{len(raw) - r.pos} trailing bytes after offset {r.pos}")
    if (config.hidden_hcs, config.hidden_mcs) != (hid_hc, hid_mc):
        raise CheckpointError("config echo disagrees with stored dimensions")

    bit_gen = np.random.PCG64()
    bit_gen.state = {"bit_generator": "PCG64",
                     "state": {"state": rng_state, "inc": rng_inc},
                     "has_uint32": has_uint32, "uinteger": uinteger}
    regulator = BiasRegulator(k_beta, k_half, tau_k, 1.0 / hid_mc)
    proj = Projection(inp, hid, traces, mask, k_w=1.0, bias_gain=regulator.k_beta,
                      eps=config.eps_prob)
    structure = StructuralState(proj.mask, in_degree, config.n_flips,
                                config.flip_interval, events)
    model = Model(config, inp, hid, proj, regulator, structure, initial_mask,
                  np.random.Generator(bit_gen), unsup_epochs, samples_seen,
                  None, sup_epochs)
    if clf_traces is not None:
        clf = GoNoGoClassifier(hid, n_classes, tau_p_sup, _MODES[mode_idx], gamma,
                               config.eps_prob, *clf_traces)
        clf.updates = updates
        model.classifier = clf
    return model


def load_checkpoint(path, expect=None):
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    return loads(raw, expect)
