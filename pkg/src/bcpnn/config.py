"""Training hyperparameters, flat ``key = value`` config files and validation."""

import dataclasses
import math
from dataclasses import dataclass, fields

from .classifier import Mode
from .errors import ConfigError
from .network import check_stability

# Values fixed by the published parameter table; anything else differing
# from them is reported as a deviation in the run header.
PUBLISHED_DEFAULTS = {
    "dt": 0.01,
    "gamma": 1.0,
    "k_half": -100.0,
    "tau_p_mult": 0.5,
    "tau_k_mult": 0.1,
    "p_mask": 0.1,
    "n_train": 50000,
    "n_val": 10000,
    "n_epochs_unsup": 5,
    "n_epochs_sup": 25,
}


@dataclass(frozen=True)
class TrainConfig:
    dt: float = 0.01
    gamma: float = 1.0
    k_half: float = -100.0
    tau_p_mult: float = 0.5
    tau_k_mult: float = 0.1
    p_mask: float = 0.1
    n_train: int = 50000
    n_val: int = 10000
    n_epochs_unsup: int = 5
    n_epochs_sup: int = 25
    hidden_hcs: int = 30
    hidden_mcs: int = 100
    n_flips: int = 16
    flip_interval: int = 100
    eps_prob: float = 1e-8
    seed: int = 0
    classifier_mode: str = "go_nogo"

    # time constants scale with the length of the phase they average over
    @property
    def tau_p(self):
        return self.tau_p_mult * self.n_train * max(self.n_epochs_unsup, 1) * self.dt

    @property
    def tau_k(self):
        return self.tau_k_mult * self.n_train * max(self.n_epochs_unsup, 1) * self.dt

    @property
    def tau_p_sup(self):
        return self.tau_p_mult * self.n_train * max(self.n_epochs_sup, 1) * self.dt

    @property
    def mode(self):
        return Mode(self.classifier_mode)

    def validate(self):
        if not 0 <= self.gamma < math.inf:
            raise ConfigError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not self.k_half < 1:
            raise ConfigError(f"k_half must be < 1, got {self.k_half}")
        if not 0 < self.p_mask <= 1:
            raise ConfigError(f"p_mask must be in (0, 1], got {self.p_mask}")
        if not self.eps_prob > 0:
            raise ConfigError(f"eps_prob must be positive, got {self.eps_prob}")
        for name in ("n_train", "hidden_hcs", "flip_interval"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("n_val", "n_epochs_unsup", "n_epochs_sup", "n_flips"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.hidden_mcs < 2:
            raise ConfigError("hidden_mcs must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        try:
            Mode(self.classifier_mode)
        except ValueError:
            raise ConfigError(
                f"classifier_mode must be one of go, nogo, go_nogo; "
                f"got {self.classifier_mode!r}"
            ) from None
        check_stability(self.dt, self.tau_p, 1.0, "tau_p")
        check_stability(self.dt, self.tau_k, 1.0, "tau_k")
        check_stability(self.dt, self.tau_p_sup, 1.0, "tau_p (supervised)")
        return self

    def deviations(self):
        return {k: getattr(self, k) for k, v in PUBLISHED_DEFAULTS.items()
                if getattr(self, k) != v}

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        return "".join(f"{f.name} = {getattr(self, f.name)!r}\n" for f in fields(self))

    def header_lines(self):
        lines = [f"# {f.name} = {getattr(self, f.name)!r}" for f in fields(self)]
        for key, value in self.deviations().items():
            lines.append(f"# DEVIATION {key} = {value!r} (table value {PUBLISHED_DEFAULTS[key]!r})")
        return lines


_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _convert(key, raw):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        raw = raw[1:-1]
    try:
        if kind in (int, "int"):
            value = float(raw) if any(c in raw for c in ".eE") else int(raw, 0)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_overrides(pairs):
    """``["k=v", ...]`` or ``{"k": "v"}`` into typed field values."""
    items = pairs.items() if isinstance(pairs, dict) else (
        _split_pair(p) for p in pairs)
    out = {}
    for key, raw in items:
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _convert(key, str(raw))
    return out


def _split_pair(pair):
    if "=" not in pair:
        raise ConfigError(f"expected key=value, got {pair!r}")
    key, raw = pair.split("=", 1)
    return key, raw


def parse_config_text(text, base=None):
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        pairs[key.strip()] = raw
    base = base or TrainConfig()
    return base.replace(**parse_overrides(pairs))


def load_config(path=None, overrides=(), seed=None, base=None):
    config = base or TrainConfig()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                config = parse_config_text(f.read(), config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    if overrides:
        config = config.replace(**parse_overrides(overrides))
    if seed is not None:
        config = config.replace(seed=int(seed))
    return config.validate()
