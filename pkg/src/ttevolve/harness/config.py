"""Experiment configuration loaded from YAML.

Example::

    model:
      type: ising          # or transmon
      n: 10
      J: 1.0
      g: 1.0
    integrator: tdvp2      # tdvp | tdvp2 | mps_bug | tucker_bug | dense_imr | dense_expm
    T: 10.0
    steps: 100
    eps: 0.0
    seed: 1234
    initial: {kind: random_product}   # zeros | bits (with bits: "0011") | random_product
    outputs: {cadence: 1, observables: [norm, energy], state_dump: false}

Transmon models take ``preset`` (``uncoupled`` or ``coupled``) or explicit
``freqs_ghz`` / ``anharm_ghz`` / ``couplings_ghz`` / ``levels`` lists, plus
``pulses: {kind: analytic}`` or ``pulses: {kind: file, path: p.csv, unit: GHz}``.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import yaml

from ..errors import ConfigError

INTEGRATORS = ("tdvp", "tdvp2", "mps_bug", "tucker_bug", "dense_imr", "dense_expm")
OBSERVABLES = ("norm", "energy", "magnetization")


@dataclass
class OutputSpec:
    cadence: int = 1
    observables: list = field(default_factory=lambda: ["norm", "energy"])
    state_dump: bool = False


@dataclass
class LocalSpec:
    method: str = "imr"
    substeps: int = 1
    fp_tol: float = 1e-12
    fp_max_iters: int = 200


@dataclass
class ExperimentConfig:
    model: dict
    integrator: str = "tdvp2"
    T: float = 1.0
    steps: int = 100
    eps: float = 0.0
    seed: int = 0
    initial: dict = field(default_factory=lambda: {"kind": "zeros"})
    outputs: OutputSpec = field(default_factory=OutputSpec)
    local: LocalSpec = field(default_factory=LocalSpec)
    bug_center: int | None = None
    tdvp_bonds: object = "warmup"
    threads: int = 1
    study: dict = field(default_factory=dict)
    name: str = "run"

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        new = copy.deepcopy(self)
        for k, v in changes.items():
            setattr(new, k, v)
        validate(new)
        return new

    @property
    def n(self) -> int:
        return int(self.model["n"])


def _require(cond, msg, path):
    if not cond:
        raise ConfigError(msg, field=path)


def _number(d, key, path, default=None, positive=False, nonneg=False):
    v = d.get(key, default)
    _require(v is not None, "missing value", f"{path}.{key}" if path else key)
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {v!r}", field=f"{path}.{key}" if path else key) from None
    if positive:
        _require(v > 0, f"must be > 0, got {v}", f"{path}.{key}" if path else key)
    if nonneg:
        _require(v >= 0, f"must be >= 0, got {v}", f"{path}.{key}" if path else key)
    return v


def _validate_model(m):
    _require(isinstance(m, dict), "must be a mapping", "model")
    kind = m.get("type")
    _require(kind in ("ising", "transmon"), f"unknown model type {kind!r}", "model.type")
    n = m.get("n")
    _require(isinstance(n, int) and n >= 1, f"must be a positive integer, got {n!r}", "model.n")
    if kind == "ising":
        _require(n >= 2, "Ising chain needs n >= 2", "model.n")
        _number(m, "J", "model", default=1.0)
        _number(m, "g", "model", default=1.0)
    else:
        preset = m.get("preset")
        _require(preset in (None, "uncoupled", "coupled"), f"unknown preset {preset!r}", "model.preset")
        _require(preset is not None or "freqs_ghz" in m, "give a preset or freqs_ghz", "model")
        for key, length in (("freqs_ghz", n), ("anharm_ghz", n), ("levels", n), ("couplings_ghz", n - 1)):
            if key in m:
                _require(isinstance(m[key], list) and len(m[key]) == length,
                         f"expected a list of {length} values", f"model.{key}")
        if "freqs_ghz" in m:
            _require(all(float(f) > 0 for f in m["freqs_ghz"]), "frequencies must be positive", "model.freqs_ghz")
        pulses = m.get("pulses", {"kind": "analytic"})
        _require(isinstance(pulses, dict), "must be a mapping", "model.pulses")
        _require(pulses.get("kind") in ("analytic", "file", "none"),
                 f"unknown pulse kind {pulses.get('kind')!r}", "model.pulses.kind")
        if pulses.get("kind") == "file":
            _require(isinstance(pulses.get("path"), str), "missing pulse file path", "model.pulses.path")
            _require(pulses.get("unit", "GHz") in ("GHz", "rad/ns"), "unit must be GHz or rad/ns", "model.pulses.unit")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    _validate_model(cfg.model)
    _require(cfg.integrator in INTEGRATORS, f"unknown integrator {cfg.integrator!r}", "integrator")
    _require(isinstance(cfg.steps, int) and cfg.steps >= 1, f"must be an integer >= 1, got {cfg.steps!r}", "steps")
    _require(isinstance(cfg.T, (int, float)) and cfg.T > 0, f"must be > 0, got {cfg.T!r}", "T")
    _require(isinstance(cfg.eps, (int, float)) and cfg.eps >= 0, f"must be >= 0, got {cfg.eps!r}", "eps")
    _require(isinstance(cfg.seed, int), f"must be an integer, got {cfg.seed!r}", "seed")
    _require(isinstance(cfg.threads, int) and cfg.threads >= 1, "must be an integer >= 1", "threads")
    kind = cfg.initial.get("kind") if isinstance(cfg.initial, dict) else None
    _require(kind in ("zeros", "bits", "random_product"), f"unknown initial state {kind!r}", "initial.kind")
    if kind == "bits":
        bits = str(cfg.initial.get("bits", ""))
        _require(len(bits) == cfg.n, f"expected {cfg.n} digits, got {len(bits)}", "initial.bits")
        _require(all(ch.isdigit() for ch in bits), "bits must be digits", "initial.bits")
    o = cfg.outputs
    _require(isinstance(o.cadence, int) and o.cadence >= 1, "must be an integer >= 1", "outputs.cadence")
    for name in o.observables:
        _require(name in OBSERVABLES, f"unknown observable {name!r}", "outputs.observables")
    if "magnetization" in o.observables and cfg.model["type"] == "transmon":
        levels = cfg.model.get("levels", [2] * cfg.n)
        _require(all(int(d) == 2 for d in levels), "magnetization needs qubit sites", "outputs.observables")
    lc = cfg.local
    _require(lc.method in ("imr", "hermitian_exp"), f"unknown method {lc.method!r}", "local.method")
    _require(isinstance(lc.substeps, int) and lc.substeps >= 1, "must be an integer >= 1", "local.substeps")
    _require(lc.fp_tol > 0, "must be > 0", "local.fp_tol")
    if cfg.bug_center is not None:
        _require(isinstance(cfg.bug_center, int) and 0 <= cfg.bug_center < cfg.n,
                 f"must be a site index in [0, {cfg.n - 1}]", "bug_center")
    tb = cfg.tdvp_bonds
    _require(tb in ("warmup", "max") or (isinstance(tb, list) and len(tb) == cfg.n - 1),
             "must be 'warmup', 'max' or a list of N-1 bonds", "tdvp_bonds")
    return cfg


def from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("top level must be a mapping")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="<root>")
    if "model" not in d:
        raise ConfigError("missing section", field="model")
    d = copy.deepcopy(d)
    try:
        outputs = OutputSpec(**d.pop("outputs", {}) or {})
    except TypeError as exc:
        raise ConfigError(str(exc), field="outputs") from None
    try:
        local = LocalSpec(**d.pop("local", {}) or {})
    except TypeError as exc:
        raise ConfigError(str(exc), field="local") from None
    for key in ("T", "eps"):
        if key in d and isinstance(d[key], str):
            try:
                d[key] = float(d[key])
            except ValueError:
                raise ConfigError(f"expected a number, got {d[key]!r}", field=key) from None
    if isinstance(local.fp_tol, str):
        local.fp_tol = float(local.fp_tol)
    cfg = ExperimentConfig(outputs=outputs, local=local, **d)
    return validate(cfg)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field=str(path)) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", field=str(path)) from None
    return from_dict(data)
