"""Experiment configuration: file parsing, validation, serialization.

Two on-disk formats are accepted: JSON objects, and flat key-value text
(`key = value` per line, `#` comments, values in JSON literal syntax
with bare strings allowed). A manifest JSON produced by a previous run
(object with "kind" and "config" keys) is also accepted and reproduces
that run exactly.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .escape import SweepConfig
from .landscape import NOISE_MODES
from .matfac import FactorizationConfig
from .optim import LrSchedule
from .probe import ProbeConfig

__all__ = [
    "ExperimentConfig",
    "EXPERIMENT_KINDS",
    "parse_config",
    "parse_kv_text",
    "config_to_dict",
]

EXPERIMENT_KINDS = ("escape-sweep", "matfac", "probe", "verify-poly", "verify-rmt")


@dataclass(frozen=True)
class VerifyPolyOptions:
    a: float = 3.4445
    b: float = -4.7750
    c: float = 2.0315
    interval_lo: float = 0.6
    interval_hi: float = 1.205
    amplification_grid: int = 10_000
    floor_grid: int = 100_000
    certify_samples: int = 64


@dataclass(frozen=True)
class VerifyRmtOptions:
    concentration_d: int = 256
    concentration_samples: int = 1000
    angle_lambdas: tuple[float, ...] = (2.0, 5.0, 10.0)
    angle_d_values: tuple[int, ...] = (64, 256)
    angle_trials: int = 50
    energy_d_values: tuple[int, ...] = (32, 64, 128, 256, 512)
    energy_samples: int = 200


@dataclass(frozen=True)
class MatfacOptions:
    task: FactorizationConfig = field(default_factory=FactorizationConfig)
    optimizers: tuple[str, ...] = ("muon", "adamw")
    record_every: int = 10


@dataclass(frozen=True)
class ProbeOptions:
    task: FactorizationConfig = field(default_factory=FactorizationConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    optimizer: str = "muon"
    checkpoints: tuple[int, ...] = (0, 5000)
    record_every: int = 50


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    master_seed: int = 0
    output_dir: str = "results"
    payload: object = None


def parse_kv_text(text: str) -> dict:
    """Parse `key = value` lines; values use JSON syntax, bare words are
    strings, comma-separated values become lists."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        out[key] = _parse_value(val.strip())
    return out


def _parse_value(text: str):
    if "," in text and not text.startswith(("[", "{", '"')):
        return [_parse_value(part.strip()) for part in text.split(",") if part.strip()]
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text  # bare string


def _load_file(path) -> dict:
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("top-level JSON config must be an object")
        return data
    return parse_kv_text(text)


# Field-name sets for nested-config routing.
_SWEEP_FIELDS = {f.name for f in fields(SweepConfig)}
_TASK_FIELDS = {f.name for f in fields(FactorizationConfig)}
_PROBE_FIELDS = {f.name for f in fields(ProbeConfig)}


def _coerce_dataclass(cls, values: dict, context: str):
    allowed = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, val in values.items():
        if key not in allowed:
            raise ConfigError(f"unknown {context} key: {key!r}")
        kwargs[key] = _coerce_field(allowed[key], val, context)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {context} config: {exc}") from exc


def _coerce_field(fld, val, context):
    # lists arrive from JSON/kv parsing; dataclasses expect tuples
    if isinstance(val, list):
        return tuple(val)
    if fld.name == "schedule" and isinstance(val, dict):
        return LrSchedule(**val)
    if fld.type in ("int", int) and isinstance(val, float) and val.is_integer():
        return int(val)
    return val


def _flatten_nested(data: dict, keys: tuple[str, ...], context: str) -> dict:
    # manifests echo payloads with nested sub-config dicts; flatten them
    # back into the flat key space used by files and --set overrides
    flat = dict(data)
    for key in keys:
        sub = flat.pop(key, None)
        if sub is None:
            continue
        if not isinstance(sub, dict):
            raise ConfigError(f"{context} key {key!r} must be a mapping")
        flat.update(sub)
    return flat


def _build_payload(kind: str, data: dict):
    if kind == "escape-sweep":
        return _coerce_dataclass(SweepConfig, data, "escape-sweep")
    if kind == "verify-poly":
        return _coerce_dataclass(VerifyPolyOptions, data, "verify-poly")
    if kind == "verify-rmt":
        return _coerce_dataclass(VerifyRmtOptions, data, "verify-rmt")
    if kind == "matfac":
        data = _flatten_nested(data, ("task",), "matfac")
        task = {k: v for k, v in data.items() if k in _TASK_FIELDS}
        rest = {k: v for k, v in data.items() if k not in _TASK_FIELDS}
        opts = _coerce_dataclass(MatfacOptions, {**rest, "task": None}, "matfac")
        return MatfacOptions(
            task=_coerce_dataclass(FactorizationConfig, task, "matfac task"),
            optimizers=opts.optimizers,
            record_every=opts.record_every,
        )
    if kind == "probe":
        data = _flatten_nested(data, ("task", "probe"), "probe")
        task = {k: v for k, v in data.items() if k in _TASK_FIELDS}
        probe = {k: v for k, v in data.items() if k in _PROBE_FIELDS}
        rest = {
            k: v
            for k, v in data.items()
            if k not in _TASK_FIELDS and k not in _PROBE_FIELDS
        }
        opts = _coerce_dataclass(
            ProbeOptions, {**rest, "task": None, "probe": None}, "probe"
        )
        return ProbeOptions(
            task=_coerce_dataclass(FactorizationConfig, task, "probe task"),
            probe=_coerce_dataclass(ProbeConfig, probe, "probe scan"),
            optimizer=opts.optimizer,
            checkpoints=opts.checkpoints,
            record_every=opts.record_every,
        )
    raise ConfigError(f"unknown experiment kind {kind!r}")


def parse_config(
    kind: str,
    config_path=None,
    overrides: dict | None = None,
    master_seed: int | None = None,
    output_dir: str | None = None,
    default_seed: int = 0,
) -> ExperimentConfig:
    """Assemble a validated ExperimentConfig.

    Precedence, lowest to highest: default_seed (environment), module
    defaults, config file values, --set/flag overrides, explicit
    --seed/--out.
    """
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    data: dict = {}
    seed = default_seed
    out = "results"
    if config_path is not None:
        loaded = _load_file(config_path)
        if "kind" in loaded and "config" in loaded:  # manifest round-trip
            if loaded["kind"] != kind:
                raise ConfigError(
                    f"manifest is for kind {loaded['kind']!r}, not {kind!r}"
                )
            seed = int(loaded.get("master_seed", seed))
            loaded = dict(loaded["config"])
        data.update(loaded)
    data.update(overrides or {})
    if "master_seed" in data:
        seed = int(data.pop("master_seed"))
    if "output_dir" in data:
        out = str(data.pop("output_dir"))
    if master_seed is not None:
        seed = master_seed
    if output_dir is not None:
        out = output_dir
    if kind == "escape-sweep":
        data.setdefault("master_seed", seed)
        payload = _build_payload(kind, data)
    else:
        payload = _build_payload(kind, data)
    return ExperimentConfig(kind=kind, master_seed=seed, output_dir=out, payload=payload)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-serializable echo of the payload (for manifests)."""

    def clean(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {k: clean(v) for k, v in asdict(obj).items()}
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        return obj

    return clean(cfg.payload)
