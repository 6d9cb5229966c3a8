from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from math import isfinite
from typing import Any, Mapping, Optional, Union

import yaml

from py9audit.core import ConfigError, InvalidArgument, PY9Mechanism, jsonable
from py9audit.default_mechanisms import (
    DSA,
    MECHANISMS,
    build_mechanism,
    mechanism_defaults,
    mechanism_params,
)
from py9audit.density import EstimatorSettings
from py9audit.loss import DEFAULT_GRID_SIZE, MIN_DPL_SAMPLES, EvalGrid
from py9audit.patterns import (
    NEIGHBORHOOD_PRESETS,
    AdjacentPair,
    as_pair,
    preset_pairs,
)

logger = logging.getLogger(__name__)

MODES = ("audit", "cdf", "mse", "data-centric", "loss-profile")
MPL_MODES = ("audit", "cdf", "data-centric")

# below this many repetitions an empirical CDF is too coarse to read
MIN_CDF_REPETITIONS = 100


@dataclass(frozen=True)
class AuditConfig:
    """
    A validated experiment description.

    `pairs` is either the name of a preset (see `preset_pairs`) or an
    explicit tuple of pairs. `d` and `k` size the presets and default to
    the mechanism's own `d`/`k` (else 6 and 3). `tau=None` selects the
    default floor schedule. `workers=None` sizes the pool from the
    environment or the cpu count.
    """

    mechanism: str
    mode: str = "audit"
    params: DSA = field(default_factory=dict)
    pairs: Union[str, tuple[AdjacentPair, ...]] = "unit_pair"
    d: Optional[int] = None
    k: Optional[int] = None
    n: int = 20_000
    N: int = 50_000
    C: tuple[float, float] = (-1.0, 1.0)
    grid_size: int = DEFAULT_GRID_SIZE
    alpha: float = 0.05
    seed: int = 0
    repetitions: int = 1
    n_list: tuple[int, ...] = (1_000, 5_000, 20_000)
    out: Optional[str] = None
    workers: Optional[int] = None
    tau: Optional[float] = None
    floor_schedule: str = "fixed"
    gamma: float = 0.02
    beta: float = 1.0
    bandwidth_factor: float = 1.06
    record_runtime: bool = True

    def build_mechanism(self) -> PY9Mechanism:
        return build_mechanism(self.mechanism, **self.params)

    def estimator_settings(self) -> EstimatorSettings:
        return EstimatorSettings(
            beta=self.beta,
            gamma=self.gamma,
            bandwidth_factor=self.bandwidth_factor,
            tau=self.tau,
            floor_schedule=self.floor_schedule,
        )

    @property
    def preset_d(self) -> int:
        return self.d or getattr(self.build_mechanism(), "d", None) or 6

    @property
    def preset_k(self) -> int:
        return self.k or getattr(self.build_mechanism(), "k", None) or 3

    def adjacent_pairs(self) -> list[AdjacentPair]:
        if isinstance(self.pairs, str):
            return preset_pairs(self.pairs, d=self.preset_d, k=self.preset_k)
        return list(self.pairs)

    def grid(self, mechanism: PY9Mechanism, x: Any = None) -> EvalGrid:
        """
        The evaluation set: the mechanism's alphabet for discrete outputs
        (extended by observed symbols during estimation), else a uniform
        grid of `grid_size` points over C.
        """

        if mechanism.space.is_discrete:
            return EvalGrid.alphabet(mechanism.alphabet(x))
        return EvalGrid.interval(*self.C, size=self.grid_size)

    def replace(self, **changes: Any) -> AuditConfig:
        return replace(self, **changes)

    def to_dict(self) -> DSA:
        out = asdict(self)
        params = out.pop("params")
        if not isinstance(self.pairs, str):
            out["pairs"] = [
                {"x": p.x, "x_prime": p.x_prime, "kind": p.kind}
                for p in self.pairs
            ]
        out.update(params)
        return jsonable(out)


CONFIG_KEYS = tuple(f.name for f in fields(AuditConfig) if f.name != "params")


def _as_float(key: str, v: Any) -> float:
    # PyYAML reads exponent literals such as 1e-3 as strings
    if isinstance(v, bool):
        raise ConfigError(f"expected a number, got {v!r}", field=key)
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {v!r}", field=key)
    if not isfinite(out):
        raise ConfigError(f"expected a finite number, got {v!r}", field=key)
    return out


def _as_int(key: str, v: Any) -> int:
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    if isinstance(v, str) and v.strip().lstrip("+-").isdigit():
        return int(v)

    # exponent literals such as 2e4
    out = _as_float(key, v)
    if out != int(out):
        raise ConfigError(f"expected an integer, got {v!r}", field=key)
    return int(out)


def _as_bool(key: str, v: Any) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "false"):
        return v.lower() == "true"
    raise ConfigError(f"expected a boolean, got {v!r}", field=key)


def _coerce_param(name: str, key: str, v: Any) -> Any:
    typ, _ = mechanism_params(name)[key]
    if typ is int:
        return _as_int(key, v)
    if typ is float:
        return _as_float(key, v)
    return str(v)


def _coerce_pairs(v: Any) -> Union[str, tuple[AdjacentPair, ...]]:
    if isinstance(v, str):
        return v
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError("expected a preset name or a list of pairs", "pairs")
    try:
        return tuple(as_pair(p) for p in v)
    except InvalidArgument as e:
        raise ConfigError(str(e), field="pairs") from None


def _coerce(key: str, v: Any) -> Any:
    if v is None and key in ("d", "k", "out", "workers", "tau"):
        return None

    if key in ("mechanism", "mode", "out", "floor_schedule"):
        return str(v)
    if key in ("d", "k", "n", "N", "grid_size", "seed", "repetitions"):
        return _as_int(key, v)
    if key == "workers":
        return _as_int(key, v)
    if key in ("alpha", "tau", "gamma", "beta", "bandwidth_factor"):
        return _as_float(key, v)
    if key == "record_runtime":
        return _as_bool(key, v)
    if key == "pairs":
        return _coerce_pairs(v)
    if key == "C":
        if not isinstance(v, (list, tuple)) or len(v) != 2:
            raise ConfigError(f"expected [lo, hi], got {v!r}", field=key)
        return (_as_float(key, v[0]), _as_float(key, v[1]))
    if key == "n_list":
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigError(f"expected a list of sizes, got {v!r}", key)
        return tuple(_as_int(key, it) for it in v)

    raise ConfigError("unknown key", field=key)


def _validate(cfg: AuditConfig) -> None:
    def check(ok: bool, key: str, msg: str) -> None:
        if not ok:
            raise ConfigError(msg, field=key)

    check(cfg.mode in MODES, "mode", f"mode must be one of {MODES}")
    check(0 < cfg.alpha < 1, "alpha", f"must lie in (0, 1), not {cfg.alpha}")
    check(cfg.n >= MIN_DPL_SAMPLES, "n", f"must be >= {MIN_DPL_SAMPLES}")
    check(cfg.repetitions >= 1, "repetitions", "must be at least 1")
    check(cfg.seed >= 0, "seed", "must be non-negative")
    check(cfg.seed < 1 << 64, "seed", "must fit in 64 unsigned bits")
    check(cfg.C[0] < cfg.C[1], "C", f"empty interval {list(cfg.C)}")
    check(cfg.grid_size >= 2, "grid_size", "must be at least 2")
    check(
        cfg.workers is None or cfg.workers >= 1, "workers", "must be >= 1"
    )
    check(cfg.tau is None or cfg.tau >= 0, "tau", "must be non-negative")
    check(
        cfg.floor_schedule in ("fixed", "rate"),
        "floor_schedule",
        "must be 'fixed' or 'rate'",
    )
    check(cfg.beta > 0, "beta", "must be positive")
    check(cfg.gamma > 0, "gamma", "must be positive")
    check(cfg.bandwidth_factor > 0, "bandwidth_factor", "must be positive")
    check(
        all(n >= MIN_DPL_SAMPLES for n in cfg.n_list),
        "n_list",
        f"sizes must be >= {MIN_DPL_SAMPLES}",
    )

    if cfg.mode in MPL_MODES:
        check(cfg.N > cfg.n, "N", f"must exceed n={cfg.n}")

    if cfg.mode == "data-centric":
        check(
            cfg.pairs in NEIGHBORHOOD_PRESETS,
            "pairs",
            f"data-centric runs need one of {NEIGHBORHOOD_PRESETS}",
        )

    if cfg.mode == "cdf" and cfg.repetitions < MIN_CDF_REPETITIONS:
        logger.warning(
            "only %d repetitions, the empirical CDF will be coarse",
            cfg.repetitions,
        )

    try:
        cfg.build_mechanism()
    except InvalidArgument as e:
        raise ConfigError(str(e), field="mechanism") from None

    try:
        pairs = cfg.adjacent_pairs()
    except InvalidArgument as e:
        raise ConfigError(str(e), field="pairs") from None
    check(len(pairs) > 0, "pairs", "no pairs to audit")


def config_from_mapping(
    raw: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None
) -> AuditConfig:
    """
    Builds a validated AuditConfig from a flat mapping. `overrides` take
    precedence over `raw`.
    """

    if not isinstance(raw, Mapping):
        raise ConfigError("a config must be a mapping of keys to values")

    merged = dict(raw)
    merged.update(overrides or {})

    name = merged.pop("mechanism", None)
    if name is None:
        raise ConfigError("no mechanism named", field="mechanism")
    name = str(name)
    if name not in MECHANISMS:
        raise ConfigError(
            f"unknown mechanism {name!r}, expected one of "
            f"{sorted(MECHANISMS)}",
            field="mechanism",
        )

    values: DSA = {}
    params: DSA = {}
    known_params = mechanism_params(name)

    for key, v in merged.items():
        if key in known_params:
            params[key] = _coerce_param(name, key, v)
            if key in ("d", "k"):
                values[key] = params[key]
        elif key in CONFIG_KEYS:
            values[key] = _coerce(key, v)
        else:
            raise ConfigError("unknown key", field=key)

    defaults = mechanism_defaults(name)
    for key, v in defaults.items():
        values.setdefault(key, _coerce(key, v))

    cfg = AuditConfig(mechanism=name, params=params, **values)
    _validate(cfg)

    return cfg


def load_config(
    path: str, overrides: Optional[Mapping[str, Any]] = None
) -> AuditConfig:
    """
    Reads, completes and validates a JSON or YAML config file.

    Raises:
        ConfigError: with `line` and `column` set on parse errors, or with
            `field` set on validation errors.
    """

    try:
        with open(path, "r") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        if mark is None:
            raise ConfigError(f"cannot parse {path}: {problem}") from None
        raise ConfigError(
            f"cannot parse {path}: {problem}",
            line=mark.line + 1,
            column=mark.column + 1,
        ) from None

    if raw is None:
        raw = {}

    cfg = config_from_mapping(raw, overrides)
    logger.debug("loaded config %s: %s", path, cfg)

    return cfg


def parse_override(raw: str) -> Any:
    """
    Parses one command line value as a YAML scalar or list.
    """

    try:
        return yaml.safe_load(raw)
    except yaml.YAMLError:
        return raw
