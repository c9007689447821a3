"""Experiment configuration: an INI-style ``key = value`` file with sections.

Sections
--------
``[experiment]``  T, replications, base_seed, log_stride, output
``[env]``         preset plus keyword overrides of that preset's factory
``[algo.NAME]``   one section per algorithm; ``kind`` is one of
                  single_ols, single_sgd, multi_ols, multi_sgd

Unknown keys are errors. ``auto`` selects the documented default of an
optional numeric knob. ``dump_config`` writes the fully resolved config back
out, and ``parse_config(dump_config(c)) == c``.
"""

from __future__ import annotations

import configparser
import inspect
import math
from dataclasses import dataclass

from .envs import PRESETS, EnvSpec, make_preset
from .multi import MultiAlgoConfig
from .privacy import PrivacyBudget
from .single import SingleAlgoConfig

ALGO_KINDS = ("single_ols", "single_sgd", "multi_ols", "multi_sgd")
DEFAULT_DELTA = 0.1


class ConfigError(ValueError):
    pass


# key -> (converter, default); None defaults print as "auto"
EXPERIMENT_KEYS = {
    "T": (int, 100_000),
    "replications": (int, 10),
    "base_seed": (int, 0),
    "log_stride": (int, 100),
    "output": (str, "regret.csv"),
}


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    def parse(text):
        return None if str(text).strip().lower() in ("auto", "none", "") else conv(text)

    return parse


ALGO_KEYS = {
    "kind": (str, None),
    "epsilon": (float, None),
    "delta": (float, DEFAULT_DELTA),
    "noiseless": (_bool, False),
    "alpha": (float, 0.05),
    "c_tilde": (_optional(float), None),
    "sgd_c0": (_optional(float), None),
    "project_unit_ball": (_bool, True),
    # multi-parameter only
    "s0": (_optional(int), None),
    "h": (_optional(float), None),
    "K_opt_guess": (_optional(int), None),
    "warmup_stepsize": (str, "per_arm"),
}
MULTI_ONLY = ("s0", "h", "K_opt_guess", "warmup_stepsize")


@dataclass(frozen=True)
class AlgoSpec:
    name: str
    kind: str
    epsilon: float
    delta: float = DEFAULT_DELTA
    noiseless: bool = False
    alpha: float = 0.05
    c_tilde: float | None = None
    sgd_c0: float | None = None
    project_unit_ball: bool = True
    s0: int | None = None
    h: float | None = None
    K_opt_guess: int | None = None
    warmup_stepsize: str = "per_arm"

    @property
    def is_multi(self) -> bool:
        return self.kind.startswith("multi")

    def build(self, T: int) -> SingleAlgoConfig | MultiAlgoConfig:
        estimator = "private_ols" if self.kind.endswith("ols") else "private_sgd"
        delta = self.delta if estimator == "private_ols" else 0.0
        budget = PrivacyBudget(self.epsilon, delta)
        if not self.is_multi:
            return SingleAlgoConfig(
                estimator, budget, T, c_tilde_override=self.c_tilde, sgd_c0=self.sgd_c0,
                alpha=self.alpha, noiseless=self.noiseless, project_unit_ball=self.project_unit_ball,
            )
        return MultiAlgoConfig(
            estimator, budget, T, s0=self.s0, h=self.h, sgd_c0=self.sgd_c0, K_opt_guess=self.K_opt_guess,
            alpha=self.alpha, noiseless=self.noiseless, c_tilde_override=self.c_tilde,
            warmup_stepsize=self.warmup_stepsize, project_unit_ball=self.project_unit_ball,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    env_preset: str
    algos: tuple[AlgoSpec, ...]
    env_overrides: tuple[tuple[str, object], ...] = ()
    T: int = 100_000
    replications: int = 10
    base_seed: int = 0
    log_stride: int = 100
    output: str = "regret.csv"

    def make_env(self) -> EnvSpec:
        return make_preset(self.env_preset, **dict(self.env_overrides))


def _convert(path: str, conv, raw: str):
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _preset_params(preset: str) -> dict[str, inspect.Parameter]:
    if preset not in PRESETS:
        make_preset(preset)  # registers lazily-loaded presets or raises
    factory = PRESETS[preset]
    params = inspect.signature(factory).parameters
    if any(p.kind == p.VAR_KEYWORD for p in params.values()):
        # lambda wrappers forward to single_sphere
        from .envs import single_sphere

        params = {k: v for k, v in inspect.signature(single_sphere).parameters.items() if k != "link"}
    return dict(params)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate config text; every error names the offending key path."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case-sensitive (T, K)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    for section in cp.sections():
        if section not in ("experiment", "env") and not section.startswith("algo."):
            raise ConfigError(f"{section}: unknown section")

    exp = {}
    if cp.has_section("experiment"):
        for key, raw in cp.items("experiment"):
            if key not in EXPERIMENT_KEYS:
                raise ConfigError(f"experiment.{key}: unknown key")
            exp[key] = _convert(f"experiment.{key}", EXPERIMENT_KEYS[key][0], raw)
    if "T" not in exp:
        raise ConfigError("experiment.T: required")
    for key, (conv, default) in EXPERIMENT_KEYS.items():
        exp.setdefault(key, default)
    if exp["T"] < 1:
        raise ConfigError("experiment.T: must be >= 1")
    if exp["replications"] < 1:
        raise ConfigError("experiment.replications: must be >= 1")
    if exp["log_stride"] < 1:
        raise ConfigError("experiment.log_stride: must be >= 1")
    if not 0 <= exp["base_seed"] < 2**64:
        raise ConfigError("experiment.base_seed: must be a 64-bit unsigned integer")

    if not cp.has_section("env") or "preset" not in cp["env"]:
        raise ConfigError("env.preset: required")
    preset = cp["env"]["preset"].strip()
    try:
        params = _preset_params(preset)
    except ValueError as exc:
        raise ConfigError(f"env.preset: {exc}") from None
    overrides = {}
    for key, raw in cp.items("env"):
        if key == "preset":
            continue
        if key not in params:
            raise ConfigError(f"env.{key}: unknown key for preset {preset!r}")
        default = params[key].default
        conv = type(default) if default is not inspect.Parameter.empty else str
        overrides[key] = _convert(f"env.{key}", _bool if conv is bool else conv, raw)
    for key, p in params.items():
        if p.default is not inspect.Parameter.empty:
            overrides.setdefault(key, p.default)

    algos = []
    for section in cp.sections():
        if not section.startswith("algo."):
            continue
        name = section[len("algo."):]
        if not name:
            raise ConfigError(f"{section}: empty algorithm name")
        values = {}
        for key, raw in cp.items(section):
            if key not in ALGO_KEYS:
                raise ConfigError(f"{section}.{key}: unknown key")
            values[key] = _convert(f"{section}.{key}", ALGO_KEYS[key][0], raw)
        kind = values.get("kind")
        if kind not in ALGO_KINDS:
            raise ConfigError(f"{section}.kind: must be one of {ALGO_KINDS}, got {kind!r}")
        if "epsilon" not in values:
            raise ConfigError(f"{section}.epsilon: required")
        if not kind.startswith("multi"):
            for key in MULTI_ONLY:
                if key in values:
                    raise ConfigError(f"{section}.{key}: only valid for multi_* algorithms")
        spec = AlgoSpec(name=name, **values)
        try:
            spec.build(exp["T"])
        except ValueError as exc:
            raise ConfigError(f"{section}: {exc}") from None
        algos.append(spec)
    if not algos:
        raise ConfigError("algo: at least one [algo.NAME] section is required")
    names = [a.name for a in algos]
    if len(set(names)) != len(names):
        raise ConfigError("algo: duplicate algorithm names")

    cfg = ExperimentConfig(
        env_preset=preset, algos=tuple(algos), env_overrides=tuple(sorted(overrides.items())), **exp,
    )
    try:
        env = cfg.make_env()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"env: {exc}") from None
    for spec in algos:
        if spec.is_multi != (env.mode == "multi_param"):
            raise ConfigError(f"algo.{spec.name}.kind: {spec.kind} does not match a {env.mode} environment")
        if spec.is_multi:
            try:
                spec.build(cfg.T).resolve(env)
            except ValueError as exc:
                raise ConfigError(f"algo.{spec.name}: {exc}") from None
    return cfg


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Resolved config text; parses back to an equal ``ExperimentConfig``."""
    lines = ["[experiment]"]
    for key in EXPERIMENT_KEYS:
        lines.append(f"{key} = {_fmt(getattr(cfg, key))}")
    lines += ["", "[env]", f"preset = {cfg.env_preset}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in cfg.env_overrides]
    for spec in cfg.algos:
        lines += ["", f"[algo.{spec.name}]"]
        for key in ALGO_KEYS:
            if key in MULTI_ONLY and not spec.is_multi:
                continue
            lines.append(f"{key} = {_fmt(getattr(spec, key))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
