"""Experiment configuration files (INI sections, strict keys)."""
from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .model import ModelParams

EXPERIMENTS = ("relax-gamma", "relax-beta", "precess", "frozen", "projected", "nosignal",
               "modubit", "limits", "sweep")

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_number(text: str, key: str = "value") -> float:
    """Float, optionally with a ``pi`` factor: ``6.28``, ``2pi``, ``2*pi``, ``pi/2``."""
    m = _NUM.match(text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ConfigError(f"{key}: cannot parse number {text!r}")
    x = float(m.group(1)) if m.group(1) is not None else 1.0
    if m.group(2):
        x *= math.pi
    if m.group(3):
        x /= float(m.group(3))
    return x


def parse_vector(text: str, key: str, n: int | None = None) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    vals = tuple(parse_number(p, key) for p in parts)
    if n is not None and len(vals) != n:
        raise ConfigError(f"{key}: expected {n} components, got {len(vals)}")
    return vals


def _bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _int(text: str, key: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _choice(options):
    def parse(text: str, key: str) -> str:
        t = text.strip()
        if t not in options:
            raise ConfigError(f"{key}: {t!r} is not one of {', '.join(options)}")
        return t
    return parse


_str = lambda text, key: text.strip()
_num = lambda text, key: parse_number(text, key)
_vec3 = lambda text, key: parse_vector(text, key, 3)
_vec = lambda text, key: parse_vector(text, key)

SCHEMA = {
    "experiment": {"id": (_choice(EXPERIMENTS), None), "overlay": (_bool, True)},
    "model": {
        "N": (_int, 200), "s": (_num, None), "omega": (_num, None), "lambda": (_num, None),
        "seed": (_int, 0), "d_A": (_int, 2),
        "env": (_choice(("maximally_mixed", "random_pure")), "maximally_mixed"),
        "split": (_choice(("identity", "real_basis")), "identity"),
    },
    "local": {
        "Omega": (_num, 2 * math.pi), "axis": (_vec3, (0.0, 0.0, 1.0)), "b0": (_vec3, (1.0, 0.0, 0.0)),
        "initial": (_choice(("J", "X", "Z")), None), "t_freeze": (_num, 0.0),
        "nu_mode": (_choice(("exact", "second", "third", "third_full")), "exact"),
        "bob_strength": (_num, 5.0), "n_bobs": (_int, 3),
    },
    "time": {
        "t_max": (_num, None), "samples": (_int, 401),
        "unit": (_choice(("time", "periods")), "time"), "fit_periods": (_num, 10.0),
    },
    "limits": {"omegas": (_vec, (100.0, 10**2.5, 1000.0, 10**3.5)), "t": (_num, 1.0)},
    "sweep": {"param": (_str, None), "values": (_vec, ()), "base": (_choice(EXPERIMENTS[:-1]), "precess")},
    "output": {"dir": (_str, None), "prefix": (_str, "")},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: ModelParams
    overlay: bool = True
    env: str = "maximally_mixed"
    split: str = "identity"
    Omega: float = 2 * math.pi
    axis: tuple = (0.0, 0.0, 1.0)
    b0: tuple = (1.0, 0.0, 0.0)
    initial: str | None = None
    t_freeze: float = 0.0
    nu_mode: str = "exact"
    bob_strength: float = 5.0
    n_bobs: int = 3
    t_max: float = 1.0
    samples: int = 401
    time_unit: str = "time"
    fit_periods: float = 10.0
    omegas: tuple = (100.0, 10**2.5, 1000.0, 10**3.5)
    limit_t: float = 1.0
    sweep_param: str | None = None
    sweep_values: tuple = ()
    sweep_base: str = "precess"
    out_dir: str | None = None
    prefix: str = ""
    source_hash: str = ""
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def period(self) -> float:
        return 2 * math.pi / self.Omega

    @property
    def t_end(self) -> float:
        return self.t_max * (self.period if self.time_unit == "periods" else 1.0)

    @property
    def t_freeze_time(self) -> float:
        return self.t_freeze * (self.period if self.time_unit == "periods" else 1.0)

    def with_values(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def _read(parser: configparser.ConfigParser) -> dict:
    out = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        schema = SCHEMA[section]
        vals = {}
        for key, text in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            vals[key] = schema[key][0](text, f"{section}.{key}")
        out[section] = vals
    return out


def _get(d: dict, section: str, key: str):
    if key in d.get(section, {}):
        return d[section][key]
    return SCHEMA[section][key][1]


def parse_config_text(text: str, seed_override: int | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not parser.sections():
        raise ConfigError("config is empty")
    d = _read(parser)
    exp = _get(d, "experiment", "id")
    if exp is None:
        raise ConfigError("experiment.id is required")

    N = _get(d, "model", "N")
    s, omega, lam = (_get(d, "model", k) for k in ("s", "omega", "lambda"))
    if omega is None:
        if s is not None and lam:
            omega = s / lam
        else:
            raise ConfigError("model.omega is required (or model.s with model.lambda)")
    if s is None:
        if lam is None:
            raise ConfigError("model.s or model.lambda is required")
        s = lam * omega
    elif lam is not None and not math.isclose(lam, s / omega, rel_tol=1e-12):
        raise ConfigError("model.lambda contradicts model.s / model.omega")
    seed = _get(d, "model", "seed") if seed_override is None else seed_override
    try:
        params = ModelParams(N=N, s=s, omega=omega, seed=seed, d_A=_get(d, "model", "d_A"))
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None

    t_max = _get(d, "time", "t_max")
    if t_max is None and exp not in ("limits", "nosignal"):
        raise ConfigError("time.t_max is required")
    samples = _get(d, "time", "samples")
    if samples < 2:
        raise ConfigError("time.samples must be >= 2")
    Omega = _get(d, "local", "Omega")
    if Omega <= 0:
        raise ConfigError("local.Omega must be positive")
    axis = _get(d, "local", "axis")
    if abs(math.sqrt(sum(a * a for a in axis)) - 1) > 1e-9:
        raise ConfigError("local.axis must be a unit vector")
    b0 = _get(d, "local", "b0")
    if math.sqrt(sum(a * a for a in b0)) > 1 + 1e-12:
        raise ConfigError("local.b0 must have length <= 1")
    initial = _get(d, "local", "initial")
    if exp == "relax-gamma":
        initial = initial or "J"
    elif exp == "relax-beta":
        initial = initial or "X"
    if exp in ("precess", "frozen", "projected", "modubit", "nosignal") and params.d_A != 2:
        raise ConfigError("model.d_A must be 2 for spin experiments")
    if _get(d, "local", "t_freeze") < 0:
        raise ConfigError("local.t_freeze must be >= 0")
    omegas = _get(d, "limits", "omegas")
    if any(w <= 0 for w in omegas):
        raise ConfigError("limits.omegas must be positive")

    sweep_param = _get(d, "sweep", "param")
    if exp == "sweep" and not sweep_param:
        raise ConfigError("sweep.param is required for a sweep experiment")

    return ExperimentConfig(
        experiment=exp, params=params, overlay=_get(d, "experiment", "overlay"),
        env=_get(d, "model", "env"), split=_get(d, "model", "split"),
        Omega=Omega, axis=tuple(axis), b0=tuple(b0), initial=initial,
        t_freeze=_get(d, "local", "t_freeze"), nu_mode=_get(d, "local", "nu_mode"),
        bob_strength=_get(d, "local", "bob_strength"), n_bobs=_get(d, "local", "n_bobs"),
        t_max=t_max if t_max is not None else 1.0, samples=samples,
        time_unit=_get(d, "time", "unit"), fit_periods=_get(d, "time", "fit_periods"),
        omegas=tuple(omegas), limit_t=_get(d, "limits", "t"),
        sweep_param=sweep_param, sweep_values=tuple(_get(d, "sweep", "values")),
        sweep_base=_get(d, "sweep", "base"),
        out_dir=_get(d, "output", "dir"), prefix=_get(d, "output", "prefix"),
        source_hash=hashlib.sha256(text.encode()).hexdigest(), raw=d,
    )


def load_config(path: str | Path, seed_override: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, seed_override)
