"""Run configuration: sectioned INI file plus command-line overrides, validated up front."""

from __future__ import annotations

import configparser
import datetime as dt
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from .experts.backends import ExpertBackend, MockBackend, RemoteBackend, RemoteConfig, ScriptedBackend
from .experts.schema import SPECIALISTS, ExpertKind
from .market_data import DatasetSplit, DateRange


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path
        self.message = message


def _int(lo: int | None = None) -> Callable[[str, str], int]:
    def conv(path: str, text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise ConfigError(path, f"expected an integer, got {text!r}") from None
        if lo is not None and value < lo:
            raise ConfigError(path, f"must be >= {lo}, got {value}")
        return value

    return conv


def _float(lo: float | None = None, hi: float | None = None) -> Callable[[str, str], float]:
    def conv(path: str, text: str) -> float:
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(path, f"expected a number, got {text!r}") from None
        if lo is not None and value < lo:
            raise ConfigError(path, f"must be >= {lo}, got {value}")
        if hi is not None and value >= hi:
            raise ConfigError(path, f"must be < {hi}, got {value}")
        return value

    return conv


def _str(path: str, text: str) -> str:
    return text.strip()


def _range(path: str, text: str) -> DateRange:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(path, "expected 'YYYY-MM-DD,YYYY-MM-DD'")
    try:
        return DateRange(dt.date.fromisoformat(parts[0]), dt.date.fromisoformat(parts[1]))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _experts(path: str, text: str) -> tuple[ExpertKind, ...]:
    names = [p.strip() for p in text.split(",") if p.strip()]
    if not names:
        raise ConfigError(path, "at least one expert must be enabled")
    out = []
    for name in names:
        try:
            kind = ExpertKind(name)
        except ValueError:
            raise ConfigError(path, f"unknown expert {name!r}") from None
        if kind not in SPECIALISTS:
            raise ConfigError(path, f"{name!r} is not a specialist expert")
        out.append(kind)
    return tuple(k for k in SPECIALISTS if k in out)


def _kind(path: str, text: str) -> str:
    if text not in ("mock", "scripted", "remote"):
        raise ConfigError(path, f"backend kind must be mock, scripted or remote, got {text!r}")
    return text


_BACKEND_KEYS: dict[str, Callable] = {
    "kind": _kind,
    "script": _str,
    "url": _str,
    "model": _str,
    "response_path": _str,
    "auth_header": _str,
    "auth_env": _str,
    "timeout": _float(0.0),
    "max_retries": _int(0),
    "backoff_base": _float(0.0),
    "max_in_flight": _int(1),
}

SCHEMA: dict[str, dict[str, Callable]] = {
    "data": {
        "panel": _str,
        "news": _str,
        "fundamentals": _str,
        "alphas": _str,
        "news_lookback_days": _int(0),
    },
    "split": {"train": _range, "valid": _range, "test": _range},
    "run": {
        "seed": _int(0),
        "horizon": _int(1),
        "k": _int(1),
        "experts": _experts,
        "jobs": _int(1),
        "window": _int(6),
        "top_factors": _int(1),
        "budget": _int(1),
        "cost_rate": _float(0.0, 1.0),
        "compare_retries": _int(1),
    },
    "ablation": {
        "beta": _float(0.0),
        "n": _int(2),
        "k": _int(1),
        "trials": _int(1),
        "algorithms": _str,
    },
    "backend": _BACKEND_KEYS,
}
for _k in list(ExpertKind):
    SCHEMA[f"backend.{_k.value}"] = _BACKEND_KEYS

PATH_KEYS = {("data", "panel"), ("data", "news"), ("data", "fundamentals"), ("data", "alphas")}


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "mock"
    options: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    panel: Path | None = None
    news: Path | None = None
    fundamentals: Path | None = None
    alphas: Path | None = None
    news_lookback_days: int = 7
    split: DatasetSplit | None = None
    seed: int = 0
    horizon: int = 1
    k: int = 3
    experts: tuple[ExpertKind, ...] = SPECIALISTS
    jobs: int = 1
    window: int = 20
    top_factors: int = 5
    budget: int = 2000
    cost_rate: float = 0.0
    compare_retries: int = 3
    ablation_beta: float = 0.08
    ablation_n: int = 30
    ablation_k: int = 10
    ablation_trials: int = 500
    ablation_algorithms: tuple[str, ...] = ("relaxed", "bubble", "quick")
    backend: BackendSpec = BackendSpec()
    backend_overrides: Mapping[ExpertKind, BackendSpec] = field(default_factory=dict)

    def require(self, *names: str) -> None:
        """Every named data path must be configured and exist on disk."""
        for name in names:
            if name == "split":
                continue
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"data.{name}", "required but not set")
            if not Path(value).exists():
                raise ConfigError(f"data.{name}", f"file not found: {value}")
        if "split" in names and self.split is None:
            raise ConfigError("split", "train/valid/test ranges are required")


def parse_ini(text: str, base_dir: Path) -> dict[str, dict[str, Any]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case so typos are reported verbatim
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    values: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in parser.items(section):
            path = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ConfigError(path, "unknown key")
            value = SCHEMA[section][key](path, raw.strip())
            if (section, key) in PATH_KEYS or (section.startswith("backend") and key == "script"):
                value = (base_dir / value).resolve()
            values.setdefault(section, {})[key] = value
    return values


def build_config(values: Mapping[str, Mapping[str, Any]]) -> RunConfig:
    data = values.get("data", {})
    run = values.get("run", {})
    abl = values.get("ablation", {})
    split = None
    if "split" in values:
        s = values["split"]
        missing = [n for n in ("train", "valid", "test") if n not in s]
        if missing:
            raise ConfigError(f"split.{missing[0]}", "required when [split] is present")
        try:
            split = DatasetSplit(s["train"], s["valid"], s["test"])
        except ValueError as exc:
            raise ConfigError("split", str(exc)) from None
    algorithms = ("relaxed", "bubble", "quick")
    if "algorithms" in abl:
        algorithms = tuple(a.strip() for a in abl["algorithms"].split(",") if a.strip())
        bad = [a for a in algorithms if a not in ("relaxed", "bubble", "quick")]
        if bad or not algorithms:
            raise ConfigError("ablation.algorithms", f"unknown algorithm(s) {bad}")
    overrides = {}
    for kind in ExpertKind:
        section = values.get(f"backend.{kind.value}")
        if section:
            overrides[kind] = _backend_spec(section, f"backend.{kind.value}")
    cfg = RunConfig(
        panel=data.get("panel"),
        news=data.get("news"),
        fundamentals=data.get("fundamentals"),
        alphas=data.get("alphas"),
        news_lookback_days=data.get("news_lookback_days", 7),
        split=split,
        seed=run.get("seed", 0),
        horizon=run.get("horizon", 1),
        k=run.get("k", 3),
        experts=run.get("experts", SPECIALISTS),
        jobs=run.get("jobs", 1),
        window=run.get("window", 20),
        top_factors=run.get("top_factors", 5),
        budget=run.get("budget", 2000),
        cost_rate=run.get("cost_rate", 0.0),
        compare_retries=run.get("compare_retries", 3),
        ablation_beta=abl.get("beta", 0.08),
        ablation_n=abl.get("n", 30),
        ablation_k=abl.get("k", 10),
        ablation_trials=abl.get("trials", 500),
        ablation_algorithms=algorithms,
        backend=_backend_spec(values.get("backend", {}), "backend"),
        backend_overrides=overrides,
    )
    if cfg.ablation_k > cfg.ablation_n:
        raise ConfigError("ablation.k", "must not exceed ablation.n")
    return cfg


def _backend_spec(section: Mapping[str, Any], path: str) -> BackendSpec:
    kind = section.get("kind", "mock")
    options = {k: v for k, v in section.items() if k != "kind"}
    if kind == "scripted" and "script" not in options:
        raise ConfigError(f"{path}.script", "required for a scripted backend")
    if kind == "remote":
        for key in ("url", "model"):
            if key not in options:
                raise ConfigError(f"{path}.{key}", "required for a remote backend")
    return BackendSpec(kind, options)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError("--config", f"file not found: {p}")
    return build_config(parse_ini(p.read_text(encoding="utf-8"), p.resolve().parent))


def apply_overrides(cfg: RunConfig, **flags: Any) -> RunConfig:
    """Command-line flags win over file values; ``None`` means not given."""
    changes = {}
    for name, value in flags.items():
        if value is None:
            continue
        if name in ("k", "jobs", "horizon") and value < 1:
            raise ConfigError(f"--{name}", f"must be >= 1, got {value}")
        if name == "seed" and value < 0:
            raise ConfigError("--seed", "must be >= 0")
        if name == "experts" and isinstance(value, str):
            value = _experts("--experts", value)
        changes[name] = value
    return replace(cfg, **changes)


def make_backend(spec: BackendSpec, path: str = "backend") -> ExpertBackend:
    if spec.kind == "mock":
        return MockBackend()
    if spec.kind == "scripted":
        script = Path(spec.options["script"])
        if not script.is_file():
            raise ConfigError(f"{path}.script", f"file not found: {script}")
        return ScriptedBackend.from_jsonl(script)
    opts = dict(spec.options)
    remote = RemoteConfig(
        url=opts.pop("url"),
        model=opts.pop("model"),
        **{k: v for k, v in opts.items() if k in RemoteConfig.__dataclass_fields__},
    )
    return RemoteBackend(remote)


def make_backends(cfg: RunConfig) -> dict[ExpertKind, ExpertBackend]:
    default = make_backend(cfg.backend)
    out = {}
    for kind in ExpertKind:
        spec = cfg.backend_overrides.get(kind)
        out[kind] = make_backend(spec, f"backend.{kind.value}") if spec else default
    return out
