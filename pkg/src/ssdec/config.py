"""Flat ``key = value`` run configuration shared by the CLI subcommands."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .bench import CostModel
from .ssd import ConfigError, SsdConfig


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _path(text: str) -> Path:
    return Path(text)


@dataclass
class RunConfig:
    scenario: str | None = None
    target: Path | None = None
    draft: Path | None = None
    corpus: Path | None = None
    prefix: tuple[int, ...] | None = None
    order: int | None = None
    smoothing: float = 0.0
    draft_len: int = 3
    target_len: int = 100
    beta: float = 0.4
    seed: int = 0
    c_draft: float = 1.0
    c_target: float = 3.0
    c_target_serial: float = 3.0
    token_duration: float = 0.04
    betas: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4)
    draft_lens: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    trials: int = 200
    workers: int = 1
    out: Path | None = None

    def ssd_config(self) -> SsdConfig:
        return SsdConfig(draft_len=self.draft_len, target_len=self.target_len,
                         beta=self.beta, seed=self.seed)

    def cost_model(self) -> CostModel:
        try:
            return CostModel(self.c_draft, self.c_target, self.c_target_serial,
                             self.token_duration)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def check_files(self) -> None:
        for name in ("target", "draft", "corpus"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} file not found: {path}")


_PARSERS = {
    "scenario": str, "target": _path, "draft": _path, "corpus": _path, "out": _path,
    "prefix": _ints, "order": int, "smoothing": float, "draft_len": int,
    "target_len": int, "beta": float, "seed": int, "c_draft": float, "c_target": float,
    "c_target_serial": float, "token_duration": float, "betas": _floats,
    "draft_lens": _ints, "trials": int, "workers": int,
}
assert set(_PARSERS) == {f.name for f in fields(RunConfig)}


def parse_value(key: str, text: str):
    key = key.replace("-", "_")
    if key not in _PARSERS:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return _PARSERS[key](text.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text.strip()!r}") from None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        values[key] = parse_value(key, val)
    base = Path(path).parent
    for key in ("target", "draft", "corpus", "out"):
        if key in values and not values[key].is_absolute():
            values[key] = base / values[key]
    return values


def build_config(file_values: dict, overrides: dict) -> RunConfig:
    """File values first, then non-None ``overrides`` (command-line flags) on top."""
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**merged)
    if cfg.trials < 1:
        raise ConfigError("trials must be at least 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")
    cfg.ssd_config()
    cfg.cost_model()
    return cfg
