"""Study configuration and the flat ``key = value`` config-file format."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from ..manufactured import default_c_q
from ..solver import TOL_ABS, TOL_REL
from ..spaces import BCMode

__all__ = ["ConfigError", "StudyConfig", "parse_levels", "parse_config_text", "load_config"]


class ConfigError(ValueError):
    """Invalid study configuration."""


def parse_levels(text) -> tuple:
    """``"1..5"`` -> ``(1, 5)``; a single integer means one level."""
    if isinstance(text, (tuple, list)):
        lo, hi = (int(v) for v in text)
    else:
        m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.|-|:)\s*(\d+)\s*", str(text))
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
        elif str(text).strip().isdigit():
            lo = hi = int(str(text).strip())
        else:
            raise ConfigError(f"cannot parse level range {text!r}")
    if lo < 0 or hi < lo:
        raise ConfigError(f"invalid level range {lo}..{hi}")
    return lo, hi


@dataclass(frozen=True)
class StudyConfig:
    p: float = 1.5
    alpha: float = 1.0
    bc: str = "strong"
    nu0: float = 1.0
    delta: float = 1.0e-5
    cq: Optional[float] = None
    T: float = 0.1
    levels: tuple = (1, 5)
    tol_abs: float = TOL_ABS
    tol_rel: float = TOL_REL
    out: str = "."
    plot: bool = False
    verbose: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "bc", BCMode(str(self.bc).lower()).value)
        except ValueError:
            raise ConfigError(f"bc must be 'strong' or 'weak', got {self.bc!r}") from None
        object.__setattr__(self, "levels", parse_levels(self.levels))
        if not self.p > 1:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if not (self.nu0 > 0 and self.delta >= 0 and self.T > 0):
            raise ConfigError("nu0 and T must be positive and delta nonnegative")
        if not (self.tol_abs > 0 and self.tol_rel > 0):
            raise ConfigError("tolerances must be positive")
        if self.cq is None:
            object.__setattr__(self, "cq", default_c_q(self.p))

    @property
    def level_range(self) -> range:
        return range(self.levels[0], self.levels[1] + 1)

    def with_(self, **changes) -> "StudyConfig":
        return replace(self, **changes)


_CASTS = {
    "p": float, "alpha": float, "nu0": float, "delta": float, "cq": float, "T": float,
    "tol_abs": float, "tol_rel": float, "bc": str, "levels": str, "out": str,
}
_BOOLS = {"plot", "verbose"}


def _to_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in {"1", "true", "yes", "on"}:
        return True
    if v in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def parse_config_text(text: str) -> StudyConfig:
    """Parse ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*(.*)", line)
        if not m:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = m.group(1), m.group(2).strip()
        if key == "tau_T":
            key = "T"
        if key in _BOOLS:
            values[key] = _to_bool(value)
        elif key in _CASTS:
            try:
                values[key] = _CASTS[key](value)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return StudyConfig(**values)


def load_config(path) -> StudyConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)
