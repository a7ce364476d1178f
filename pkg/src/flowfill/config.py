"""Flat key-value config files and typed accessors.

Files hold one ``key = value`` pair per line; ``#`` starts a comment.
A key repeated on several lines accumulates into a list. CLI flags
override file values.
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    """A config file is malformed or holds an unusable value."""


def parse_kv_file(path: str | Path) -> dict[str, str | list[str]]:
    out: dict[str, str | list[str]] = {}
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in out:
            prev = out[key]
            out[key] = (prev if isinstance(prev, list) else [prev]) + [value]
        else:
            out[key] = value
    return out


def _scalar(values: dict, key: str) -> str:
    v = values[key]
    if isinstance(v, list):
        raise ConfigError(f"key {key!r} given more than once")
    return v


def get_str(values: dict, key: str, default: str | None = None) -> str | None:
    if key not in values:
        return default
    return _scalar(values, key)


def get_int(values: dict, key: str, default: int) -> int:
    if key not in values:
        return default
    try:
        return int(_scalar(values, key))
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected an integer") from exc


def get_float(values: dict, key: str, default: float) -> float:
    if key not in values:
        return default
    try:
        return float(_scalar(values, key))
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected a number") from exc


def get_bool(values: dict, key: str, default: bool) -> bool:
    if key not in values:
        return default
    v = _scalar(values, key).lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"key {key!r}: expected on/off, got {v!r}")


def get_list(values: dict, key: str) -> list[str]:
    if key not in values:
        return []
    v = values[key]
    return list(v) if isinstance(v, list) else [v]


def check_known_keys(values: dict, known: set[str], origin: str) -> None:
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"{origin}: unknown key(s): {', '.join(unknown)}")
