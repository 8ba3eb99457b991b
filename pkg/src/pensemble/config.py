"""Flat key=value config files with flag overrides (flags win).

The format is diff-friendly experiment provenance: one `key = value` per
line, `#` comments, no nesting. Validation collects every problem before
failing so a bad config is reported in one pass.
"""

from __future__ import annotations


class ConfigError(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


def load_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError([f"{path}:{line_no}: expected key = value, got {stripped!r}"])
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()
    return values


def merge(config: dict[str, str], overrides: dict[str, object]) -> dict[str, str]:
    """Apply flag overrides on top of file values; None overrides are ignored."""
    merged = dict(config)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = str(value)
    return merged


class ConfigReader:
    """Typed accessors over a string map, accumulating problems."""

    def __init__(self, values: dict[str, str]):
        self.values = values
        self.problems: list[str] = []

    def require(self, key: str) -> str | None:
        if key not in self.values or self.values[key] == "":
            self.problems.append(f"missing config key: {key}")
            return None
        return self.values[key]

    def get(self, key: str, default: str) -> str:
        return self.values.get(key, default)

    def get_int(self, key: str, default: int) -> int:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            self.problems.append(f"config key {key}: expected integer, got {raw!r}")
            return default

    def get_float(self, key: str, default: float) -> float:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            self.problems.append(f"config key {key}: expected number, got {raw!r}")
            return default

    def get_bool(self, key: str, default: bool) -> bool:
        raw = self.values.get(key)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        self.problems.append(f"config key {key}: expected boolean, got {raw!r}")
        return default

    def get_int_list(self, key: str, default: list[int]) -> list[int]:
        raw = self.values.get(key)
        if raw is None:
            return list(default)
        try:
            return [int(part.strip()) for part in raw.split(",") if part.strip()]
        except ValueError:
            self.problems.append(f"config key {key}: expected comma-separated integers, got {raw!r}")
            return list(default)

    def get_str_list(self, key: str, default: list[str]) -> list[str]:
        raw = self.values.get(key)
        if raw is None:
            return list(default)
        return [part.strip() for part in raw.split(",") if part.strip()]

    def check(self) -> None:
        if self.problems:
            raise ConfigError(self.problems)
