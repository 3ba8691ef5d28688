"""Line-oriented ``key=value`` experiment configuration."""
from __future__ import annotations

from dataclasses import dataclass, field, fields

EXPERIMENTS = ("convergence", "inverse", "superapprox", "technique", "identity", "local-estimate", "naive-sweep")
PRESET_NAMES = ("laplace", "variable")
# experiments that place an aligned subdomain of side d at the origin
USES_D = ("superapprox", "local-estimate", "naive-sweep")


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    pass


class AlignmentConfigError(ConfigError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    preset: tuple[str, ...] = ("laplace",)
    r: tuple[int, ...] = (1,)
    n: tuple[int, ...] = (8, 16, 32, 64)
    d: tuple[float, ...] = (1.0,)
    p: tuple[int, ...] = (1,)
    seeds: int = 20
    seed: int = 0
    quad_degree: int = 10
    levels: tuple[int, ...] = (1, 2, 4, 8, 16)
    out: str | None = field(default=None, compare=False)

    def echo(self) -> str:
        """Canonical text that parses back to an equal config (the output directory is omitted)."""
        lines = []
        for f in fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(_fmt(x) for x in v)
            lines.append(f"{f.name}={_fmt(v) if not isinstance(v, str) else v}")
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _ints(text: str, key: str, lineno: int) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in _items(text))
    except ValueError:
        raise ParseError(f"line {lineno}: {key} expects integers, got {text!r}") from None
    return vals


def _floats(text: str, key: str, lineno: int) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in _items(text))
    except ValueError:
        raise ParseError(f"line {lineno}: {key} expects numbers, got {text!r}") from None
    return vals


def _items(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


_LIST_INT = {"r", "n", "p", "levels"}
_SCALAR_INT = {"seeds", "seed", "quad_degree"}


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        if key == "experiment":
            if val not in EXPERIMENTS:
                raise ParseError(f"line {lineno}: unknown experiment {val!r}; expected one of {', '.join(EXPERIMENTS)}")
            values[key] = val
        elif key == "preset":
            names = tuple(_items(val))
            for name in names:
                if name not in PRESET_NAMES:
                    raise ParseError(f"line {lineno}: unknown preset {name!r}")
            values[key] = names
        elif key in _LIST_INT:
            values[key] = _ints(val, key, lineno)
        elif key == "d":
            values[key] = _floats(val, key, lineno)
        elif key in _SCALAR_INT:
            vals = _ints(val, key, lineno)
            if len(vals) != 1:
                raise ParseError(f"line {lineno}: {key} takes a single integer")
            values[key] = vals[0]
        elif key == "out":
            values[key] = val
        else:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
    if "experiment" not in values:
        raise ParseError("missing required key 'experiment'")
    cfg = ExperimentConfig(**values)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    for name in ("preset", "r", "n", "d", "p", "levels"):
        if len(getattr(cfg, name)) == 0:
            raise ConfigError(f"{name} list is empty")
    if any(r not in (1, 2) for r in cfg.r):
        raise ConfigError(f"polynomial degree must be 1 or 2, got {cfg.r}")
    if any(n < 1 for n in cfg.n):
        raise ConfigError(f"n values must be positive, got {cfg.n}")
    if any(p < 1 for p in cfg.p):
        raise ConfigError(f"layer counts must be at least 1, got {cfg.p}")
    if any(lv < 1 for lv in cfg.levels):
        raise ConfigError(f"quadrature levels must be positive, got {cfg.levels}")
    if cfg.seeds < 1:
        raise ConfigError("seeds must be at least 1")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if cfg.experiment in USES_D:
        for d in cfg.d:
            if not 0 < d <= 1:
                raise ConfigError(f"subdomain side d must lie in (0, 1], got {d}")
        bad = [(d, n) for d in cfg.d for n in cfg.n if abs(d * n - round(d * n)) > 1e-9 * max(1.0, d * n)]
        if bad:
            pairs = ", ".join(f"(d={d}, n={n})" for d, n in bad)
            raise AlignmentConfigError(f"subdomain corners off the grid for {pairs}")
    if cfg.experiment == "naive-sweep" and (len(cfg.n) != 1 or len(cfg.p) != 1):
        raise ConfigError("naive-sweep takes a single n and a single p")


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
