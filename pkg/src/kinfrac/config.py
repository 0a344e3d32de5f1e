"""Run configuration: a flat ``key = value`` text format with dotted keys.

Grammar (one statement per line)::

    # comment                      (also after a value: key = 1  # note)
    key = value                    key is [A-Za-z_][A-Za-z0-9_.]*
    [section]                      prefixes following keys with "section."

Values are integers, floats, bare or double-quoted strings, or lists written
as comma-separated items, optionally in square brackets (``c = 1, 0.5`` or
``c = [1, 0.5]``).  Unknown keys, malformed lines and out-of-range values are
reported with the source name, line number and key.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class ConfigError(ValueError):
    """Invalid configuration; the message names source, line and key."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None,
                 source: str = "<config>"):
        loc = source if line is None else f"{source}:{line}"
        where = f"{loc}: key '{key}': " if key else f"{loc}: "
        super().__init__(where + message)
        self.key, self.line, self.source = key, line, source


def _floats(raw: str) -> list:
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        raw = raw[1:-1]
    return [float(x) for x in raw.split(",") if x.strip()]


def _is_pow2(n: int) -> bool:
    return n >= 2 and not n & (n - 1)


@dataclass(frozen=True)
class _Field:
    attr: str
    parse: Callable[[str], Any]
    check: Callable[[Any], Optional[str]] = lambda v: None


def _pos(v):
    return None if v > 0 and math.isfinite(v) else "must be a positive finite number"


def _nonneg_int(v):
    return None if v >= 0 else "must be nonnegative"


def _str(raw: str) -> str:
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] == '"':
        return raw[1:-1]
    return raw


def _int(raw: str) -> int:
    v = float(raw)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


@dataclass
class RunConfig:
    """All settings of a run; defaults reproduce the reference experiment."""

    N: int = 1
    alpha: float = 1.5
    epsilon: float = 0.05
    L: float = 2 * math.pi * 8
    n: int = 512
    T: float = 0.5
    dt: float = 1e-3
    kernel: str = "simple"
    c: tuple = (1.0,)
    init: str = "cosine"
    init_amplitude: float = 0.5
    init_mode: int = 1
    output: str = "out"
    seed: Optional[int] = None
    core_order: Optional[int] = None
    tail_order: Optional[int] = None
    v_max: float = 1.0e4
    sweep_epsilons: tuple = (0.2, 0.1, 0.05, 0.025)
    sweep_time: Optional[float] = None
    n_particles: int = 100_000
    snapshot_times: tuple = ()
    symbol_k: tuple = (1.0,)
    symbol_p: float = 1.0
    symbol_epsilons: tuple = tuple(2.0 ** -j for j in range(3, 11))

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}


_FIELDS = {
    "N": _Field("N", _int, lambda v: None if v in (1, 2) else "must be 1 or 2"),
    "alpha": _Field("alpha", float, lambda v: None if 1 < v < 2 else "must lie in (1, 2)"),
    "epsilon": _Field("epsilon", float, _pos),
    "grid.L": _Field("L", float, _pos),
    "grid.n": _Field("n", _int, lambda v: None if _is_pow2(v) else "must be a power of two"),
    "time.T": _Field("T", float, lambda v: None if v >= 0 and math.isfinite(v) else "must be >= 0"),
    "time.dt": _Field("dt", float, _pos),
    "kernel.name": _Field("kernel", _str),
    "c": _Field("c", lambda r: tuple(_floats(r))),
    "init.name": _Field("init", _str, lambda v: None if v in INITS else f"must be one of {sorted(INITS)}"),
    "init.amplitude": _Field("init_amplitude", float,
                             lambda v: None if 0 <= v < 1 else "must lie in [0, 1) to keep rho positive"),
    "init.mode": _Field("init_mode", _int, _nonneg_int),
    "output.path": _Field("output", _str),
    "seed": _Field("seed", _int, _nonneg_int),
    "velocity.core_order": _Field("core_order", _int, lambda v: None if v >= 2 else "must be >= 2"),
    "velocity.tail_order": _Field("tail_order", _int, lambda v: None if v >= 2 else "must be >= 2"),
    "velocity.v_max": _Field("v_max", float, lambda v: None if v > 1 else "must exceed 1"),
    "sweep.epsilons": _Field("sweep_epsilons", lambda r: tuple(_floats(r))),
    "sweep.time": _Field("sweep_time", float, _pos),
    "particles.n_p": _Field("n_particles", _int, lambda v: None if v >= 1 else "must be >= 1"),
    "output.times": _Field("snapshot_times", lambda r: tuple(_floats(r))),
    "symbol.k": _Field("symbol_k", lambda r: tuple(_floats(r))),
    "symbol.p": _Field("symbol_p", float, _pos),
    "symbol.epsilons": _Field("symbol_epsilons", lambda r: tuple(_floats(r))),
}

INITS = ("cosine", "uniform", "bump")

KEYS = tuple(_FIELDS)


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse the text format into ``{key: (raw_value, line)}`` without interpreting values."""
    out = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = _strip_comment(line).strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]") and "=" not in stripped:
            name = stripped[1:-1].strip()
            if name and not _KEY_RE.match(name):
                raise ConfigError(f"malformed section header {stripped!r}", line=lineno, source=source)
            section = f"{name}." if name else ""
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", line=lineno, source=source)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError(f"malformed key {key!r}", line=lineno, source=source)
        key = section + key
        if key in out:
            raise ConfigError(f"duplicate key (first set on line {out[key][1]})", key, lineno, source)
        if not raw:
            raise ConfigError("missing value", key, lineno, source)
        out[key] = (raw, lineno)
    return out


def _strip_comment(line: str) -> str:
    in_str = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            return line[:i]
    return line


def build_config(entries: dict, source: str = "<config>", base: Optional[RunConfig] = None) -> RunConfig:
    """Interpret and validate parsed entries on top of ``base`` (defaults if None).

    ``entries`` maps keys to ``(raw, line)`` or ``(raw, line, source)``; the
    per-entry source, when present, overrides ``source`` in error messages.
    """
    cfg = dataclasses.replace(base) if base is not None else RunConfig()
    for key, entry in entries.items():
        raw, line, src = _unpack(entry, source)
        spec = _FIELDS.get(key)
        if spec is None:
            raise ConfigError(f"unknown key; known keys: {', '.join(KEYS)}", key, line, src)
        try:
            value = spec.parse(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse {raw!r} ({exc})", key, line, src) from None
        problem = spec.check(value)
        if problem:
            raise ConfigError(f"{raw!r} {problem}", key, line, src)
        setattr(cfg, spec.attr, value)
    _cross_check(cfg, entries, source)
    return cfg


def _unpack(entry, source):
    raw, line = entry[0], entry[1]
    return raw, line, (entry[2] if len(entry) > 2 else source)


def _cross_check(cfg: RunConfig, entries: dict, source: str) -> None:
    def fail(key, msg):
        if key in entries:
            _, line, src = _unpack(entries[key], source)
        else:
            line, src = None, source
        raise ConfigError(msg, key, line, src)

    from .kernels import KERNELS  # local import keeps this module dependency-free at import time

    if cfg.kernel not in KERNELS:
        fail("kernel.name", f"unknown kernel {cfg.kernel!r}; known: {sorted(KERNELS)}")
    if len(cfg.c) == 1 and cfg.N == 2 and "c" not in entries:
        cfg.c = (cfg.c[0], 0.0)
    if len(cfg.c) != cfg.N:
        fail("c", f"needs {cfg.N} components, got {len(cfg.c)}")
    if len(cfg.symbol_k) == 1 and cfg.N == 2 and "symbol.k" not in entries:
        cfg.symbol_k = (cfg.symbol_k[0], 0.0)
    if len(cfg.symbol_k) != cfg.N:
        fail("symbol.k", f"needs {cfg.N} components, got {len(cfg.symbol_k)}")
    eps = list(cfg.sweep_epsilons)
    if not eps or any(e <= 0 for e in eps):
        fail("sweep.epsilons", "must be a nonempty list of positive values")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        fail("sweep.epsilons", "must be strictly decreasing")
    if any(e <= 0 for e in cfg.symbol_epsilons):
        fail("symbol.epsilons", "must be positive")
    if cfg.dt > cfg.T and cfg.T > 0:
        fail("time.dt", f"time step {cfg.dt} exceeds the final time {cfg.T}")
    if cfg.sweep_time is not None and cfg.sweep_time > cfg.T:
        fail("sweep.time", "comparison time exceeds the final time")
    if any(t < 0 or t > cfg.T for t in cfg.snapshot_times):
        fail("output.times", "snapshot times must lie in [0, T]")
    from .kernels import get_kernel

    pb = get_kernel(cfg.kernel).phi_bound(cfg.c)
    for key, values in (("epsilon", [cfg.epsilon]), ("sweep.epsilons", eps)):
        for e in values:
            if e ** (cfg.alpha - 1.0) * pb >= 1.0:
                fail(key, f"eps={e} violates the contraction condition eps^(alpha-1) sup|Phi| < 1")


def parse_overrides(items) -> dict:
    """``["key=value", ...]`` from the command line as parsed entries (line ``None``)."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value", source="<command line>")
        key, raw = (s.strip() for s in item.split("=", 1))
        out[key] = (raw, None)
    return out


def load_config(path=None, overrides=None) -> RunConfig:
    """Read ``path`` (optional), apply ``key=value`` overrides, validate once."""
    entries = {}
    source = "<defaults>"
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration: {exc.strerror}", source=str(path)) from None
        source = str(path)
        entries = {k: (raw, line, source) for k, (raw, line) in parse_config(text, source).items()}
    extra = {k: (raw, None, "<command line>") for k, (raw, _) in parse_overrides(overrides).items()}
    return build_config({**entries, **extra}, source)


def format_config(cfg: RunConfig) -> str:
    """Render ``cfg`` in the text format (round-trips through :func:`load_config`)."""
    lines = []
    for key, spec in _FIELDS.items():
        v = getattr(cfg, spec.attr)
        if v is None:
            continue
        if isinstance(v, tuple):
            if not v:
                continue
            v = ", ".join(repr(float(x)) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        elif isinstance(v, str):
            v = f'"{v}"'
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
