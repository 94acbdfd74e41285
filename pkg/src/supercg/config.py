"""Plain ``key=value`` experiment configuration with ``[method.<name>]`` overrides.

A hand-rolled reader rather than configparser: every value error must be
reported with its line number, and configparser does not keep per-key lines.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .bench import ExperimentConfig, MethodParams, canonical_method

_GLOBAL_KEYS = {"size", "angles", "rays", "noise", "seed", "methods", "eps", "overrun"}
_METHOD_KEYS = {"gamma0": float, "a": float, "kappa": float, "k": int, "mu": float,
                "lambda": float, "max_iter": int}
_FIELD = {"k": "K", "lambda": "lam"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line


def _convert(key, raw, conv, line, source):
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}", line, source) from None


def _check_params(p: MethodParams, line: int, source: str) -> None:
    if not 0.0 < p.a < 1.0:
        raise ConfigError("a must lie in (0, 1)", line, source)
    if p.gamma0 is not None and p.gamma0 < 0:
        raise ConfigError("gamma0 must be nonnegative", line, source)
    if p.kappa <= 0:
        raise ConfigError("kappa must be positive", line, source)
    if p.K < 1 or p.max_iter < 1:
        raise ConfigError("K and max_iter must be >= 1", line, source)
    if p.mu < 0 or (p.lam is not None and p.lam < 0):
        raise ConfigError("mu and lambda must be nonnegative", line, source)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    glob: dict = {}
    params: dict = {}
    overrides: dict[str, dict] = {}
    section = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", n, source)
            name = line[1:-1].strip()
            if not name.startswith("method."):
                raise ConfigError(f"unknown section [{name}]", n, source)
            try:
                section = canonical_method(name[len("method."):])
            except KeyError:
                raise ConfigError(f"unknown method {name[len('method.'):]!r}", n, source) from None
            overrides.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", n, source)
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key in _METHOD_KEYS:
            v = _convert(key, val, _METHOD_KEYS[key], n, source)
            target = params if section is None else overrides[section]
            target[_FIELD.get(key, key)] = (v, n)
        elif section is None and key in _GLOBAL_KEYS:
            glob[key] = (val, n)
        else:
            raise ConfigError(f"unknown key {key!r}", n, source)

    kw = {}
    for key, (val, n) in glob.items():
        if key == "methods":
            try:
                kw["methods"] = tuple(canonical_method(m) for m in val.split(",") if m.strip())
            except KeyError as e:
                raise ConfigError(f"unknown method {e.args[0]!r}", n, source) from None
        elif key == "eps":
            kw["eps"] = "auto" if val.lower() == "auto" else _convert(key, val, float, n, source)
            if kw["eps"] != "auto" and not kw["eps"] > 0:
                raise ConfigError("eps must be positive", n, source)
        elif key in ("noise", "overrun"):
            kw[key] = _convert(key, val, float, n, source)
            if kw[key] < 0 or (key == "noise" and kw[key] == 0):
                raise ConfigError(f"{key} out of range", n, source)
        else:
            kw[key] = _convert(key, val, int, n, source)
            if kw[key] < (0 if key == "seed" else 1):
                raise ConfigError(f"{key} out of range", n, source)
    if kw.get("size", 8) < 8:
        raise ConfigError("size must be at least 8", glob["size"][1], source)

    base = MethodParams(**{k: v for k, (v, _) in params.items()})
    _check_params(base, min((n for _, n in params.values()), default=0), source)
    ov = {}
    for name, d in overrides.items():
        merged = replace(base, **{k: v for k, (v, _) in d.items()})
        _check_params(merged, min((n for _, n in d.values()), default=0), source)
        ov[name] = {k: v for k, (v, _) in d.items()}
    return ExperimentConfig(params=base, overrides=ov, **kw)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), source=str(path))
