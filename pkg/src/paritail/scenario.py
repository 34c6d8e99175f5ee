"""Flat ``key = value`` scenario files.

One key per line, ``#`` starts a comment. Every key is typed and range
checked against the mode it is used with, and unknown keys are rejected.
Parsing collects every problem before raising, so a bad file is reported
in one pass.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

MODES = ("equilibrium", "simulate", "bootstrap", "polya", "metrics")


class ParseError(Exception):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason

    def to_dict(self):
        return {"type": "ParseError", "line": self.line, "reason": self.reason}


class ValidationError(Exception):
    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason

    def to_dict(self):
        return {"type": "ValidationError", "key": self.key, "reason": self.reason}


class ScenarioError(Exception):
    """Raised by ``parse_scenario`` with every problem found."""

    exit_code = 2

    def __init__(self, errors):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class Key:
    kind: str  # int | float | str | floats
    default: object = None
    low: float | None = None
    high: float | None = None
    low_open: bool = False
    choices: tuple = ()
    required: bool = False


def _pos(kind, default):
    return Key(kind, default, low=0, low_open=True)


def _nonneg(kind, default):
    return Key(kind, default, low=0)


_MARKET = {
    "m": Key("int", 2, low=1),
    "n": Key("int", 2, low=1),
    "zipf_exponent": _nonneg("float", 1.0),
    "probs": Key("floats", None, low=0, low_open=True),
    "total_rate": _pos("float", 1.0),
    "belief_noise": _nonneg("float", 0.0),
    "delta": _pos("float", 1.0),
}
_SIM = {
    **_MARKET,
    "horizon": _pos("float", 20.0),
    "broadcast_interval": _pos("float", 0.01),
    "reallocation_rate": _nonneg("float", 1.0),
    "move_fraction": Key("float", 1.0, low=0, high=1, low_open=True),
    "lazy_fraction": Key("float", 0.0, low=0, high=1),
    "imitator_fraction": Key("float", 0.0, low=0, high=1),
    "initial": Key("str", "uniform", choices=("uniform", "equilibrium")),
}
_SOLVER = {
    "tol": _pos("float", 1e-9),
    "max_rounds": Key("int", 500, low=1),
}

SCHEMA = {
    "equilibrium": {**_MARKET, **_SOLVER},
    "simulate": {**_SIM, **_SOLVER},
    "metrics": {**_SIM, **_SOLVER, "bins": Key("int", 10, low=1)},
    "bootstrap": {
        "p": Key("float", None, low=0, high=1, low_open=True, required=True),
        "pi0": Key("float", None, low=0, low_open=True, required=True),
        "dt": _pos("float", 1e-4),
        "method": Key("str", "rk4", choices=("rk4", "euler")),
    },
    "polya": {
        "alpha": Key("float", None, low=0, high=1, required=True),
        "p": Key("float", None, low=0, high=1, low_open=True, required=True),
        "arrivals": Key("int", 10_000, low=1),
        "runs": Key("int", 100, low=1),
        "seed_a": Key("int", 1, low=1),
        "seed_b": Key("int", 1, low=1),
        "band": Key("float", 0.05, low=0, low_open=True),
        "alphas": Key("floats", None, low=0, high=1, low_open=True),
    },
}
COMMON = {"name": Key("str", "scenario"), "seed": Key("int", 0, low=0)}


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: str
    seed: int
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def config(self) -> dict:
        return {"name": self.name, "mode": self.mode, "seed": self.seed, **self.params}


def _convert(key, spec: Key, raw: str):
    try:
        if spec.kind == "int":
            value = int(raw)
        elif spec.kind == "float":
            value = float(raw)
        elif spec.kind == "floats":
            value = tuple(float(x) for x in raw.split(",") if x.strip())
            if not value:
                raise ValueError
        else:
            value = raw
    except ValueError:
        raise ValidationError(key, f"expected {spec.kind}, got {raw!r}") from None
    items = value if spec.kind == "floats" else (value,)
    for v in items:
        if spec.choices and v not in spec.choices:
            raise ValidationError(key, f"must be one of {', '.join(spec.choices)}")
        if spec.kind in ("int", "float", "floats") and v != v:
            raise ValidationError(key, "must be a number")
        if spec.low is not None and (v < spec.low or (spec.low_open and v == spec.low)):
            raise ValidationError(key, _range_text(spec))
        if spec.high is not None and v > spec.high:
            raise ValidationError(key, _range_text(spec))
    return value


def _range_text(spec: Key) -> str:
    lo = "(" if spec.low_open else "["
    hi = f"{spec.high}]" if spec.high is not None else "inf)"
    return f"out of {lo}{spec.low}, {hi}"


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario; raises ScenarioError listing every problem."""
    errors: list[Exception] = []
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(ParseError(lineno, "expected 'key = value'"))
            continue
        key, value = (part.strip() for part in body.split("=", 1))
        if not key:
            errors.append(ParseError(lineno, "empty key"))
            continue
        if key in raw:
            errors.append(ParseError(lineno, f"duplicate key {key!r}"))
            continue
        raw[key] = (lineno, value)

    mode = raw.pop("mode", (0, None))[1]
    if mode is None:
        errors.append(ValidationError("mode", "required"))
    elif mode not in MODES:
        errors.append(ValidationError("mode", f"must be one of {', '.join(MODES)}"))
        mode = None

    common = {}
    for key, spec in COMMON.items():
        if key in raw:
            try:
                common[key] = _convert(key, spec, raw.pop(key)[1])
            except ValidationError as exc:
                errors.append(exc)
        else:
            common[key] = spec.default

    params = {}
    if mode is not None:
        schema = SCHEMA[mode]
        for key in raw:
            if key not in schema:
                errors.append(ValidationError(key, f"unknown key for mode {mode}"))
        for key, spec in schema.items():
            if key in raw:
                try:
                    params[key] = _convert(key, spec, raw[key][1])
                except ValidationError as exc:
                    errors.append(exc)
            elif spec.required:
                errors.append(ValidationError(key, "required"))
            else:
                params[key] = spec.default
        errors.extend(_cross_checks(mode, params))
    else:
        # without a mode, still range-check any key some mode knows about
        for key, (_, value) in raw.items():
            spec = next((s[key] for s in SCHEMA.values() if key in s), None)
            if spec is None:
                errors.append(ValidationError(key, "unknown key"))
                continue
            try:
                _convert(key, spec, value)
            except ValidationError as exc:
                errors.append(exc)

    if errors:
        raise ScenarioError(errors)
    return Scenario(common["name"], mode, common["seed"], params)


def _cross_checks(mode, params):
    out = []
    if mode in ("equilibrium", "simulate", "metrics"):
        probs = params.get("probs")
        if probs is not None and "n" in params and len(probs) != params["n"]:
            out.append(ValidationError("probs", f"needs n={params['n']} values"))
    if mode in ("simulate", "metrics"):
        lazy = params.get("lazy_fraction") or 0.0
        imit = params.get("imitator_fraction") or 0.0
        if lazy + imit > 1:
            out.append(ValidationError("imitator_fraction", "lazy + imitator fractions exceed 1"))
    if mode == "bootstrap":
        p, pi0 = params.get("p"), params.get("pi0")
        if p is not None and pi0 is not None and pi0 > p:
            out.append(ValidationError("pi0", "must not exceed p"))
    return out


def _render_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_scenario(s: Scenario) -> str:
    """Inverse of ``parse_scenario``; keys at their defaults are still written.

    Keys whose value is None (optional and unset) are omitted.
    """
    lines = [f"name = {s.name}", f"mode = {s.mode}", f"seed = {s.seed}"]
    for key, value in s.params.items():
        if value is not None:
            lines.append(f"{key} = {_render_value(value)}")
    return "\n".join(lines) + "\n"


def child_seed(seed: int, name: str, index: int = 0) -> int:
    """Derive a 64-bit child seed from the scenario seed, a stream name and an index."""
    digest = hashlib.sha256(f"{seed}:{name}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
