"""Line-oriented ``key = value`` run configuration.

Blank lines and everything after ``#`` are ignored. Numbers may be written
as decimals (``0.25``), fractions (``1/4``) or powers (``2^-2``). Lists are
comma separated; a dyadic range ``a..b`` expands to ``a, a/2, ..., b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .errors import ParseError, ValidationError

__all__ = ["RunConfig", "parse_config", "parse_number", "parse_ladder", "COMMANDS"]

COMMANDS = ("spatial", "temporal", "deterministic", "energy", "regularity", "hs-check")
_NOISY = ("spatial", "temporal", "regularity", "hs-check")


def parse_number(text: str) -> float:
    s = text.strip()
    try:
        if "^" in s:
            base, exp = s.split("^", 1)
            return float(base) ** float(exp)
        if "/" in s:
            num, den = s.split("/", 1)
            return float(num) / float(den)
        return float(s)
    except (ValueError, ZeroDivisionError, OverflowError):
        raise ParseError(f"cannot read {text!r} as a number") from None


def parse_ladder(text: str) -> tuple[float, ...]:
    if ".." in text:
        lo, hi = (parse_number(p) for p in text.split("..", 1))
        if not (0 < hi <= lo):
            raise ParseError(f"range {text!r} must run from a larger to a smaller positive value")
        out = [lo]
        while out[-1] > hi * (1 + 1e-12):
            out.append(out[-1] / 2)
        if abs(out[-1] - hi) > 1e-12 * hi:
            raise ParseError(f"range {text!r} is not a halving sequence")
        return tuple(out)
    return tuple(parse_number(p) for p in text.split(",") if p.strip())


def _parse_int(text: str) -> int:
    try:
        return int(text.strip(), 0)
    except ValueError:
        raise ParseError(f"cannot read {text!r} as an integer") from None


def _parse_range(text: str) -> tuple[float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ParseError(f"expected 'low, high', got {text!r}")
    lo, hi = (parse_number(p) for p in parts)
    return lo, hi


def _parse_bool(text: str) -> bool:
    s = text.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"cannot read {text!r} as a boolean")


@dataclass
class RunConfig:
    command: str
    alpha: float = 1.0
    T: float = 1.0
    noise: str = "white"
    noise_r: float = 0.0
    gamma_label: float | None = None
    n_modes: int = 256
    mc_samples: int = 100
    seed: int = 0
    h_levels: tuple = (1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32)
    k_levels: tuple = (1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128)
    h_ref: float = 1 / 128
    k_ref: float = 1 / 1024
    nonlinearity: str = "sine"
    output_path: str = "out"
    sweep: str = "h"
    comparison: str = "prolong"
    hs_modes: tuple = (10, 100, 1000, 10000)
    hs_limit: float | None = None
    expect_u: tuple | None = None
    expect_v: tuple | None = None
    dump_increments: bool = False
    _given: set = field(default_factory=set, repr=False, compare=False)

    def validate(self) -> RunConfig:
        if self.command not in COMMANDS:
            raise ValidationError(f"command must be one of {', '.join(COMMANDS)}")
        if self.command in _NOISY and "noise" not in self._given:
            raise ValidationError(f"command {self.command} needs a noise line")
        if self.noise not in ("white", "fractional", "none"):
            raise ValidationError(f"noise kind {self.noise!r} is not white, fractional or none")
        if self.noise_r < 0:
            raise ValidationError("noise exponent r must be nonnegative")
        if not (self.alpha > 0 and self.T > 0):
            raise ValidationError("alpha and T must be positive")
        if self.n_modes < 1:
            raise ValidationError("n_modes must be at least 1")
        if self.mc_samples < 1:
            raise ValidationError("mc_samples must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        if self.nonlinearity not in ("zero", "sine"):
            raise ValidationError("nonlinearity must be zero or sine")
        if self.sweep not in ("h", "k"):
            raise ValidationError("sweep must be h or k")
        if self.comparison not in ("prolong", "nodal"):
            raise ValidationError("comparison must be prolong or nodal")
        for name in ("h_levels", "k_levels"):
            ladder = getattr(self, name)
            if len(ladder) < 2:
                raise ValidationError(f"{name} needs at least two levels")
            if not all(_dyadic(x) for x in ladder):
                raise ValidationError(f"{name} must be dyadic (every level 2^-m)")
            if any(b >= a for a, b in zip(ladder, ladder[1:])):
                raise ValidationError(f"{name} must be strictly decreasing")
        for name in ("h_ref", "k_ref"):
            if not _dyadic(getattr(self, name)):
                raise ValidationError(f"{name} must be dyadic (2^-m)")
        swept = {"spatial": "h", "temporal": "k"}.get(self.command)
        if self.command == "deterministic":
            swept = self.sweep
        if swept == "h" and not self.h_ref < min(self.h_levels):
            raise ValidationError("h_ref must be strictly finer than every level in h_levels")
        if swept == "k" and not self.k_ref < min(self.k_levels):
            raise ValidationError("k_ref must be strictly finer than every level in k_levels")
        if self.h_levels[0] > 0.5 or self.h_ref > 0.5:
            raise ValidationError("mesh widths must be at most 1/2")
        if abs(round(self.T / self.k_ref) * self.k_ref - self.T) > 1e-9:
            raise ValidationError("T must be an integer multiple of k_ref")
        if any(k > self.T for k in self.k_levels):
            raise ValidationError("time steps must not exceed T")
        if not self.hs_modes or any(m < 1 for m in self.hs_modes):
            raise ValidationError("hs_modes must list positive mode counts")
        if list(self.hs_modes) != sorted(set(self.hs_modes)):
            raise ValidationError("hs_modes must be strictly increasing")
        for name in ("expect_u", "expect_v"):
            rng = getattr(self, name)
            if rng is not None and not rng[0] <= rng[1]:
                raise ValidationError(f"{name} must be an interval low <= high")
        return self

    def echo(self) -> str:
        """Canonical text form that parses back to an equal configuration.

        Fields appear in declaration order with floats in ``repr`` form;
        unset optional fields are left out.
        """
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name.startswith("_") or f.name == "noise_r" or value is None:
                continue
            if f.name == "noise" and value == "fractional":
                value = f"fractional {self.noise_r!r}"
            lines.append(f"{f.name} = {_fmt(value)}")
        return "\n".join(lines) + "\n"


def _dyadic(x: float) -> bool:
    if not x > 0:
        return False
    m, e = math.frexp(x)
    return m == 0.5


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _set_noise(cfg: RunConfig, text: str):
    parts = text.split()
    if not parts:
        raise ParseError("empty noise value")
    kind = parts[0].lower()
    if kind == "fractional":
        if len(parts) != 2:
            raise ParseError("fractional noise needs one exponent, e.g. 'fractional 0.5005'")
        cfg.noise, cfg.noise_r = kind, parse_number(parts[1])
    elif kind in ("white", "none"):
        if len(parts) != 1:
            raise ParseError(f"{kind} noise takes no parameter")
        cfg.noise, cfg.noise_r = kind, 0.0
    else:
        raise ValidationError(f"noise kind {kind!r} is not white, fractional or none")


_SETTERS = {
    "command": lambda c, s: setattr(c, "command", s.strip()),
    "alpha": lambda c, s: setattr(c, "alpha", parse_number(s)),
    "T": lambda c, s: setattr(c, "T", parse_number(s)),
    "noise": _set_noise,
    "gamma_label": lambda c, s: setattr(c, "gamma_label", parse_number(s)),
    "n_modes": lambda c, s: setattr(c, "n_modes", _parse_int(s)),
    "mc_samples": lambda c, s: setattr(c, "mc_samples", _parse_int(s)),
    "seed": lambda c, s: setattr(c, "seed", _parse_int(s)),
    "h_levels": lambda c, s: setattr(c, "h_levels", parse_ladder(s)),
    "k_levels": lambda c, s: setattr(c, "k_levels", parse_ladder(s)),
    "h_ref": lambda c, s: setattr(c, "h_ref", parse_number(s)),
    "k_ref": lambda c, s: setattr(c, "k_ref", parse_number(s)),
    "nonlinearity": lambda c, s: setattr(c, "nonlinearity", s.strip()),
    "output_path": lambda c, s: setattr(c, "output_path", s.strip()),
    "sweep": lambda c, s: setattr(c, "sweep", s.strip()),
    "comparison": lambda c, s: setattr(c, "comparison", s.strip()),
    "hs_modes": lambda c, s: setattr(c, "hs_modes", tuple(_parse_int(p) for p in s.split(","))),
    "hs_limit": lambda c, s: setattr(c, "hs_limit", parse_number(s)),
    "expect_u": lambda c, s: setattr(c, "expect_u", _parse_range(s)),
    "expect_v": lambda c, s: setattr(c, "expect_v", _parse_range(s)),
    "dump_increments": lambda c, s: setattr(c, "dump_increments", _parse_bool(s)),
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration.

    Raises
    ------
    ParseError
        Malformed line, unknown or repeated key, unreadable value.
    ValidationError
        A well-formed configuration that violates a constraint.
    """
    cfg = RunConfig(command="")
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _SETTERS:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ParseError(f"line {lineno}: key {key!r} given twice")
        if not value:
            raise ParseError(f"line {lineno}: key {key!r} has no value")
        seen.add(key)
        try:
            _SETTERS[key](cfg, value)
        except ParseError as exc:
            raise ParseError(f"line {lineno}: {key}: {exc}") from None
    if "command" not in seen:
        raise ValidationError("a command line is required")
    cfg._given = seen
    return cfg.validate()
