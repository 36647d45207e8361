"""Flat key-value config format with sections, parsed with line-number
tracking so every rejection points at its source line.

Grammar (documented in full in the README):

    file        := (blank | comment | section | entry)*
    comment     := ('#' | ';') .... to end of line
    section     := '[' name ']'
    entry       := key '=' value? (continuation)*
    continuation:= indented non-blank line, appended to the value

Values are whitespace-separated tokens; multi-line values hold one record
per line.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .model import (
    PlayerPopulation,
    ProvisionCost,
    Scalarization,
    build_attribute_space,
    build_joint_distribution,
    polynomial_design_space,
)
from .solver import SolverOptions


@dataclass(frozen=True)
class Entry:
    value: str
    line: int

    def lines(self):
        return [ln.strip() for ln in self.value.splitlines() if ln.strip()]


@dataclass
class RawConfig:
    sections: dict
    text: str

    @property
    def sha256(self):
        return hashlib.sha256(self.text.encode()).hexdigest()

    def section(self, name):
        return self.sections.get(name, {})

    def get(self, section, key, default=None):
        entry = self.section(section).get(key)
        return entry.value.strip() if entry is not None else default

    def line_of(self, section, key):
        entry = self.section(section).get(key)
        return entry.line if entry is not None else None


def parse_raw(text):
    sections = {}
    current = None
    last_key = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if not name:
                raise ConfigError("empty section name", lineno)
            current = sections.setdefault(name, {})
            last_key = None
            continue
        if raw[:1].isspace() and last_key is not None:
            entry = current[last_key]
            current[last_key] = Entry(entry.value + "\n" + stripped, entry.line)
            continue
        if current is None:
            raise ConfigError(f"'{stripped}' appears before any [section]", lineno)
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got '{stripped}'", lineno)
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in current:
            raise ConfigError(f"duplicate key '{key}'", lineno)
        current[key] = Entry(value.strip(), lineno)
        last_key = key
    return sections


# ---------------------------------------------------------------------------
# Token helpers
# ---------------------------------------------------------------------------

def _floats(text, line):
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got '{text}'", line) from exc


def _float(raw, section, key, default=None):
    value = raw.get(section, key)
    if value is None:
        return default
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"'{key}' must be a number, got '{value}'",
                          raw.line_of(section, key)) from exc


def _int(raw, section, key, default=None):
    value = raw.get(section, key)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"'{key}' must be an integer, got '{value}'",
                          raw.line_of(section, key)) from exc


def _grid_values(text, line):
    """'-10..10' (integer range, inclusive) or an explicit number list."""
    text = text.strip()
    if ".." in text:
        lo_s, _, hi_s = text.partition("..")
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError as exc:
            raise ConfigError(f"range bounds must be integers in '{text}'", line) from exc
        if hi < lo:
            raise ConfigError(f"empty range '{text}'", line)
        return [float(v) for v in range(lo, hi + 1)]
    return _floats(text, line)


def _n_list(text, line):
    """Explicit list '3,6,12' or 'geometric(start, ratio, max)'."""
    text = text.strip()
    if text.startswith("geometric(") and text.endswith(")"):
        parts = _floats(text[len("geometric("):-1], line)
        if len(parts) != 3:
            raise ConfigError("geometric(start, ratio, max) takes 3 numbers", line)
        start, ratio, stop = parts
        if start < 1 or ratio <= 1 or stop < start:
            raise ConfigError(f"bad geometric grid '{text}'", line)
        values = []
        current = start
        while current <= stop + 1e-9:
            values.append(int(round(current)))
            current *= ratio
        return values
    values = [int(v) for v in _floats(text, line)]
    if any(v < 1 for v in values):
        raise ConfigError("player counts must be >= 1", line)
    return values


# ---------------------------------------------------------------------------
# Section builders
# ---------------------------------------------------------------------------

def _parse_cost(tokens, line):
    if not tokens:
        raise ConfigError("empty cost spec", line)
    kind = tokens[0]
    args = tokens[1:]
    try:
        if kind == "linear":
            return ProvisionCost.linear(float(args[0]))
        if kind == "monomial":
            return ProvisionCost.monomial(float(args[0]))
        if kind == "cosh":
            return ProvisionCost.cosh_minus_one()
        if kind == "polynomial":
            pairs = [pair.split(":") for pair in " ".join(args).replace(",", " ").split()]
            coeffs = [float(c) for c, _ in pairs]
            degrees = [float(k) for _, k in pairs]
            return ProvisionCost.polynomial(coeffs, degrees)
        if kind == "monomial_sum":
            return ProvisionCost.monomial_sum(float(args[0]), float(args[1]))
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed cost spec '{' '.join(tokens)}'", line) from exc
    raise ConfigError(f"unknown cost kind '{kind}'", line)


def build_space(raw):
    sec = raw.section("space")
    if not sec:
        raise ConfigError("missing [space] section")
    kind = raw.get("space", "kind", "points")
    if kind == "polynomial":
        degree = _int(raw, "space", "degree")
        if degree is None:
            raise ConfigError("polynomial space needs 'degree'", raw.line_of("space", "kind"))
        grid_text = raw.get("space", "grid")
        if grid_text is None:
            raise ConfigError("polynomial space needs 'grid'", raw.line_of("space", "degree"))
        grid = _grid_values(grid_text, raw.line_of("space", "grid"))
        mu = _parse_mu(raw, len(grid))
        return polynomial_design_space(degree, grid, mu)
    if kind == "points":
        entry = sec.get("points")
        if entry is None:
            raise ConfigError("point space needs a 'points' block")
        points = [_floats(ln, entry.line) for ln in entry.lines()]
        mu = _parse_mu(raw, len(points))
        return build_attribute_space(points, mu)
    raise ConfigError(f"unknown space kind '{kind}'", raw.line_of("space", "kind"))


def _parse_mu(raw, m):
    text = raw.get("space", "mu")
    if text is None or text == "uniform":
        return None
    mu = _floats(text, raw.line_of("space", "mu"))
    if len(mu) != m:
        raise ConfigError(f"mu has {len(mu)} weights for {m} points",
                          raw.line_of("space", "mu"))
    return mu


def build_population(raw):
    sec = raw.section("population")
    if not sec:
        raise ConfigError("missing [population] section")
    if "identical" in sec:
        entry = sec["identical"]
        tokens = entry.value.split()
        try:
            count = int(tokens[0])
        except (IndexError, ValueError) as exc:
            raise ConfigError("'identical' needs '<count> <cost spec>'", entry.line) from exc
        return PlayerPopulation.identical(_parse_cost(tokens[1:], entry.line), count)
    entry = sec.get("types")
    if entry is None:
        raise ConfigError("population needs 'types' lines or 'identical'")
    types = []
    for ln in entry.lines():
        if " x " not in f" {ln} ":
            raise ConfigError(f"type line '{ln}' needs '<cost spec> x <count>'", entry.line)
        spec, _, count_s = ln.rpartition(" x ")
        try:
            count = int(count_s)
        except ValueError as exc:
            raise ConfigError(f"bad multiplicity '{count_s}'", entry.line) from exc
        types.append((_parse_cost(spec.split(), entry.line), count))
    return PlayerPopulation(tuple(types))


def build_scalarization(raw, space):
    sec = raw.section("scalarization")
    kind_text = raw.get("scalarization", "kind", "trace")
    tokens = kind_text.split()
    kind, args = tokens[0], tokens[1:]
    line = raw.line_of("scalarization", "kind")
    try:
        if kind == "trace":
            return Scalarization.trace()
        if kind == "pow_trace":
            return Scalarization.pow_trace(float(args[0]))
        if kind == "squared_frobenius":
            return Scalarization.squared_frobenius()
        if kind == "average_mse":
            weights_text = raw.get("scalarization", "weights")
            weights = None
            if weights_text is not None:
                weights = _floats(weights_text, raw.line_of("scalarization", "weights"))
            return Scalarization.average_mse(space, weights)
        if kind == "point_mse":
            entry = sec.get("points")
            if entry is None:
                raise ConfigError("point_mse needs a 'points' block", line)
            points = [_floats(ln, entry.line) for ln in entry.lines()]
            return Scalarization.point_mse(points)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed scalarization '{kind_text}'", line) from exc
    raise ConfigError(f"unknown scalarization '{kind}'", line)


def build_solver_options(raw, seed=None):
    opts = SolverOptions(
        tol=_float(raw, "solver", "tol", 1e-8),
        max_iters=_int(raw, "solver", "max_iters", 200_000),
        armijo_c=_float(raw, "solver", "armijo_c", 1e-4),
        shrink=_float(raw, "solver", "shrink", 0.5),
        initial_step=_float(raw, "solver", "initial_step", 1.0),
        l_max=_float(raw, "solver", "l_max", 1e6),
        init=_float(raw, "solver", "init", None),
        seed=seed,
    )
    if not opts.tol > 0:
        raise ConfigError("'tol' must be positive", raw.line_of("solver", "tol"))
    if not 0 < opts.shrink < 1:
        raise ConfigError("'shrink' must lie in (0, 1)", raw.line_of("solver", "shrink"))
    if not opts.l_max > 0:
        raise ConfigError("'l_max' must be positive", raw.line_of("solver", "l_max"))
    return opts


DEFAULT_N_GRID = [3 * 2**k for k in range(9)]

SWEEP_FAMILIES = ("monomial", "heterogeneous", "polynomial_sum", "cosh")


@dataclass(frozen=True)
class SweepSpec:
    family: str
    n_grid: tuple
    p_values: tuple  # floats (monomial) or (p_lo, p_hi) pairs
    q_values: tuple

    def series(self):
        for p in self.p_values:
            for q in self.q_values:
                yield p, q


def build_sweep(raw):
    sec = raw.section("sweep")
    if not sec:
        raise ConfigError("missing [sweep] section")
    family = raw.get("sweep", "family", "monomial")
    if family not in SWEEP_FAMILIES:
        raise ConfigError(f"unknown sweep family '{family}'", raw.line_of("sweep", "family"))
    n_text = raw.get("sweep", "n")
    if n_text is None:
        n_grid = list(DEFAULT_N_GRID)
    else:
        n_grid = _n_list(n_text, raw.line_of("sweep", "n"))
    if len(n_grid) < 3 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("sweep n-grid must be strictly increasing with >= 3 points",
                          raw.line_of("sweep", "n"))
    q_values = tuple(_floats(raw.get("sweep", "q", "1"), raw.line_of("sweep", "q")))
    p_text = raw.get("sweep", "p", "1")
    p_line = raw.line_of("sweep", "p")
    if family in ("heterogeneous", "polynomial_sum"):
        p_values = []
        for token in p_text.replace(",", " ").split():
            if ":" not in token:
                raise ConfigError(f"family '{family}' needs p as 'lo:hi' pairs", p_line)
            lo_s, _, hi_s = token.partition(":")
            p_values.append((float(lo_s), float(hi_s)))
        p_values = tuple(p_values)
    elif family == "cosh":
        p_values = ((2.0, math.inf),)
    else:
        p_values = tuple(_floats(p_text, p_line))
    return SweepSpec(family=family, n_grid=tuple(n_grid), p_values=p_values, q_values=q_values)


def sweep_population(family, p, n):
    """Population for one sweep point.

    heterogeneous: 2n/3 players at degree p_lo, the rest at p_hi.
    polynomial_sum: identical costs sum of l^k, k = p_lo..p_hi.
    cosh: identical cosh(l) - 1.
    monomial: identical l^p (linear when p == 1).
    """
    if family == "monomial":
        return PlayerPopulation.identical(ProvisionCost.monomial(p), n)
    if family == "heterogeneous":
        p_lo, p_hi = p
        n_lo = int(round(2 * n / 3))
        n_hi = n - n_lo
        lo_cost = ProvisionCost.monomial(p_lo)
        types = []
        if n_lo:
            types.append((lo_cost, n_lo))
        if n_hi:
            types.append((ProvisionCost.monomial(p_hi), n_hi))
        return PlayerPopulation(tuple(types))
    if family == "polynomial_sum":
        p_lo, p_hi = p
        return PlayerPopulation.identical(ProvisionCost.monomial_sum(p_lo, p_hi), n)
    if family == "cosh":
        return PlayerPopulation.identical(ProvisionCost.cosh_minus_one(), n)
    raise ConfigError(f"unknown sweep family '{family}'")


def build_joint(raw, space):
    sec = raw.section("joint")
    if not sec:
        return None
    entry = sec.get("support")
    if entry is None:
        raise ConfigError("[joint] needs a 'support' block")
    assignments, probs = [], []
    for ln in entry.lines():
        if ":" not in ln:
            raise ConfigError(f"joint support line '{ln}' needs 'i j ... : prob'", entry.line)
        idx_text, _, prob_text = ln.rpartition(":")
        assignments.append([int(tok) for tok in idx_text.split()])
        probs.append(float(prob_text))
    return build_joint_distribution(space, assignments, probs)


@dataclass
class GameConfig:
    space: object
    population: object
    scalarization: object
    solver_options: SolverOptions
    sweep: SweepSpec = None
    joint: object = None
    raw: RawConfig = field(default=None, repr=False)

    @property
    def sha256(self):
        return self.raw.sha256 if self.raw else ""


def parse_game_config(text, seed=None, need_population=True, need_sweep=False):
    raw = RawConfig(parse_raw(text), text)
    space = build_space(raw)
    population = None
    if need_population or raw.section("population"):
        population = build_population(raw)
    scal = build_scalarization(raw, space)
    opts = build_solver_options(raw, seed=seed)
    sweep = None
    if need_sweep or raw.section("sweep"):
        sweep = build_sweep(raw)
    joint = build_joint(raw, space)
    return GameConfig(space=space, population=population, scalarization=scal,
                      solver_options=opts, sweep=sweep, joint=joint, raw=raw)


def load_game_config(path, seed=None, need_population=True, need_sweep=False):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    return parse_game_config(text, seed=seed, need_population=need_population,
                             need_sweep=need_sweep)
