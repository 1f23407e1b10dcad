"""
Hamilton-Jacobi engine
----------------------

Load a constrained-system definition, build the extended Hamiltonians
``H'_a = p_a + H_a``, compute the matrix of extended Poisson brackets among
them and classify the constraint algebra.  Also precomputes the symbolic
right-hand sides of the total differential equations used by
:mod:`hjflow.flow`.

Naming convention: the momentum of coordinate ``c`` is ``p_c``; the
conjugate of parameter ``t`` is ``p_t``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import expr as ex
from .expr import Definition, Expr, Interval, Number, Symbol

__all__ = [
    "ConstrainedSystem", "IntegrabilityReport", "PfaffianField",
    "SystemDefinitionError", "SchemaError", "SymbolCollisionError",
    "ConjugateReferenceError", "UnknownSymbolError",
    "ABELIAN", "ON_SURFACE", "NOT_INTEGRABLE",
    "load_system", "load_system_file", "build_extended_hamiltonians",
    "integrability_matrix", "assess_brackets", "classify", "pfaffian_rhs",
    "sampling_domain",
]

ABELIAN = "abelian-first-class"
ON_SURFACE = "first-class-on-surface"
NOT_INTEGRABLE = "not-integrable"

SAMPLING_RADIUS = 2.0


class SystemDefinitionError(ValueError):
    pass


class SchemaError(SystemDefinitionError):
    pass


class SymbolCollisionError(SystemDefinitionError):
    pass


class ConjugateReferenceError(SystemDefinitionError):
    def __init__(self, parameter: str, symbol: str):
        self.symbol = symbol
        super().__init__(
            f"hamiltonians.{parameter}: H_{parameter} references parameter conjugate "
            f"'{symbol}'; H may depend on parameters, coordinates and momenta only")


class UnknownSymbolError(SystemDefinitionError):
    pass


def _momentum(name: str) -> str:
    return "p_" + name


@dataclass(frozen=True, eq=False)
class ConstrainedSystem:
    """A validated constrained system.

    ``hamiltonians`` holds the expressions as written; ``working`` holds the
    same with definitions and constants substituted, which is what every
    computation uses.
    """

    name: str
    coordinates: tuple[str, ...]
    parameters: tuple[str, ...]
    constants: Mapping[str, float]
    definitions: Mapping[str, Definition]
    hamiltonians: Mapping[str, Expr]
    working: Mapping[str, Expr]
    singular: tuple[tuple[str, float], ...] = ()
    document: Mapping[str, Any] = field(default_factory=dict, repr=False)

    @property
    def primary(self) -> str:
        return self.parameters[0]

    @property
    def momenta(self) -> tuple[str, ...]:
        return tuple(_momentum(c) for c in self.coordinates)

    @property
    def conjugates(self) -> tuple[str, ...]:
        return tuple(_momentum(t) for t in self.parameters)

    def momentum(self, coordinate: str) -> str:
        return _momentum(coordinate)

    def conjugate(self, parameter: str) -> str:
        return _momentum(parameter)

    @property
    def coordinate_pairs(self) -> tuple[tuple[str, str], ...]:
        return tuple(zip(self.coordinates, self.momenta))

    @property
    def pairs(self) -> tuple[tuple[str, str], ...]:
        """Extended conjugate pairs: coordinates first, then parameters."""
        return self.coordinate_pairs + tuple(zip(self.parameters, self.conjugates))

    @property
    def state_names(self) -> tuple[str, ...]:
        """Layout of a flat phase-space state vector."""
        return self.parameters + self.coordinates + self.momenta + self.conjugates + ("z",)

    def H(self, parameter: str) -> Expr:
        return self.working[parameter]

    def extended(self, parameter: str) -> Expr:
        return ex._add(Symbol(self.conjugate(parameter)), self.working[parameter])

    @cached_property
    def pfaffian(self) -> "PfaffianField":
        return pfaffian_rhs(self)

    def exclusions(self) -> dict[str, float]:
        return dict(self.singular)


# ---------------------------------------------------------------------------
# loading

_KEYS = ("name", "coordinates", "parameters", "constants", "definitions", "hamiltonians")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def _parse_at(text: Any, path: str) -> Expr:
    _require(isinstance(text, str), f"{path}: expected an expression string")
    try:
        return ex.parse(text)
    except ex.ParseError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _definition_key(key: str) -> tuple[str, tuple[str, ...]]:
    key = key.strip()
    if "(" not in key:
        _require(ex.is_identifier(key), f"definitions: invalid name {key!r}")
        return key, ()
    name, _, rest = key.partition("(")
    _require(rest.endswith(")"), f"definitions: malformed key {key!r}")
    params = tuple(p.strip() for p in rest[:-1].split(",") if p.strip())
    _require(ex.is_identifier(name.strip()) and all(ex.is_identifier(p) for p in params),
             f"definitions: malformed key {key!r}")
    return name.strip(), params


def load_system(doc: Mapping[str, Any]) -> ConstrainedSystem:
    """Validate a system-definition document and build a :class:`ConstrainedSystem`."""
    _require(isinstance(doc, Mapping), "system document must be a JSON object")
    for k in ("name", "coordinates", "parameters", "hamiltonians"):
        _require(k in doc, f"missing required key {k!r}")
    unknown = set(doc) - set(_KEYS) - {"singular", "description"}
    _require(not unknown, f"unknown keys: {', '.join(sorted(unknown))}")

    name = doc["name"]
    _require(isinstance(name, str), "name: expected a string")
    coords = doc["coordinates"]
    params = doc["parameters"]
    _require(isinstance(coords, list) and all(isinstance(c, str) for c in coords),
             "coordinates: expected a list of names")
    _require(isinstance(params, list) and params and all(isinstance(t, str) for t in params),
             "parameters: expected a non-empty list of names")
    constants = doc.get("constants", {})
    _require(isinstance(constants, Mapping), "constants: expected an object")
    for k, v in constants.items():
        _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                 f"constants.{k}: expected a number")
    definitions_doc = doc.get("definitions", {})
    _require(isinstance(definitions_doc, Mapping), "definitions: expected an object")
    hams_doc = doc["hamiltonians"]
    _require(isinstance(hams_doc, Mapping), "hamiltonians: expected an object")
    singular_doc = doc.get("singular", [])
    _require(isinstance(singular_doc, list), "singular: expected a list")

    # symbol bookkeeping
    user: dict[str, str] = {}

    def claim(sym: str, role: str) -> None:
        if not ex.is_identifier(sym):
            raise SchemaError(f"{role}: invalid identifier {sym!r}")
        if sym in ex.BUILTINS:
            raise SymbolCollisionError(f"{role} '{sym}' shadows a built-in function")
        if sym in user:
            raise SymbolCollisionError(f"symbol '{sym}' used as both {user[sym]} and {role}")
        user[sym] = role

    for c in coords:
        claim(c, "coordinate")
    for t in params:
        claim(t, "parameter")
    for k in constants:
        claim(k, "constant")
    definitions: dict[str, Definition] = {}
    for key, body in definitions_doc.items():
        dname, formals = _definition_key(key)
        claim(dname, "definition")
        definitions[dname] = Definition(formals, _parse_at(body, f"definitions.{key}"))
    for c in list(coords) + list(params):
        claim(_momentum(c), f"momentum of {c}")

    _require(set(hams_doc) == set(params),
             "hamiltonians: need exactly one entry per parameter "
             f"(got {sorted(hams_doc)}, parameters {params})")
    raw = {t: _parse_at(hams_doc[t], f"hamiltonians.{t}") for t in params}

    consts = {k: Number(float(v)) for k, v in constants.items()}
    allowed = set(params) | set(coords) | {_momentum(c) for c in coords}
    conj = {_momentum(t) for t in params}
    working: dict[str, Expr] = {}
    for t in params:
        try:
            h = ex.substitute(raw[t], definitions)
        except ex.SubstitutionError as exc:
            raise SchemaError(f"hamiltonians.{t}: {exc}") from exc
        h = ex.fold(ex.substitute(h, consts))
        syms = ex.free_symbols(h)
        bad_conj = sorted(syms & conj)
        if bad_conj:
            raise ConjugateReferenceError(t, bad_conj[0])
        stray = sorted(syms - allowed)
        if stray:
            raise UnknownSymbolError(f"hamiltonians.{t}: unknown symbol(s) {', '.join(stray)}")
        funcs = sorted(ex.function_names(h) - set(ex.BUILTINS))
        if funcs:
            raise UnknownSymbolError(f"hamiltonians.{t}: undefined function(s) {', '.join(funcs)}")
        working[t] = h

    singular = []
    phase = allowed | conj
    for i, entry in enumerate(singular_doc):
        _require(isinstance(entry, Mapping) and "symbol" in entry and "exclude_abs_below" in entry,
                 f"singular[{i}]: expected {{'symbol', 'exclude_abs_below'}}")
        sym, bound = entry["symbol"], entry["exclude_abs_below"]
        _require(sym in phase, f"singular[{i}]: unknown phase-space symbol {sym!r}")
        _require(isinstance(bound, (int, float)) and bound >= 0, f"singular[{i}]: bound must be >= 0")
        singular.append((sym, float(bound)))

    return ConstrainedSystem(
        name=name,
        coordinates=tuple(coords),
        parameters=tuple(params),
        constants={k: float(v) for k, v in constants.items()},
        definitions=definitions,
        hamiltonians=raw,
        working=working,
        singular=tuple(singular),
        document=json.loads(json.dumps(doc)),
    )


def load_system_file(path: str | Path) -> ConstrainedSystem:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return load_system(doc)


def build_extended_hamiltonians(sys: ConstrainedSystem) -> list[tuple[str, Expr]]:
    return [(t, sys.extended(t)) for t in sys.parameters]


# ---------------------------------------------------------------------------
# integrability

def sampling_domain(sys: ConstrainedSystem, radius: float = SAMPLING_RADIUS) -> dict[str, Interval]:
    """Default sampling box ``[-radius, radius]`` for every extended phase-space
    symbol, honouring the system's singular exclusions."""
    excl = sys.exclusions()
    out = {}
    for q, p in sys.pairs:
        for s in (q, p):
            b = excl.get(s, 0.0)
            r = max(radius, 2.0 * b)
            out[s] = Interval(-r, r, b)
    return out


@dataclass(frozen=True)
class IntegrabilityReport:
    parameters: tuple[str, ...]
    bracket_matrix: tuple[tuple[Expr, ...], ...]
    zero_flags_identically: tuple[tuple[bool, ...], ...]
    zero_flags_on_surface: tuple[tuple[bool, ...], ...]
    witnesses: Mapping[tuple[int, int], dict[str, float]]
    classification: str
    seed: int = 0
    samples: int = 20
    tol: float = 1e-9

    def entry(self, a: str, b: str) -> Expr:
        i, j = self.parameters.index(a), self.parameters.index(b)
        return self.bracket_matrix[i][j]


def _classify_flags(ident, surface) -> str:
    if all(all(row) for row in ident):
        return ABELIAN
    if all(all(row) for row in surface):
        return ON_SURFACE
    return NOT_INTEGRABLE


def assess_brackets(
    parameters: Sequence[str],
    matrix: Sequence[Sequence[Expr]],
    domain: Mapping[str, Interval],
    surface: Mapping[str, Expr],
    seed: int = 42,
    samples: int = 20,
    tol: float = 1e-9,
) -> IntegrabilityReport:
    """Zero-test every entry of a bracket matrix freely and on the surface
    defined by ``surface`` (symbol -> expression of the free symbols)."""
    n = len(parameters)
    ident, onsurf = [], []
    witnesses: dict[tuple[int, int], dict[str, float]] = {}
    free_domain = dict(domain)
    for i in range(n):
        row_i, row_s = [], []
        for j in range(n):
            e = matrix[i][j]
            # distinct but reproducible stream per entry
            z = ex.is_zero(e, free_domain, samples, seed + 7919 * (i * n + j), tol)
            s = ex.is_zero(e, free_domain, samples, seed + 7919 * (i * n + j), tol, dependent=surface)
            row_i.append(z.verdict)
            row_s.append(s.verdict)
            if not s.verdict:
                witnesses[(i, j)] = s.witness
            elif not z.verdict:
                witnesses[(i, j)] = z.witness
        ident.append(tuple(row_i))
        onsurf.append(tuple(row_s))
    return IntegrabilityReport(
        parameters=tuple(parameters),
        bracket_matrix=tuple(tuple(r) for r in matrix),
        zero_flags_identically=tuple(ident),
        zero_flags_on_surface=tuple(onsurf),
        witnesses=witnesses,
        classification=_classify_flags(ident, onsurf),
        seed=seed, samples=samples, tol=tol,
    )


def integrability_matrix(
    sys: ConstrainedSystem, seed: int = 42, samples: int = 20, tol: float = 1e-9
) -> IntegrabilityReport:
    """Extended Poisson brackets ``{H'_a, H'_b}`` over all conjugate pairs,
    zero-tested freely and with ``p_a := -H_a`` (on the constraint surface)."""
    hp = [h for _, h in build_extended_hamiltonians(sys)]
    matrix = [[ex.poisson_bracket(f, g, sys.pairs) for g in hp] for f in hp]
    surface = {sys.conjugate(t): ex.Neg(sys.H(t)) for t in sys.parameters}
    return assess_brackets(sys.parameters, matrix, sampling_domain(sys), surface, seed, samples, tol)


def _fmt_point(point: Mapping[str, float]) -> str:
    return ", ".join(f"{k}={v + 0.0:.6g}" for k, v in sorted(point.items()))


def classify(report: IntegrabilityReport) -> tuple[str, str]:
    """Classification and a human-readable table of nonzero brackets."""
    cls = _classify_flags(report.zero_flags_identically, report.zero_flags_on_surface)
    lines = [f"classification: {cls}"]
    names = report.parameters
    offending = []
    for (i, j), point in sorted(report.witnesses.items()):
        if i >= j:
            continue
        e = report.bracket_matrix[i][j]
        where = "on surface" if not report.zero_flags_on_surface[i][j] else "off surface only"
        try:
            value = ex.evaluate(e, point)
        except ex.EvaluationError:
            value = float("nan")
        offending.append(
            f"  {{H'_{names[i]}, H'_{names[j]}}} = {ex.to_string(e)}  "
            f"[nonzero {where}; value {value:.6g} at {_fmt_point(point)}]")
    if offending:
        lines.append("nonzero brackets:")
        lines.extend(offending)
    else:
        lines.append("all brackets vanish")
    return cls, "\n".join(lines)


# ---------------------------------------------------------------------------
# total differential equations

@dataclass(frozen=True, eq=False)
class PfaffianField:
    """Symbolic right-hand sides of the total differential equations.

    For each parameter ``a`` (row):

    - ``dq[a][i]  =  dH'_a/dp_i``
    - ``dp[a][i]  = -dH'_a/dq_i``
    - ``dpt[a][b] = -dH'_a/dt_b``
    - ``dz[a]     = -H_a + sum_i p_i dH'_a/dp_i``
    """

    system: ConstrainedSystem
    dq: tuple[tuple[Expr, ...], ...]
    dp: tuple[tuple[Expr, ...], ...]
    dpt: tuple[tuple[Expr, ...], ...]
    dz: tuple[Expr, ...]

    def row(self, a: int) -> tuple[Expr, ...]:
        """Full state derivative along parameter ``a`` in ``state_names`` layout."""
        sys = self.system
        dt = tuple(Number(1.0 if b == a else 0.0) for b in range(len(sys.parameters)))
        return dt + self.dq[a] + self.dp[a] + self.dpt[a] + (self.dz[a],)

    @cached_property
    def compiled(self) -> tuple:
        names = self.system.state_names
        return tuple(ex.lambdify(self.row(a), names) for a in range(len(self.system.parameters)))

    @cached_property
    def compiled_hprime(self):
        sys = self.system
        return ex.lambdify([sys.extended(t) for t in sys.parameters], sys.state_names)


def pfaffian_rhs(sys: ConstrainedSystem) -> PfaffianField:
    dq, dp, dpt, dz = [], [], [], []
    for t in sys.parameters:
        hprime = sys.extended(t)
        dq_a = tuple(ex.differentiate(hprime, p) for p in sys.momenta)
        dp_a = tuple(ex._neg(ex.differentiate(hprime, q)) for q in sys.coordinates)
        dpt_a = tuple(ex._neg(ex.differentiate(hprime, s)) for s in sys.parameters)
        action: Expr = ex._neg(sys.H(t))
        for p, d in zip(sys.momenta, dq_a):
            action = ex._add(action, ex._mul(Symbol(p), d))
        dq.append(dq_a)
        dp.append(dp_a)
        dpt.append(dpt_a)
        dz.append(action)
    return PfaffianField(sys, tuple(dq), tuple(dp), tuple(dpt), tuple(dz))
