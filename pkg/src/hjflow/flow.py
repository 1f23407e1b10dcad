"""
Multi-parameter flow
--------------------

Fixed-step RK4 integration of the total differential equations

    dq = dH'/dp dt,  dp = -dH'/dq dt,  dp_b = -dH'/dt_b dt,  dz = (-H + p dH'/dp) dt

(summed over parameters) along piecewise-linear paths in parameter space,
a numerical path-independence check, and a gauge-fixed Dirac reference
integrator used for cross-validation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence, TextIO

import numpy as np

from . import expr as ex
from .engine import ConstrainedSystem
from .expr import Expr, Symbol

__all__ = [
    "PhasePoint", "ParameterPath", "TrajectoryRecord", "PathCheck",
    "FlowError", "SingularityError", "NonFiniteError", "OffSurfaceError",
    "PathMismatchError", "GaugeError",
    "make_path", "path_from_document", "point_from_document", "integrate",
    "path_independence_check", "dirac_reference", "write_trajectory_csv",
]

ON_SURFACE_TOL = 1e-12


class FlowError(RuntimeError):
    pass


class SingularityError(FlowError):
    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} (step {step})")


class NonFiniteError(FlowError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite state produced at step {step}")


class OffSurfaceError(ValueError):
    pass


class PathMismatchError(ValueError):
    pass


class GaugeError(FlowError):
    pass


# ---------------------------------------------------------------------------
# phase points

@dataclass(frozen=True)
class PhasePoint:
    """Extended phase-space point ``(t, q, p, p_t, z)``."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    pt: np.ndarray
    z: float = 0.0

    def __post_init__(self):
        for name in ("t", "q", "p", "pt"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "z", float(self.z))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.t, self.q, self.p, self.pt, [self.z]])

    @classmethod
    def from_vector(cls, sys: ConstrainedSystem, x: np.ndarray) -> "PhasePoint":
        nt, nq = len(sys.parameters), len(sys.coordinates)
        return cls(x[:nt], x[nt:nt + nq], x[nt + nq:nt + 2 * nq],
                   x[nt + 2 * nq:2 * nt + 2 * nq], x[-1])

    @classmethod
    def on_surface(cls, sys: ConstrainedSystem, t, q, p, z: float = 0.0) -> "PhasePoint":
        """Point with every parameter conjugate set to ``-H_a(t, q, p)``."""
        t = np.asarray(t, dtype=float)
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        _check_dims(sys, t, q, p)
        b = _bindings(sys, t, q, p)
        pt = [-ex.evaluate(sys.H(s), b) for s in sys.parameters]
        return cls(t, q, p, pt, z)

    def validate(self, sys: ConstrainedSystem) -> None:
        _check_dims(sys, self.t, self.q, self.p)
        if len(self.pt) != len(sys.parameters):
            raise ValueError(f"expected {len(sys.parameters)} parameter conjugates, got {len(self.pt)}")

    def constraint_values(self, sys: ConstrainedSystem) -> np.ndarray:
        """``H'_a`` at this point."""
        return np.array(sys.pfaffian.compiled_hprime(*self.as_vector()))

    def is_on_surface(self, sys: ConstrainedSystem, tol: float = ON_SURFACE_TOL) -> bool:
        return bool(np.all(np.abs(self.constraint_values(sys)) <= tol))


def _check_dims(sys: ConstrainedSystem, t, q, p) -> None:
    if len(t) != len(sys.parameters):
        raise ValueError(f"expected {len(sys.parameters)} parameter values, got {len(t)}")
    if len(q) != len(sys.coordinates) or len(p) != len(sys.coordinates):
        raise ValueError(f"expected {len(sys.coordinates)} coordinates and momenta")


def _bindings(sys: ConstrainedSystem, t, q, p) -> dict[str, float]:
    b = dict(zip(sys.parameters, map(float, t)))
    b.update(zip(sys.coordinates, map(float, q)))
    b.update(zip(sys.momenta, map(float, p)))
    return b


def point_from_document(sys: ConstrainedSystem, doc: Mapping[str, Any],
                        allow_off_surface: bool = False) -> PhasePoint:
    """Build the initial point from an initial-state document.

    Missing coordinates, momenta and parameters default to 0.  Momenta may
    be keyed by coordinate name or by momentum symbol.
    """
    if not isinstance(doc, Mapping):
        raise ValueError("initial state must be a JSON object")
    unknown = set(doc) - {"coordinates", "momenta", "parameters", "conjugates", "on_surface", "z"}
    if unknown:
        raise ValueError(f"initial state: unknown keys {sorted(unknown)}")

    def pick(section: str, names: Sequence[str], aliases: Sequence[str] = ()) -> list[float]:
        values = doc.get(section, {})
        if not isinstance(values, Mapping):
            raise ValueError(f"initial state: {section} must be an object")
        lookup = dict(zip(aliases, names))
        out = dict.fromkeys(names, 0.0)
        for k, v in values.items():
            key = k if k in out else lookup.get(k)
            if key is None:
                raise ValueError(f"initial state: unknown {section} entry {k!r}")
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"initial state: {section}.{k} must be a finite number")
            out[key] = float(v)
        return [out[n] for n in names]

    t = pick("parameters", sys.parameters)
    q = pick("coordinates", sys.coordinates)
    p = pick("momenta", sys.coordinates, sys.momenta)
    z = float(doc.get("z", 0.0))
    if doc.get("on_surface") is True:
        if "conjugates" in doc:
            raise ValueError("initial state: give either 'conjugates' or 'on_surface', not both")
        return PhasePoint.on_surface(sys, t, q, p, z)
    if "conjugates" not in doc:
        raise ValueError("initial state: need 'conjugates' or \"on_surface\": true")
    pt = pick("conjugates", sys.parameters, sys.conjugates)
    point = PhasePoint(t, q, p, pt, z)
    if not allow_off_surface and not point.is_on_surface(sys):
        raise OffSurfaceError(
            f"initial point is off the constraint surface (max |H'| = "
            f"{np.max(np.abs(point.constraint_values(sys))):.3g})")
    return point


# ---------------------------------------------------------------------------
# paths

@dataclass(frozen=True)
class ParameterPath:
    """Piecewise-linear path through parameter space."""

    waypoints: np.ndarray

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "waypoints", w)

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())

    @property
    def total_variation(self) -> float:
        return float(np.abs(np.diff(self.waypoints, axis=0)).sum())

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]

    def at(self, s: float) -> np.ndarray:
        """Point at arclength fraction ``s`` in [0, 1]."""
        lengths = self.segment_lengths
        total = lengths.sum()
        if total == 0.0:
            return self.waypoints[0].copy()
        target = min(max(s, 0.0), 1.0) * total
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        i = int(np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(lengths) - 1))
        frac = 0.0 if lengths[i] == 0 else (target - cum[i]) / lengths[i]
        return self.waypoints[i] + frac * (self.waypoints[i + 1] - self.waypoints[i])

    def allocate_steps(self, steps: int) -> list[int]:
        """Split ``steps`` across segments proportionally to length; every
        non-degenerate segment gets at least one step."""
        lengths = self.segment_lengths
        total = lengths.sum()
        if total == 0.0:
            return [steps] + [0] * (len(lengths) - 1)
        live = lengths > 0
        if steps < int(live.sum()):
            raise ValueError(f"need at least {int(live.sum())} steps for this path")
        raw = steps * lengths / total
        alloc = np.where(live, np.maximum(np.floor(raw), 1), 0).astype(int)
        # largest remainder, deterministic tie-break by index
        while alloc.sum() < steps:
            rem = np.where(live, raw - alloc, -np.inf)
            alloc[int(np.argmax(rem))] += 1
        while alloc.sum() > steps:
            rem = np.where(alloc > 1, raw - alloc, np.inf)
            alloc[int(np.argmin(rem))] -= 1
        return alloc.tolist()


def make_path(waypoints: Sequence, parameters: Sequence[str] | None = None) -> ParameterPath:
    """Path from waypoints given as sequences or as ``{parameter: value}`` maps."""
    if len(waypoints) < 2:
        raise ValueError("a path needs at least 2 waypoints")
    rows = []
    for i, w in enumerate(waypoints):
        if isinstance(w, Mapping):
            if parameters is None:
                raise ValueError("parameter names are required for mapping waypoints")
            extra = set(w) - set(parameters)
            if extra or len(w) != len(parameters):
                raise ValueError(f"waypoint {i}: expected keys {list(parameters)}, got {sorted(w)}")
            rows.append([float(w[t]) for t in parameters])
        else:
            rows.append([float(v) for v in w])
    dim = len(rows[0]) if parameters is None else len(parameters)
    for i, r in enumerate(rows):
        if len(r) != dim:
            raise ValueError(f"waypoint {i} has dimension {len(r)}, expected {dim}")
        if not all(math.isfinite(v) for v in r):
            raise ValueError(f"waypoint {i} is not finite")
    return ParameterPath(np.array(rows))


def path_from_document(sys: ConstrainedSystem, doc: Mapping[str, Any]) -> ParameterPath:
    if not isinstance(doc, Mapping) or not isinstance(doc.get("waypoints"), list):
        raise ValueError("path document must be an object with a 'waypoints' list")
    return make_path(doc["waypoints"], sys.parameters)


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Snapshots at integrator step boundaries (``steps + 1`` rows)."""

    system: ConstrainedSystem
    s: np.ndarray
    states: np.ndarray
    hprime: np.ndarray
    lambdas: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.s) - 1

    def __len__(self) -> int:
        return len(self.s)

    def point(self, i: int) -> PhasePoint:
        return PhasePoint.from_vector(self.system, self.states[i])

    @property
    def snapshots(self) -> list[PhasePoint]:
        return [self.point(i) for i in range(len(self.s))]

    @property
    def final(self) -> PhasePoint:
        return self.point(-1)

    def column(self, name: str) -> np.ndarray:
        names = self.system.state_names
        if name in names:
            return self.states[:, names.index(name)]
        if name.startswith("Hprime_") and name[7:] in self.system.parameters:
            return self.hprime[:, self.system.parameters.index(name[7:])]
        if name == "s":
            return self.s
        if name == "lambda" and self.lambdas is not None:
            return self.lambdas
        raise KeyError(name)

    def max_abs_hprime(self) -> float:
        return float(np.max(np.abs(self.hprime)))

    def header(self) -> list[str]:
        cols = ["s", *self.system.state_names, *(f"Hprime_{t}" for t in self.system.parameters)]
        if self.lambdas is not None:
            cols.append("lambda")
        return cols

    def rows(self):
        for i in range(len(self.s)):
            row = [self.s[i], *self.states[i], *self.hprime[i]]
            if self.lambdas is not None:
                row.append(self.lambdas[i])
            yield row


def write_trajectory_csv(record: TrajectoryRecord, out: TextIO | None = None) -> str:
    """CSV with 17 significant digits; returns the text when ``out`` is None."""
    buf = io.StringIO() if out is None else out
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(record.header())
    for row in record.rows():
        w.writerow([format(float(v), ".17g") for v in row])
    return buf.getvalue() if out is None else ""


class _Guard:
    """Singular-locus and finiteness checks on a flat state."""

    def __init__(self, sys: ConstrainedSystem):
        names = sys.state_names
        self.checks = [(names.index(s), b, s) for s, b in sys.singular if s in names]

    def __call__(self, x: np.ndarray, step: int) -> None:
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(step)
        for idx, bound, sym in self.checks:
            if abs(x[idx]) < bound:
                raise SingularityError(f"|{sym}| = {abs(x[idx]):.3g} fell below {bound}", step)


def _rk4(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _segment_rhs(rows, direction: np.ndarray, step: int):
    active = [(float(d), rows[a]) for a, d in enumerate(direction) if d != 0.0]

    def f(x: np.ndarray) -> np.ndarray:
        out = None
        try:
            for d, row in active:
                v = np.array(row(*x))
                out = d * v if out is None else out + d * v
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise SingularityError(f"evaluation failed: {exc}", step) from exc
        return out if out is not None else np.zeros_like(x)

    return f


def integrate(
    sys: ConstrainedSystem,
    initial: PhasePoint,
    path: ParameterPath,
    steps: int,
    allow_off_surface: bool = False,
) -> TrajectoryRecord:
    """RK4 integration of the total differential equations along ``path``.

    Steps are allocated to path segments in proportion to their length so
    that step boundaries fall on every waypoint.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    initial.validate(sys)
    if path.waypoints.shape[1] != len(sys.parameters):
        raise ValueError("path dimension does not match the system's parameters")
    if not np.allclose(initial.t, path.start, rtol=0, atol=1e-12):
        raise PathMismatchError(f"initial parameters {initial.t.tolist()} differ from path start "
                                f"{path.start.tolist()}")
    if not allow_off_surface and not initial.is_on_surface(sys):
        raise OffSurfaceError("initial point is off the constraint surface")

    field_ = sys.pfaffian
    rows = field_.compiled
    hprime = field_.compiled_hprime
    guard = _Guard(sys)

    x = initial.as_vector()
    nt = len(sys.parameters)
    x[:nt] = path.start
    guard(x, 0)
    alloc = path.allocate_steps(steps)
    lengths = path.segment_lengths
    total = lengths.sum()

    s_out = np.empty(steps + 1)
    states = np.empty((steps + 1, len(x)))
    hp = np.empty((steps + 1, nt))
    s_out[0], states[0], hp[0] = 0.0, x, hprime(*x)
    k = 0
    s_base = 0.0
    for seg, n in enumerate(alloc):
        if n == 0:
            s_base += lengths[seg]
            continue
        a, b = path.waypoints[seg], path.waypoints[seg + 1]
        direction = b - a
        h = 1.0 / n
        for i in range(n):
            f = _segment_rhs(rows, direction, k + 1)
            x = _rk4(f, x, h)
            # pin parameters to the exact path to avoid drift in t
            x[:nt] = a + (i + 1) * h * direction
            k += 1
            guard(x, k)
            s_out[k] = (s_base + (i + 1) * h * lengths[seg]) / total if total else k / steps
            states[k] = x
            try:
                hp[k] = hprime(*x)
            except (ZeroDivisionError, ValueError, OverflowError) as exc:
                raise SingularityError(f"evaluation failed: {exc}", k) from exc
        s_base += lengths[seg]
    s_out[-1] = 1.0
    return TrajectoryRecord(sys, s_out, states, hp)


@dataclass(frozen=True)
class PathCheck:
    max_discrepancy: float
    table: dict[str, float]
    record_a: TrajectoryRecord = field(repr=False)
    record_b: TrajectoryRecord = field(repr=False)


def path_independence_check(
    sys: ConstrainedSystem,
    initial: PhasePoint,
    path_a: ParameterPath,
    path_b: ParameterPath,
    steps: int,
    allow_off_surface: bool = False,
) -> PathCheck:
    """Integrate along two paths with common endpoints and compare the endpoints."""
    if path_a.waypoints.shape[1] != path_b.waypoints.shape[1]:
        raise PathMismatchError("paths have different dimensions")
    if not (np.array_equal(path_a.start, path_b.start) and np.array_equal(path_a.end, path_b.end)):
        raise PathMismatchError("paths must share first and last waypoints")
    ra = integrate(sys, initial, path_a, steps, allow_off_surface)
    rb = integrate(sys, initial, path_b, steps, allow_off_surface)
    diff = np.abs(ra.states[-1] - rb.states[-1])
    table = dict(zip(sys.state_names, diff.tolist()))
    return PathCheck(float(diff.max()), table, ra, rb)


# ---------------------------------------------------------------------------
# Dirac gauge-fixed reference

def dirac_reference(
    sys: ConstrainedSystem,
    constraint: Expr | str,
    gauge: Expr | str,
    initial: PhasePoint,
    tau_range: tuple[float, float],
    steps: int,
    gauge_tol: float = 1e-10,
) -> TrajectoryRecord:
    """Dirac evolution in the primary parameter with a time-dependent gauge.

    The non-primary parameters are promoted to canonical coordinates (with
    their conjugates as momenta).  The total Hamiltonian is
    ``H_T = H_primary + lam * constraint``; ``lam`` is recomputed at every
    RK stage from conservation of the gauge condition,

        lam = -(d gauge/d tau + {gauge, H_primary}) / {gauge, constraint},

    which for a vanishing primary Hamiltonian is ``-(d gauge/d tau) / {gauge, constraint}``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    constraint = ex.as_expr(constraint)
    gauge = ex.as_expr(gauge)
    initial.validate(sys)
    tau = sys.primary
    h0 = sys.H(tau)
    pairs = sys.coordinate_pairs + tuple(zip(sys.parameters[1:], sys.conjugates[1:]))
    names = sys.state_names
    known = set(names)
    for label, e in (("constraint", constraint), ("gauge", gauge)):
        stray = sorted(ex.free_symbols(e) - known)
        if stray:
            raise ValueError(f"{label} references unknown symbol(s) {', '.join(stray)}")
    if tau not in ex.free_symbols(gauge):
        raise GaugeError("gauge must depend explicitly on the primary parameter")

    num = ex._add(ex.differentiate(gauge, tau), ex.poisson_bracket(gauge, h0, pairs))
    den = ex.poisson_bracket(gauge, constraint, pairs)
    lam_parts = ex.lambdify([num, den], names)

    # state derivative wrt tau for H = w0*H_primary + w1*constraint
    def generator_rows(h: Expr) -> tuple[Expr, ...]:
        rows: dict[str, Expr] = {}
        for q, p in pairs:
            rows[q] = ex.differentiate(h, p)
            rows[p] = ex._neg(ex.differentiate(h, q))
        rows[sys.conjugate(tau)] = ex._neg(ex.differentiate(h, tau))
        action = ex._neg(h)
        for q, p in pairs:
            action = ex._add(action, ex._mul(Symbol(p), rows[q]))
        rows["z"] = action
        return tuple(rows.get(n, ex.ZERO) for n in names)

    rhs0 = ex.lambdify(generator_rows(h0), names)
    rhs1 = ex.lambdify(generator_rows(constraint), names)
    i_tau = names.index(tau)
    guard = _Guard(sys)
    hprime = sys.pfaffian.compiled_hprime

    def lam_at(x: np.ndarray, step: int) -> float:
        try:
            n_, d_ = lam_parts(*x)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise SingularityError(f"evaluation failed: {exc}", step) from exc
        if d_ == 0.0:
            raise GaugeError(f"gauge is degenerate: {{gauge, constraint}} = 0 at step {step}")
        return -n_ / d_

    def make_f(step: int):
        def f(x: np.ndarray) -> np.ndarray:
            lam = lam_at(x, step)
            try:
                v = np.array(rhs0(*x)) + lam * np.array(rhs1(*x))
            except (ZeroDivisionError, ValueError, OverflowError) as exc:
                raise SingularityError(f"evaluation failed: {exc}", step) from exc
            v[i_tau] = 1.0
            return v
        return f

    t0, t1 = map(float, tau_range)
    x = initial.as_vector()
    x[i_tau] = t0
    g0 = ex.evaluate(gauge, dict(zip(names, x)))
    if abs(g0) > gauge_tol:
        raise GaugeError(f"initial point violates the gauge condition (value {g0:.3g})")
    guard(x, 0)
    h = (t1 - t0) / steps
    s_out = np.linspace(0.0, 1.0, steps + 1)
    states = np.empty((steps + 1, len(x)))
    hp = np.empty((steps + 1, len(sys.parameters)))
    lams = np.empty(steps + 1)
    states[0], hp[0], lams[0] = x, hprime(*x), lam_at(x, 0)
    for k in range(1, steps + 1):
        x = _rk4(make_f(k), x, h)
        x[i_tau] = t0 + k * h
        guard(x, k)
        states[k] = x
        hp[k] = hprime(*x)
        lams[k] = lam_at(x, k)
    return TrajectoryRecord(sys, s_out, states, hp, lams)
