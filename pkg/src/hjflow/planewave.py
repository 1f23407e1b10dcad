"""
Plane-wave model library
------------------------

The spinless charged particle in a plane-wave background, in light-cone
variables ``x_+ = xp``, ``x_- = xm`` and transverse ``x1, x2``.  The
background enters through ``A_a(x_-)``, ``a = 1, 2``.

The constraint is

    H'_xm = p_xm - ((p_a + e A_a)^2 + m^2) / (2 p_xp)

and ``H_tau = 0``.  This module builds the corresponding system, supplies
closed-form solutions used as test oracles, checks the Legendre map from
velocities to momenta, and provides a non-integrable negative control.

Index convention: ``x1, x2`` are the contravariant transverse coordinates
``x^a`` and ``p_x1, p_x2`` their conjugates ``pi_a``.  With signature
(+,-,-,-) the covariant components are ``x_a = -x^a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .engine import ConstrainedSystem, load_system
from .flow import PhasePoint

__all__ = [
    "PotentialSpec", "ModelParams", "LegendreReport", "PI_PLUS_EXCLUSION",
    "plane_wave_document", "plane_wave_system", "free_particle_system",
    "nonintegrable_fixture", "vector_potential", "quadrature_solution",
    "legendre_momenta", "verify_legendre", "action_integrand", "cosine_params",
    "nonintegrable_document",
]

PI_PLUS_EXCLUSION = 0.5
KINDS = ("zero", "cosine", "gaussian_pulse")


def _literal(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


@dataclass(frozen=True)
class PotentialSpec:
    """One transverse component of the vector potential.

    ``cosine``:         A(x_-) = a cos(k x_-)
    ``gaussian_pulse``: A(x_-) = a exp(-x_-^2 / (2 w^2)) cos(k x_-)
    """

    kind: str = "zero"
    amplitude: float = 0.0
    k: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if kind == "cosine" and not self.k > 0:
            raise ValueError("cosine potential needs k > 0")
        if kind == "gaussian_pulse" and not self.width > 0:
            raise ValueError("gaussian pulse needs width > 0")

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "PotentialSpec":
        unknown = set(doc) - {"kind", "amplitude", "k", "width"}
        if unknown:
            raise ValueError(f"potential: unknown keys {sorted(unknown)}")
        return cls(str(doc.get("kind", "zero")), float(doc.get("amplitude", 0.0)),
                   float(doc.get("k", 1.0)), float(doc.get("width", 1.0)))

    def to_document(self) -> dict[str, Any]:
        return {"kind": self.kind, "amplitude": self.amplitude, "k": self.k, "width": self.width}

    def expression(self, var: str = "xm") -> str:
        a, k, w = (_literal(v) for v in (self.amplitude, self.k, self.width))
        if self.kind == "zero" or self.amplitude == 0.0:
            return "0"
        if self.kind == "cosine":
            return f"{a}*cos({k}*{var})"
        return f"{a}*exp(-({var}^2)/(2*{w}^2))*cos({k}*{var})"

    def __call__(self, xm):
        xm = np.asarray(xm, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(xm)
        env = 1.0 if self.kind == "cosine" else np.exp(-xm ** 2 / (2 * self.width ** 2))
        return self.amplitude * env * np.cos(self.k * xm)

    def max_abs(self) -> float:
        return 0.0 if self.kind == "zero" else abs(self.amplitude)

    def integral(self, x0: float, x1: float) -> float:
        """Closed-form integral of A over [x0, x1] (zero/cosine only)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "cosine":
            k = self.k
            return self.amplitude * (math.sin(k * x1) - math.sin(k * x0)) / k
        raise NotImplementedError("no closed form for a gaussian pulse")

    def square_integral(self, x0: float, x1: float) -> float:
        """Closed-form integral of A^2 over [x0, x1] (zero/cosine only)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "cosine":
            k, a = self.k, self.amplitude
            return a * a * (0.5 * (x1 - x0) + (math.sin(2 * k * x1) - math.sin(2 * k * x0)) / (4 * k))
        raise NotImplementedError("no closed form for a gaussian pulse")


@dataclass(frozen=True)
class ModelParams:
    m: float = 1.0
    e: float = 1.0
    pi_plus: float = -1.0
    potential: tuple[PotentialSpec, PotentialSpec] = field(
        default_factory=lambda: (PotentialSpec(), PotentialSpec()))

    def __post_init__(self):
        pot = tuple(self.potential)
        if len(pot) == 1:
            pot = (pot[0], PotentialSpec())
        if len(pot) != 2:
            raise ValueError("need one potential entry per transverse component (two)")
        object.__setattr__(self, "potential", pot)
        if not self.m > 0:
            raise ValueError("mass must be > 0")
        if not math.isfinite(self.e):
            raise ValueError("charge must be finite")
        if not abs(self.pi_plus) >= PI_PLUS_EXCLUSION:
            raise ValueError(f"|pi_plus| must be >= {PI_PLUS_EXCLUSION}")

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "ModelParams":
        unknown = set(doc) - {"m", "e", "pi_plus", "potential"}
        if unknown:
            raise ValueError(f"model: unknown keys {sorted(unknown)}")
        pots = doc.get("potential", [])
        if not isinstance(pots, list):
            raise ValueError("model.potential must be a list")
        specs = [PotentialSpec.from_document(p) for p in pots] + [PotentialSpec()] * 2
        return cls(float(doc.get("m", 1.0)), float(doc.get("e", 1.0)),
                   float(doc.get("pi_plus", -1.0)), tuple(specs[:2]))

    def to_document(self) -> dict[str, Any]:
        return {"m": self.m, "e": self.e, "pi_plus": self.pi_plus,
                "potential": [p.to_document() for p in self.potential]}

    def with_(self, **changes) -> "ModelParams":
        from dataclasses import replace
        return replace(self, **changes)


def cosine_params(a: float = 0.3, k: float = 1.0, e: float = 1.0, m: float = 1.0,
                  pi_plus: float = -1.0) -> ModelParams:
    """Cosine wave in component 1, nothing in component 2."""
    return ModelParams(m, e, pi_plus, (PotentialSpec("cosine", a, k), PotentialSpec()))


def vector_potential(params: ModelParams, xm) -> np.ndarray:
    """``(A_1, A_2)`` at ``xm``; shape ``(2,) + shape(xm)``."""
    return np.stack([params.potential[0](xm), params.potential[1](xm)])


# ---------------------------------------------------------------------------
# systems

def plane_wave_document(params: ModelParams, name: str = "planewave") -> dict[str, Any]:
    return {
        "name": name,
        "coordinates": ["xp", "x1", "x2"],
        "parameters": ["tau", "xm"],
        "constants": {"m": params.m, "e": params.e},
        "definitions": {"A1": params.potential[0].expression(),
                        "A2": params.potential[1].expression()},
        "hamiltonians": {"tau": "0",
                         "xm": "-(((p_x1+e*A1)^2+(p_x2+e*A2)^2+m^2)/(2*p_xp))"},
        "singular": [{"symbol": "p_xp", "exclude_abs_below": PI_PLUS_EXCLUSION}],
    }


def plane_wave_system(params: ModelParams) -> ConstrainedSystem:
    return load_system(plane_wave_document(params))


def free_particle_system(m: float = 1.0, pi_plus: float = -1.0) -> ConstrainedSystem:
    return load_system(plane_wave_document(ModelParams(m, 0.0, pi_plus), name="free_particle"))


_NONINTEGRABLE_H = {"tau": "0", "s1": "p_q^2/2", "s2": "q^2/2"}


def nonintegrable_document(parameters: Sequence[str] = ("tau", "s1", "s2")) -> dict[str, Any]:
    params = list(parameters)
    unknown = set(params) - set(_NONINTEGRABLE_H)
    if unknown or not params:
        raise ValueError(f"parameters must be drawn from {sorted(_NONINTEGRABLE_H)}")
    return {
        "name": "nonintegrable",
        "coordinates": ["q"],
        "parameters": params,
        "constants": {},
        "definitions": {},
        "hamiltonians": {t: _NONINTEGRABLE_H[t] for t in params},
    }


def nonintegrable_fixture(parameters: Sequence[str] = ("tau", "s1", "s2")) -> ConstrainedSystem:
    """One coordinate, ``H_s1 = p_q^2/2``, ``H_s2 = q^2/2``: ``{H'_s1, H'_s2} = -p_q q``."""
    return load_system(nonintegrable_document(parameters))


# ---------------------------------------------------------------------------
# closed-form solution

def quadrature_solution(params: ModelParams, initial: PhasePoint, x_minus_final: float) -> PhasePoint:
    """Exact endpoint of the ``xm`` flow for zero/cosine potentials.

    Momenta are constant; with ``u_a = p_a + e A_a``:

        x^a(X)  = x^a(x0) - (1/pi_+) int u_a dxm
        x_+(X)  = x_+(x0) + (1/(2 pi_+^2)) int (u^2 + m^2) dxm
        z(X)    = z(x0) + (1/pi_+) int (e A_a u_a + m^2) dxm

    and ``p_xm`` is put back on the constraint surface.
    """
    for spec in params.potential:
        if spec.kind not in ("zero", "cosine"):
            raise NotImplementedError(f"no closed form for {spec.kind!r}; integrate numerically")
    tau, x0 = map(float, initial.t)
    xp, x1, x2 = map(float, initial.q)
    pp, p1, p2 = map(float, initial.p)
    X = float(x_minus_final)
    dx = X - x0
    e, m = params.e, params.m
    ia = [spec.integral(x0, X) for spec in params.potential]
    ia2 = [spec.square_integral(x0, X) for spec in params.potential]
    lin = [p * dx + e * i for p, i in zip((p1, p2), ia)]
    quad = [p * p * dx + 2 * p * e * i + e * e * i2 for p, i, i2 in zip((p1, p2), ia, ia2)]
    x1f = x1 - lin[0] / pp
    x2f = x2 - lin[1] / pp
    xpf = xp + (sum(quad) + m * m * dx) / (2 * pp * pp)
    zf = initial.z + (sum(e * p * i + e * e * i2 for p, i, i2 in zip((p1, p2), ia, ia2))
                      + m * m * dx) / pp
    A = vector_potential(params, X)
    pxm = ((p1 + e * A[0]) ** 2 + (p2 + e * A[1]) ** 2 + m * m) / (2 * pp)
    return PhasePoint([tau, X], [xpf, x1f, x2f], [pp, p1, p2], [initial.pt[0], pxm], zf)


def action_integrand(params: ModelParams, xm, p_xp, p_perp, p_xm) -> np.ndarray:
    """Canonical action density per unit ``xm`` written with the momenta and
    the expressible velocities,

        ((pi_a + e A_a)^2 + m^2)/(2 pi_+) + pi_+ dx_+/dxm + pi_a dx^a/dxm,

    with ``dx_+/dxm = pi_-/pi_+`` and ``dx^a/dxm = -(pi_a + e A_a)/pi_+``.
    Vectorized over samples; ``p_perp`` has shape ``(2, n)``.
    """
    xm = np.asarray(xm, dtype=float)
    A = vector_potential(params, xm)
    u = np.asarray(p_perp, dtype=float) + params.e * A
    kin = (u ** 2).sum(axis=0) + params.m ** 2
    v_plus = np.asarray(p_xm) / p_xp
    v_perp = -u / p_xp
    return kin / (2 * p_xp) + p_xp * v_plus + (np.asarray(p_perp) * v_perp).sum(axis=0)


# ---------------------------------------------------------------------------
# Legendre map

def legendre_momenta(params: ModelParams, xm: float, v_plus: float, v_minus: float,
                     v_perp: Sequence[float]) -> tuple[float, float, np.ndarray]:
    """Momenta ``(pi_+, pi_-, pi_a)`` of the reparametrization-invariant action."""
    v_perp = np.asarray(v_perp, dtype=float)
    interval = 2.0 * v_plus * v_minus - float(v_perp @ v_perp)
    if not interval > 0.0:
        raise ValueError("velocity is not timelike (2 v+ v- - v_perp^2 <= 0)")
    if v_minus == 0.0:
        raise ValueError("v_minus must be nonzero")
    root = math.sqrt(interval)
    m = params.m
    A = vector_potential(params, xm)
    pi_plus = -m * v_minus / root
    pi_minus = -m * v_plus / root
    pi_perp = m * v_perp / root - params.e * A
    return pi_plus, pi_minus, pi_perp


@dataclass(frozen=True)
class LegendreReport:
    samples: int
    mass_shell: float
    velocities: float
    canonical_hamiltonian: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.mass_shell, self.velocities, self.canonical_hamiltonian) <= self.tol


def _rel(a: float, b: float) -> float:
    return abs(a - b) / (1.0 + max(abs(a), abs(b)))


def verify_legendre(params: ModelParams, samples: int = 50, seed: int = 0,
                    tol: float = 1e-10) -> LegendreReport:
    """Check the Legendre map at seeded random timelike velocities.

    (i)   mass shell      2 pi_+ pi_- = (pi_a + e A_a)^2 + m^2
    (ii)  velocities      v_+ = (pi_-/pi_+) v_-,   v_a = ((pi_a + e A_a)/pi_+) v_-
                          where ``v_a = -v^a`` is the covariant transverse velocity
    (iii) canonical H     -L + pi_a w^a + pi_+ w_+ - v_- H_xm = 0
                          with w the expressible velocities and
                          H_xm = -((pi_a + e A_a)^2 + m^2)/(2 pi_+)

    Residuals are relative: ``|lhs - rhs| / (1 + max(|lhs|, |rhs|))``.
    """
    rng = np.random.default_rng(seed)
    m, e = params.m, params.e
    worst = [0.0, 0.0, 0.0]
    for _ in range(samples):
        xm = rng.uniform(-5.0, 5.0)
        v_plus, v_minus = rng.uniform(0.2, 2.0, size=2)
        # transverse speed strictly inside the light cone
        r = math.sqrt(2 * v_plus * v_minus) * rng.uniform(0.0, 0.9)
        ang = rng.uniform(0.0, 2 * math.pi)
        v_perp = np.array([r * math.cos(ang), r * math.sin(ang)])
        pi_plus, pi_minus, pi_perp = legendre_momenta(params, xm, v_plus, v_minus, v_perp)
        A = vector_potential(params, xm)
        u = pi_perp + e * A
        kin = float(u @ u) + m * m
        worst[0] = max(worst[0], _rel(2 * pi_plus * pi_minus, kin))

        w_plus = pi_minus / pi_plus * v_minus
        w_cov = u / pi_plus * v_minus
        worst[1] = max(worst[1], _rel(v_plus, w_plus),
                       *(_rel(-v, w) for v, w in zip(v_perp, w_cov)))

        lagrangian = (-m * math.sqrt(2 * v_plus * v_minus - float(v_perp @ v_perp))
                      - e * float(v_perp @ A))
        h_xm = -kin / (2 * pi_plus)
        w_contra = -w_cov
        h_tau = -lagrangian + float(pi_perp @ w_contra) + pi_plus * w_plus - v_minus * h_xm
        scale = abs(lagrangian) + abs(pi_plus * w_plus) + abs(v_minus * h_xm)
        worst[2] = max(worst[2], abs(h_tau) / (1.0 + scale))
    return LegendreReport(samples, *map(float, worst), tol)
