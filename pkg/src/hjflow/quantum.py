"""
Light-cone quantum evolution
----------------------------

Wavefunctions at fixed light-cone momentum ``pi_+`` on a periodic
transverse grid, evolved in ``x_-`` by

    i dphi/dx_- = K phi,     K = -((p_a + e A_a(x_-))^2 + m^2) / (2 pi_+),

where ``p_a = -i d/dx^a``.  The full wavefunction is
``exp(i pi_+ x_+) phi``; the ``x_+`` factor is carried analytically.

``K`` is diagonal in transverse momentum for every ``x_-``, so each step
is one phase multiplication in momentum space with ``A_a`` frozen at the
step midpoint.  The same short-time factor, composed as matrices, gives
the time-sliced path-integral kernel.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import scipy.fft as sfft

from .flow import PhasePoint, TrajectoryRecord, integrate, make_path
from .planewave import ModelParams, plane_wave_system

__all__ = [
    "GridSpec", "WaveGrid", "Observables", "Evolution", "EhrenfestReport", "KernelMatrix",
    "ResolutionError", "KernelError",
    "init_gaussian", "observables", "evolve_splitstep", "ehrenfest_compare",
    "kg_residual", "kg_residual_profile", "sliced_kernel", "apply_kernel",
    "continuum_kernel", "write_observables_csv", "write_wavefunction", "read_wavefunction",
]

TAIL_FRACTION = 2.0 / 3.0
BOUNDARY_FRACTION = 1.0 / 16.0
DUMP_MAGIC = b"HJFLOWWF"


class ResolutionError(ValueError):
    """The grid or step size cannot represent the requested evolution."""


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Periodic transverse grid ``[-l/2, l/2)^d`` with ``n`` points per axis."""

    d: int
    n: int
    l: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("transverse dimension must be 1 or 2")
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two >= 4")
        if not self.l > 0:
            raise ValueError("box length must be > 0")

    @property
    def dx(self) -> float:
        return self.l / self.n

    @property
    def axis(self) -> np.ndarray:
        return -0.5 * self.l + self.dx * np.arange(self.n)

    @property
    def kaxis(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @property
    def k_nyquist(self) -> float:
        return np.pi / self.dx

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.axis] * self.d), indexing="ij")

    def kmesh(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.kaxis] * self.d), indexing="ij")

    @property
    def cell(self) -> float:
        return self.dx ** self.d


@dataclass(frozen=True, eq=False)
class WaveGrid:
    spec: GridSpec
    psi: np.ndarray
    x_minus: float = 0.0
    pi_plus: float = -1.0

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != (self.spec.n,) * self.spec.d:
            raise ValueError(f"amplitude shape {psi.shape} does not match grid {self.spec}")
        if self.pi_plus == 0:
            raise ValueError("pi_plus must be nonzero")
        object.__setattr__(self, "psi", psi)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.spec.cell)

    def replace(self, psi: np.ndarray, x_minus: float) -> "WaveGrid":
        return WaveGrid(self.spec, psi, x_minus, self.pi_plus)


def init_gaussian(spec: GridSpec, center: Sequence[float], width: Sequence[float],
                  momentum: Sequence[float], pi_plus: float = -1.0,
                  x_minus: float = 0.0) -> WaveGrid:
    """Normalized product of ``exp(-(x-c)^2/(4 s^2) + i p x)`` over axes."""
    center, width, momentum = (np.broadcast_to(np.asarray(v, dtype=float), (spec.d,))
                               for v in (center, width, momentum))
    if np.any(width <= 0):
        raise ValueError("widths must be > 0")
    if np.any(width < 4 * spec.dx):
        raise ResolutionError(f"packet width {width.min():.3g} below 4*dx = {4 * spec.dx:.3g}")
    if np.any(np.abs(momentum) > 0.5 * spec.k_nyquist):
        raise ResolutionError(
            f"momentum {np.abs(momentum).max():.3g} exceeds half the Nyquist limit {0.5 * spec.k_nyquist:.3g}")
    psi = np.ones((spec.n,) * spec.d, dtype=complex)
    for a, x in enumerate(spec.mesh()):
        psi = psi * np.exp(-(x - center[a]) ** 2 / (4 * width[a] ** 2) + 1j * momentum[a] * x)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * spec.cell)
    return WaveGrid(spec, psi, x_minus, pi_plus)


@dataclass(frozen=True)
class Observables:
    norm: float
    norm_momentum: float
    mean_x: np.ndarray
    mean_p: np.ndarray
    spread_x: np.ndarray
    spread_p: np.ndarray


def _moments(spec: GridSpec, psi: np.ndarray, psik: np.ndarray) -> Observables:
    rho = np.abs(psi) ** 2
    rhok = np.abs(psik) ** 2
    norm = float(rho.sum() * spec.cell)
    norm_k = float(rhok.sum() * spec.cell / spec.n ** spec.d)
    sx, sk = rho.sum(), rhok.sum()
    mx, mp, vx, vp = [], [], [], []
    for x, k in zip(spec.mesh(), spec.kmesh()):
        ex_ = float((x * rho).sum() / sx)
        ep = float((k * rhok).sum() / sk)
        mx.append(ex_)
        mp.append(ep)
        vx.append(math.sqrt(max(float(((x - ex_) ** 2 * rho).sum() / sx), 0.0)))
        vp.append(math.sqrt(max(float(((k - ep) ** 2 * rhok).sum() / sk), 0.0)))
    return Observables(norm, norm_k, np.array(mx), np.array(mp), np.array(vx), np.array(vp))


def observables(wave: WaveGrid, workers: int = 1) -> Observables:
    """Norm, means and spreads; momentum moments from the spectral transform."""
    return _moments(wave.spec, wave.psi, sfft.fftn(wave.psi, workers=workers))


# ---------------------------------------------------------------------------
# split-step evolution

def _phase(spec: GridSpec, params: ModelParams, A: np.ndarray, h: float) -> np.ndarray:
    kin = np.zeros((spec.n,) * spec.d)
    for a, k in enumerate(spec.kmesh()):
        kin = kin + (k + params.e * A[a]) ** 2
    return np.exp(1j * h * (kin + params.m ** 2) / (2 * params.pi_plus))


def _potential_at(params: ModelParams, xm: float) -> np.ndarray:
    return np.array([params.potential[0](xm), params.potential[1](xm)], dtype=float)


def _tail_mass(spec: GridSpec, psik: np.ndarray) -> float:
    rhok = np.abs(psik) ** 2
    mask = np.zeros(rhok.shape, dtype=bool)
    for k in spec.kmesh():
        mask |= np.abs(k) > TAIL_FRACTION * spec.k_nyquist
    return float(rhok[mask].sum() / rhok.sum())


def _boundary_mask(spec: GridSpec) -> np.ndarray:
    w = max(1, int(spec.n * BOUNDARY_FRACTION))
    edge = np.zeros(spec.n, dtype=bool)
    edge[:w] = edge[-w:] = True
    mask = np.zeros((spec.n,) * spec.d, dtype=bool)
    for idx in np.meshgrid(*([np.arange(spec.n)] * spec.d), indexing="ij"):
        mask |= edge[idx]
    return mask


def _check_step(spec: GridSpec, params: ModelParams, h: float) -> None:
    # fastest occupied mode must not cross half the box in one step
    amax = max(p.max_abs() for p in params.potential)
    speed = (TAIL_FRACTION * spec.k_nyquist + abs(params.e) * amax) / abs(params.pi_plus)
    if abs(h) * speed > 0.5 * spec.l:
        raise ResolutionError(
            f"x_- step {abs(h):.3g} too large: need |h| * {speed:.3g} <= l/2 = {0.5 * spec.l:.3g}")


@dataclass(frozen=True, eq=False)
class Evolution:
    params: ModelParams
    final: WaveGrid
    x_minus: np.ndarray
    norm: np.ndarray
    mean_x: np.ndarray
    mean_p: np.ndarray
    spread_x: np.ndarray
    states: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return len(self.x_minus) - 1

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - self.norm[0])))


def evolve_splitstep(
    wave: WaveGrid,
    params: ModelParams,
    x_minus_range: tuple[float, float],
    steps: int,
    store_states: bool = False,
    boundary_tol: float = 1e-10,
    tail_tol: float = 1e-8,
    workers: int = 1,
) -> Evolution:
    """Evolve ``wave`` over ``x_minus_range`` in ``steps`` equal steps.

    Records norm, mean position/momentum and spread at every step boundary.
    Raises :class:`ResolutionError` when the initial spectrum has more than
    ``tail_tol`` of its mass in the outer third of the band, when packet
    mass within the outer sixteenth of the box exceeds ``boundary_tol``, or
    when the step is too coarse for the grid.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if wave.pi_plus != params.pi_plus:
        raise ValueError(f"wavefunction pi_plus {wave.pi_plus} != model pi_plus {params.pi_plus}")
    x0, x1 = map(float, x_minus_range)
    if abs(wave.x_minus - x0) > 1e-12:
        raise ValueError(f"wavefunction is at x_- = {wave.x_minus}, range starts at {x0}")
    n0 = wave.norm()
    if abs(n0 - 1.0) > 1e-10:
        raise ValueError(f"input is not normalized (norm {n0:.15g})")
    spec = wave.spec
    h = (x1 - x0) / steps
    _check_step(spec, params, h)
    psi = wave.psi
    psik = sfft.fftn(psi, workers=workers)
    tail = _tail_mass(spec, psik)
    if tail > tail_tol:
        raise ResolutionError(f"spectral tail mass {tail:.3g} exceeds {tail_tol:g}")
    edge = _boundary_mask(spec)

    def boundary_check(p: np.ndarray, xm: float) -> None:
        mass = float((np.abs(p[edge]) ** 2).sum() * spec.cell)
        if mass > boundary_tol:
            raise ResolutionError(
                f"packet mass {mass:.3g} near the box boundary exceeds {boundary_tol:g} at x_- = {xm:.6g}")

    boundary_check(psi, x0)
    xs = x0 + h * np.arange(steps + 1)
    xs[-1] = x1
    norm = np.empty(steps + 1)
    mean_x = np.empty((steps + 1, spec.d))
    mean_p = np.empty((steps + 1, spec.d))
    spread = np.empty((steps + 1, spec.d))
    states = [psi.copy()] if store_states else None
    obs = _moments(spec, psi, psik)
    norm[0], mean_x[0], mean_p[0], spread[0] = obs.norm, obs.mean_x, obs.mean_p, obs.spread_x
    for j in range(steps):
        A = _potential_at(params, x0 + (j + 0.5) * h)
        psik = sfft.fftn(psi, workers=workers) * _phase(spec, params, A, h)
        psi = sfft.ifftn(psik, workers=workers)
        if not np.all(np.isfinite(psi)):
            raise ResolutionError(f"non-finite amplitude at step {j + 1}")
        boundary_check(psi, xs[j + 1])
        obs = _moments(spec, psi, psik)
        norm[j + 1], mean_x[j + 1], mean_p[j + 1], spread[j + 1] = (
            obs.norm, obs.mean_x, obs.mean_p, obs.spread_x)
        if store_states:
            states.append(psi.copy())
    return Evolution(params, wave.replace(psi, x1), xs, norm, mean_x, mean_p, spread, states)


# ---------------------------------------------------------------------------
# Ehrenfest bridge to the classical flow

@dataclass(frozen=True, eq=False)
class EhrenfestReport:
    max_position_deviation: float
    max_momentum_deviation: float
    evolution: Evolution = field(repr=False)
    classical: TrajectoryRecord = field(repr=False)


def classical_initial_point(params: ModelParams, wave: WaveGrid, obs: Observables) -> PhasePoint:
    sys = plane_wave_system(params)
    mx = list(obs.mean_x) + [0.0] * (2 - wave.spec.d)
    mp = list(obs.mean_p) + [0.0] * (2 - wave.spec.d)
    return PhasePoint.on_surface(sys, [0.0, wave.x_minus], [0.0, *mx], [params.pi_plus, *mp])


def ehrenfest_compare(params: ModelParams, wave: WaveGrid, x_minus_range: tuple[float, float],
                      steps: int, workers: int = 1, **evolve_kw) -> EhrenfestReport:
    """Quantum means against the classical flow started at the packet's moments."""
    evo = evolve_splitstep(wave, params, x_minus_range, steps, workers=workers, **evolve_kw)
    sys = plane_wave_system(params)
    start = classical_initial_point(params, wave, observables(wave, workers))
    x0, x1 = map(float, x_minus_range)
    rec = integrate(sys, start, make_path([[0.0, x0], [0.0, x1]]), steps)
    d = wave.spec.d
    xcl = np.column_stack([rec.column("x1"), rec.column("x2")])[:, :d]
    pcl = np.column_stack([rec.column("p_x1"), rec.column("p_x2")])[:, :d]
    return EhrenfestReport(float(np.max(np.abs(evo.mean_x - xcl))),
                           float(np.max(np.abs(evo.mean_p - pcl))), evo, rec)


# ---------------------------------------------------------------------------
# light-cone Klein-Gordon residual

def kg_residual_profile(evolution: Evolution, params: ModelParams | None = None,
                        workers: int = 1) -> np.ndarray:
    """L2 norm of

        2 i pi_+ dphi/dx_- + ((p_a + e A_a)^2 + m^2) phi

    at every interior stored slice (``dphi/dx_-`` by central differences)."""
    params = evolution.params if params is None else params
    states = evolution.states
    if states is None or len(states) < 3:
        raise ValueError("need at least 3 stored slices (evolve with store_states=True)")
    spec = evolution.final.spec
    xs = evolution.x_minus
    out = np.empty(len(states) - 2)
    for n in range(1, len(states) - 1):
        h2 = xs[n + 1] - xs[n - 1]
        dphi = (states[n + 1] - states[n - 1]) / h2
        A = _potential_at(params, xs[n])
        kin = np.zeros((spec.n,) * spec.d)
        for a, k in enumerate(spec.kmesh()):
            kin = kin + (k + params.e * A[a]) ** 2
        op = sfft.ifftn((kin + params.m ** 2) * sfft.fftn(states[n], workers=workers), workers=workers)
        r = 2j * params.pi_plus * dphi + op
        out[n - 1] = math.sqrt(float(np.sum(np.abs(r) ** 2) * spec.cell))
    return out


def kg_residual(evolution: Evolution, params: ModelParams | None = None, workers: int = 1) -> float:
    """Largest light-cone Klein-Gordon residual over the stored slices."""
    return float(np.max(kg_residual_profile(evolution, params, workers)))


# ---------------------------------------------------------------------------
# time-sliced kernel

@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Propagator values ``K(x_i, x_j)``; apply as ``K @ psi * dx``."""

    matrix: np.ndarray
    spec: GridSpec
    slices: int
    delta: float
    x_minus_start: float
    pi_plus: float


def continuum_kernel(separation, delta: float, params: ModelParams, A: float = 0.0) -> np.ndarray:
    """Short-time kernel on the line with ``A`` frozen, from the closed-form
    Gaussian momentum integral

        (1/2pi) int dp exp(i p s + i delta ((p + eA)^2 + m^2) / (2 pi_+))

    evaluated at separation ``s``."""
    s = np.asarray(separation, dtype=float)
    beta = delta / (2 * params.pi_plus)
    pref = math.sqrt(math.pi / abs(beta)) * np.exp(1j * math.copysign(math.pi / 4, beta)) / (2 * math.pi)
    return (pref * np.exp(1j * beta * params.m ** 2) * np.exp(-1j * params.e * A * s)
            * np.exp(-1j * s ** 2 / (4 * beta)))


def _slice_matrix(spec: GridSpec, params: ModelParams, A: float, eps: float, workers: int) -> np.ndarray:
    """Exact momentum integration of one slice over the grid's momentum
    lattice; circulant, unitary after multiplication by ``dx``."""
    phase = np.exp(1j * eps * ((spec.kaxis + params.e * A) ** 2 + params.m ** 2) / (2 * params.pi_plus))
    col = sfft.ifft(phase, workers=workers)
    idx = (np.arange(spec.n)[:, None] - np.arange(spec.n)[None, :]) % spec.n
    return col[idx]


def sliced_kernel(params: ModelParams, delta: float, slices: int, spec: GridSpec,
                  x_minus_start: float = 0.0, workers: int = 1) -> KernelMatrix:
    """Time-sliced phase-space kernel over ``[x_minus_start, x_minus_start + delta]``.

    Each slice of width ``eps = delta/slices`` integrates the transverse
    momentum exactly over the grid's momentum lattice with ``A_1`` frozen at
    the slice midpoint; this is the closed-form Gaussian kernel
    (:func:`continuum_kernel`) projected onto the grid's band-limited
    periodic basis.  The per-slice constant is ``1/n``, the unique choice
    that makes ``dx * K`` unitary.  Slices compose by matrix product.

    Each slice must pass the same step-size guard as the split-step
    evolver, so no occupied mode wraps around the periodic box within one
    slice; violations raise :class:`ResolutionError`.
    """
    if spec.d != 1:
        raise KernelError("kernel supports d=1 only")
    if slices < 1:
        raise ValueError("slices must be >= 1")
    if not math.isfinite(delta):
        raise ValueError("delta must be finite")
    eps = delta / slices
    _check_step(spec, params, eps)
    total = None
    for j in range(slices):
        A = float(params.potential[0](x_minus_start + (j + 0.5) * eps))
        u = _slice_matrix(spec, params, A, eps, workers)
        total = u if total is None else u @ total
    if not np.all(np.isfinite(total)):
        raise KernelError("non-finite kernel entries")
    return KernelMatrix(total / spec.dx, spec, slices, float(delta), float(x_minus_start), params.pi_plus)


def apply_kernel(kernel: KernelMatrix, wave: WaveGrid, norm_tol: float = 1e-6) -> WaveGrid:
    if kernel.spec != wave.spec:
        raise KernelError(f"grid mismatch: kernel {kernel.spec}, wavefunction {wave.spec}")
    if kernel.pi_plus != wave.pi_plus:
        raise KernelError("pi_plus mismatch between kernel and wavefunction")
    if abs(kernel.x_minus_start - wave.x_minus) > 1e-12:
        raise KernelError(f"kernel starts at x_- = {kernel.x_minus_start}, wavefunction is at {wave.x_minus}")
    out = wave.replace(kernel.matrix @ wave.psi * wave.spec.dx, wave.x_minus + kernel.delta)
    n_in, n_out = wave.norm(), out.norm()
    if abs(n_out - n_in) > norm_tol * max(n_in, 1.0):
        raise KernelError(f"kernel changed the norm from {n_in:.12g} to {n_out:.12g}")
    return out


def l2_distance(a: WaveGrid, b: WaveGrid) -> float:
    if a.spec != b.spec:
        raise ValueError("grid mismatch")
    return math.sqrt(float(np.sum(np.abs(a.psi - b.psi) ** 2) * a.spec.cell))


def fit_order(slices: Sequence[int], distances: Sequence[float]) -> float:
    """Least-squares slope of ``-log(distance)`` against ``log(slices)``."""
    x = np.log(np.asarray(slices, dtype=float))
    y = np.log(np.asarray(distances, dtype=float))
    return float(-np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# output

def write_observables_csv(evolution: Evolution, out: TextIO | None = None) -> str:
    d = evolution.final.spec.d
    buf = io.StringIO() if out is None else out
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x_minus", "norm", *(f"mean_x{a + 1}" for a in range(d)),
                *(f"mean_p{a + 1}" for a in range(d)), *(f"spread_x{a + 1}" for a in range(d))])
    for i in range(len(evolution.x_minus)):
        row = [evolution.x_minus[i], evolution.norm[i], *evolution.mean_x[i],
               *evolution.mean_p[i], *evolution.spread_x[i]]
        w.writerow([format(float(v), ".17g") for v in row])
    return buf.getvalue() if out is None else ""


def write_wavefunction(path: str | Path, wave: WaveGrid) -> None:
    """Binary dump: ``HJFLOWWF``, int32 d, int32 n, float64 l, float64 x_-,
    then interleaved little-endian (re, im) doubles in row-major order."""
    header = DUMP_MAGIC + struct.pack("<iidd", wave.spec.d, wave.spec.n, wave.spec.l, wave.x_minus)
    data = np.ascontiguousarray(wave.psi, dtype="<c16").view("<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def read_wavefunction(path: str | Path, pi_plus: float = -1.0) -> WaveGrid:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != DUMP_MAGIC or len(raw) < 32:
        raise ValueError("not an hjflow wavefunction dump")
    d, n, l, xm = struct.unpack("<iidd", raw[8:32])
    spec = GridSpec(d, n, l)
    flat = np.frombuffer(raw[32:], dtype="<f8")
    if flat.size != 2 * n ** d:
        raise ValueError("truncated wavefunction dump")
    psi = flat.view("<c16").reshape((n,) * d).astype(complex)
    return WaveGrid(spec, psi, xm, pi_plus)
