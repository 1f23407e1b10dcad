"""
``hjflow`` command line.

Exit codes: 0 success, 1 input error, 3 scientific negative (not integrable,
path dependent, threshold missed), 4 singularity, 5 resolution failure.
Every subcommand loads and validates all inputs before computing, and
writes output files only after the computation has finished.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import scipy

from . import __version__
from . import expr as ex
from .engine import (NOT_INTEGRABLE, SystemDefinitionError,
                     build_extended_hamiltonians, classify, integrability_matrix, load_system)
from .flow import (FlowError, GaugeError, NonFiniteError, SingularityError, dirac_reference,
                   integrate, path_from_document, path_independence_check, point_from_document,
                   write_trajectory_csv)
from .planewave import ModelParams
from .quantum import (GridSpec, KernelError, ResolutionError, apply_kernel, ehrenfest_compare,
                      evolve_splitstep, fit_order, init_gaussian, l2_distance, sliced_kernel,
                      write_observables_csv, write_wavefunction)

EXIT_OK, EXIT_INPUT, EXIT_NEGATIVE, EXIT_SINGULAR, EXIT_RESOLUTION = 0, 1, 3, 4, 5

NORM_DRIFT_LIMIT = 1e-10
EHRENFEST_LIMIT = 1e-5
KERNEL_ORDER_LIMIT = 0.9
KERNEL_CONVERGED = 1e-6


class InputError(Exception):
    pass


def _load_json(path: str, what: str) -> Any:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {what} file {path}: {exc}") from exc


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    inputs: tuple[str, ...]
    seed: int = 42
    samples: int = 20
    tol: float = 1e-9
    steps: int | None = None
    out: str | None = None
    threads: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise InputError("--samples must be >= 1")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise InputError("--tol must be a positive finite number")
        if self.steps is not None and self.steps < 1:
            raise InputError("--steps must be >= 1")
        if self.threads < 1:
            raise InputError("--threads must be >= 1")

    def provenance(self, **extra) -> dict[str, Any]:
        """Everything needed to rerun; no clocks or host names, so reports
        are byte-identical across identical invocations."""
        block = {
            "tool": "hjflow",
            "version": __version__,
            "subcommand": self.subcommand,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "seed": self.seed,
            "samples": self.samples,
            "tol": self.tol,
            "steps": self.steps,
            "threads": self.threads,
            "inputs": [{"path": Path(p).name, "sha256": _digest(p)} for p in self.inputs],
        }
        block.update(extra)
        return block


def _write_json(path: str, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


def _check_writable(*paths: str | None) -> None:
    for p in paths:
        if p is not None and not Path(p).resolve().parent.is_dir():
            raise InputError(f"output directory does not exist for {p}")


# ---------------------------------------------------------------------------
# subcommands

def run_analyze(args, out: Callable[[str], None]) -> int:
    cfg = RunConfig("analyze", (args.system,), args.seed, args.samples, args.tol,
                    threads=args.threads)
    _check_writable(args.report)
    system = load_system(_load_json(args.system, "system"))
    rep = integrability_matrix(system, cfg.seed, cfg.samples, cfg.tol)
    cls, summary = classify(rep)
    out(f"system: {system.name}")
    out("extended hamiltonians:")
    for t, h in build_extended_hamiltonians(system):
        out(f"  H'_{t} = {ex.to_string(h)}")
    out("bracket matrix (identically zero / zero on surface):")
    n = len(rep.parameters)
    for i in range(n):
        for j in range(i + 1, n):
            out(f"  {{H'_{rep.parameters[i]}, H'_{rep.parameters[j]}}}: "
                f"{rep.zero_flags_identically[i][j]} / {rep.zero_flags_on_surface[i][j]}")
    out(summary)
    if args.report:
        _write_json(args.report, {
            "system": system.name,
            "extended_hamiltonians": {t: ex.to_string(h) for t, h in build_extended_hamiltonians(system)},
            "brackets": [[ex.to_string(e) for e in row] for row in rep.bracket_matrix],
            "zero_identically": [list(r) for r in rep.zero_flags_identically],
            "zero_on_surface": [list(r) for r in rep.zero_flags_on_surface],
            "witnesses": [{"pair": [rep.parameters[i], rep.parameters[j]], "point": w}
                          for (i, j), w in sorted(rep.witnesses.items())],
            "classification": cls,
            "provenance": cfg.provenance(),
        })
    return EXIT_NEGATIVE if cls == NOT_INTEGRABLE else EXIT_OK


def _load_flow_inputs(args, paths: Sequence[str]):
    system = load_system(_load_json(args.system, "system"))
    initial_doc = _load_json(args.initial, "initial-state")
    loaded = [path_from_document(system, _load_json(p, "path")) for p in paths]
    initial = point_from_document(system, initial_doc, args.allow_off_surface)
    return system, initial, loaded


def run_evolve(args, out: Callable[[str], None]) -> int:
    cfg = RunConfig("evolve", (args.system, args.initial, args.path), tol=args.tol,
                    steps=args.steps, out=args.out, threads=args.threads)
    _check_writable(args.out)
    system, initial, (path,) = _load_flow_inputs(args, [args.path])
    if args.method == "dirac":
        if args.gauge is None:
            raise InputError("--method dirac requires --gauge")
        if len(system.parameters) != 2:
            raise InputError("--method dirac needs exactly two parameters (primary plus one)")
        try:
            gauge = ex.parse(args.gauge)
        except ex.ParseError as exc:
            raise InputError(f"--gauge: {exc}") from exc
        if not np.array_equal(path.start, initial.t):
            raise InputError("initial parameters must equal the first path waypoint")
        tau_range = (float(path.start[0]), float(path.end[0]))
        constraint = system.extended(system.parameters[1])
        rec = dirac_reference(system, constraint, gauge, initial, tau_range, args.steps)
    else:
        if args.gauge is not None:
            raise InputError("--gauge only applies to --method dirac")
        rec = integrate(system, initial, path, args.steps, args.allow_off_surface)
    worst = rec.max_abs_hprime()
    _write_text(args.out, write_trajectory_csv(rec))
    out(f"steps: {rec.steps}")
    if rec.lambdas is not None:
        out(f"lambda: min {rec.lambdas.min():.17g}, max {rec.lambdas.max():.17g}")
    out(f"max |H'| along run: {worst:.3e} (tol {cfg.tol:g})")
    return EXIT_OK if worst < cfg.tol else EXIT_NEGATIVE


def run_check(args, out: Callable[[str], None]) -> int:
    cfg = RunConfig("check", (args.system, args.initial, args.path_a, args.path_b), tol=args.tol,
                    steps=args.steps, threads=args.threads)
    system, initial, (pa, pb) = _load_flow_inputs(args, [args.path_a, args.path_b])
    chk = path_independence_check(system, initial, pa, pb, args.steps, args.allow_off_surface)
    out("endpoint discrepancies:")
    for name, v in chk.table.items():
        out(f"  {name}: {v:.3e}")
    out(f"max discrepancy: {chk.max_discrepancy!r} (tol {cfg.tol:g})")
    if args.report:
        _write_json(args.report, {"discrepancies": chk.table, "max": chk.max_discrepancy,
                                  "provenance": cfg.provenance()})
    return EXIT_OK if chk.max_discrepancy < cfg.tol else EXIT_NEGATIVE


@dataclass(frozen=True)
class QuantumRun:
    params: ModelParams
    spec: GridSpec
    initial: dict
    x_range: tuple[float, float]
    steps: int


def load_quantum_run(doc: Any) -> QuantumRun:
    """Validate a quantum-run document (model, grid, initial, range, steps)."""
    if not isinstance(doc, dict):
        raise InputError("quantum-run document must be an object")
    missing = {"model", "grid", "initial", "range", "steps"} - set(doc)
    if missing:
        raise InputError(f"quantum-run document missing {sorted(missing)}")
    unknown = set(doc) - {"model", "grid", "initial", "range", "steps", "description"}
    if unknown:
        raise InputError(f"quantum-run document: unknown keys {sorted(unknown)}")
    try:
        params = ModelParams.from_document(doc["model"])
        g = doc["grid"]
        spec = GridSpec(int(g["d"]), int(g["n"]), float(g["l"]))
        ini = doc["initial"]
        init = {k: [float(v) for v in ini[k]] for k in ("center", "width", "momentum")}
        for k, v in init.items():
            if len(v) != spec.d:
                raise InputError(f"initial.{k} needs {spec.d} entries")
        r = doc["range"]
        x_range = (float(r["from"]), float(r["to"]))
        steps = doc["steps"]
        if not isinstance(steps, int) or isinstance(steps, bool) or steps < 1:
            raise InputError("steps must be a positive integer")
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed quantum-run document: {exc!r}") from exc
    if not all(map(math.isfinite, x_range)):
        raise InputError("range must be finite")
    return QuantumRun(params, spec, init, x_range, steps)


def _packet(run: QuantumRun):
    return init_gaussian(run.spec, run.initial["center"], run.initial["width"],
                         run.initial["momentum"], run.params.pi_plus, run.x_range[0])


def run_quantum(args, out: Callable[[str], None]) -> int:
    cfg = RunConfig("quantum", (args.run,), steps=None, out=args.out, threads=args.threads)
    _check_writable(args.out, args.dump)
    run = load_quantum_run(_load_json(args.run, "quantum-run"))
    wave = _packet(run)
    if args.compare_classical:
        rep = ehrenfest_compare(run.params, wave, run.x_range, run.steps, workers=cfg.threads)
        evo = rep.evolution
    else:
        rep = None
        evo = evolve_splitstep(wave, run.params, run.x_range, run.steps, workers=cfg.threads)
    _write_text(args.out, write_observables_csv(evo))
    if args.dump:
        write_wavefunction(args.dump, evo.final)
    drift = evo.norm_drift
    out(f"steps: {evo.steps}")
    out(f"norm drift: {drift:.3e} (limit {NORM_DRIFT_LIMIT:g})")
    code = EXIT_OK
    if rep is not None:
        out(f"ehrenfest deviation: position {rep.max_position_deviation:.3e}, "
            f"momentum {rep.max_momentum_deviation:.3e} (limit {EHRENFEST_LIMIT:g})")
        if rep.max_position_deviation > EHRENFEST_LIMIT:
            code = EXIT_NEGATIVE
    if drift > NORM_DRIFT_LIMIT:
        out(f"norm drift exceeds {NORM_DRIFT_LIMIT:g}")
        code = EXIT_RESOLUTION
    return code


def _parse_slices(text: str) -> list[int]:
    try:
        vals = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise InputError(f"--slices must be a comma-separated list of integers: {text!r}") from exc
    if not vals or any(v < 1 for v in vals):
        raise InputError("--slices needs at least one positive integer")
    return vals


def run_kernel(args, out: Callable[[str], None]) -> int:
    cfg = RunConfig("kernel", (args.run,), threads=args.threads)
    _check_writable(args.report)
    slices = _parse_slices(args.slices)
    run = load_quantum_run(_load_json(args.run, "quantum-run"))
    if run.spec.d != 1:
        raise InputError("kernel supports d=1 only")
    wave = _packet(run)
    ref = evolve_splitstep(wave, run.params, run.x_range, run.steps, workers=cfg.threads).final
    delta = run.x_range[1] - run.x_range[0]
    dists = []
    out(f"reference: split-step, {run.steps} steps over x_- in [{run.x_range[0]:g}, {run.x_range[1]:g}]")
    out("normalization: fixed by unitarity on the grid")
    out("slices  L2 distance")
    for s in slices:
        k = sliced_kernel(run.params, delta, s, run.spec, run.x_range[0], workers=cfg.threads)
        d = l2_distance(apply_kernel(k, wave), ref)
        dists.append(d)
        out(f"{s:6d}  {d:.6e}")
    order = fit_order(slices, dists) if len(slices) > 1 and min(dists) > 0 else None
    converged = max(dists) <= KERNEL_CONVERGED
    out(f"fitted order: {'n/a' if order is None else f'{order:.3f}'}")
    if converged:
        out(f"all distances <= {KERNEL_CONVERGED:g} (kernel already converged)")
    if args.report:
        _write_json(args.report, {"slices": slices, "distances": dists, "order": order,
                                  "converged": converged,
                                  "normalization": "fixed by unitarity on the grid",
                                  "provenance": cfg.provenance(reference_steps=run.steps)})
    ok = converged or (order is not None and order >= KERNEL_ORDER_LIMIT)
    return EXIT_OK if ok else EXIT_NEGATIVE


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="FFT workers (default 1, bitwise reproducible)")
    p = argparse.ArgumentParser(prog="hjflow", description="Hamilton-Jacobi analysis of constrained systems")
    p.add_argument("--version", action="version", version=f"hjflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="extended Hamiltonians and integrability")
    a.add_argument("system")
    a.add_argument("--seed", type=int, default=42)
    a.add_argument("--samples", type=int, default=20)
    a.add_argument("--tol", type=float, default=1e-9)
    a.add_argument("--report")

    e = sub.add_parser("evolve", parents=[common], help="integrate the total differential equations")
    e.add_argument("system")
    e.add_argument("--initial", required=True)
    e.add_argument("--path", required=True)
    e.add_argument("--steps", type=int, required=True)
    e.add_argument("--method", choices=("canonical", "dirac"), default="canonical")
    e.add_argument("--gauge")
    e.add_argument("--allow-off-surface", action="store_true")
    e.add_argument("--tol", type=float, default=1e-9)
    e.add_argument("--out", required=True)

    c = sub.add_parser("check", parents=[common], help="numerical path-independence check")
    c.add_argument("system")
    c.add_argument("--initial", required=True)
    c.add_argument("--path-a", required=True)
    c.add_argument("--path-b", required=True)
    c.add_argument("--steps", type=int, required=True)
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--allow-off-surface", action="store_true")
    c.add_argument("--report")

    q = sub.add_parser("quantum", parents=[common], help="split-step light-cone evolution")
    q.add_argument("run")
    q.add_argument("--compare-classical", action="store_true")
    q.add_argument("--dump")
    q.add_argument("--out", required=True)

    k = sub.add_parser("kernel", parents=[common], help="sliced path-integral kernel convergence")
    k.add_argument("run")
    k.add_argument("--slices", default="8,16,32,64")
    k.add_argument("--report")
    return p


_COMMANDS = {"analyze": run_analyze, "evolve": run_evolve, "check": run_check,
             "quantum": run_quantum, "kernel": run_kernel}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT

    def out(line: str) -> None:
        print(line, flush=True)

    def err(msg: str) -> None:
        print(f"hjflow {args.command}: error: {msg}", file=sys.stderr, flush=True)

    try:
        if getattr(args, "steps", None) is not None and args.steps < 1:
            raise InputError("--steps must be >= 1")
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        return _COMMANDS[args.command](args, out)
    except ResolutionError as exc:
        err(f"resolution: {exc}")
        return EXIT_RESOLUTION
    except (SingularityError, NonFiniteError) as exc:
        err(f"singularity: {exc}")
        return EXIT_SINGULAR
    except GaugeError as exc:
        err(str(exc))
        return EXIT_INPUT
    except (InputError, SystemDefinitionError, ex.ExprError, KernelError, ValueError, OSError) as exc:
        err(str(exc))
        return EXIT_INPUT
    except FlowError as exc:
        err(str(exc))
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
