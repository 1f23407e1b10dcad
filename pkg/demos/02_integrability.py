"""Constraint analysis of a charged particle in a plane wave.

The extended Hamiltonians H'_tau and H'_xm are built from the shipped system
document, their extended brackets are computed symbolically, and each entry
is zero-tested on seeded samples. A deliberately non-integrable two-parameter
system serves as the negative control.
"""
from pathlib import Path

from hjflow.engine import build_extended_hamiltonians, classify, integrability_matrix, load_system_file
from hjflow import expr as ex

DATA = Path(__file__).resolve().parents[1] / "src" / "hjflow" / "data"

for name in ("planewave.json", "nonintegrable.json"):
    system = load_system_file(DATA / name)
    print(f"== {system.name}")
    for t, h in build_extended_hamiltonians(system):
        print(f"  H'_{t} = {ex.to_string(h)}")
    rep = integrability_matrix(system, seed=42, samples=20, tol=1e-9)
    cls, summary = classify(rep)
    print("  " + summary.replace("\n", "\n  "))
