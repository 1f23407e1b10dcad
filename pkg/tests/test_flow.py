import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson

from hjflow.engine import load_system, load_system_file
from hjflow.flow import (GaugeError, OffSurfaceError, PathMismatchError, PhasePoint,
                         SingularityError, dirac_reference, integrate, make_path,
                         path_from_document, path_independence_check, point_from_document,
                         write_trajectory_csv)
from hjflow.planewave import (ModelParams, action_integrand, cosine_params, free_particle_system,
                              nonintegrable_fixture, plane_wave_system, quadrature_solution)

from conftest import DATA, load_doc


def _start(sys, p1=0.3, pp=-1.0, p2=0.0, q=(0.0, 0.0, 0.0), t=(0.0, 0.0)):
    return PhasePoint.on_surface(sys, list(t), list(q), [pp, p1, p2])


# ---------------------------------------------------------------------------
# paths

def test_make_path_examples():
    p = make_path([{"tau": 0, "xm": 0}, {"tau": 0, "xm": 2}], ["tau", "xm"])
    assert p.length == 2.0
    L = make_path([(0, 0), (1, 0), (1, 2)])
    assert L.segment_lengths.tolist() == [1.0, 2.0]
    R = make_path([(0, 0), (0, 2), (1, 2)])
    assert np.array_equal(L.start, R.start) and np.array_equal(L.end, R.end)
    assert L.total_variation == 3.0


def test_make_path_errors():
    with pytest.raises(ValueError):
        make_path([(0, 0)])
    with pytest.raises(ValueError):
        make_path([(0, 0), (1, 0, 2)])
    with pytest.raises(ValueError):
        make_path([{"tau": 0}, {"tau": 1}], ["tau", "xm"])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=5), st.integers(10, 500))
def test_allocation_sums_to_steps(lengths, steps):
    pts = np.concatenate([[0.0], np.cumsum(lengths)])
    path = make_path([(v,) for v in pts])
    seg = path.segment_lengths
    if steps < int((seg > 0).sum()):
        return
    alloc = path.allocate_steps(steps)
    assert sum(alloc) == steps
    assert all(a >= 1 for a, v in zip(alloc, seg) if v > 0)


def test_path_document_dimension_checked():
    sys = plane_wave_system(ModelParams())
    with pytest.raises(ValueError):
        path_from_document(sys, {"waypoints": [{"tau": 0}, {"tau": 1}]})


# ---------------------------------------------------------------------------
# integrate

def test_free_particle_closed_form():
    sys = free_particle_system()
    rec = integrate(sys, _start(sys), make_path([(0, 0), (0, 2)]), 100)
    f = rec.final
    assert f.q[1] == pytest.approx(0.6, abs=1e-9)
    assert f.q[0] == pytest.approx(1.09, abs=1e-9)
    assert np.array_equal(f.p, [-1.0, 0.3, 0.0])


def test_free_particle_at_transverse_rest():
    sys = free_particle_system()
    f = integrate(sys, _start(sys, p1=0.0), make_path([(0, 0), (0, 2)]), 50).final
    assert f.q[1] == 0.0
    assert f.q[0] == pytest.approx(1.0, abs=1e-12)


def test_record_shape_and_first_snapshot():
    sys = plane_wave_system(cosine_params())
    x0 = _start(sys)
    rec = integrate(sys, x0, make_path([(0, 0), (1, 0), (1, 2)]), 30)
    assert len(rec.snapshots) == 31
    assert np.array_equal(rec.states[0], x0.as_vector())
    assert rec.s[0] == 0.0 and rec.s[-1] == 1.0
    assert np.all(np.diff(rec.s) > 0)


def test_cosine_matches_quadrature_and_order():
    params = cosine_params()
    sys = plane_wave_system(params)
    x0 = _start(sys, p1=0.1)
    exact = quadrature_solution(params, x0, 3.0).as_vector()
    errs = []
    for n in (50, 100):
        f = integrate(sys, x0, make_path([(0, 0), (0, 3)]), n).final.as_vector()
        errs.append(np.max(np.abs(f - exact)))
    assert 16 / 2 <= errs[0] / errs[1] <= 16 * 2


def test_off_surface_start_needs_waiver():
    sys = free_particle_system()
    x0 = PhasePoint([0, 0], [0, 0, 0], [-1, 0.3, 0], [0.0, 0.0])
    path = make_path([(0, 0), (0, 1)])
    with pytest.raises(OffSurfaceError):
        integrate(sys, x0, path, 10)
    rec = integrate(sys, x0, path, 10, allow_off_surface=True)
    # H' is conserved, so the violation persists unchanged
    assert rec.hprime[-1][1] == pytest.approx(rec.hprime[0][1], abs=1e-14)
    assert abs(rec.hprime[0][1]) > 0.5


def test_initial_must_sit_on_path_start():
    sys = free_particle_system()
    with pytest.raises(PathMismatchError):
        integrate(sys, _start(sys, t=(0.0, 1.0)), make_path([(0, 0), (0, 1)]), 5)


def test_singularity_reports_step():
    sys = load_system({"name": "pole", "coordinates": ["q"], "parameters": ["t"],
                       "hamiltonians": {"t": "p_q + 1/q"},
                       "singular": [{"symbol": "q", "exclude_abs_below": 0.1}]})
    x0 = PhasePoint.on_surface(sys, [0.0], [-1.0], [0.0])
    with pytest.raises(SingularityError) as info:
        integrate(sys, x0, make_path([(0,), (2,)]), 20)
    # q = -1 + t crosses |q| < 0.1 at t = 0.9, i.e. after step 10 (t = 1.0) at the latest
    assert info.value.step == 10


def test_singular_initial_point_rejected():
    sys = plane_wave_system(ModelParams())
    with pytest.raises(SingularityError):
        integrate(sys, _start(sys, pp=-0.3), make_path([(0, 0), (0, 1)]), 5)


def test_momentum_and_mass_shell_conservation():
    params = cosine_params()
    sys = plane_wave_system(params)
    rec = integrate(sys, _start(sys, p1=0.2, p2=-0.1), make_path([(0, 0), (10, 10)]), 2000)
    for name in ("p_xp", "p_x1", "p_x2"):
        col = rec.column(name)
        assert np.max(np.abs(col - col[0])) <= 1e-10
    xm = rec.column("xm")
    A = params.potential[0](xm)
    shell = (2 * rec.column("p_xp") * rec.column("p_xm") - (rec.column("p_x1") + A) ** 2
             - rec.column("p_x2") ** 2 - 1.0)
    assert np.max(np.abs(shell)) <= 1e-8
    assert rec.max_abs_hprime() <= 1e-8


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.sampled_from([-2.0, -1.0, 0.7, 1.5]),
       st.floats(-1, 1))
def test_constraint_conserved_for_random_starts(p1, p2, pp, x1):
    sys = plane_wave_system(cosine_params(a=0.5, k=2.0))
    rec = integrate(sys, _start(sys, p1=p1, p2=p2, pp=pp, q=(0.0, x1, 0.0)),
                    make_path([(0, 0), (2, 1), (1, 3)]), 600)
    assert rec.max_abs_hprime() <= 1e-8


def test_action_matches_simpson_quadrature():
    params = cosine_params()
    sys = plane_wave_system(params)
    n = 2000
    rec = integrate(sys, _start(sys, p1=0.2), make_path([(0, 0), (0, 10)]), n)
    xm = rec.column("xm")
    dens = action_integrand(params, xm, rec.column("p_xp")[0],
                            np.vstack([rec.column("p_x1"), rec.column("p_x2")]), rec.column("p_xm"))
    z_quad = simpson(dens, x=xm)
    z = rec.column("z")[-1]
    assert abs(z - z_quad) <= 1e-8 * abs(z_quad)


# ---------------------------------------------------------------------------
# path independence

def test_planewave_path_independence():
    sys = plane_wave_system(cosine_params())
    chk = path_independence_check(sys, _start(sys), make_path([(0, 0), (1, 0), (1, 2)]),
                                  make_path([(0, 0), (0, 2), (1, 2)]), 2000)
    assert chk.max_discrepancy < 1e-10


def test_planewave_path_independence_diagonal_vs_l():
    sys = plane_wave_system(cosine_params())
    chk = path_independence_check(sys, _start(sys), make_path([(0, 0), (1, 2)]),
                                  make_path([(0, 0), (0, 2), (1, 2)]), 2000)
    assert chk.max_discrepancy < 1e-10


def test_nonintegrable_rectangle_discrepancy():
    sys = nonintegrable_fixture()
    x0 = PhasePoint.on_surface(sys, [0, 0, 0], [1.0], [1.0])
    chk = path_independence_check(sys, x0, make_path([(0, 0, 0), (0, 1, 0), (0, 1, 1)]),
                                  make_path([(0, 0, 0), (0, 0, 1), (0, 1, 1)]), 1000)
    assert chk.max_discrepancy > 1e-3


def test_nonintegrable_discrepancy_grows_with_area():
    sys = nonintegrable_fixture()
    x0 = PhasePoint.on_surface(sys, [0, 0, 0], [1.0], [1.0])
    out = []
    for side in (0.05, 0.1):
        chk = path_independence_check(sys, x0, make_path([(0, 0, 0), (0, side, 0), (0, side, side)]),
                                      make_path([(0, 0, 0), (0, 0, side), (0, side, side)]), 400)
        out.append(chk.max_discrepancy)
    # leading term is area times the bracket
    assert 3.0 <= out[1] / out[0] <= 5.0


def test_identical_paths_give_exact_zero():
    sys = plane_wave_system(cosine_params())
    p = make_path([(0, 0), (1, 2)])
    assert path_independence_check(sys, _start(sys), p, p, 100).max_discrepancy == 0.0


def test_paths_must_share_endpoints():
    sys = plane_wave_system(cosine_params())
    with pytest.raises(PathMismatchError):
        path_independence_check(sys, _start(sys), make_path([(0, 0), (1, 2)]),
                                make_path([(0, 0), (1, 3)]), 10)


# ---------------------------------------------------------------------------
# Dirac reference

@pytest.fixture(scope="module")
def cosine_sys():
    return plane_wave_system(cosine_params())


def test_dirac_lambda_one(cosine_sys):
    rec = dirac_reference(cosine_sys, cosine_sys.extended("xm"), "xm - tau", _start(cosine_sys),
                          (0.0, 5.0), 500)
    assert np.all(rec.lambdas == 1.0)


def test_dirac_lambda_two(cosine_sys):
    rec = dirac_reference(cosine_sys, cosine_sys.extended("xm"), "xm - 2*tau", _start(cosine_sys),
                          (0.0, 2.5), 500)
    assert np.all(rec.lambdas == 2.0)
    assert rec.column("xm")[-1] == pytest.approx(5.0, abs=1e-12)


def test_dirac_matches_canonical(cosine_sys):
    x0 = _start(cosine_sys, p1=0.2)
    d = dirac_reference(cosine_sys, cosine_sys.extended("xm"), "xm - tau", x0, (0.0, 10.0), 2000)
    c = integrate(cosine_sys, x0, make_path([(0, 0), (10, 10)]), 2000)
    assert np.max(np.abs(d.states - c.states)) < 1e-8


def test_dirac_nonlinear_gauge_follows_canonical_flow(cosine_sys):
    # xm = tau^2: same orbit, reparametrized
    x0 = _start(cosine_sys, p1=0.2)
    d = dirac_reference(cosine_sys, cosine_sys.extended("xm"), "xm - tau^2", x0, (0.0, 2.0), 4000)
    assert np.allclose(d.lambdas, 2 * d.column("tau"), atol=1e-12)
    ref = quadrature_solution(cosine_params(), x0, 4.0)
    assert d.final.q == pytest.approx(ref.q, abs=1e-8)


def test_dirac_gauge_errors(cosine_sys):
    x0 = _start(cosine_sys)
    with pytest.raises(GaugeError):
        dirac_reference(cosine_sys, cosine_sys.extended("xm"), "xm", x0, (0.0, 1.0), 10)
    with pytest.raises(GaugeError):
        dirac_reference(cosine_sys, cosine_sys.extended("xm"), "xm - tau - 1", x0, (0.0, 1.0), 10)
    with pytest.raises(GaugeError):
        # {x1 - tau, phi} = dphi/dp_x1 vanishes where p_x1 + e A1 = 0
        dirac_reference(cosine_sys, cosine_sys.extended("xm"), "x1 - tau",
                        _start(cosine_sys, p1=-0.3), (0.0, 1.0), 10)


# ---------------------------------------------------------------------------
# documents and CSV

def test_initial_document_forms():
    sys = load_system_file(DATA / "planewave.json")
    a = point_from_document(sys, load_doc("planewave_initial.json"))
    b = point_from_document(sys, {"momenta": {"p_xp": -1.0, "p_x1": 0.3}, "on_surface": True})
    assert np.array_equal(a.as_vector(), b.as_vector())
    assert a.is_on_surface(sys)
    with pytest.raises(ValueError):
        point_from_document(sys, {"momenta": {"xp": -1.0}})
    with pytest.raises(OffSurfaceError):
        point_from_document(sys, {"momenta": {"xp": -1.0}, "conjugates": {"tau": 0, "xm": 0}})
    with pytest.raises(ValueError):
        point_from_document(sys, {"momenta": {"nope": 1.0}, "on_surface": True})


def test_trajectory_csv_format():
    sys = free_particle_system()
    rec = integrate(sys, _start(sys), make_path([(0, 0), (0, 2)]), 4)
    text = write_trajectory_csv(rec)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["s", "tau", "xm", "xp", "x1", "x2", "p_xp", "p_x1", "p_x2",
                       "p_tau", "p_xm", "z", "Hprime_tau", "Hprime_xm"]
    assert len(rows) == 6
    assert float(rows[-1][4]) == pytest.approx(0.6, abs=1e-12)
    # 17 significant digits round-trip every double exactly
    assert np.array_equal(np.array(rows[1:], dtype=float)[:, 1:12], rec.states)


def test_integration_is_deterministic():
    sys = plane_wave_system(cosine_params())
    p = make_path([(0, 0), (1, 0), (1, 3)])
    a = write_trajectory_csv(integrate(sys, _start(sys), p, 300))
    b = write_trajectory_csv(integrate(sys, _start(sys), p, 300))
    assert a == b
