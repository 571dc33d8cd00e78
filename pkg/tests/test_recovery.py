import numpy as np
import pytest

from biofilm_inverse.errors import AssumptionError, DomainError
from biofilm_inverse.forward import solve_forward
from biofilm_inverse.model import PARAM_NAMES
from biofilm_inverse.recovery import (
    EXAMPLE2_POINTS, EvaluationPoints, FieldProbe, NoValidPointsError, QuadratureResolutionError, recover_a_b_d2,
    recover_all, recover_d1, recover_K1_K4, recover_K2_K3, scan_points,
)

# the reference point set except p2, moved off S = 0 (see README)
EXAMPLE2_VALID = EvaluationPoints(
    p0=(0.5, 1.0), p1=(0.5, 0.5), p2=(0.5, 0.75), t3=0.5, t4=1.0,
    p5=(0.5, 1 / 3), p6=(0.5, 0.5), p7=(0.5, 2 / 3),
)
EXAMPLE1_POINTS = EvaluationPoints(
    p0=(0.0, 0.5), p1=(0.5, 0.5), p2=(0.25, 0.5), t3=0.25, t4=0.75,
    p5=(0.5, 0.25), p6=(0.5, 0.5), p7=(0.5, 0.75),
)


@pytest.fixture(scope="module")
def probe1(ex1):
    return FieldProbe.from_case(ex1)


@pytest.fixture(scope="module")
def probe2(ex2):
    return FieldProbe.from_case(ex2)


def trivial_probe():
    zero = lambda x, t: 0.0 * x  # noqa: E731
    one = lambda x, t: 1.0 + 0.0 * x  # noqa: E731
    return FieldProbe.analytic(S=one, M=zero, S_t=zero, S_xx=zero, M_t=zero, M_x=zero, M_xx=zero)


def test_analytic_probe_reproduces_closed_forms(ex1, probe1):
    for x, t in [(0.2, 0.3), (0.7, 0.9)]:
        assert probe1.S(x, t) == pytest.approx(ex1.exact_S(x, t), abs=1e-12)
        assert probe1.M_xx(x, t) == pytest.approx(ex1.M_xx(x, t), abs=1e-12)
        assert probe1.G(x, t) == pytest.approx(ex1.data.G(x, t), abs=1e-12)


def test_d1_stated_point(probe2):
    assert recover_d1(probe2, (0.5, 1.0)) == pytest.approx(1.0, abs=1e-10)


def test_d1_heat_equation_construction():
    # M = 0, S = 1 + x^2 static, F chosen so that S_t - F = 2 S_xx
    zero = lambda x, t: 0.0 * x  # noqa: E731
    probe = FieldProbe.analytic(
        S=lambda x, t: 1 + x * x, M=zero, S_t=zero, S_xx=lambda x, t: 2.0 + 0 * x,
        M_t=zero, M_x=zero, M_xx=zero, F=lambda x, t: -4.0 + 0 * x,
    )
    assert recover_d1(probe, (0.3, 0.5)) == pytest.approx(2.0)


def test_d1_flat_substrate_rejected():
    with pytest.raises(AssumptionError) as err:
        recover_d1(trivial_probe(), (0.5, 0.5))
    assert err.value.clause == "i"


def test_d1_needs_vanishing_reaction(probe1):
    with pytest.raises(AssumptionError, match="neither S nor M"):
        recover_d1(probe1, (0.5, 0.5))


def test_d1_on_boundary_for_example1(probe1):
    assert recover_d1(probe1, (0.0, 0.5)) == pytest.approx(1.0, abs=1e-10)


def test_K1_K4_stated_points_are_degenerate(probe2):
    # S = 0 at (0.5, 1) makes the second row of the system vanish
    diag = {}
    with pytest.raises(AssumptionError) as err:
        recover_K1_K4(probe2, (0.5, 0.5), (0.5, 1.0), 1.0, diag)
    assert err.value.clause == "ii"
    assert abs(diag["determinant"]) < 1e-12


def test_K1_K4_valid_points(probe1, probe2):
    assert recover_K1_K4(probe2, (0.5, 0.5), (0.5, 0.75), 1.0) == pytest.approx((1.0, 1.0), abs=1e-10)
    assert recover_K1_K4(probe1, (0.5, 0.5), (0.25, 0.5), 1.0) == pytest.approx((1.0, 1.0), abs=1e-8)


def test_K1_K4_identical_points(probe1):
    with pytest.raises(AssumptionError, match="determinant"):
        recover_K1_K4(probe1, (0.5, 0.5), (0.5, 0.5), 1.0)


def test_K2_K3(probe1, probe2):
    assert recover_K2_K3(probe2, 0.5, 1.0, 1.0) == pytest.approx((0.0, 1.0), abs=1e-6)
    assert recover_K2_K3(probe1, 0.25, 0.75, 1.0) == pytest.approx((1.0, 1.0), abs=1e-6)
    with pytest.raises(AssumptionError):
        recover_K2_K3(probe1, 0.5, 0.5, 1.0)


def test_K2_K3_row_scaling_invariance(probe1, monkeypatch):
    base = recover_K2_K3(probe1, 0.25, 0.75, 1.0)
    original = probe1.integrals
    monkeypatch.setattr(probe1, "integrals", lambda t, K4: tuple(7.5 * v for v in original(t, K4)))
    scaled = recover_K2_K3(probe1, 0.25, 0.75, 1.0)
    assert np.allclose(scaled, base, rtol=0, atol=1e-12)


def test_a_b_d2(probe1, probe2):
    assert recover_a_b_d2(probe2, (0.5, 1 / 3), (0.5, 0.5), (0.5, 2 / 3), 0.0, 1.0, 1.0) == pytest.approx(
        (0.0, 1.0, 1.0), abs=1e-10)
    assert recover_a_b_d2(probe1, (0.5, 0.2), (0.5, 0.5), (0.5, 0.8), 1.0, 1.0, 1.0) == pytest.approx(
        (1.0, 2.0, 1.0), abs=1e-6)


def test_a_b_d2_preconditions(probe1):
    with pytest.raises(AssumptionError, match="distinct"):
        recover_a_b_d2(probe1, (0.5, 0.2), (0.5, 0.2), (0.5, 0.8), 1.0, 1.0, 1.0)
    with pytest.raises(AssumptionError, match="critical"):
        recover_a_b_d2(probe1, (0.3, 0.2), (0.5, 0.5), (0.5, 0.8), 1.0, 1.0, 1.0)
    with pytest.raises(AssumptionError, match="positive"):
        # a huge decay rate flips the sign of d2 * lambda
        recover_a_b_d2(probe1, (0.5, 0.2), (0.5, 0.5), (0.5, 0.8), 50.0, 1.0, 1.0)


def test_recover_all_example2_valid_points(ex2, probe2):
    rep = recover_all(probe2, EXAMPLE2_VALID)
    assert np.allclose(rep.params.to_array(), ex2.params.to_array(), atol=1e-6)
    for name in ("d1", "K1", "K4", "a", "b", "d2"):
        assert rep.values[name] == pytest.approx(getattr(ex2.params, name), abs=1e-10)
    assert rep.all_admissible
    assert set(rep.to_dict()["stages"]) == {"d1", "K1_K4", "K2_K3", "a_b_d2", "snapped_to_bound"}


def test_recover_all_stated_points_stop_at_stage_two(probe2):
    with pytest.raises(AssumptionError) as err:
        recover_all(probe2, EXAMPLE2_POINTS)
    assert err.value.clause == "ii"


def test_recover_all_example1(ex1, probe1):
    rep = recover_all(probe1, EXAMPLE1_POINTS)
    assert np.allclose(rep.params.to_array(), ex1.params.to_array(), atol=1e-6)


def test_recover_all_trivial_solution_fails():
    pts = EvaluationPoints(p0=(0.5, 0.5), p1=(0.3, 0.5), p2=(0.6, 0.5), t3=0.2, t4=0.8,
                           p5=(0.5, 0.2), p6=(0.5, 0.5), p7=(0.5, 0.8))
    with pytest.raises(AssumptionError) as err:
        recover_all(trivial_probe(), pts)
    assert err.value.clause == "i"


def test_recovered_constants_reproduce_flux(ex1, probe1):
    from biofilm_inverse.observables import boundary_flux
    X = recover_all(probe1, EXAMPLE1_POINTS).params
    g = ex1.grid(0.01)
    q = boundary_flux(solve_forward(ex1.data, X, g), X.d1)
    assert np.max(np.abs(q + (g.t + 1))) <= 5e-4


@pytest.mark.parametrize("fixture", ["probe1", "probe2"])
def test_scan_points_then_recover(fixture, request):
    probe = request.getfixturevalue(fixture)
    case = request.getfixturevalue("ex1" if fixture == "probe1" else "ex2")
    pts = scan_points(probe, (101, 101))
    rep = recover_all(probe, pts)
    assert np.allclose(rep.params.to_array(), case.params.to_array(), atol=1e-6)


def test_scan_is_deterministic(probe2):
    assert scan_points(probe2, (41, 41)) == scan_points(probe2, (41, 41))


def test_scan_trivial_probe():
    with pytest.raises(NoValidPointsError) as err:
        scan_points(trivial_probe(), (21, 21))
    assert "i" in err.value.clauses and "iv" in err.value.clauses


def test_points_validation():
    with pytest.raises(DomainError):
        EvaluationPoints(p0=(0.5, 0.5), p1=(0.0, 0.5), p2=(0.6, 0.5), t3=0.2, t4=0.8,
                         p5=(0.5, 0.2), p6=(0.5, 0.5), p7=(0.5, 0.8))
    with pytest.raises(AssumptionError):
        EvaluationPoints(p0=(0.5, 0.5), p1=(0.3, 0.5), p2=(0.6, 0.5), t3=0.2, t4=0.2,
                         p5=(0.5, 0.2), p6=(0.5, 0.5), p7=(0.5, 0.8))
    assert EvaluationPoints.from_dict(EXAMPLE2_VALID.to_dict()) == EXAMPLE2_VALID


def test_sampled_d1_second_order(ex1):
    errors = []
    for dx in (0.02, 0.01):
        sol = solve_forward(ex1.data, ex1.params, ex1.grid(dx))
        errors.append(abs(recover_d1(FieldProbe.from_solution(sol, ex1.data), (0.0, 0.5)) - 1.0))
    assert 3.0 <= errors[0] / errors[1] <= 5.0


def test_sampled_probe_quadrature_resolution(ex1):
    from biofilm_inverse.model import Grid
    sol = solve_forward(ex1.data, ex1.params, Grid(4, 11, 1.0))
    with pytest.raises(QuadratureResolutionError):
        FieldProbe.from_solution(sol, ex1.data).integrals(0.5, 1.0)


def test_sampled_stage3_close_to_truth(ex1):
    sol = solve_forward(ex1.data, ex1.params, ex1.grid(0.01))
    K2, K3 = recover_K2_K3(FieldProbe.from_solution(sol, ex1.data), 0.25, 0.75, 1.0)
    assert abs(K2 - 1) < 0.05 and abs(K3 - 1) < 0.05


def test_report_params_raise_when_inadmissible(probe1):
    from biofilm_inverse.recovery import RecoveryReport
    values = dict(zip(PARAM_NAMES, [1, 1, 1, 1, 1, 1, -0.5, 2]))
    rep = RecoveryReport(values, {n: n != "a" for n in PARAM_NAMES})
    assert not rep.all_admissible
    with pytest.raises(DomainError):
        rep.params
