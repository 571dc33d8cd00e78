import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biofilm_inverse.errors import DomainError, MeasurementFormatError, SingularityError
from biofilm_inverse.model import (
    PARAM_NAMES, Grid, ParamVector, ProblemData, check_compatibility, diffusivity, get_case, monod,
    pde_residuals, read_field_csv, write_field_csv,
)


def test_param_vector_roundtrip():
    X = ParamVector(1, 2, 3, 0, 4, 5, 0, 1)
    assert ParamVector.from_array(X.to_array()) == X
    assert ParamVector.from_dict(X.to_dict()) == X
    assert list(X.to_dict()) == list(PARAM_NAMES)
    assert X.replace(a=2.5).a == 2.5


@pytest.mark.parametrize("name,value", [("d1", 0.0), ("K1", -1.0), ("K2", -1e-12), ("a", -0.1), ("b", 0.99),
                                        ("K4", math.nan), ("d2", math.inf)])
def test_param_vector_rejects_inadmissible(name, value):
    values = dict(d1=1, d2=1, K1=1, K2=1, K3=1, K4=1, a=1, b=2)
    values[name] = value
    with pytest.raises(DomainError, match=name):
        ParamVector(**values)


def test_param_vector_boundary_values_allowed():
    ParamVector(d1=1, d2=1, K1=1, K2=0, K3=1, K4=1, a=0, b=1)


def test_grid_steps_and_endpoints():
    g = Grid.from_steps(0.01)
    assert (g.I, g.N) == (101, 101)
    assert g.x[0] == 0.0 and g.x[-1] == 1.0 and g.t[-1] == 1.0
    assert g.dx == pytest.approx(0.01) and g.dt == pytest.approx(0.01)
    g2 = Grid.from_steps(0.1, 0.05, T=2.0)
    assert (g2.I, g2.N) == (11, 41)


@pytest.mark.parametrize("I,N", [(2, 10), (10, 2), (0, 5)])
def test_grid_invariants(I, N):
    with pytest.raises(DomainError):
        Grid(I, N, 1.0)


def test_diffusivity_values_and_errors():
    assert diffusivity(0.5, 1, 2) == pytest.approx(0.5)
    assert diffusivity(0.0, 1, 2) == 0.0
    assert diffusivity(1.0, 0, 1) == 1.0  # a = 0 removes the singularity
    with pytest.raises(SingularityError):
        diffusivity(1.0, 1, 2)
    with pytest.raises(DomainError):
        diffusivity(-0.1, 1, 2)


@given(st.floats(0.0, 0.999), st.floats(0.0, 4.0), st.floats(1.0, 4.0))
def test_diffusivity_nonnegative(M, a, b):
    assert diffusivity(M, a, b) >= 0.0


def test_monod():
    assert monod(1.0, 2.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        monod(-2.0, 1.0, 1.0)


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_manufactured_cases_solve_the_pde(name):
    case = get_case(name)
    x = np.linspace(0.1, 0.9, 9)
    for t in (0.2, 0.5, 0.8):
        rS, rM = pde_residuals(case, x, np.full_like(x, t))
        assert np.max(np.abs(rS)) < 1e-7
        assert np.max(np.abs(rM)) < 1e-7


def test_example1_closed_forms(ex1):
    t = np.linspace(0, 1, 11)
    assert np.allclose(ex1.exact_flux(t), -(t + 1))
    assert np.allclose(ex1.exact_biomass(t), np.exp(-t) / 6)
    # flux from the closed-form derivative agrees
    assert np.allclose(-ex1.params.d1 * ex1.S_x(0.0, t), ex1.exact_flux(t))


def test_example2_boundary_and_flux(ex2):
    t = np.linspace(0, 1, 11)
    assert np.allclose(ex2.exact_M(0.0, t), 0.0) and np.allclose(ex2.exact_M(1.0, t), 0.0)
    assert np.allclose(-ex2.S_x(0.0, t), ex2.exact_flux(t))
    assert ex2.exact_M(0.5, 1.0) == pytest.approx(1.0)


def test_sampled_data_is_read_only(ex1):
    d = ex1.data.sample(Grid(11, 11, 1.0))
    assert d.F.shape == (11, 11)
    with pytest.raises(ValueError):
        d.F[0, 0] = 1.0


def test_incompatible_data_rejected():
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))  # noqa: E731
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))  # noqa: E731
    data = ProblemData(mu1=one, mu2=one, mu3=zero, mu4=zero, S0=lambda x: 0.5 + 0 * x, M0=lambda x: 0 * x)
    with pytest.raises(DomainError, match="incompatible"):
        data.sample(Grid(5, 5, 1.0))


def test_tabulated_data_shape_checked():
    g = Grid(5, 4, 1.0)
    data = ProblemData(mu1=np.ones(4), mu2=np.ones(4), mu3=np.zeros(4), mu4=np.zeros(4),
                       S0=np.ones(5), M0=np.zeros(5), F=np.zeros((5, 3)))
    with pytest.raises(DomainError):
        data.sample(g)


def test_field_csv_roundtrip(tmp_path):
    x = np.linspace(0, 1, 4)
    t = np.linspace(0, 1, 3)
    v = np.random.default_rng(0).standard_normal((4, 3))
    write_field_csv(tmp_path / "f.csv", x, t, v)
    x2, t2, v2 = read_field_csv(tmp_path / "f.csv")
    assert np.array_equal(x, x2) and np.array_equal(t, t2) and np.array_equal(v, v2)


def test_field_csv_errors_report_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,t,value\n0,0,1\n1,0,oops\n")
    with pytest.raises(MeasurementFormatError) as err:
        read_field_csv(p)
    assert err.value.line == 3


def test_check_compatibility_passes_for_cases(ex1, ex2):
    for case in (ex1, ex2):
        check_compatibility(case.data.sample(case.grid(0.1)))
