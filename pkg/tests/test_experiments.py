import numpy as np
import pytest

from fracball.errors import PreconditionError
from fracball.experiments import (
    boundary_family,
    embedding_columns,
    embedding_exponent,
    embedding_spec,
    embedding_table,
    family_norm,
    golden_probes,
    trace_constant,
    verify_nonuniqueness,
)
from fracball.kernels import ProblemParams, constants
from fracball.weighted_norms import weighted_lp_norm

P = ProblemParams(n=2, s=0.75, r=0.5)


def test_exponent_case_split():
    # potential, order 2s = 1.5 in the plane
    assert embedding_exponent(1.0, 2, 1.5, 1.2) == (1.2, "p=1")
    assert embedding_exponent(1.2, 2, 1.5)[0] == pytest.approx(2 * 1.2 / (2 - 1.8))
    assert embedding_exponent(2.0, 2, 1.5) == (float("inf"), "p>crit")
    # gradient, order 2s - 1 = 0.5
    assert embedding_exponent(2.0, 2, 0.5)[0] == pytest.approx(4.0)
    assert embedding_exponent(6.0, 2, 0.6)[0] == float("inf")


@pytest.mark.parametrize("q", [4.0, 5.0])
def test_p1_endpoint_rejected(q):
    # n/(n-2s) = 4 for n = 2, s = 0.75
    with pytest.raises(PreconditionError):
        embedding_exponent(1.0, 2, 1.5, q)


def test_critical_p_rejected():
    with pytest.raises(PreconditionError):
        embedding_exponent(2 / 1.5, 2, 1.5)


@pytest.mark.parametrize("t,p,r", [(0.05, 1, 0.5), (0.3, 2, 0.5), (0.1, 1.5, 0.2)])
def test_family_norm_matches_quadrature(t, p, r):
    f = boundary_family(P, t)
    assert family_norm(P, t, p, r) == pytest.approx(weighted_lp_norm(f, p, r, P), rel=1e-9)


def test_family_norm_of_non_member_is_infinite():
    assert family_norm(P, 0.1, 1.5, -0.2) == float("inf")


def test_family_outside_space_is_skipped():
    p = ProblemParams(n=2, s=0.75, r=-0.5)
    cols = embedding_columns(p, 2.0, None, embedding_spec(), t_values=(0.05,))
    assert cols["rows"][0]["skipped"]


def test_gradient_column_for_large_p():
    p = ProblemParams(n=2, s=0.8, r=0.5)
    rep = embedding_table(p, 6.0, t_values=(0.1, 0.3))
    assert rep["q_grad"] == float("inf")
    assert np.isfinite(rep["max_grad_ratio"])
    assert rep["passed"]


def test_nonuniqueness_and_control():
    rep = verify_nonuniqueness(P)
    assert rep["passed"] and rep["trace"]["classification"] == "positive"
    assert rep["limit_relative_error"] < 1e-4
    ctrl = verify_nonuniqueness(P, control=True)
    assert ctrl["passed"] and ctrl["trace"]["classification"] == "zero"


def test_trace_constant_value():
    c = constants(P).C_boundary
    assert trace_constant(P) == pytest.approx(c * 2 * np.pi * 2 ** -0.25 / 0.75)


def test_golden_probes_radius():
    pts = golden_probes(10, 3, 0.7)
    assert pts.shape == (10, 3)
    assert np.all(np.linalg.norm(pts, axis=1) <= 0.7 + 1e-12)
