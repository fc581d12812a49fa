import pytest

from fracball.kernels import ProblemParams
from fracball.properties import (
    dirichlet_identity,
    faulty_constants,
    getoor_consistency,
    gradient_bound,
    gradient_finite_difference,
    green_bound,
    lemma_min_inequality,
    mollifier_identities,
    poisson_normalization,
    radial_pv_oracle,
    run_suite,
)
from fracball.kernels import getoor_lambda

SMALL = {"lemma": 5000, "green": 2000, "gradient": 2000, "fd": 50}


@pytest.mark.parametrize("n,s", [(2, 0.25), (2, 0.75), (3, 0.6), (4, 0.5)])
def test_radial_pv_oracle_matches_closed_form(n, s):
    assert radial_pv_oracle(n, s) == pytest.approx(getoor_lambda(n, s), rel=1e-10)


def test_inequality_suites_pass():
    assert lemma_min_inequality(20_000, 2, seed=1).passed
    assert lemma_min_inequality(5_000, 3, seed=2).passed
    for n, s in [(2, 0.4), (2, 0.75), (3, 0.6)]:
        assert green_bound(ProblemParams(n=n, s=s), 5000, seed=3).passed
    assert gradient_bound(ProblemParams(n=2, s=0.75, r=0.25), 5000, seed=4).passed
    assert gradient_finite_difference(ProblemParams(n=3, s=0.7), 50).passed


def test_normalisations_pass():
    p = ProblemParams(n=2, s=0.75)
    assert poisson_normalization(p, probes=5).passed
    assert getoor_consistency(p, probes=4).passed
    assert dirichlet_identity(p, probes=3).passed
    assert all(r.passed for r in mollifier_identities(p))


def test_fault_is_caught_with_counterexample():
    p = ProblemParams(n=2, s=0.75)
    res = poisson_normalization(p, probes=5, consts=faulty_constants(p, c_ns_scale=1.1))
    assert not res.passed
    assert res.worst == pytest.approx(0.1, rel=1e-6)
    assert res.counterexamples and "x" in res.counterexamples[0]


def test_kappa_fault_breaks_getoor_check():
    p = ProblemParams(n=2, s=0.75)
    res = getoor_consistency(p, probes=3, consts=faulty_constants(p, kappa_scale=1.05))
    assert not res.passed


def test_pass_set_is_seed_independent():
    sets = {tuple(r.name for r in run_suite(seed, SMALL) if r.passed) for seed in range(10)}
    assert len(sets) == 1
    assert all(r.passed for r in run_suite(0, SMALL))


def test_results_are_deterministic():
    a = [r.to_dict() for r in run_suite(7, SMALL)]
    b = [r.to_dict() for r in run_suite(7, SMALL)]
    assert a == b
