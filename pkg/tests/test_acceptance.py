"""The thirteen acceptance criteria at their stated tolerances and runtimes.

Each test records one PASS/FAIL line, printed together at the end of the
pytest run. Criterion 4 cannot be met by any nonnegative density (see the
test's docstring) and is kept as a strict expected failure.
"""
import json
import time

import numpy as np
import pytest
from scipy.special import beta

from fracball.cli import main
from fracball.errors import FieldSyntaxError
from fracball.experiments import (
    boundary_family,
    bump_family,
    embedding_table,
    nonnegative_family,
    verify_nonuniqueness,
)
from fracball.fieldspec import parse_expr
from fracball.kernels import ProblemParams
from fracball.potentials import PotentialField, green_potential
from fracball.properties import (
    getoor_consistency,
    gradient_bound,
    gradient_finite_difference,
    green_bound,
    lemma_min_inequality,
    mollifier_identities,
    poisson_normalization,
)
from fracball.quadrature import ScalarField, VectorField
from fracball.solver import (
    CoefficientBundle,
    SolverSpec,
    apriori_ratio,
    assemble_operator,
    max_principle_check,
    solve,
)
from fracball.weighted_norms import dyadic_schedule, trace_limit_estimate

from field_corpus import CORPUS

DRIFT = (0.3, 0.0)
ZERO_ORDER = 0.2


def drift_bundle():
    return CoefficientBundle(VectorField.constant(list(DRIFT)),
                             ScalarField.constant(ZERO_ORDER, 2),
                             tuple(map(str, DRIFT)), str(ZERO_ORDER))


def test_01_poisson_normalization(record):
    t0 = time.perf_counter()
    res = [poisson_normalization(ProblemParams(n=n, s=s), probes=20, radius=0.8, tol=5e-3)
           for n, s in [(2, 0.4), (2, 0.75), (3, 0.6)]]
    dt = time.perf_counter() - t0
    worst = max(r.worst for r in res)
    ok = all(r.passed for r in res) and dt <= 60
    record(1, "Poisson normalization", ok, f"sup|P*1 - 1| = {worst:.2e} <= 5e-3", dt)
    assert ok


def test_02_getoor_oracle(record):
    t0 = time.perf_counter()
    res = getoor_consistency(ProblemParams(n=2, s=0.75), probes=40, radius=0.8, tol=1e-2)
    dt = time.perf_counter() - t0
    ok = res.passed and dt <= 120
    record(2, "Getoor oracle", ok, f"max rel err {res.worst:.2e} <= 1e-2 ({res.note})", dt)
    assert ok


def test_03_nonuniqueness(record):
    t0 = time.perf_counter()
    rep = verify_nonuniqueness(ProblemParams(n=2, s=0.75), probes=10, radius=0.7,
                               pv_tol=1e-2, limit_tol=0.05, schedule=dyadic_schedule(3, 9))
    dt = time.perf_counter() - t0
    ok = rep["passed"] and dt <= 120
    record(3, "Nonuniqueness", ok,
           f"max|PV|/C = {rep['pv_max_over_C']:.2e}, trace {rep['trace']['classification']}, "
           f"limit rel err {rep['limit_relative_error']:.2e}", dt)
    assert ok


@pytest.mark.xfail(strict=True, reason="T_1/128 <= 0.05 T_1/8 is unattainable: "
                   "G*f >= c delta^s forces T_eps >= c' eps, a ratio near 1/16")
def test_04_trace_zero_for_green_potentials(record):
    """For f >= 0, f != 0 the Green potential is bounded below by a multiple
    of delta^s, so T_eps decays no faster than eps and the ratio
    T_{1/128}/T_{1/8} stays above about 1/16 > 0.05. Monotonicity and the
    zero classification hold; the ratio clause fails."""
    t0 = time.perf_counter()
    p = ProblemParams(n=2, s=0.75)
    u = PotentialField(boundary_family(p, 0.01), p).as_field()
    rep = trace_limit_estimate(u, dyadic_schedule(3, 9), p)
    dt = time.perf_counter() - t0
    vals = np.array(rep.values)
    monotone = bool(np.all(np.diff(vals) < 0))
    ratio = vals[4] / vals[0]  # eps = 1/128 against eps = 1/8
    ok = monotone and ratio <= 0.05 and rep.classification == "zero" and dt <= 60
    record(4, "Trace zero for Green potentials", ok,
           f"monotone={monotone}, T_1/128/T_1/8 = {ratio:.4f} (need <= 0.05), "
           f"classification {rep.classification}", dt)
    assert ok


def test_05_lemma_min_inequality(record):
    t0 = time.perf_counter()
    res = lemma_min_inequality(100_000, 2, seed=0)
    dt = time.perf_counter() - t0
    ok = res.passed and dt <= 10
    record(5, "Min-term inequality", ok,
           f"{len(res.counterexamples)} violations in {res.samples} samples", dt)
    assert ok


def test_06_green_bound(record):
    t0 = time.perf_counter()
    res = [green_bound(ProblemParams(n=n, s=s), 10_000, seed=0)
           for n, s in [(2, 0.4), (2, 0.75), (3, 0.6)]]
    dt = time.perf_counter() - t0
    ok = all(r.passed for r in res) and dt <= 30
    record(6, "Green bound", ok,
           "max G/bound = " + ", ".join(f"{r.worst:.4f}" for r in res), dt)
    assert ok


def test_07_gradient_kernel(record):
    t0 = time.perf_counter()
    p = ProblemParams(n=2, s=0.75, r=0.5)
    fd = gradient_finite_difference(p, 100, seed=0, tol=1e-4)
    gb = gradient_bound(p, 10_000, seed=0)
    dt = time.perf_counter() - t0
    ok = fd.passed and fd.samples == 100 and gb.passed and dt <= 60
    record(7, "Gradient kernel", ok,
           f"FD rel err {fd.worst:.2e}, weighted bound max ratio {gb.worst:.3f}", dt)
    assert ok


@pytest.fixture(scope="module")
def default_spec():
    return SolverSpec()


def test_08_solver_reduction_and_residual(record, default_spec):
    t0 = time.perf_counter()
    p = ProblemParams(n=2, s=0.75, r=0.5, p=1.0)
    one = ScalarField.constant(1.0, 2)
    plain = solve(one, None, p, default_spec, residual=False)
    direct = np.array([green_potential(one, x, p) for x in plain.nodes])
    reduction = float(np.max(np.abs(plain.values - direct)) / np.max(direct))
    sol = solve(one, drift_bundle(), p, default_spec)
    f_norm = (2 * np.pi * beta(p.r + 1, 2))  # ||1||_{L^1_r} over B_1
    res = sol.diagnostics["residual_norm"]
    dt = time.perf_counter() - t0
    ok = (reduction <= 1e-4 and sol.converged and max(sol.iterations_used) <= 30
          and res <= 5e-2 * f_norm and dt <= 600)
    record(8, "Solver reduction and residual", ok,
           f"b=c=0 rel dev {reduction:.1e}; iterations {sol.iterations_used}; "
           f"residual {res:.2e} <= {5e-2 * f_norm:.3f}", dt)
    assert ok


def test_09_apriori_stability(record, default_spec):
    t0 = time.perf_counter()
    p = ProblemParams(n=2, s=0.75, r=0.5, p=1.0)
    coeffs = drift_bundle()
    op = assemble_operator(coeffs, p, default_spec)
    ratios = []
    for f in bump_family(2):
        sol = solve(f, coeffs, p, default_spec, operator=op, residual=False)
        ratios.append(apriori_ratio(sol, f, p, default_spec))
    dt = time.perf_counter() - t0
    spread = max(ratios) / min(ratios)
    ok = spread <= 2 and dt <= 600
    record(9, "A priori stability", ok,
           f"ratios {np.round(ratios, 3).tolist()}, max/min {spread:.3f} <= 2", dt)
    assert ok


def test_10_maximum_principle(record, default_spec):
    t0 = time.perf_counter()
    p = ProblemParams(n=2, s=0.75, r=0.5, p=1.0)
    rep = max_principle_check(drift_bundle(), nonnegative_family(2), p, default_spec,
                              tolerance=1e-3)
    dt = time.perf_counter() - t0
    worst = min(c["min_value"] for c in rep["cases"])
    ok = rep["passed"] and dt <= 300
    record(10, "Maximum principle", ok,
           f"min node value {worst:.2e} >= -1e-3 over {len(rep['cases'])} forcings", dt)
    assert ok


def test_11_embedding_tables(record):
    t0 = time.perf_counter()
    p = ProblemParams(n=2, s=0.75, r=0.5)
    reps = [embedding_table(p, 1.0, 1.2), embedding_table(p, 2.0)]
    dt = time.perf_counter() - t0
    ok = all(r["passed"] for r in reps) and dt <= 300
    record(11, "Embedding tables", ok,
           "max refinement change " + ", ".join(
               f"p={r['p']:g}: {r['max_refinement_change']:.1e}" for r in reps), dt)
    assert ok


def test_12_mollifier_identities(record):
    t0 = time.perf_counter()
    res = mollifier_identities(ProblemParams(n=2, s=0.75), eps=0.1)
    dt = time.perf_counter() - t0
    ok = all(r.passed for r in res) and dt <= 10
    record(12, "Mollifier identities", ok,
           ", ".join(f"{r.name} {r.worst:.1e}" for r in res), dt)
    assert ok


def test_13_parser(record, tmp_path):
    t0 = time.perf_counter()
    trips = sum(parse_expr(parse_expr(t, 2).pretty(), 2).ast == parse_expr(t, 2).ast
                for t in CORPUS)
    bad = ["1 +", "(x1", "x1 $ 2", "x9", "min(1)", "exp", "1 2", ")"]
    positioned = 0
    for text in bad:
        try:
            parse_expr(text, 2)
        except FieldSyntaxError as exc:
            positioned += exc.position is not None
    cfgs = [{"fields": {"f": "1 +"}}, {"unknown": 1}, {"params": {"n": 2.5}}]
    codes = []
    for i, cfg in enumerate(cfgs):
        path = tmp_path / f"c{i}.json"
        path.write_text(json.dumps(cfg))
        codes.append(main(["solve", "--config", str(path)]))
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    codes.append(main(["solve", "--config", str(path)]))
    dt = time.perf_counter() - t0
    ok = (trips == len(CORPUS) == 50 and positioned == len(bad)
          and all(c == 2 for c in codes) and dt <= 5)
    record(13, "Parser", ok,
           f"{trips}/50 round trips, {positioned}/{len(bad)} errors positioned, "
           f"config exit codes {codes}", dt)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
