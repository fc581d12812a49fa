"""Randomised inequality suites and normalisation self-tests.

Every suite returns a PropertyResult with a pass flag, the number of
samples, the worst observed margin and up to ``dump`` counterexamples.
Sampling is driven by an explicit seed so reports are reproducible.
"""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .kernels import (
    KernelConstants,
    ProblemParams,
    _green,
    _green_gradient,
    constants,
    gradient_bound_constant,
    green_bound_constant,
    lemma_min_term,
)
from .potentials import (
    boundary_surface_integral,
    green_potential,
    nontrivial_constant,
    poisson_extension,
)
from .quadrature import ScalarField, frac_laplacian_pv
from .rules import sphere_area
from .weighted_norms import mollify


@dataclass
class PropertyResult:
    name: str
    passed: bool
    samples: int
    worst: float
    tolerance: float
    counterexamples: list = field(default_factory=list)
    note: str = ""

    def to_dict(self):
        return asdict(self)


def uniform_ball(rng, count, n, max_radius=1.0):
    """Uniform samples in B_{max_radius}."""
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = max_radius * rng.uniform(0.0, 1.0, count) ** (1.0 / n)
    return r[:, None] * d


def boundary_biased_ball(rng, count, n, min_delta=1e-6):
    """Points with log-uniform distance to the sphere mixed with uniform ones."""
    half = count // 2
    d = rng.standard_normal((count - half, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    delta = np.exp(rng.uniform(np.log(min_delta), 0.0, count - half))
    return np.concatenate([uniform_ball(rng, half, n), (1.0 - delta)[:, None] * d])


def _dump(mask, *cols, limit=5):
    idx = np.flatnonzero(mask)[:limit]
    return [{k: np.asarray(v)[i].tolist() for k, v in cols} for i in idx]


def lemma_min_inequality(samples=100_000, n=2, seed=0, dump=5):
    """min{[(1-|x|)(1-|y|)/|x-y|^2]^b, 1} <= 4((1-|y|)/(1-|x|))^a, -b <= a <= b."""
    rng = np.random.default_rng(seed)
    x = boundary_biased_ball(rng, samples, n)
    y = boundary_biased_ball(rng, samples, n)
    b = rng.uniform(0.0, 1.0, samples)
    b = np.where(b == 0.0, 0.5, b)
    a = rng.uniform(-1.0, 1.0, samples) * b
    lhs = lemma_min_term(x, y, b)
    dx = 1.0 - np.linalg.norm(x, axis=-1)
    dy = 1.0 - np.linalg.norm(y, axis=-1)
    rhs = 4.0 * (dy / dx) ** a
    bad = ~(lhs <= rhs)
    margin = np.max(lhs / rhs)
    return PropertyResult("lemma_min_inequality", not bad.any(), samples, float(margin), 1.0,
                          _dump(bad, ("x", x), ("y", y), ("beta", b), ("alpha", a), limit=dump))


def _pairs(rng, samples, n, min_sep=1e-6):
    x = boundary_biased_ball(rng, samples, n)
    y = boundary_biased_ball(rng, samples, n)
    sep = np.linalg.norm(x - y, axis=-1)
    keep = sep > min_sep
    return x[keep], y[keep]


def green_bound(params, samples=10_000, seed=0, dump=5, consts=None):
    """G(x,y) <= C |x-y|^(2s-n) min{[(1-|x|)(1-|y|)/|x-y|^2]^s, 1}."""
    consts = consts or constants(params)
    rng = np.random.default_rng(seed)
    x, y = _pairs(rng, samples, params.n)
    n, s = params.n, params.s
    g = _green(x, y, n, s, consts.kappa_ns)
    c = green_bound_constant(params, consts)
    d = np.linalg.norm(x - y, axis=-1)
    bound = c * d ** (2.0 * s - n) * lemma_min_term(x, y, s)
    bad = ~(g <= bound)
    return PropertyResult(f"green_bound(n={n},s={s})", not bad.any(), len(x),
                          float(np.max(g / bound)), 1.0,
                          _dump(bad, ("x", x), ("y", y), ("G", g), ("bound", bound), limit=dump))


def gradient_bound(params, samples=10_000, seed=0, dump=5, consts=None):
    """|grad_x G|(1-|x|)^r <= C_3 (1-|y|)^r |x-y|^-(n-2s+1) for r in [1-s, s]."""
    consts = consts or constants(params)
    rng = np.random.default_rng(seed)
    x, y = _pairs(rng, samples, params.n)
    n, s, r = params.n, params.s, params.r
    g = np.linalg.norm(_green_gradient(x, y, n, s, consts.kappa_ns), axis=-1)
    dx = 1.0 - np.linalg.norm(x, axis=-1)
    dy = 1.0 - np.linalg.norm(y, axis=-1)
    d = np.linalg.norm(x - y, axis=-1)
    lhs = g * dx**r
    rhs = gradient_bound_constant(params, consts) * dy**r * d ** (-(n - 2.0 * s + 1.0))
    bad = ~(lhs <= rhs)
    return PropertyResult(f"gradient_bound(n={n},s={s},r={r})", not bad.any(), len(x),
                          float(np.max(lhs / rhs)), 1.0,
                          _dump(bad, ("x", x), ("y", y), ("lhs", lhs), ("rhs", rhs), limit=dump))


def gradient_finite_difference(params, samples=100, seed=0, step=1e-5, tol=1e-4, dump=5,
                               consts=None):
    """Central differences of G in x against the closed-form gradient."""
    consts = consts or constants(params)
    rng = np.random.default_rng(seed)
    n, s = params.n, params.s
    x = uniform_ball(rng, 4 * samples, n, 0.9)
    y = uniform_ball(rng, 4 * samples, n, 0.9)
    keep = np.linalg.norm(x - y, axis=-1) > 0.05
    x, y = x[keep][:samples], y[keep][:samples]
    exact = _green_gradient(x, y, n, s, consts.kappa_ns)
    fd = np.empty_like(exact)
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        fd[:, k] = (_green(x + e, y, n, s, consts.kappa_ns)
                    - _green(x - e, y, n, s, consts.kappa_ns)) / (2.0 * step)
    err = np.linalg.norm(fd - exact, axis=-1) / np.linalg.norm(exact, axis=-1)
    bad = ~(err <= tol)
    return PropertyResult(f"gradient_fd(n={n},s={s})", not bad.any(), len(x), float(err.max()),
                          tol, _dump(bad, ("x", x), ("y", y), ("rel_err", err), limit=dump))


def probe_points(count, n, radius, seed=0):
    """Deterministic spread of probe points in the closed ball B_radius."""
    if n == 2:
        k = np.arange(count)
        r = radius * np.sqrt((k + 0.5) / count)
        th = k * np.pi * (3.0 - np.sqrt(5.0))
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    return uniform_ball(np.random.default_rng(seed), count, n, radius)


def poisson_normalization(params, probes=20, radius=0.8, tol=5e-3, spec=None, consts=None,
                          dump=5):
    """sup over probes of |P*1 - 1|."""
    one = ScalarField.constant(1.0, params.n)
    pts = probe_points(probes, params.n, radius)
    vals = np.array([poisson_extension(one, x, params, spec, consts) for x in pts])
    err = np.abs(vals - 1.0)
    bad = ~(err <= tol)
    return PropertyResult(f"poisson_normalization(n={params.n},s={params.s})", not bad.any(),
                          probes, float(err.max()), tol,
                          _dump(bad, ("x", pts), ("P*1", vals), limit=dump))


def radial_pv_oracle(n, s, consts=None):
    """lambda = (-Delta)^s (1-|x|^2)_+^s at 0 by 1-D adaptive quadrature.

    C_ns |S^(n-1)| int_0^inf (1 - (1-r^2)_+^s) r^(-1-2s) dr. The piece on
    [1/2, 1] carries the algebraic endpoint weight (1-r)^s explicitly.
    """
    consts = consts or constants(ProblemParams(n=n, s=s))
    quad = lambda *a, **k: integrate.quad(*a, epsabs=1e-14, epsrel=1e-12, **k)[0]
    near = quad(lambda r: -np.expm1(s * np.log1p(-r * r)) * r ** (-1.0 - 2.0 * s), 0.0, 0.5)
    mid = quad(lambda r: r ** (-1.0 - 2.0 * s), 0.5, 1.0)
    mid -= quad(lambda r: (1.0 + r) ** s * r ** (-1.0 - 2.0 * s), 0.5, 1.0,
                weight="alg", wvar=(0.0, s))
    inner = near + mid
    outer = 1.0 / (2.0 * s)
    return consts.C_ns * sphere_area(n) * (inner + outer)


def getoor_consistency(params, probes=12, radius=0.8, tol=1e-2, spec=None, consts=None,
                       dump=5):
    """Relative error of G*1 against lambda^-1 (1-|x|^2)^s with lambda from
    the radial PV oracle; jointly exercises kappa(n,s) and C_{n,s}."""
    lam = radial_pv_oracle(params.n, params.s, consts)
    one = ScalarField.constant(1.0, params.n)
    pts = probe_points(probes, params.n, radius)
    vals = np.array([green_potential(one, x, params, spec, consts) for x in pts])
    ref = (1.0 - np.sum(pts * pts, axis=-1)) ** params.s / lam
    err = np.abs(vals / ref - 1.0)
    bad = ~(err <= tol)
    return PropertyResult(f"getoor_consistency(n={params.n},s={params.s})", not bad.any(),
                          probes, float(err.max()), tol,
                          _dump(bad, ("x", pts), ("G*1", vals), ("closed_form", ref), limit=dump),
                          note=f"lambda_oracle={lam!r}")


def radial_green_fit(f, params, degree=14, spec=None, consts=None):
    """(1-|x|^2)_+^s P(|x|^2) fitted to G*f at Chebyshev radii for radial f.

    Returns a ball-supported ScalarField that the PV operator can evaluate
    cheaply; used to test (-Delta)^s (G*f) = f.
    """
    k = np.arange(degree + 1)
    z = 0.5 * (1.0 - np.cos(np.pi * (k + 0.5) / (degree + 1)))   # values of |x|^2 in (0, 1)
    pts = np.zeros((degree + 1, params.n))
    pts[:, 0] = np.sqrt(z) * 0.999
    vals = np.array([green_potential(f, x, params, spec, consts) for x in pts])
    zz = np.sum(pts * pts, axis=-1)
    cheb = np.polynomial.Chebyshev.fit(zz, vals / (1.0 - zz) ** params.s, degree, domain=[0, 1])
    s = params.s

    def ev(x):
        r2 = np.sum(x * x, axis=-1)
        return np.maximum(1.0 - r2, 0.0) ** s * cheb(np.clip(r2, 0.0, 1.0))

    return ScalarField(ev, params.n, "ball", "smooth", True, (), f"fit(G*{f.label})")


def dirichlet_identity(params, probes=6, radius=0.6, tol=5e-3, spec=None, consts=None,
                       dump=5):
    """(-Delta)^s (G*f) = f for the centred Gaussian bump f = exp(-4|x|^2),
    with G*f represented by its radial fit and the PV operator applied."""
    f = ScalarField(lambda x: np.exp(-4.0 * np.sum(x * x, axis=-1)), params.n, "global",
                    "smooth", True, (), "exp(-4|x|^2)")
    u = radial_green_fit(f, params, spec=spec, consts=consts)
    pts = probe_points(probes, params.n, radius)
    lap = np.array([frac_laplacian_pv(u, x, params, spec, consts) for x in pts])
    err = np.abs(lap - f(pts))
    bad = ~(err <= tol)
    return PropertyResult(f"dirichlet_identity(n={params.n},s={params.s})", not bad.any(),
                          probes, float(err.max()), tol,
                          _dump(bad, ("x", pts), ("pv", lap), ("f", f(pts)), limit=dump))


def nontrivial_surface_identity(params, points=(0.3, 0.6), tol=1e-5, consts=None):
    """The surface integral at x != 0 equals C(n,s)(1-|x|^2)^(s-1)."""
    c = nontrivial_constant(params, consts)
    errs = []
    for r in points:
        x = np.zeros(params.n)
        x[0] = r
        val = boundary_surface_integral(x, params, points=512, consts=consts)
        errs.append(abs(val / (c * (1.0 - r * r) ** (params.s - 1.0)) - 1.0))
    worst = float(max(errs))
    return PropertyResult(f"nontrivial_surface(n={params.n},s={params.s})", worst <= tol,
                          len(points), worst, tol)


def mollifier_identities(params, eps=0.1, seed=0, probes=50, dump=5):
    """Constants exact (1e-10), affine fields exact (1e-8), support of a
    ball-supported field inside B_{1+eps}."""
    rng = np.random.default_rng(seed)
    n = params.n
    pts = uniform_ball(rng, probes, n, 1.5)
    results = []
    c = mollify(ScalarField.constant(2.5, n), eps, params)(pts)
    err_c = np.abs(c - 2.5)
    results.append(PropertyResult("mollifier_constant", bool(np.all(err_c <= 1e-10)), probes,
                                  float(err_c.max()), 1e-10,
                                  _dump(err_c > 1e-10, ("x", pts), ("value", c), limit=dump)))
    a = rng.standard_normal(n)
    aff = ScalarField(lambda x: 0.7 + x @ a, n, "global", "smooth", False, (), "affine")
    m = mollify(aff, eps, params)(pts)
    err_a = np.abs(m - aff(pts))
    results.append(PropertyResult("mollifier_affine", bool(np.all(err_a <= 1e-8)), probes,
                                  float(err_a.max()), 1e-8,
                                  _dump(err_a > 1e-8, ("x", pts), ("value", m), limit=dump)))
    ball = ScalarField(lambda x: 1.0 + 0.0 * x[..., 0], n, "ball", "C0", True, (), "1_B")
    d = rng.standard_normal((probes, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    outside = (1.0 + eps) * (1.0 + rng.uniform(0.0, 0.5, probes))[:, None] * d
    outside[0] = (1.0 + eps) * d[0]
    v = mollify(ball, eps, params)(outside)
    results.append(PropertyResult("mollifier_support", bool(np.all(v == 0.0)), probes,
                                  float(np.max(np.abs(v))), 0.0,
                                  _dump(v != 0.0, ("x", outside), ("value", v), limit=dump)))
    return results


def kernel_symmetry_positivity(params, samples=10_000, seed=0, consts=None, dump=5):
    consts = consts or constants(params)
    rng = np.random.default_rng(seed)
    x, y = _pairs(rng, samples, params.n)
    g1 = _green(x, y, params.n, params.s, consts.kappa_ns)
    g2 = _green(y, x, params.n, params.s, consts.kappa_ns)
    bad = ~((g1 == g2) & (g1 > 0.0))
    return PropertyResult(f"green_symmetry_positivity(n={params.n},s={params.s})",
                          not bad.any(), len(x), float(np.max(np.abs(g1 - g2))), 0.0,
                          _dump(bad, ("x", x), ("y", y), ("G(x,y)", g1), ("G(y,x)", g2),
                                limit=dump))


def faulty_constants(params, c_ns_scale=1.0, kappa_scale=1.0, C_ns_scale=1.0):
    """Constants with deliberately corrupted factors, for fault injection."""
    k = constants(params)
    return KernelConstants(k.C_ns * C_ns_scale, k.c_ns * c_ns_scale, k.kappa_ns * kappa_scale,
                           k.C_boundary * c_ns_scale)


DEFAULT_PAIRS = ((2, 0.4), (2, 0.75), (3, 0.6))


def run_suite(seed=0, samples=None, fault=None, spec=None, pairs=DEFAULT_PAIRS):
    """All property checks; ``fault`` is a dict of constant scale factors."""
    samples = samples or {}
    out = []
    base = ProblemParams(n=2, s=0.75, r=0.5)
    out.append(lemma_min_inequality(samples.get("lemma", 100_000), 2, seed))
    for n, s in pairs:
        p = ProblemParams(n=n, s=s, r=min(max(0.5, 1.0 - s), s) if s > 0.5 else 0.0)
        consts = faulty_constants(p, **fault) if fault else None
        out.append(green_bound(p, samples.get("green", 10_000), seed, consts=consts))
        out.append(kernel_symmetry_positivity(p, samples.get("green", 10_000), seed,
                                              consts=consts))
        out.append(poisson_normalization(p, spec=spec, consts=consts))
        out.append(nontrivial_surface_identity(p, consts=consts))
    consts = faulty_constants(base, **fault) if fault else None
    out.append(gradient_bound(base, samples.get("gradient", 10_000), seed, consts=consts))
    out.append(gradient_finite_difference(base, samples.get("fd", 100), seed, consts=consts))
    out.append(getoor_consistency(base, spec=spec, consts=consts))
    out.append(dirichlet_identity(base, spec=spec, consts=consts))
    out.extend(mollifier_identities(base, seed=seed))
    return out


__all__ = [
    "DEFAULT_PAIRS",
    "PropertyResult",
    "boundary_biased_ball",
    "dirichlet_identity",
    "faulty_constants",
    "getoor_consistency",
    "gradient_bound",
    "gradient_finite_difference",
    "green_bound",
    "kernel_symmetry_positivity",
    "lemma_min_inequality",
    "mollifier_identities",
    "nontrivial_surface_identity",
    "poisson_normalization",
    "probe_points",
    "radial_green_fit",
    "radial_pv_oracle",
    "run_suite",
    "uniform_ball",
]
