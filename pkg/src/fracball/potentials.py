"""Green potentials, Poisson extensions and the explicit kernel element.

Both potentials are integrated along rays centred at the evaluation point
x. For the Green potential the |x-y|^(2s-n) singularity is absorbed by the
polar Jacobian and a Jacobi end panel; for the Poisson extension the kernel
becomes t^-1 times a (|y|^2-1)^-s factor that is handled by a Jacobi panel
at the sphere. On each ray the factor 1 - |y|^2 is computed from the exact
distance to the sphere instead of from the coordinates of y.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonIntegrable, OutOfDomain, PreconditionError
from .kernels import KernelConstants, constants, getoor_lambda, _incomplete
from .quadrature import (
    QuadratureSpec,
    ScalarField,
    _checked,
    _far_breaks,
    exterior_tail,
)
from .rules import (
    capped_levels,
    dyadic_breaks,
    graded_unit_rule,
    panel_rule,
    ray_exit_distance,
    ray_rule,
    segment_rule,
    sphere_rule,
)


@dataclass(frozen=True)
class GreenRule:
    """Quadrature points y, weights and kernel inputs for G(x, .) on B_1."""

    x: np.ndarray
    y: np.ndarray       # (M, T, n)
    t: np.ndarray       # (M, T) distance |y - x|
    ay: np.ndarray      # (M, T) 1 - |y|^2
    w: np.ndarray       # (M, T) weights including the Jacobian t^(n-1)
    dirs: np.ndarray    # (M, n)


def green_rule(x, params, spec):
    """Ray rule on B_1 centred at an interior point x."""
    n, s = params.n, params.s
    x = np.asarray(x, dtype=float)
    delta = 1.0 - np.sqrt(x @ x)
    dirs, wd = spec.directions(n)
    t_exit = ray_exit_distance(x, dirs, 1.0)
    h0 = min(spec.split_radius, 0.5 * delta)
    # t^(2s-2) covers the gradient kernel; t^(2s-1) = t * t^(2s-2) comes for free
    alpha = 2.0 * s - 2.0 if s > 0.5 else 2.0 * s - 1.0
    t, w, gap = ray_rule(h0, t_exit, spec.radial_points, spec.inner_levels,
                         spec.ray_mid_panels, spec.ray_levels,
                         inner_alpha=alpha, return_gap=True)
    ay = gap * (t + t_exit[:, None] + 2.0 * (dirs @ x)[:, None])
    y = x + t[..., None] * dirs[:, None, :]
    return GreenRule(x, y, t, ay, wd[:, None] * w * t ** (n - 1), dirs)


def ray_green(rule, params, consts):
    """G(x, y) at the nodes of a GreenRule."""
    n, s = params.n, params.s
    ax = 1.0 - rule.x @ rule.x
    rho_val = ax * rule.ay / rule.t**2
    return consts.kappa_ns * rule.t ** (2.0 * s - n) * _incomplete(rho_val, n, s)


def ray_green_and_gradient(rule, params, consts):
    """G(x, y) and grad_x G(x, y) at the nodes of a GreenRule; the gradient
    has shape (M, T, n)."""
    n, s = params.n, params.s
    ax = 1.0 - rule.x @ rule.x
    t = rule.t
    rho_val = ax * rule.ay / t**2
    inc = _incomplete(rho_val, n, s)
    value = consts.kappa_ns * t ** (2.0 * s - n) * inc
    i2 = rho_val**s * (1.0 + rho_val) ** (-0.5 * n)
    i1 = (n - 2.0 * s) * inc + 2.0 * i2
    along = t ** (-(n - 2.0 * s + 1.0)) * i1
    radial = 2.0 / ax * t ** (-(n - 2.0 * s)) * i2
    grad = consts.kappa_ns * (along[..., None] * rule.dirs[:, None, :]
                              - radial[..., None] * rule.x)
    return value, grad


def ray_green_gradient(rule, params, consts):
    """grad_x G(x, y) at the nodes of a GreenRule, shape (M, T, n)."""
    return ray_green_and_gradient(rule, params, consts)[1]


def _interior_point(x, n, what):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise PreconditionError(f"{what}: x must be a point in R^{n}")
    return x


def green_potential_and_gradient(f, x, params, spec=None, consts=None, gradient=True):
    """(G*f)(x) and grad (G*f)(x) for an interior point x."""
    spec = spec or QuadratureSpec()
    consts = consts or constants(params)
    x = _interior_point(x, params.n, "green_potential")
    if x @ x >= 1.0:
        raise OutOfDomain("the gradient of a Green potential needs |x| < 1")
    if gradient and params.s <= 0.5:
        raise NonIntegrable(
            "grad_x G ~ |x-y|^-(n-2s+1) is not integrable for s <= 1/2")
    rule = green_rule(x, params, spec)
    fy = _checked(f(rule.y), "density")
    wf = rule.w * fy
    if not gradient:
        value = float(np.sum(wf * ray_green(rule, params, consts)))
        if not np.isfinite(value):
            raise NonIntegrable("Green potential did not produce a finite value")
        return value, None
    gk, gg = ray_green_and_gradient(rule, params, consts)
    value = float(np.sum(wf * gk))
    if not np.isfinite(value):
        raise NonIntegrable("Green potential did not produce a finite value")
    grad = np.einsum("mt,mtk->k", wf, gg)
    if not np.all(np.isfinite(grad)):
        raise NonIntegrable("Green potential gradient did not produce a finite value")
    return value, grad


def green_potential(f, x, params, spec=None, consts=None):
    """(G*f)(x) = int_{B_1} G(x, y) f(y) dy; exactly 0 for |x| >= 1."""
    x = _interior_point(x, params.n, "green_potential")
    if x @ x >= 1.0:
        return 0.0
    return green_potential_and_gradient(f, x, params, spec, consts, gradient=False)[0]


def green_potential_gradient(f, x, params, spec=None, consts=None):
    """grad (G*f)(x) = int_{B_1} grad_x G(x, y) f(y) dy for |x| < 1 (needs s > 1/2)."""
    return green_potential_and_gradient(f, x, params, spec, consts, gradient=True)[1]


def _poisson_rays(x, g, params, spec, consts):
    """Ray sums of P(x, .) g over |y| > 1 split into near panels and
    dyadic far shells (summed over directions)."""
    n, s = params.n, params.s
    order = spec.radial_points
    dirs, wd = spec.directions(n)
    xd = dirs @ x
    ax = 1.0 - x @ x
    t_exit = ray_exit_distance(x, dirs, 1.0)
    r_far = _far_breaks(g)
    kinks = sorted(k for k in g.kinks if 1.0 < k < r_far)
    edges = [t_exit] + [ray_exit_distance(x, dirs, k) for k in kinks] + \
        [ray_exit_distance(x, dirs, r_far)]
    # far shells are common to all rays so the odd O(1/t) part of the
    # kernel cancels between antipodal directions
    t_common = 2.0 * float(edges[-1].max())
    edges.append(np.full_like(t_exit, t_common))

    def ray_sum(t, w, gap):
        y = x + t[..., None] * dirs[:, None, :]
        ay = gap * (gap + 2.0 * t_exit[:, None] + 2.0 * xd[:, None])
        vals = _checked(g(y), "exterior datum")
        kern = consts.c_ns * (ax / ay) ** s / t
        return float(np.sum(wd[:, None] * w * kern * vals))

    # first segment: graded toward the sphere, Jacobi panel for gap^-s
    span = edges[1] - edges[0]
    levels = capped_levels(spec.grading_levels, 0.5, float(span.min()), 1e-300)
    nu, wu = graded_unit_rule(order, levels, 0.5, -s, "left")
    gap = span[:, None] * nu.ravel()[None, :]
    total = ray_sum(t_exit[:, None] + gap, span[:, None] * wu.ravel()[None, :], gap)
    for a, b in zip(edges[1:-1], edges[2:]):
        tt, ww = segment_rule(a, b, order, 4)
        total += ray_sum(tt, ww, tt - t_exit[:, None])
    dy = dyadic_breaks(t_common, max(spec.tail_radius, 4.0 * t_common))
    shells = []
    for lo, hi in zip(dy[:-1], dy[1:]):
        u, wu1 = panel_rule([lo, hi], order)
        tt = np.broadcast_to(u, (len(t_exit), order))
        ww = np.broadcast_to(wu1, (len(t_exit), order))
        shells.append(ray_sum(tt, ww, tt - t_exit[:, None]))
    shells = np.array(shells)
    total += float(shells.sum())
    if len(shells) >= 2:
        total += exterior_tail(shells, n, "poisson_extension")
    return total


def poisson_extension(g, x, params, spec=None, consts=None):
    """(P*g)(x) for |x| < 1; g(x) itself for |x| >= 1."""
    spec = spec or QuadratureSpec()
    consts = consts or constants(params)
    x = _interior_point(x, params.n, "poisson_extension")
    if x @ x >= 1.0:
        return float(g(x[None, :])[0])
    return _poisson_rays(x, g, params, spec, consts)


def nontrivial_constant(params, consts=None):
    """C(n, s): the surface integral below evaluated at x = 0."""
    consts = consts or constants(params)
    return consts.C_boundary


def boundary_surface_integral(x, params, points=256, consts=None):
    """c(n,s) int_{dB_1} (1-|x|^2)^s |x-y|^-n dH_y for |x| < 1."""
    consts = consts or constants(params)
    x = _interior_point(x, params.n, "boundary_surface_integral")
    if x @ x >= 1.0:
        raise OutOfDomain("boundary_surface_integral needs |x| < 1")
    dirs, w = sphere_rule(params.n, points)
    d = np.linalg.norm(dirs - x, axis=-1)
    return float(consts.c_ns * np.sum(w * (1.0 - x @ x) ** params.s / d**params.n))


def nontrivial_solution(x, params, consts=None):
    """C(n,s)(1-|x|^2)^(s-1) inside B_1 and 0 for |x| >= 1 (vectorised)."""
    c = nontrivial_constant(params, consts)
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(r2 < 1.0, c * (1.0 - r2) ** (params.s - 1.0), 0.0)
    return out if out.ndim else float(out)


def nontrivial_field(params, consts=None):
    """The kernel element as a ball-supported ScalarField."""
    c = nontrivial_constant(params, consts)
    s = params.s

    def u(x):
        r2 = np.sum(x * x, axis=-1)
        return c * np.maximum(1.0 - r2, 0.0) ** (s - 1.0)

    return ScalarField(u, params.n, "ball", "smooth", True, (), "nontrivial")


def getoor_field(params, scale=1.0):
    """scale * (1-|x|^2)_+^s, the Dirichlet solution for f = lambda * scale."""
    s = params.s

    def u(x):
        return scale * np.maximum(1.0 - np.sum(x * x, axis=-1), 0.0) ** s

    return ScalarField(u, params.n, "ball", "smooth", True, (), "getoor")


def getoor_potential(x, params):
    """Closed form of G*1: lambda^-1 (1-|x|^2)_+^s."""
    x = np.asarray(x, dtype=float)
    lam = getoor_lambda(params.n, params.s)
    return np.maximum(1.0 - np.sum(x * x, axis=-1), 0.0) ** params.s / lam


@dataclass(frozen=True)
class PotentialField:
    """G*f (kind "green") or P*g (kind "poisson") viewed as a ScalarField.

    The Green view is ball-supported; the Poisson view equals the datum
    outside B_1. Radial densities give radial potentials, which lets the
    integrators sample a single direction.
    """

    density: ScalarField
    params: object
    kind: str = "green"
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)
    consts: Optional[KernelConstants] = None

    def __post_init__(self):
        if self.kind not in ("green", "poisson"):
            raise PreconditionError(f"unknown potential kind {self.kind!r}")
        if self.consts is None:
            object.__setattr__(self, "consts", constants(self.params))

    def value(self, x):
        if self.kind == "green":
            return green_potential(self.density, x, self.params, self.spec, self.consts)
        return poisson_extension(self.density, x, self.params, self.spec, self.consts)

    def gradient(self, x):
        if self.kind != "green":
            raise PreconditionError("gradients are implemented for Green potentials")
        return green_potential_gradient(self.density, x, self.params, self.spec, self.consts)

    def _evaluate(self, x):
        pts = x.reshape(-1, x.shape[-1])
        if self.density.radial:
            # radial potential: evaluate once per distinct radius
            r = np.sqrt(np.sum(pts * pts, axis=-1))
            uniq, inv = np.unique(r, return_inverse=True)
            e = np.zeros(pts.shape[-1])
            e[0] = 1.0
            vals = np.array([self.value(e * ri) for ri in uniq])[inv]
        else:
            vals = np.array([self.value(p) for p in pts])
        return vals.reshape(x.shape[:-1])

    def as_field(self):
        support = "ball" if self.kind == "green" else "global"
        kinks = (1.0,) if self.kind == "poisson" else ()
        return ScalarField(self._evaluate, self.params.n, support, "smooth",
                           self.density.radial, kinks, f"{self.kind}({self.density.label})")


__all__ = [
    "GreenRule",
    "PotentialField",
    "boundary_surface_integral",
    "getoor_field",
    "getoor_potential",
    "green_potential",
    "green_potential_and_gradient",
    "green_potential_gradient",
    "green_rule",
    "nontrivial_constant",
    "nontrivial_field",
    "nontrivial_solution",
    "poisson_extension",
]
