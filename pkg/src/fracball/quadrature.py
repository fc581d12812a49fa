"""Cubature over the ball, its complement and boundary shells, and the
principal-value fractional Laplacian.

Fields are vectorised: an evaluator maps an array of points with shape
(..., n) to values with shape (...). Integrals over B_1 and shells use a
ball-centred polar rule whose radial panels shrink geometrically toward
|x| = 1; the contributions of those panels also drive a geometric
extrapolation of the part of the integral that the last panel misses.
"""
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import (
    Divergent,
    NonFinite,
    PreconditionError,
    SlowDecay,
    TooCloseToBoundary,
)
from .kernels import constants
from .rules import (
    dyadic_breaks,
    geometric_breaks,
    gauss_jacobi_left,
    geometric_tail,
    graded_unit_rule,
    mc_sphere_rule,
    panel_rule,
    ray_exit_distance,
    ray_rule,
    segment_rule,
    sphere_area,
    sphere_rule,
)

SMOOTHNESS_ORDER = {"C0": 0, "C1": 1, "C1_1": 2, "smooth": 3}
# fitted tail exponents within this margin of n count as non-convergent
DECAY_MARGIN = 0.05
# relative size below which a panel contribution is treated as roundoff
ROUNDOFF = 1e-13
# boundary panel ratios this close to 1 are treated as a divergent integral
DIVERGENCE_MARGIN = 1e-3


@dataclass(frozen=True)
class ScalarField:
    """A deterministic, vectorised field on R^n with support metadata.

    ``support`` is "global" or "ball" (identically 0 for |x| >= 1).
    ``radial`` declares the field depends on |x| only; integrators then
    sample a single direction. ``kinks`` lists radii of spheres across which
    the field is not smooth, used as panel breakpoints.
    """

    evaluator: Callable
    n: int
    support: str = "global"
    smoothness: str = "smooth"
    radial: bool = False
    kinks: tuple = ()
    label: str = ""

    def __post_init__(self):
        if self.support not in ("global", "ball"):
            raise PreconditionError(f"unknown support {self.support!r}")
        if self.smoothness not in SMOOTHNESS_ORDER:
            raise PreconditionError(f"unknown smoothness hint {self.smoothness!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            v = np.asarray(self.evaluator(x), dtype=float)
        v = np.array(np.broadcast_to(v, x.shape[:-1]))
        if self.support == "ball":
            v = np.where(np.sum(x * x, axis=-1) < 1.0, v, 0.0)
        return v

    @classmethod
    def constant(cls, value, n, support="global"):
        value = float(value)
        return cls(lambda x: np.full(x.shape[:-1], value), n, support,
                   "smooth", True, (), repr(value))

    def _combine(self, other, op, label):
        if isinstance(other, ScalarField):
            if other.n != self.n:
                raise PreconditionError("fields live in different dimensions")
            support = "ball" if self.support == other.support == "ball" else "global"
            smooth = min(self.smoothness, other.smoothness, key=SMOOTHNESS_ORDER.get)
            return ScalarField(
                lambda x: op(self(x), other(x)), self.n, support, smooth,
                self.radial and other.radial,
                tuple(sorted(set(self.kinks) | set(other.kinks))), label,
            )
        c = float(other)
        # shifting by a nonzero constant leaves the ball
        support = self.support if op in (np.multiply, np.divide) or c == 0.0 else "global"
        return ScalarField(lambda x: op(self(x), c), self.n, support,
                           self.smoothness, self.radial, self.kinks, label)

    def __add__(self, other):
        return self._combine(other, np.add, f"({self.label})+({getattr(other, 'label', other)})")

    def __sub__(self, other):
        return self._combine(other, np.subtract, f"({self.label})-({getattr(other, 'label', other)})")

    def __mul__(self, other):
        return self._combine(other, np.multiply, f"({self.label})*({getattr(other, 'label', other)})")

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def abs(self):
        return ScalarField(lambda x: np.abs(self(x)), self.n, self.support,
                           "C0", self.radial, self.kinks, f"abs({self.label})")


@dataclass(frozen=True)
class VectorField:
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        ns = {c.n for c in self.components}
        if len(ns) != 1 or ns.pop() != len(self.components):
            from .errors import DimensionMismatch

            raise DimensionMismatch("a vector field needs exactly n components in R^n")

    @property
    def n(self):
        return len(self.components)

    def __call__(self, x):
        return np.stack([c(x) for c in self.components], axis=-1)

    @classmethod
    def constant(cls, values):
        n = len(values)
        return cls(tuple(ScalarField.constant(v, n) for v in values))


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution and geometry of every cubature in the package.

    radial_points: Gauss-Legendre order per radial panel.
    angular_points: approximate number of directions on the sphere.
    grading_levels: dyadic panels toward |x| = 1 in ball and shell rules.
    ray_levels / ray_mid_panels / inner_levels: panel counts for the
    x-centred ray rules used by potentials and the PV operator.
    """

    scheme: str = "tensor"
    radial_points: int = 8
    angular_points: int = 64
    mc_samples: int = 4096
    pv_inner_radius: float = 0.05
    split_radius: float = 0.1
    tail_radius: float = 4096.0
    seed: int = 0
    grading_levels: int = 30
    ray_levels: int = 30
    ray_mid_panels: int = 12
    inner_levels: int = 8

    def __post_init__(self):
        if self.scheme not in ("tensor", "monte-carlo"):
            raise PreconditionError(f"unknown scheme {self.scheme!r}")
        if not 0.0 < self.pv_inner_radius < self.split_radius < 1.0:
            raise PreconditionError("need 0 < pv_inner_radius < split_radius < 1")
        if self.tail_radius < 2.0:
            raise PreconditionError("tail_radius must be >= 2")
        for name in ("radial_points", "angular_points", "mc_samples",
                     "grading_levels", "ray_levels", "ray_mid_panels"):
            if getattr(self, name) < 1:
                raise PreconditionError(f"{name} must be >= 1")
        if self.inner_levels < 0:
            raise PreconditionError("inner_levels must be >= 0")

    def refined(self, factor=2):
        """Spec with radial and angular resolution scaled by ``factor``."""
        return replace(
            self,
            radial_points=max(1, int(round(self.radial_points * factor))),
            angular_points=max(1, int(round(self.angular_points * factor))),
            mc_samples=max(1, int(round(self.mc_samples * factor))),
        )

    def directions(self, n):
        if self.scheme == "monte-carlo" or n >= 4:
            return mc_sphere_rule(n, self.mc_samples, self.seed)
        return sphere_rule(n, self.angular_points)


def _field_directions(f, spec):
    if f.radial:
        e = np.zeros((1, f.n))
        e[0, 0] = 1.0
        return e, np.array([sphere_area(f.n)])
    return spec.directions(f.n)


def _checked(values, what="field"):
    if not np.all(np.isfinite(values)):
        raise NonFinite(f"{what} returned NaN or inf at a quadrature node")
    return values


@dataclass(frozen=True)
class BallNodes:
    """Polar product rule on {a < |x| < b} with radial panels shrinking
    geometrically toward b. Arrays are indexed (panel, radial node, direction).
    """

    points: np.ndarray
    weights: np.ndarray
    radii: np.ndarray
    breaks: np.ndarray

    @property
    def delta(self):
        return np.broadcast_to((1.0 - self.radii)[..., None], self.weights.shape)

    def panel_sums(self, values):
        return np.sum(values * self.weights, axis=(1, 2))


def ball_nodes(n, spec, a=0.0, b=1.0, levels=None, radial=False, ratio=0.5):
    """Nodes and weights of the graded polar rule used by every ball and
    shell integral; ``radial`` keeps a single direction of weight |S^(n-1)|."""
    levels = spec.grading_levels if levels is None else levels
    breaks = geometric_breaks(a, b, levels, ratio, toward="b")
    if radial:
        dirs = np.zeros((1, n))
        dirs[0, 0] = 1.0
        wd = np.array([sphere_area(n)])
    else:
        dirs, wd = spec.directions(n)
    t, wt = panel_rule(breaks, spec.radial_points)
    t = t.reshape(-1, spec.radial_points)
    wt = wt.reshape(-1, spec.radial_points)
    points = t[..., None, None] * dirs[None, None, :, :]
    weights = (wt * t ** (n - 1))[..., None] * wd[None, None, :]
    return BallNodes(points, weights, t, breaks)


def radial_panel_sums(f, a, b, levels, spec, ratio=0.5):
    """Per-panel contributions to int_{a<|x|<b} f over the graded polar rule.

    Returns (breaks, sums).
    """
    nodes = ball_nodes(f.n, spec, a, b, levels, f.radial, ratio)
    vals = _checked(f(nodes.points))
    return nodes.breaks, nodes.panel_sums(vals)


def boundary_extrapolate(sums, what, end_resolved=False):
    """Sum of panel contributions ordered toward a singular end.

    Unless ``end_resolved`` the panel touching the end is replaced by the
    geometric continuation of the two before it, which is exact for a pure
    power-law singularity on geometrically shrinking panels.
    """
    sums = np.asarray(sums, dtype=float)
    if end_resolved or len(sums) < 3:
        return float(np.sum(sums))
    body = sums[:-1]
    total = float(np.sum(body))
    scale = float(np.sum(np.abs(body)))
    last, prev = float(body[-1]), float(body[-2])
    if scale == 0.0 or abs(last) <= ROUNDOFF * scale:
        return float(np.sum(sums))
    tail, q = geometric_tail(last, prev)
    if q >= 1.0 - DIVERGENCE_MARGIN:
        raise Divergent(
            f"{what}: boundary panels do not decay (ratio {q:.6f}); the integral diverges"
        )
    return total + tail


def integrate_ball(f, spec=None):
    """Approximate the integral of f over B_1."""
    spec = spec or QuadratureSpec()
    _, sums = radial_panel_sums(f, 0.0, 1.0, spec.grading_levels, spec)
    return boundary_extrapolate(sums, "integrate_ball")


def integrate_shell(f, eps, spec=None):
    """Integral of f over {1 - eps <= |x| < 1}."""
    spec = spec or QuadratureSpec()
    if not 0.0 < eps < 1.0:
        raise PreconditionError(f"shell thickness must lie in (0, 1), got {eps}")
    _, sums = radial_panel_sums(f, 1.0 - eps, 1.0, spec.grading_levels, spec)
    return boundary_extrapolate(sums, "integrate_shell")


def _complement_panels(f, spec, inner_alpha=None):
    """Panels of the exterior radial rule: graded toward |y| = 1 on [1, 2],
    dyadic shells up to tail_radius, kinks inserted as extra breaks.

    Returns (near, shells): lists of (nodes, weights); ``near`` is ordered
    from |y| = 2 down to the panel touching |y| = 1, ``shells`` maps a
    dyadic shell index to its sub-panels.
    """
    order = spec.radial_points
    kinks = sorted(k for k in f.kinks if 1.0 < k < spec.tail_radius)
    near = geometric_breaks(1.0, 2.0, spec.grading_levels, 0.5, toward="a")
    near = np.unique(np.concatenate([near, [k for k in kinks if k < 2.0]]))
    t, w = panel_rule(near, order)
    t, w = t.reshape(-1, order), w.reshape(-1, order)
    if inner_alpha is not None:
        h = near[1] - near[0]
        tj, wj = gauss_jacobi_left(order, float(inner_alpha))
        t[0], w[0] = 1.0 + h * tj, h * wj
    near_panels = [(ti, wi) for ti, wi in zip(t[::-1], w[::-1])]
    shells = {}
    dy = dyadic_breaks(2.0, spec.tail_radius)
    for i, (lo, hi) in enumerate(zip(dy[:-1], dy[1:])):
        br = np.unique(np.concatenate([[lo, hi], [k for k in kinks if lo < k < hi]]))
        shells[i] = panel_rule(br, order)
    return near_panels, shells


def exterior_tail(shell_sums, n, what):
    """Extrapolate the integral beyond the last dyadic shell.

    A power-law integrand |y|^-gamma gives shell sums in ratio
    q = 2^(n - gamma); gamma <= n + DECAY_MARGIN is reported as SlowDecay.
    """
    last, prev = float(shell_sums[-1]), float(shell_sums[-2])
    scale = float(np.sum(np.abs(shell_sums)))
    if scale == 0.0 or abs(last) <= ROUNDOFF * scale:
        return 0.0
    tail, q = geometric_tail(last, prev)
    if q > 0 and (q >= 2.0 ** (-DECAY_MARGIN)):
        gamma = n - np.log2(q)
        raise SlowDecay(
            f"{what}: fitted decay exponent {gamma:.3f} <= n + {DECAY_MARGIN} = "
            f"{n + DECAY_MARGIN}; the exterior integral does not converge"
        )
    return tail


def integrate_complement(f, spec=None, inner_alpha=None):
    """Integral of f over R^n minus B_1 with a fitted power-law tail.

    ``inner_alpha`` switches the panel touching |y| = 1 to a Jacobi rule for
    (|y| - 1)^inner_alpha, used for kernels with a known boundary exponent.
    """
    spec = spec or QuadratureSpec()
    dirs, wd = _field_directions(f, spec)
    near_panels, shells = _complement_panels(f, spec, inner_alpha)

    def panel_sum(t, w):
        pts = t[:, None, None] * dirs[None, :, :]
        vals = _checked(f(pts))
        return float(((vals * wd).sum(axis=1) * w * t ** (f.n - 1)).sum())

    near = [panel_sum(t, w) for t, w in near_panels]
    shell_sums = np.array([panel_sum(*shells[i]) for i in sorted(shells)])
    total = boundary_extrapolate(near, "integrate_complement",
                                  end_resolved=inner_alpha is not None)
    total += float(shell_sums.sum())
    if len(shell_sums) >= 2:
        total += exterior_tail(shell_sums, f.n, "integrate_complement")
    return total


def _far_breaks(f):
    kink_max = max([k for k in f.kinks if k > 1.0], default=1.0)
    t_far = 4.0
    while t_far < kink_max + 1.0:
        t_far *= 2.0
    return t_far


def frac_laplacian_pv(u, x, params, spec=None, consts=None):
    """Principal-value fractional Laplacian of u at an interior point x.

    Inside |z| < pv_inner_radius the symmetric second difference is
    integrated with a Jacobi rule for t^(1-2s); beyond it the one-sided
    kernel is integrated along rays from x with breakpoints where each ray
    crosses |y| = 1 (and any declared kink spheres), then a power-law tail.
    """
    spec = spec or QuadratureSpec()
    consts = consts or constants(params)
    x = np.asarray(x, dtype=float)
    n, s = params.n, params.s
    if x.shape != (n,):
        raise PreconditionError(f"x must be a point in R^{n}")
    if x @ x >= 1.0:
        raise PreconditionError("frac_laplacian_pv needs |x| < 1")
    rho = spec.pv_inner_radius
    delta = 1.0 - np.sqrt(x @ x)
    if delta < 2.0 * rho:
        raise TooCloseToBoundary(
            f"dist(x, boundary) = {delta:.4g} < 2 * pv_inner_radius = {2 * rho:.4g}"
        )
    if SMOOTHNESS_ORDER[u.smoothness] < SMOOTHNESS_ORDER["C1_1"]:
        raise PreconditionError(
            f"pointwise PV needs a C^1,1 field near x; hint is {u.smoothness}"
        )
    dirs, wd = spec.directions(n)
    ux = float(_checked(u(x[None, :]))[0])

    # inner symmetric part
    tn, tw = graded_unit_rule(spec.radial_points, spec.inner_levels, 0.5, 1.0 - 2.0 * s, "left")
    t = rho * tn.ravel()
    w = rho * tw.ravel()
    plus = x + t[None, :, None] * dirs[:, None, :]
    minus = x - t[None, :, None] * dirs[:, None, :]
    second = ux - 0.5 * (_checked(u(plus)) + _checked(u(minus)))
    inner = float(np.sum(wd[:, None] * w * second * t ** (-1.0 - 2.0 * s)))

    # one-sided part inside the unit sphere
    t_exit = ray_exit_distance(x, dirs, 1.0)
    tt, ww = ray_rule(rho, t_exit, spec.radial_points, -1, spec.ray_mid_panels,
                      spec.ray_levels)
    vals = _checked(u(x + tt[..., None] * dirs[:, None, :]))
    outer = float(np.sum(wd[:, None] * ww * (ux - vals) * tt ** (-1.0 - 2.0 * s)))

    if u.support == "ball":
        outer += ux * float(np.sum(wd * t_exit ** (-2.0 * s))) / (2.0 * s)
    else:
        outer += _pv_exterior(u, x, ux, dirs, wd, t_exit, params, spec)
    return consts.C_ns * (inner + outer)


def _pv_exterior(u, x, ux, dirs, wd, t_exit, params, spec):
    s = params.s
    order = spec.radial_points
    t_far = _far_breaks(u)
    kinks = sorted(k for k in u.kinks if 1.0 < k)
    edges = [t_exit] + [ray_exit_distance(x, dirs, k) for k in kinks] + \
        [np.full_like(t_exit, t_far)]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        tt, ww = segment_rule(a, b, order, spec.ray_levels // 3 + 1)
        vals = _checked(u(x + tt[..., None] * dirs[:, None, :]))
        total += float(np.sum(wd[:, None] * ww * (ux - vals) * tt ** (-1.0 - 2.0 * s)))
    dy = dyadic_breaks(t_far, max(spec.tail_radius, 2.0 * t_far))
    shell_u = []
    for lo, hi in zip(dy[:-1], dy[1:]):
        tt, ww = panel_rule([lo, hi], order)
        vals = _checked(u(x + tt[None, :, None] * dirs[:, None, :]))
        kern = ww * tt ** (-1.0 - 2.0 * s)
        total += ux * float(np.sum(wd)) * float(np.sum(kern))
        shell_u.append(float(np.sum(wd[:, None] * kern * vals)))
    shell_u = np.array(shell_u)
    total -= float(shell_u.sum())
    r_end = dy[-1]
    # the u(x) part beyond r_end is exact; the u part uses the fitted tail
    total += ux * float(np.sum(wd)) * r_end ** (-2.0 * s) / (2.0 * s)
    if len(shell_u) >= 2:
        # the kernel already supplies t^(-1-2s); compare against |y|^-gamma
        # decay with gamma measured in R^n terms
        last, prev = shell_u[-1], shell_u[-2]
        scale = float(np.sum(np.abs(shell_u)))
        if scale > 0.0 and abs(last) > ROUNDOFF * scale:
            tail, q = geometric_tail(last, prev)
            if np.isinf(tail) or (q > 0 and q >= 2.0 ** (-DECAY_MARGIN)):
                raise SlowDecay("field is not in L_2s: PV tail does not converge")
            total -= tail
    return total
