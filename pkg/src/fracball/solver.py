"""Fixed-point solver for (-Delta)^s u + b.grad u + c u = f in B_1, u = 0 outside.

The Picard map is u -> G*(f - tau (b.grad u~ + c u~)), where u~ is the
interpolant of the node values: u~ = (1-|x|^2)_+^s v with v a cubic
polyharmonic RBF plus linear polynomial through the node values of
u / (1-|x|^2)^s. Because every ingredient is linear, G* applied to the
interpolated right-hand side is precomputed once per coefficient bundle as
an N x N matrix; each Picard step is then a matrix-vector product.
Continuation walks tau from 0 to 1 in ``tau_steps`` increments, warm
starting each stage from the previous one.
"""
import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.spatial.distance import cdist

from .errors import (
    DivisionByZero,
    MaxItersExceeded,
    NonContractive,
    NonFinite,
    PreconditionError,
    TooCloseToBoundary,
)
from .kernels import constants
from .potentials import (
    green_potential_and_gradient,
    green_rule,
    ray_green_and_gradient,
)
from .quadrature import (
    QuadratureSpec,
    ScalarField,
    VectorField,
    _checked,
    frac_laplacian_pv,
)
from .rules import gauss_legendre, geometric_breaks, mc_sphere_rule, sphere_rule

SCHEMA_VERSION = 1


def _solver_quadrature():
    return QuadratureSpec(radial_points=6, angular_points=48, ray_mid_panels=8,
                          ray_levels=16, inner_levels=6)


@dataclass(frozen=True)
class SolverSpec:
    """Collocation, iteration and continuation settings.

    Nodes lie on rings |x| = r_j whose radii are Gauss points of panels
    [0, 1/2], [1/2, 3/4], ... shrinking toward the boundary; the ring at
    radius r carries about ``angular_nodes * r^(n-1)`` points.
    """

    radial_levels: int = 5
    radial_order: int = 3
    angular_nodes: int = 28
    min_ring_nodes: int = 6
    max_picard_iters: int = 60
    tol: float = 1e-9
    tau_steps: int = 4
    stall_limit: int = 5
    interpolation: str = "cubic-rbf"
    quadrature: QuadratureSpec = field(default_factory=_solver_quadrature)
    residual_collar: float = 0.1
    residual_radial: int = 4
    residual_angular: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise PreconditionError("tol must be positive")
        if self.tau_steps < 1:
            raise PreconditionError("tau_steps must be >= 1")
        if self.interpolation != "cubic-rbf":
            raise PreconditionError(f"unknown interpolation rule {self.interpolation!r}")
        for name in ("radial_levels", "radial_order", "angular_nodes",
                     "max_picard_iters", "stall_limit", "residual_radial",
                     "residual_angular"):
            if getattr(self, name) < 1:
                raise PreconditionError(f"{name} must be >= 1")
        if not 0.0 < self.residual_collar < 1.0:
            raise PreconditionError("residual_collar must lie in (0, 1)")

    def refined(self, factor=2):
        return replace(
            self,
            radial_order=int(round(self.radial_order * factor)),
            angular_nodes=int(round(self.angular_nodes * factor)),
            quadrature=self.quadrature.refined(factor),
        )

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _ring_directions(n, count, offset, seed):
    if n == 2:
        count += count % 2
        th = 2.0 * np.pi * (np.arange(count) + 0.5 * offset) / count
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(count, 2.0 * np.pi / count)
    if n == 3:
        return sphere_rule(3, count)
    return mc_sphere_rule(n, count, seed)


def collocation_nodes(n, spec):
    """Graded ring nodes in B_1 and product weights for node norms."""
    breaks = np.concatenate([[0.0], geometric_breaks(0.5, 1.0, spec.radial_levels - 1, 0.5)])
    t0, w0 = gauss_legendre(spec.radial_order)
    pts, wts = [], []
    j = 0
    for a, b in zip(breaks[:-1], breaks[1:]):
        for t, w in zip(a + (b - a) * t0, (b - a) * w0):
            count = max(spec.min_ring_nodes, int(round(spec.angular_nodes * t ** (n - 1))))
            dirs, wd = _ring_directions(n, count, j % 2, spec.seed + j)
            pts.append(t * dirs)
            wts.append(w * t ** (n - 1) * wd)
            j += 1
    return np.concatenate(pts), np.concatenate(wts)


def node_norm(values, nodes, weights, p, r):
    """Discrete L^p_r norm over collocation nodes (p = inf: weighted max)."""
    delta = 1.0 - np.linalg.norm(nodes, axis=-1)
    v = delta**r * np.abs(np.asarray(values, dtype=float))
    if p == np.inf:
        return float(np.max(v)) if v.size else 0.0
    return float(np.sum(weights * v**p) ** (1.0 / p))


class CubicRBFInterpolant:
    """u~ = (1-|x|^2)_+^s v, v = sum_k lam_k |x - x_k|^3 + c0 + c1.x.

    ``coefficients`` is linear in the node values; the saddle-point system
    is factorised once per node set.
    """

    def __init__(self, centers, s):
        self.centers = np.asarray(centers, dtype=float)
        self.s = float(s)
        m, n = self.centers.shape
        a = cdist(self.centers, self.centers) ** 3
        poly = np.hstack([np.ones((m, 1)), self.centers])
        k = np.zeros((m + n + 1, m + n + 1))
        k[:m, :m] = a
        k[:m, m:] = poly
        k[m:, :m] = poly.T
        self._lu = lu_factor(k)
        self.weight = (1.0 - np.sum(self.centers**2, axis=-1)) ** self.s

    @property
    def size(self):
        return self.centers.shape[0] + self.centers.shape[1] + 1

    def coefficients(self, values):
        rhs = np.zeros(self.size)
        rhs[: len(values)] = np.asarray(values, dtype=float) / self.weight
        return lu_solve(self._lu, rhs)

    def coefficient_matrix(self):
        """Linear map node values -> coefficients, shape (size, N)."""
        m = self.centers.shape[0]
        rhs = np.zeros((self.size, m))
        rhs[:m, :m] = np.diag(1.0 / self.weight)
        return lu_solve(self._lu, rhs)

    def _parts(self, coef, y):
        m = self.centers.shape[0]
        d = cdist(y.reshape(-1, y.shape[-1]), self.centers)
        lam, c0, c1 = coef[:m], coef[m], coef[m + 1:]
        flat = y.reshape(-1, y.shape[-1])
        v = (d**3) @ lam + c0 + flat @ c1
        return d, flat, lam, c1, v

    def evaluate(self, coef, y, chunk=4096):
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1, y.shape[-1])
        out = np.empty(len(flat))
        for i in range(0, len(flat), chunk):
            _, p, _, _, v = self._parts(coef, flat[i:i + chunk])
            a = 1.0 - np.sum(p * p, axis=-1)
            out[i:i + chunk] = np.where(a > 0.0, np.maximum(a, 0.0) ** self.s * v, 0.0)
        return out.reshape(y.shape[:-1])

    def gradient(self, coef, y, chunk=4096):
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1, y.shape[-1])
        out = np.empty_like(flat)
        for i in range(0, len(flat), chunk):
            d, p, lam, c1, v = self._parts(coef, flat[i:i + chunk])
            diff = p[:, None, :] - self.centers[None, :, :]
            grad_v = 3.0 * np.einsum("qk,qkd->qd", d * lam, diff) + c1
            a = 1.0 - np.sum(p * p, axis=-1)
            inside = a > 0.0
            a = np.where(inside, a, 1.0)
            g = a[:, None] ** self.s * grad_v - 2.0 * self.s * (a ** (self.s - 1.0) * v)[:, None] * p
            out[i:i + chunk] = np.where(inside[:, None], g, 0.0)
        return out.reshape(y.shape)

    def field(self, coef, n, label="u~"):
        return ScalarField(lambda x: self.evaluate(coef, x), n, "ball", "C1_1",
                           False, (), label)


@dataclass
class CoefficientBundle:
    """Drift b, zero-order coefficient c >= 0, and their labels."""

    b: VectorField
    c: ScalarField
    b_text: tuple = ()
    c_text: str = ""
    Lambda: float = float("nan")

    @classmethod
    def zero(cls, n):
        return cls(VectorField.constant([0.0] * n), ScalarField.constant(0.0, n),
                   ("0",) * n, "0")

    def validate(self, params, nodes):
        if self.b.n != params.n or self.c.n != params.n:
            raise PreconditionError("coefficients live in a different dimension")
        bv = _checked(self.b(nodes), "drift b")
        cv = _checked(self.c(nodes), "coefficient c")
        if np.any(cv < 0.0):
            raise PreconditionError(
                f"c must be nonnegative in B_1; min over nodes is {cv.min():.4g}")
        if np.any(bv != 0.0):
            params.check_solver()
        self.Lambda = float(np.max(np.linalg.norm(bv, axis=-1)) + np.max(np.abs(cv)))
        return self


@dataclass
class Discretization:
    params: object
    spec: SolverSpec
    nodes: np.ndarray
    weights: np.ndarray
    interp: CubicRBFInterpolant

    def norm(self, values):
        return node_norm(values, self.nodes, self.weights, self.params.p, self.params.r)


@lru_cache(maxsize=8)
def discretization(params, spec):
    nodes, weights = collocation_nodes(params.n, spec)
    return Discretization(params, spec, nodes, weights, CubicRBFInterpolant(nodes, params.s))


@dataclass
class CoupledOperator:
    """Node-value matrices of u -> G*(b.grad u~ + c u~) and its gradient."""

    value: np.ndarray      # (N, N)
    gradient: np.ndarray   # (N, n, N)
    coeffs: CoefficientBundle


def assemble_operator(coeffs, params, spec):
    """Precompute the Green transfer of the coupling term at every node."""
    disc = discretization(params, spec)
    coeffs.validate(params, disc.nodes)
    consts = constants(params)
    s, n = params.s, params.n
    centers = disc.nodes
    m = len(centers)
    rows = np.zeros((1 + n, m + n + 1))
    value = np.zeros((m, m + n + 1))
    grad = np.zeros((m, n, m + n + 1))
    for i, x in enumerate(centers):
        rule = green_rule(x, params, spec.quadrature)
        y = rule.y.reshape(-1, n)
        ay = rule.ay.ravel()
        w = rule.w.ravel()
        gk, gg = ray_green_and_gradient(rule, params, consts)
        gk = gk.ravel() * w
        gg = gg.reshape(-1, n) * w[:, None]
        kern = np.concatenate([gk[:, None], gg], axis=1)        # (Q, 1+n)
        bv = _checked(coeffs.b(y), "drift b")
        cv = _checked(coeffs.c(y), "coefficient c")
        as_ = ay**s
        zero_order = as_ * cv - 2.0 * s * ay ** (s - 1.0) * np.sum(bv * y, axis=-1)
        drift = as_[:, None] * bv                                 # (Q, n)
        d = cdist(y, centers)
        # basis values and derivatives: |y-x_k|^3, 1, y_1..y_n; the drift
        # part 3|y-x_k|(y_e - x_ke) is split so only d and d^3 enter products
        phi = d * d * d
        rows[:] = 0.0
        rows[:, :m] = (kern * zero_order[:, None]).T @ phi
        for e in range(n):
            kd = kern * drift[:, e:e + 1]
            rows[:, :m] += 3.0 * (((kd * y[:, e:e + 1]).T @ d) - (kd.T @ d) * centers[None, :, e])
        rows[:, m] = kern.T @ zero_order
        rows[:, m + 1:] = kern.T @ (zero_order[:, None] * y + drift)
        value[i] = rows[0]
        grad[i] = rows[1:]
    cmat = disc.interp.coefficient_matrix()
    return CoupledOperator(value @ cmat, np.einsum("idk,kj->idj", grad, cmat), coeffs)


def green_data(f, params, spec):
    """Node values and gradients of G*f with the solver's quadrature."""
    disc = discretization(params, spec)
    consts = constants(params)
    vals = np.empty(len(disc.nodes))
    grads = np.empty_like(disc.nodes)
    want_grad = params.s > 0.5
    for i, x in enumerate(disc.nodes):
        v, g = green_potential_and_gradient(f, x, params, spec.quadrature, consts,
                                            gradient=want_grad)
        vals[i] = v
        grads[i] = g if g is not None else np.nan
    return vals, grads


@dataclass
class DiscreteSolution:
    nodes: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    params: object
    weights: np.ndarray
    provenance: dict = field(default_factory=dict)
    converged: bool = False
    iterations_used: list = field(default_factory=list)
    tau_path: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise NonFinite("solution values are not finite")

    def interpolant(self, spec):
        disc = discretization(self.params, spec)
        if disc.nodes.shape != self.nodes.shape or not np.allclose(disc.nodes, self.nodes):
            raise PreconditionError("solution nodes do not match the solver spec")
        coef = disc.interp.coefficients(self.values)
        return disc.interp, coef

    def field(self, spec):
        interp, coef = self.interpolant(spec)
        return interp.field(coef, self.params.n)

    def min_value(self):
        return float(np.min(self.values)) if self.values.size else 0.0

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "params": asdict(self.params),
            "nodes": self.nodes.tolist(),
            "values": self.values.tolist(),
            "gradients": self.gradients.tolist(),
            "weights": self.weights.tolist(),
            "provenance": self.provenance,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "tau_path": self.tau_path,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self):
        n = self.nodes.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow([f"x{i + 1}" for i in range(n)] + ["u"] +
                   [f"du_dx{i + 1}" for i in range(n)] + ["weight"])
        for x, u, g, q in zip(self.nodes, self.values, self.gradients, self.weights):
            w.writerow([repr(float(v)) for v in (*x, u, *g, q)])
        return buf.getvalue()


def _provenance(f, coeffs, spec):
    return {
        "f": getattr(f, "label", ""),
        "b": list(coeffs.b_text) if coeffs is not None else [],
        "c": coeffs.c_text if coeffs is not None else "",
        "solver_spec": spec.digest(),
    }


def _prepare(f, coeffs, params, spec, operator):
    coeffs = coeffs or CoefficientBundle.zero(params.n)
    if operator is None or operator.coeffs is not coeffs:
        disc = discretization(params, spec)
        if _is_zero(coeffs, params, spec):
            coeffs.validate(params, disc.nodes)
            m, n = disc.nodes.shape
            operator = CoupledOperator(np.zeros((m, m)), np.zeros((m, n, m)), coeffs)
        else:
            operator = assemble_operator(coeffs, params, spec)
    return coeffs, operator


def picard_step(u_current, f, coeffs, tau, params, spec=None, operator=None,
                forcing=None):
    """One application of u -> G*(f - tau (b.grad u~ + c u~)) at the nodes."""
    spec = spec or SolverSpec()
    coeffs, operator = _prepare(f, coeffs, params, spec, operator)
    disc = discretization(params, spec)
    wf, gf = forcing if forcing is not None else green_data(f, params, spec)
    u = np.asarray(u_current.values if isinstance(u_current, DiscreteSolution) else u_current,
                   dtype=float)
    vals = wf - tau * (operator.value @ u)
    grads = gf - tau * np.einsum("idj,j->id", operator.gradient, u)
    return DiscreteSolution(disc.nodes, vals, grads, params, disc.weights,
                            _provenance(f, coeffs, spec), False, [1], [float(tau)])


def solve(f, coeffs, params, spec=None, operator=None, forcing=None, residual=True):
    """Continuation in tau with Picard iteration at every stage.

    Raises NonContractive when the increment fails to decrease for
    ``stall_limit`` consecutive steps and MaxItersExceeded when a stage
    does not reach ``tol`` (relative to the node norm of u).
    """
    spec = spec or SolverSpec()
    coeffs, operator = _prepare(f, coeffs, params, spec, operator)
    disc = discretization(params, spec)
    trivial = _is_zero(coeffs, params, spec)
    if not trivial:
        params.check_solver()
    wf, gf = forcing if forcing is not None else green_data(f, params, spec)
    u = np.zeros(len(disc.nodes))
    taus = [1.0] if trivial else [k / spec.tau_steps for k in range(1, spec.tau_steps + 1)]
    iters, ratios = [], []
    for tau in taus:
        prev_inc, stall, used = None, 0, 0
        for it in range(1, spec.max_picard_iters + 1):
            new = wf - tau * (operator.value @ u)
            if not np.all(np.isfinite(new)):
                raise NonFinite("Picard iterate is not finite")
            inc = disc.norm(new - u)
            u = new
            used = it
            scale = disc.norm(u)
            if inc <= spec.tol * scale or inc == 0.0:
                break
            if prev_inc is not None:
                ratios.append(inc / prev_inc)
                stall = stall + 1 if inc >= prev_inc else 0
                if stall >= spec.stall_limit:
                    raise NonContractive(
                        f"Picard increments stopped decreasing at tau={tau:.3g} "
                        f"(ratio {inc / prev_inc:.3g}); try tau_steps={2 * spec.tau_steps}",
                        ratio=inc / prev_inc, suggested_tau_steps=2 * spec.tau_steps)
            prev_inc = inc
        else:
            raise MaxItersExceeded(
                f"Picard iteration did not reach tol={spec.tol:g} in "
                f"{spec.max_picard_iters} steps at tau={tau:.3g}")
        iters.append(used)
    grads = gf - np.einsum("idj,j->id", operator.gradient, u)
    sol = DiscreteSolution(disc.nodes, u, grads, params, disc.weights,
                           _provenance(f, coeffs, spec), True, iters,
                           [float(t) for t in taus])
    sol.diagnostics["Lambda"] = coeffs.Lambda
    sol.diagnostics["contraction_ratio"] = float(np.median(ratios)) if ratios else 0.0
    if residual:
        sol.diagnostics.update(residual_report(sol, f, coeffs, params, spec))
    return sol


def _is_zero(coeffs, params, spec):
    disc = discretization(params, spec)
    return (not np.any(coeffs.b(disc.nodes)) and not np.any(coeffs.c(disc.nodes)))


def probe_points(params, spec):
    """Polar Gauss rule on B_{1-collar}: points and weights for probe norms."""
    n = params.n
    radius = 1.0 - spec.residual_collar
    t0, w0 = gauss_legendre(spec.residual_radial)
    if n == 2:
        dirs, wd = _ring_directions(2, spec.residual_angular, 1, 0)
    elif n == 3:
        dirs, wd = sphere_rule(3, spec.residual_angular)
    else:
        dirs, wd = mc_sphere_rule(n, spec.residual_angular, spec.seed)
    t = radius * t0
    pts = (t[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w = ((radius * w0 * t ** (n - 1))[:, None] * wd[None, :]).ravel()
    return pts, w


def _pv_values(ufield, pts, params, qspec):
    out, skipped = [], []
    for i, x in enumerate(pts):
        try:
            out.append(frac_laplacian_pv(ufield, x, params, qspec))
        except TooCloseToBoundary:
            out.append(np.nan)
            skipped.append(i)
    return np.array(out), skipped


def residual_report(sol, f, coeffs, params, spec=None, qspec=None):
    """PV-based residual of the interpolated solution at interior probes."""
    spec = spec or SolverSpec()
    qspec = qspec or QuadratureSpec()
    coeffs = coeffs or CoefficientBundle.zero(params.n)
    interp, coef = sol.interpolant(spec)
    ufield = interp.field(coef, params.n)
    pts, w = probe_points(params, spec)
    lap, skipped = _pv_values(ufield, pts, params, qspec)
    grad = interp.gradient(coef, pts)
    res = lap + np.sum(coeffs.b(pts) * grad, axis=-1) + coeffs.c(pts) * ufield(pts) - f(pts)
    keep = np.isfinite(res)
    norm = node_norm(res[keep], pts[keep], w[keep], params.p, params.r)
    return {
        "residual_norm": norm,
        "residual_max": float(np.max(np.abs(res[keep]))) if keep.any() else 0.0,
        "probe_count": int(keep.sum()),
        "probes_skipped": len(skipped),
        "pv_norm": node_norm(lap[keep], pts[keep], w[keep], params.p, params.r),
        "f_probe_norm": node_norm(f(pts)[keep], pts[keep], w[keep], params.p, params.r),
    }


def residual_norm(sol, f, coeffs, params, spec=None, qspec=None):
    """Weighted L^p_r norm of (-Delta)^s u~ + b.grad u~ + c u~ - f over probes
    at distance >= residual_collar from the boundary."""
    return residual_report(sol, f, coeffs, params, spec, qspec)["residual_norm"]


def apriori_ratio(sol, f, params, spec=None, qspec=None):
    """||(-Delta)^s u~||_{L^p_r} / ||f||_{L^p_r}, both over the interior probe set.

    Returns 0 when both norms vanish; DivisionByZero if only f vanishes.
    """
    spec = spec or SolverSpec()
    interp, coef = sol.interpolant(spec)
    ufield = interp.field(coef, params.n)
    pts, w = probe_points(params, spec)
    lap, _ = _pv_values(ufield, pts, params, qspec or QuadratureSpec())
    keep = np.isfinite(lap)
    num = node_norm(lap[keep], pts[keep], w[keep], params.p, params.r)
    den = node_norm(f(pts)[keep], pts[keep], w[keep], params.p, params.r)
    if den == 0.0:
        if num <= 1e-12:
            return 0.0
        raise DivisionByZero("||f|| vanishes but (-Delta)^s u does not")
    return num / den


def max_principle_check(coeffs, f_family, params, spec=None, tolerance=1e-3):
    """Solve for each nonnegative f and report the minimum node value."""
    spec = spec or SolverSpec()
    disc = discretization(params, spec)
    operator = assemble_operator(coeffs, params, spec)
    cases = []
    for f in f_family:
        fv = _checked(f(disc.nodes), "forcing")
        if np.any(fv < 0.0):
            raise PreconditionError(f"forcing {f.label!r} is negative at a node")
        sol = solve(f, coeffs, params, spec, operator=operator, residual=False)
        cases.append({"f": f.label, "min_value": sol.min_value(),
                      "iterations": sol.iterations_used})
    passed = all(c["min_value"] >= -tolerance for c in cases)
    return {"schema_version": SCHEMA_VERSION, "passed": passed,
            "tolerance": tolerance, "cases": cases}


__all__ = [
    "CoefficientBundle",
    "CoupledOperator",
    "CubicRBFInterpolant",
    "DiscreteSolution",
    "SolverSpec",
    "apriori_ratio",
    "assemble_operator",
    "collocation_nodes",
    "discretization",
    "green_data",
    "max_principle_check",
    "node_norm",
    "picard_step",
    "probe_points",
    "residual_norm",
    "residual_report",
    "solve",
]
