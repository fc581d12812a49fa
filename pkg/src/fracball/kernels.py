"""Closed-form kernels of the fractional Laplacian on the unit ball.

Points are numpy arrays whose last axis holds the n coordinates; all kernel
functions broadcast over leading axes. Public functions validate their
domain; the underscore variants skip the checks for use inside quadrature
loops.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import beta, betainc, gamma, gammaln

from .errors import CoincidentPoints, OutOfDomain, PreconditionError
from .rules import sphere_area, sphere_rule

COINCIDENCE_TOL = 1e-12 * 2.0  # relative to the diameter of B_1


@dataclass(frozen=True)
class ProblemParams:
    """Dimension n, fractional order s, weight exponent r, norm exponents p, q."""

    n: int = 2
    s: float = 0.75
    r: float = 0.0
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise PreconditionError(f"dimension n must be an integer >= 2, got {self.n}")
        if not 0.0 < self.s < 1.0:
            raise PreconditionError(f"s must lie in (0, 1), got {self.s}")
        if not -1.0 < self.r < 1.0:
            raise PreconditionError(f"r must lie in (-1, 1), got {self.r}")
        for name in ("p", "q"):
            v = getattr(self, name)
            if not v >= 1.0:
                raise PreconditionError(f"{name} must lie in [1, inf], got {v}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def alpha(self):
        return 2.0 * self.s

    def check_solver(self):
        """Hypotheses of the drift/zero-order existence theorem."""
        if not 0.5 < self.s < 1.0:
            raise PreconditionError(f"solver requires 1/2 < s < 1, got s={self.s}")
        if not (1.0 - self.s) - 1e-12 <= self.r <= self.s + 1e-12:
            raise PreconditionError(
                f"solver requires 1-s <= r <= s, got r={self.r}, s={self.s}"
            )


@dataclass(frozen=True)
class KernelConstants:
    C_ns: float
    c_ns: float
    kappa_ns: float
    C_boundary: float


def _boundary_constant(n, s, c_ns, points=64):
    # surface integral c(n,s) * int_{S} (1-|x|^2)^s |x-y|^{-n} dH_y at x = 0
    dirs, w = sphere_rule(n, points)
    x = np.zeros(n)
    d = np.linalg.norm(dirs - x, axis=-1)
    return float(c_ns * np.sum(w * (1.0 - x @ x) ** s / d**n))


@lru_cache(maxsize=None)
def _constants(n, s):
    C_ns = 4.0**s * np.exp(gammaln(0.5 * n + s) - 0.5 * n * np.log(np.pi)) / abs(gamma(-s))
    c_ns = gamma(0.5 * n) * np.sin(np.pi * s) / np.pi ** (0.5 * n + 1.0)
    kappa = gamma(0.5 * n) / (np.pi ** (0.5 * n) * 4.0**s * gamma(s) ** 2)
    return KernelConstants(
        C_ns=float(C_ns),
        c_ns=float(c_ns),
        kappa_ns=float(kappa),
        C_boundary=_boundary_constant(n, s, float(c_ns)),
    )


def constants(params):
    """Normalisation constants for (n, s); cached per pair."""
    return _constants(params.n, float(params.s))


def getoor_lambda(n, s):
    """(-Delta)^s (1-|x|^2)_+^s = lambda in B_1 (closed form, used as cross-check)."""
    return float(4.0**s * np.exp(gammaln(0.5 * n + s) + gammaln(1.0 + s) - gammaln(0.5 * n)))


def _as_points(x):
    return np.asarray(x, dtype=float)


def _check_inside(*pts):
    for p in pts:
        if np.any(np.sum(p * p, axis=-1) >= 1.0):
            raise OutOfDomain("points must satisfy |x| < 1")


def _check_distinct(x, y):
    d = np.linalg.norm(x - y, axis=-1)
    if np.any(d < COINCIDENCE_TOL):
        raise CoincidentPoints("x and y coincide to within 1e-12 * diameter")
    return d


def _rho(x, y):
    x2 = np.sum(x * x, axis=-1)
    y2 = np.sum(y * y, axis=-1)
    d2 = np.sum((x - y) ** 2, axis=-1)
    return (1.0 - x2) * (1.0 - y2) / d2


def rho(x, y):
    """(1-|x|^2)(1-|y|^2)/|x-y|^2 for x, y in B_1."""
    x, y = _as_points(x), _as_points(y)
    _check_inside(x, y)
    _check_distinct(x, y)
    return _rho(x, y)


def _incomplete(rho_val, n, s):
    # int_0^rho t^{s-1} (1+t)^{-n/2} dt = B(s, n/2-s) * I_{rho/(1+rho)}(s, n/2-s);
    # the complementary form keeps precision when rho is large.
    a, b = s, 0.5 * n - s
    rho_val = np.asarray(rho_val, dtype=float)
    full = beta(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = rho_val / (1.0 + rho_val)
        v = 1.0 / (1.0 + rho_val)
        small = full * betainc(a, b, np.where(u <= 0.5, u, 0.5))
        large = full * (1.0 - betainc(b, a, np.where(u > 0.5, v, 0.5)))
    out = np.where(u <= 0.5, small, large)
    out = np.where(np.isinf(rho_val), full, out)
    return out


def incomplete_kernel_integral(rho_val, params):
    """int_0^rho_val t^(s-1) (1+t)^(-n/2) dt; rho_val = inf gives B(s, n/2 - s)."""
    rho_val = np.asarray(rho_val, dtype=float)
    if np.any(rho_val < 0) or np.any(np.isnan(rho_val)):
        raise PreconditionError("rho_val must be nonnegative")
    out = _incomplete(rho_val, params.n, params.s)
    return out if out.ndim else float(out)


def _poisson(x, y, n, s, c_ns):
    x2 = np.sum(x * x, axis=-1)
    y2 = np.sum(y * y, axis=-1)
    d = np.linalg.norm(x - y, axis=-1)
    return c_ns * ((1.0 - x2) / (y2 - 1.0)) ** s / d**n


def poisson_kernel(x, y, params, consts=None):
    """c(n,s) ((1-|x|^2)/(|y|^2-1))^s |x-y|^(-n) for |x| < 1 < |y|."""
    x, y = _as_points(x), _as_points(y)
    _check_inside(x)
    if np.any(np.sum(y * y, axis=-1) <= 1.0):
        raise OutOfDomain("poisson_kernel needs |y| > 1")
    consts = consts or constants(params)
    out = _poisson(x, y, params.n, params.s, consts.c_ns)
    return out if np.ndim(out) else float(out)


def _green(x, y, n, s, kappa):
    d2 = np.sum((x - y) ** 2, axis=-1)
    x2 = np.sum(x * x, axis=-1)
    y2 = np.sum(y * y, axis=-1)
    rho_val = (1.0 - x2) * (1.0 - y2) / d2
    return kappa * d2 ** (s - 0.5 * n) * _incomplete(rho_val, n, s)


def green_function(x, y, params, consts=None):
    """Green's function of (-Delta)^s on B_1 with zero exterior data."""
    x, y = _as_points(x), _as_points(y)
    _check_inside(x, y)
    _check_distinct(x, y)
    consts = consts or constants(params)
    out = _green(x, y, params.n, params.s, consts.kappa_ns)
    return out if np.ndim(out) else float(out)


def _green_gradient(x, y, n, s, kappa):
    diff = y - x
    d2 = np.sum(diff * diff, axis=-1)
    x2 = np.sum(x * x, axis=-1)
    y2 = np.sum(y * y, axis=-1)
    rho_val = (1.0 - x2) * (1.0 - y2) / d2
    i2 = rho_val**s * (1.0 + rho_val) ** (-0.5 * n)
    i1 = (n - 2.0 * s) * _incomplete(rho_val, n, s) + 2.0 * i2
    a = (d2 ** (-(n - 2.0 * s + 2.0) / 2.0) * i1)[..., None] * diff
    xb = np.broadcast_to(x, diff.shape)
    b = (2.0 / (1.0 - x2) * d2 ** (-(n - 2.0 * s) / 2.0) * i2)[..., None] * xb
    return kappa * (a - b)


def green_gradient(x, y, params, consts=None):
    """Gradient of G(x, y) in x."""
    x, y = _as_points(x), _as_points(y)
    _check_inside(x, y)
    _check_distinct(x, y)
    consts = consts or constants(params)
    return _green_gradient(x, y, params.n, params.s, consts.kappa_ns)


def green_bound_constant(params, consts=None):
    """kappa * max(4^s / s, B(s, n/2 - s)): a valid constant for the bound
    G <= C |x-y|^(2s-n) min{[(1-|x|)(1-|y|)/|x-y|^2]^s, 1}."""
    consts = consts or constants(params)
    s, n = params.s, params.n
    return consts.kappa_ns * max(4.0**s / s, beta(s, 0.5 * n - s))


def gradient_bound_constant(params, consts=None):
    """C_3 for |grad_x G|(1-|x|)^r <= C_3 (1-|y|)^r |x-y|^-(n-2s+1).

    I_1 <= (C_1/4) min{rho^s, 1} with C_1/4 = (n-2s) max(1/s, B) + 2,
    I_2 <= (C_2/4) min{rho^s, 1} with C_2 = 4, then C_3 = kappa (4 C_1 + 16 C_2).
    """
    consts = consts or constants(params)
    s, n = params.s, params.n
    c1 = 4.0 * ((n - 2.0 * s) * max(1.0 / s, beta(s, 0.5 * n - s)) + 2.0)
    c2 = 4.0
    return consts.kappa_ns * (4.0 * c1 + 16.0 * c2)


def lemma_min_term(x, y, beta_exp):
    """min{[(1-|x|)(1-|y|)/|x-y|^2]^beta, 1}."""
    dx = 1.0 - np.linalg.norm(x, axis=-1)
    dy = 1.0 - np.linalg.norm(y, axis=-1)
    d2 = np.sum((x - y) ** 2, axis=-1)
    return np.minimum((dx * dy / d2) ** beta_exp, 1.0)


__all__ = [
    "ProblemParams",
    "KernelConstants",
    "constants",
    "rho",
    "incomplete_kernel_integral",
    "poisson_kernel",
    "green_function",
    "green_gradient",
    "green_bound_constant",
    "gradient_bound_constant",
    "getoor_lambda",
    "sphere_area",
]
