"""Weighted norms, the boundary trace functional and its limit classifier,
the mollifier J_eps and a Hoelder-quotient probe.

delta(x) = 1 - |x| throughout. Norms over B_1 reuse the graded polar rule
of the quadrature module, so a field evaluated once on ``ball_nodes`` can
be measured in several norms.
"""
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NonFinite, PreconditionError
from .quadrature import (
    QuadratureSpec,
    ScalarField,
    _checked,
    ball_nodes,
    boundary_extrapolate,
    integrate_ball,
    integrate_complement,
    integrate_shell,
    radial_panel_sums,
)
from .rules import panel_rule


def _check_p(p):
    if not (p == np.inf or p >= 1.0):
        raise PreconditionError(f"p must lie in [1, inf], got {p}")


def lp_from_values(values, nodes, p, r, what="weighted_lp_norm"):
    """L^p_r norm of node values on a BallNodes rule over B_1.

    p = inf returns the node maximum, a lower bound for the ess-sup.
    """
    _check_p(p)
    values = _checked(np.abs(values), what)
    with np.errstate(divide="ignore", invalid="ignore"):
        weighted = nodes.delta**r * values
    if p == np.inf:
        return float(np.max(weighted))
    sums = nodes.panel_sums(weighted**p)
    return boundary_extrapolate(sums, what) ** (1.0 / p)


def weighted_lp_norm(u, p, r, params, spec=None):
    """(int_{B_1} (delta^r |u|)^p dx)^(1/p); raises Divergent when the
    boundary panels stop decaying."""
    spec = spec or QuadratureSpec()
    nodes = ball_nodes(params.n, spec, radial=u.radial)
    return lp_from_values(u(nodes.points), nodes, p, r)


def l2s_norm(u, params, spec=None):
    """int_{R^n} |u(y)| / (1 + |y|^(n+2s)) dy."""
    spec = spec or QuadratureSpec()
    n, s = params.n, params.s

    def weight(x):
        return 1.0 / (1.0 + np.sum(x * x, axis=-1) ** (0.5 * (n + 2.0 * s)))

    g = ScalarField(lambda x: np.abs(u(x)) * weight(x), u.n, u.support, "C0",
                    u.radial, u.kinks, f"l2s({u.label})")
    total = integrate_ball(g, spec)
    if u.support == "global":
        total += integrate_complement(g, spec)
    return total


def _check_eps(eps):
    if not 0.0 < eps <= 0.125:
        raise PreconditionError(f"trace thickness must lie in (0, 1/8], got {eps}")


def trace_functional(u, eps, params, spec=None):
    """eps^-s int_{1-eps <= |x| < 1} |u| dx."""
    _check_eps(eps)
    return eps ** (-params.s) * integrate_shell(u.abs(), eps, spec)


@dataclass(frozen=True)
class TraceThresholds:
    """Classifier thresholds for the trace limit."""

    zero_slope: float = 0.2
    zero_drop: float = 0.05
    flat_slope: float = 0.1
    flat_spread: float = 0.10
    divergent_slope: float = -0.2


@dataclass
class TraceReport:
    eps_schedule: list
    values: list
    extrapolated_limit: float
    classification: str
    fit_exponent: float
    thresholds: TraceThresholds = field(default_factory=TraceThresholds)

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = 1
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def dyadic_schedule(k_min=3, k_max=9):
    return [2.0 ** -k for k in range(k_min, k_max + 1)]


def _trace_values(u, schedule, params, spec):
    # dyadic schedules share one graded shell: panels of the outer shell
    # are exactly the differences of the nested shells
    n_levels = np.log2(schedule[0] / np.array(schedule))
    if np.allclose(n_levels, np.round(n_levels)):
        a = 1.0 - schedule[0]
        g = u.abs()
        _, sums = radial_panel_sums(g, a, 1.0, spec.grading_levels, spec)
        vals = []
        for k in np.round(n_levels).astype(int):
            part = boundary_extrapolate(sums[k:], "trace_functional")
            vals.append(schedule[0] * 2.0 ** (-k))
            vals[-1] = vals[-1] ** (-params.s) * part
        return vals
    return [trace_functional(u, e, params, spec) for e in schedule]


def classify_trace(schedule, values, thresholds=None):
    """(classification, slope, extrapolated limit) for a trace sequence."""
    th = thresholds or TraceThresholds()
    eps = np.asarray(schedule, dtype=float)
    vals = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(vals)):
        return "divergent", float("-inf"), float("inf")
    if np.all(vals == 0.0):
        return "zero", float("inf"), 0.0
    if np.any(vals <= 0.0):
        return "inconclusive", float("nan"), float("nan")
    b = float(np.polyfit(np.log(eps), np.log(vals), 1)[0])
    tail = vals[-3:]
    spread = float((tail.max() - tail.min()) / tail.max())
    if b >= th.zero_slope and vals[-1] <= th.zero_drop * vals[0]:
        return "zero", b, 0.0
    if abs(b) <= th.flat_slope and spread <= th.flat_spread:
        return "positive", b, _extrapolate(vals)
    if b <= th.divergent_slope:
        return "divergent", b, float("inf")
    return "inconclusive", b, float(vals[-1])


def _extrapolate(vals):
    # geometric acceleration of the last differences (Aitken on the tail)
    if len(vals) < 3:
        return float(vals[-1])
    d1, d0 = vals[-1] - vals[-2], vals[-2] - vals[-3]
    if d0 == 0.0 or d1 == 0.0:
        return float(vals[-1])
    q = d1 / d0
    if 0.0 < q < 1.0:
        return float(vals[-1] + d1 * q / (1.0 - q))
    return float(vals[-1])


def trace_limit_estimate(u, schedule=None, params=None, spec=None, thresholds=None):
    """Evaluate the trace functional on a decreasing schedule and classify
    the limit eps -> 0 as zero, positive, divergent or inconclusive."""
    if params is None:
        raise PreconditionError("trace_limit_estimate needs params")
    spec = spec or QuadratureSpec()
    schedule = list(schedule or dyadic_schedule())
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise PreconditionError("eps schedule must be strictly decreasing")
    for e in schedule:
        _check_eps(e)
    try:
        values = _trace_values(u, schedule, params, spec)
    except (NonFinite, ArithmeticError):
        values = [float("inf")] * len(schedule)
    cls, b, limit = classify_trace(schedule, values, thresholds)
    return TraceReport([float(e) for e in schedule], [float(v) for v in values],
                       limit, cls, b, thresholds or TraceThresholds())


# -- mollifier ---------------------------------------------------------------

def bump(x):
    """Unnormalised exp(-1/(1-|x|^2)) on B_1, 0 outside."""
    r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(r2 < 1.0, np.exp(-1.0 / (1.0 - np.minimum(r2, 1.0))), 0.0)


@lru_cache(maxsize=None)
def _mollifier_rule(n, spec):
    # symmetric polar rule on B_1; weights include the bump and are
    # normalised on the rule itself, so constants are reproduced exactly
    t, wt = panel_rule(np.linspace(0.0, 1.0, 5), spec.radial_points)
    dirs, wd = spec.directions(n)
    z = (t[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    w = ((wt * t ** (n - 1))[:, None] * wd[None, :]).ravel() * bump(z)
    keep = w > 0.0
    z, w = z[keep], w[keep]
    w = w / w.sum()
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def mollify(u, eps, params, spec=None, chunk=256):
    """(j_eps * u) as a global ScalarField, computed on a symmetric rule
    over B_eps(x)."""
    if not eps > 0.0:
        raise PreconditionError(f"mollifier radius must be positive, got {eps}")
    spec = spec or QuadratureSpec(radial_points=6, angular_points=32)
    z, w = _mollifier_rule(params.n, spec)
    zs = eps * z

    def ev(x):
        pts = x.reshape(-1, x.shape[-1])
        out = np.empty(len(pts))
        for i in range(0, len(pts), chunk):
            p = pts[i:i + chunk]
            vals = _checked(u(p[:, None, :] - zs[None, :, :]), "mollified field")
            out[i:i + chunk] = vals @ w
        return out.reshape(x.shape[:-1])

    return ScalarField(ev, u.n, "global", u.smoothness, u.radial, (),
                       f"J_{eps}({u.label})")


# -- Hoelder probe -----------------------------------------------------------

def holder_pairs(n, sample_count, seed=0, min_delta=1e-8):
    """Random pairs in B_1 with log-uniform distances to the boundary and
    log-uniform separations, so many pairs sit near dB_1."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((sample_count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    delta = np.exp(rng.uniform(np.log(min_delta), 0.0, sample_count))
    x = (1.0 - delta)[:, None] * d
    e = rng.standard_normal((sample_count, n))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    h = np.exp(rng.uniform(np.log(min_delta), np.log(2.0), sample_count))
    y = x + h[:, None] * e
    inside = np.sum(y * y, axis=1) < 1.0
    return x[inside], y[inside]


def holder_quotient_probe(u, r, params, sample_count=10_000, seed=0):
    """max |u(x)-u(y)| / |x-y|^(1-r) over sampled pairs in B_1."""
    x, y = holder_pairs(params.n, int(sample_count), seed)
    ux, uy = u(x), u(y)
    dist = np.linalg.norm(x - y, axis=1)
    q = np.abs(ux - uy) / dist ** (1.0 - r)
    q = q[np.isfinite(q)]
    return float(q.max()) if q.size else 0.0


__all__ = [
    "TraceReport",
    "TraceThresholds",
    "bump",
    "classify_trace",
    "dyadic_schedule",
    "holder_pairs",
    "holder_quotient_probe",
    "l2s_norm",
    "lp_from_values",
    "mollify",
    "trace_functional",
    "trace_limit_estimate",
    "weighted_lp_norm",
]
