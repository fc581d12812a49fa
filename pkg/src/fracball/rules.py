"""Low-level quadrature rules: graded 1-D panels, Gauss-Jacobi end panels,
sphere rules and per-ray rules with a variable endpoint.

All rules return plain weights, i.e. ``sum(w * g(t))`` approximates the
integral of ``g`` itself; Jacobi weight factors are divided out at the nodes.
"""
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Nodes and weights on [0, 1]."""
    x, w = roots_legendre(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi_left(order, alpha):
    """Plain rule on [0, 1] that is exact for t**alpha * poly(t).

    Built from the Jacobi rule with weight (1 + x)**alpha on [-1, 1].
    """
    x, w = roots_jacobi(order, 0.0, alpha)
    t = 0.5 * (x + 1.0)
    w = w * 0.5 ** (alpha + 1.0)
    return t, w / t**alpha


def sphere_area(n):
    return float(2.0 * np.exp(0.5 * n * np.log(np.pi) - gammaln(0.5 * n)))


def ball_volume(n):
    return sphere_area(n) / n


@lru_cache(maxsize=None)
def _sphere_rule_cached(n, points, seed):
    if n == 2:
        m = 2 * max(1, (points + 1) // 2)
        theta = 2.0 * np.pi * (np.arange(m) + 0.5) / m
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        w = np.full(m, 2.0 * np.pi / m)
    elif n == 3:
        # Gauss-Legendre in cos(theta) times an even trapezoid in phi.
        m_th = max(2, int(round(np.sqrt(points / 2.0))))
        z, wz = roots_legendre(m_th)
        m_phi = 2 * m_th
        phi = 2.0 * np.pi * (np.arange(m_phi) + 0.5) / m_phi
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        sin_t = np.sqrt(1.0 - zz**2)
        dirs = np.stack(
            [sin_t * np.cos(pp), sin_t * np.sin(pp), zz], axis=-1
        ).reshape(-1, 3)
        w = (wz[:, None] * np.full(m_phi, 2.0 * np.pi / m_phi)[None, :]).ravel()
    else:
        return mc_sphere_rule(n, points, seed)
    dirs.setflags(write=False)
    w.setflags(write=False)
    return dirs, w


@lru_cache(maxsize=None)
def mc_sphere_rule(n, samples, seed=0):
    """Antithetic Monte Carlo directions; the pairing keeps the rule
    antipodally symmetric so odd integrands cancel exactly."""
    rng = np.random.default_rng(seed)
    half = max(1, samples // 2)
    g = rng.standard_normal((half, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    dirs = np.concatenate([g, -g])
    w = np.full(2 * half, sphere_area(n) / (2 * half))
    dirs.setflags(write=False)
    w.setflags(write=False)
    return dirs, w


def sphere_rule(n, points, seed=0):
    """Directions on S^{n-1} and weights summing to |S^{n-1}|.

    ``points`` is the approximate total direction count: equal angles in
    2-D, a Gauss-Legendre x trapezoid product in 3-D, antithetic random
    samples for n >= 4.
    Every rule is invariant under omega -> -omega.
    """
    return _sphere_rule_cached(int(n), int(points), int(seed))


def geometric_breaks(a, b, levels, ratio, toward="b"):
    """Panel endpoints on [a, b] shrinking geometrically toward one end.

    The last panel touches the singular end and has width
    ``(b - a) * ratio**levels``.
    """
    k = np.arange(levels + 1)
    frac = ratio**k
    if toward == "b":
        pts = b - (b - a) * frac
        return np.concatenate([pts, [b]])
    pts = a + (b - a) * frac
    return np.concatenate([[a], pts[::-1]])


def panel_rule(breaks, order):
    """Composite Gauss-Legendre rule over consecutive panels."""
    t0, w0 = gauss_legendre(order)
    breaks = np.asarray(breaks, dtype=float)
    h = np.diff(breaks)
    nodes = breaks[:-1, None] + h[:, None] * t0[None, :]
    weights = h[:, None] * w0[None, :]
    return nodes.ravel(), weights.ravel()


@lru_cache(maxsize=None)
def graded_unit_rule(order, levels, ratio, alpha=None, toward="left"):
    """Rule on [0, 1] graded toward one endpoint.

    The panel touching the graded end uses the Jacobi rule for
    ``|t - end|**alpha`` when ``alpha`` is given. Returns per-panel arrays of
    shape (levels + 1, order) so callers can sum panel contributions.
    """
    breaks = geometric_breaks(0.0, 1.0, levels, ratio, toward="a")
    h = np.diff(breaks)
    t0, w0 = gauss_legendre(order)
    nodes = breaks[:-1, None] + h[:, None] * t0[None, :]
    weights = h[:, None] * w0[None, :]
    if alpha is not None and alpha != 0.0:
        tj, wj = gauss_jacobi_left(order, float(alpha))
        nodes[0] = h[0] * tj
        weights[0] = h[0] * wj
    if toward == "right":
        nodes = 1.0 - nodes[::-1, ::-1]
        weights = weights[::-1, ::-1]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def map_rule(nodes, weights, a, b):
    """Affinely map a [0, 1] rule onto [a, b]; a and b may be arrays."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    return a + (b - a) * nodes.ravel(), (b - a) * weights.ravel()


def capped_levels(levels, ratio, width, min_gap=1e-12):
    """Largest level count <= ``levels`` whose last panel stays wider than
    ``min_gap``; finer panels would sit below floating-point resolution of
    points near the unit sphere."""
    if width <= min_gap:
        return 1
    cap = int(np.floor(np.log(min_gap / width) / np.log(ratio)))
    return max(1, min(int(levels), cap))


def ray_rule(h0, t_end, order, inner_levels, mid_panels, outer_levels,
             ratio=0.5, outer_ratio=0.2, inner_alpha=None, return_gap=False,
             min_gap=1e-12):
    """Radial rule on [0, t_end] for a family of rays with a common start.

    Segments: [0, h0] graded toward 0 (Jacobi innermost panel with exponent
    ``inner_alpha``); [h0, t_end/2] geometric panels with a per-ray ratio so
    every ray gets the same node count; [t_end/2, t_end] graded toward
    t_end. ``t_end`` has shape (M,); returns nodes and weights (M, T), plus
    the exact distances ``t_end - t`` when ``return_gap`` is set.
    """
    t_end = np.asarray(t_end, dtype=float)
    m = t_end.shape[0]
    parts_t, parts_w, parts_g = [], [], []
    if inner_levels >= 0 and h0 > 0:
        nu, wu = graded_unit_rule(order, inner_levels, ratio, inner_alpha, "left")
        tt = np.broadcast_to(h0 * nu.ravel(), (m, nu.size))
        parts_t.append(tt)
        parts_w.append(np.broadcast_to(h0 * wu.ravel(), (m, nu.size)))
        parts_g.append(t_end[:, None] - tt)
    mid_end = np.maximum(0.5 * t_end, h0)
    if mid_panels > 0:
        # geometric panels between h0 and mid_end, equal ratio per ray
        k = np.arange(mid_panels + 1) / mid_panels
        lo = max(h0, 1e-300)
        edges = lo * (mid_end[:, None] / lo) ** k[None, :]
        edges[:, 0] = h0
        t0, w0 = gauss_legendre(order)
        h = np.diff(edges, axis=1)
        tt = (edges[:, :-1, None] + h[..., None] * t0).reshape(m, -1)
        parts_t.append(tt)
        parts_w.append((h[..., None] * w0).reshape(m, -1))
        parts_g.append(t_end[:, None] - tt)
    width = float(np.min(t_end - mid_end)) if m else 1.0
    levels = capped_levels(outer_levels, outer_ratio, width, min_gap)
    nu, wu = graded_unit_rule(order, levels, outer_ratio, None, "left")
    span = (t_end - mid_end)[:, None]
    gap = span * nu[::-1, ::-1].ravel()[None, :]
    parts_t.append(t_end[:, None] - gap)
    parts_w.append(span * wu[::-1, ::-1].ravel()[None, :])
    parts_g.append(gap)
    t = np.concatenate(parts_t, axis=1)
    w = np.concatenate(parts_w, axis=1)
    if return_gap:
        return t, w, np.concatenate(parts_g, axis=1)
    return t, w


def ray_exit_distance(x, dirs, radius=1.0):
    """Distance from x along each direction to the sphere |y| = radius."""
    x = np.asarray(x, dtype=float)
    xd = dirs @ x
    disc = xd**2 + radius**2 - x @ x
    return -xd + np.sqrt(np.maximum(disc, 0.0))


def dyadic_breaks(start, stop):
    """[start, 2 start, 4 start, ...] until the last point reaches stop.

    Every interval is a full doubling, so shell sums of a power law stay in
    exact geometric ratio.
    """
    pts = [start]
    while pts[-1] < stop * (1 - 1e-12):
        pts.append(pts[-1] * 2.0)
    if len(pts) == 1:
        pts.append(start * 2.0)
    return np.array(pts)


def geometric_tail(last, prev):
    """Sum of the geometric continuation last*q + last*q**2 + ..., q = last/prev.

    Returns (tail, q). ``q`` is nan when the sequence is numerically zero.
    """
    if prev == 0.0 or last == 0.0:
        return 0.0, float("nan")
    q = last / prev
    if q <= 0.0:
        return 0.0, q
    if q >= 1.0:
        return float("inf"), q
    return last * q / (1.0 - q), q


@lru_cache(maxsize=None)
def _two_sided_unit_rule(order, levels, ratio):
    left = geometric_breaks(0.0, 0.5, levels, ratio, toward="a")
    right = geometric_breaks(0.5, 1.0, levels, ratio, toward="b")
    breaks = np.concatenate([left, right[1:]])
    t, w = panel_rule(breaks, order)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def segment_rule(a, b, order, levels, ratio=0.2):
    """Rule on [a, b] graded toward both ends; a, b may be arrays of rays."""
    t, w = _two_sided_unit_rule(order, levels, ratio)
    return map_rule(t, w, a, b)
