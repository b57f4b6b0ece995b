"""Horizontal curves, their lifts and length functionals.

A ``Curve`` keeps node samples for consumers that want arrays (the optimizer,
CSV export) together with continuous models of its horizontal and center
parts, which the quadrature rules evaluate between nodes.  Lifts and lengths
use a composite two-point Gauss rule per interval; the lift integrand
beta(g1, g1') is a polynomial of degree <= 2 on each interval whenever g1 is
piecewise quadratic, so lifts of such paths are exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .group import GroupPoint, ProductGroup, j_apply_product
from .metrics import FinslerSpec, RiemannianSpec

DEFAULT_NODES = 257
LIFT_TOL = 1e-10
_GAUSS = 0.5 / math.sqrt(3.0)


# -- continuous path models ---------------------------------------------------

class PolyPath:
    """sum_j coeffs[j] * s**j with s = (t - t0) / (t1 - t0)."""

    def __init__(self, coeffs, t0=0.0, t1=1.0):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.t0, self.t1 = float(t0), float(t1)
        # rows (blocks) with a nonzero coefficient; the others evaluate to 0
        if self.coeffs.ndim >= 3:
            axes = (0,) + tuple(range(2, self.coeffs.ndim))
            self._rows = np.flatnonzero(np.any(self.coeffs != 0, axis=axes))
        else:
            self._rows = None

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    def _s(self, t):
        return (np.asarray(t, dtype=float) - self.t0) / (self.t1 - self.t0)

    def value(self, t):
        s = self._s(t)
        s = s.reshape(s.shape + (1,) * len(self.shape))
        coeffs = self.coeffs if self._rows is None else self.coeffs[:, self._rows]
        acc = np.zeros(s.shape[:1] + coeffs.shape[1:]) + coeffs[-1]
        for c in coeffs[-2::-1]:
            acc = acc * s + c
        if self._rows is None:
            return acc
        out = np.zeros(s.shape[:1] + self.shape)
        out[:, self._rows] = acc
        return out

    def deriv(self, t):
        deg = len(self.coeffs) - 1
        if deg == 0:
            return np.zeros(np.shape(t) + self.shape)
        d = PolyPath(self.coeffs[1:] * np.arange(1, deg + 1).reshape((-1,) + (1,) * len(self.shape)),
                     self.t0, self.t1)
        return d.value(t) / (self.t1 - self.t0)


class LinearPath:
    """Piecewise-linear interpolation of node samples."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        h = self.times[i + 1] - self.times[i]
        return t, i, h

    def _bcast(self, x):
        return x.reshape(x.shape + (1,) * (self.values.ndim - 1))

    def value(self, t):
        t, i, h = self._locate(t)
        s = self._bcast((t - self.times[i]) / h)
        return self.values[i] + s * (self.values[i + 1] - self.values[i])

    def deriv(self, t):
        t, i, h = self._locate(t)
        return (self.values[i + 1] - self.values[i]) / self._bcast(h)


class PiecewisePath:
    def __init__(self, pieces, breaks):
        self.pieces = list(pieces)
        self.breaks = np.asarray(breaks, dtype=float)
        if len(self.breaks) != len(self.pieces) + 1:
            raise ContractError("need one more breakpoint than pieces")

    def _dispatch(self, t, method):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.pieces) - 1)
        out = None
        for j, piece in enumerate(self.pieces):
            mask = idx == j
            if not mask.any():
                continue
            vals = getattr(piece, method)(t[mask])
            if out is None:
                out = np.zeros(t.shape + vals.shape[1:])
            out[mask] = vals
        return out

    def value(self, t):
        return self._dispatch(t, "value")

    def deriv(self, t):
        return self._dispatch(t, "deriv")


class Reparam:
    """base((t - t0) / (t1 - t0)), mapping [t0, t1] onto the base domain [0, 1]."""

    def __init__(self, base, t0, t1):
        self.base, self.t0, self.t1 = base, float(t0), float(t1)

    def value(self, t):
        return self.base.value((np.asarray(t) - self.t0) / (self.t1 - self.t0))

    def deriv(self, t):
        return self.base.deriv((np.asarray(t) - self.t0) / (self.t1 - self.t0)) / (self.t1 - self.t0)


class Reversed:
    def __init__(self, base):
        self.base = base

    def value(self, t):
        return self.base.value(1.0 - np.asarray(t))

    def deriv(self, t):
        return -self.base.deriv(1.0 - np.asarray(t))


class Shifted:
    def __init__(self, base, offset):
        self.base, self.offset = base, np.asarray(offset, dtype=float)

    def value(self, t):
        return self.base.value(t) + self.offset

    def deriv(self, t):
        return self.base.deriv(t)


class LiftedCenter:
    """Center part defined by integrating beta(g1, g1')/2 from node values."""

    def __init__(self, group, path, times, node_centers):
        self.group, self.path = group, path
        self.times = np.asarray(times, dtype=float)
        self.node_centers = np.asarray(node_centers, dtype=float)

    def deriv(self, t):
        return 0.5 * self.group.bracket_arrays(self.path.value(t), self.path.deriv(t))

    def value(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        t0 = self.times[i]
        h = t - t0
        mid = t0 + 0.5 * h
        f = self.deriv(mid - _GAUSS * h) + self.deriv(mid + _GAUSS * h)
        return self.node_centers[i] + 0.5 * h[:, None] * f


class TranslatedCenter:
    """Center of the left translate g * gamma: g2 + gamma2 + beta(g1, gamma1)/2."""

    def __init__(self, group, base, horizontal, g: GroupPoint):
        self.group, self.base, self.horizontal, self.g = group, base, horizontal, g

    def value(self, t):
        x = self.horizontal.value(t)
        return self.g.center + self.base.value(t) + 0.5 * self.group.bracket_arrays(
            np.broadcast_to(self.g.blocks, x.shape), x)

    def deriv(self, t):
        v = self.horizontal.deriv(t)
        return self.base.deriv(t) + 0.5 * self.group.bracket_arrays(
            np.broadcast_to(self.g.blocks, v.shape), v)


# -- curves -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Curve:
    group: ProductGroup
    times: np.ndarray
    horizontal: np.ndarray  # (M+1, N, dim_v)
    center: np.ndarray  # (M+1, dim_w)
    lift_rule: str
    path: object
    center_path: object
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ContractError("curve times must be a strictly increasing grid with >= 2 nodes")
        g = self.group
        if self.horizontal.shape != (len(t), g.N, g.dim_v) or self.center.shape != (len(t), g.dim_w):
            raise ContractError("curve samples do not match the time grid and the ambient group")

    @property
    def nodes(self):
        return len(self.times)

    @property
    def start(self) -> GroupPoint:
        return self.group.point(self.horizontal[0], self.center[0])

    @property
    def end(self) -> GroupPoint:
        return self.group.point(self.horizontal[-1], self.center[-1])

    def gauss_points(self):
        t = self.times
        h = np.diff(t)
        mid = 0.5 * (t[:-1] + t[1:])
        pts = np.stack([mid - _GAUSS * h, mid + _GAUSS * h], axis=1).ravel()
        weights = np.repeat(0.5 * h, 2)
        return pts, weights


def _as_path(gamma1, times, group):
    if hasattr(gamma1, "value"):
        if times is None:
            times = np.linspace(0.0, 1.0, DEFAULT_NODES)
        times = np.asarray(times, dtype=float)
        samples = np.asarray(gamma1.value(times), dtype=float)
        return gamma1, times, samples
    samples = np.asarray(gamma1, dtype=float)
    if samples.ndim != 3 or samples.shape[1:] != (group.N, group.dim_v):
        raise ContractError(f"sampled path must have shape (M+1, {group.N}, {group.dim_v})")
    if times is None:
        times = np.linspace(0.0, 1.0, len(samples))
    times = np.asarray(times, dtype=float)
    if len(times) != len(samples):
        raise ContractError("times and samples differ in length")
    return LinearPath(times, samples), times, samples


def lift_increments(group, path, times):
    """Per-interval center increments: (1/2) * integral of beta(g1, g1') by 2-point Gauss."""
    t = np.asarray(times, dtype=float)
    h = np.diff(t)
    mid = 0.5 * (t[:-1] + t[1:])
    f = 0.0
    for sgn in (-1.0, 1.0):
        g = mid + sgn * _GAUSS * h
        f = f + group.bracket_arrays(path.value(g), path.deriv(g))
    return 0.25 * h[:, None] * f


def horizontal_lift(group: ProductGroup, gamma1, start_center=None, times=None) -> Curve:
    """Lift a horizontal path (a model with ``value``/``deriv`` or an array of node samples)."""
    if not hasattr(gamma1, "value") and len(np.asarray(gamma1)) < 2:
        raise ContractError("a sampled path needs at least 2 samples")
    path, times, samples = _as_path(gamma1, times, group)
    if len(times) < 2:
        raise ContractError("a lift needs at least 2 time nodes")
    z0 = np.zeros(group.dim_w) if start_center is None else np.asarray(start_center, dtype=float)
    if z0.shape != (group.dim_w,):
        raise ContractError(f"start center must have shape ({group.dim_w},)")
    inc = lift_increments(group, path, times)
    centers = np.vstack([z0, z0 + np.cumsum(inc, axis=0)])
    return Curve(group, times, samples, centers, "gauss2", path,
                 LiftedCenter(group, path, times, centers))


def sampled_curve(group: ProductGroup, times, horizontal, center) -> Curve:
    """A curve given by node samples only; both parts are interpolated linearly."""
    times = np.asarray(times, dtype=float)
    horizontal = np.asarray(horizontal, dtype=float)
    center = np.asarray(center, dtype=float)
    return Curve(group, times, horizontal, center, "linear",
                 LinearPath(times, horizontal), LinearPath(times, center))


def horizontality_residual(curve: Curve) -> float:
    """Max violation of g2' = beta(g1, g1')/2, relative to 1 + |beta(g1, g1')/2|.

    Curves with a continuous center model are checked pointwise at interior
    nodes and Gauss points, plus agreement of node samples with the model.
    Linearly interpolated centers are checked in integrated form per interval.
    """
    g = curve.group
    if isinstance(curve.center_path, LinearPath):
        inc = lift_increments(g, curve.path, curve.times)
        d = np.diff(curve.center, axis=0)
        return float(np.max(np.linalg.norm(d - inc, axis=1) / (1.0 + np.linalg.norm(inc, axis=1))))
    gp, _ = curve.gauss_points()
    t = np.concatenate([curve.times[1:-1], gp])
    target = 0.5 * g.bracket_arrays(curve.path.value(t), curve.path.deriv(t))
    got = curve.center_path.deriv(t)
    pointwise = np.max(np.linalg.norm(got - target, axis=1) / (1.0 + np.linalg.norm(target, axis=1)))
    nodes = np.max(np.linalg.norm(curve.center_path.value(curve.times) - curve.center, axis=1))
    return float(max(pointwise, nodes))


def is_horizontal(curve: Curve, tol=LIFT_TOL) -> bool:
    return horizontality_residual(curve) <= tol


_MODES = ("finsler", "subfinsler", "riemannian")


def length_integrand(curve: Curve, metric, mode: str, t):
    g = curve.group
    v1 = curve.path.deriv(t)
    if mode == "subfinsler":
        return metric.horizontal_norm(v1)
    x1 = curve.path.value(t)
    v2 = curve.center_path.deriv(t)
    pulled = v2 - 0.5 * g.bracket_arrays(x1, v1)
    return metric.norm_arrays(v1, pulled)


def length(curve: Curve, metric, mode: str = "subfinsler", lift_tol: float = LIFT_TOL) -> float:
    """Length of ``curve`` under the left-invariant extension of ``metric``.

    ``finsler`` and ``riemannian`` integrate the norm of dL_{-gamma} gamma';
    ``subfinsler`` integrates S_0(gamma_1') and requires a horizontal curve.
    """
    if mode not in _MODES:
        raise ContractError(f"mode must be one of {_MODES}")
    if mode == "riemannian" and not isinstance(metric, RiemannianSpec):
        raise ContractError("riemannian length needs a RiemannianSpec")
    if not isinstance(metric, (RiemannianSpec, FinslerSpec)):
        raise ContractError(f"unsupported metric {type(metric).__name__}")
    if mode == "subfinsler":
        r = horizontality_residual(curve)
        if r > lift_tol:
            raise ContractError(f"curve is not horizontal (residual {r:.3e}); sub-Finsler length undefined")
    t, w = curve.gauss_points()
    return float(np.sum(w * length_integrand(curve, metric, mode, t)))


def concatenate(first: Curve, second: Curve, tol: float = 1e-10) -> Curve:
    """first followed by second, re-parameterized onto [0, 1/2] and [1/2, 1]."""
    if not first.group.compatible(second.group):
        raise ContractError("cannot concatenate curves in different ambient groups")
    gap = (first.end - second.start).norm()
    if gap > tol:
        raise ContractError(f"curves do not meet: endpoint gap {gap:.3e}")
    a = (first.times - first.times[0]) / (first.times[-1] - first.times[0])
    b = (second.times - second.times[0]) / (second.times[-1] - second.times[0])
    times = np.concatenate([0.5 * a, 0.5 + 0.5 * b[1:]])
    path = PiecewisePath([Reparam(_normalized(first.path, first.times), 0.0, 0.5),
                          Reparam(_normalized(second.path, second.times), 0.5, 1.0)], [0.0, 0.5, 1.0])
    center_path = PiecewisePath([Reparam(_normalized(first.center_path, first.times), 0.0, 0.5),
                                 Reparam(_normalized(second.center_path, second.times), 0.5, 1.0)],
                                [0.0, 0.5, 1.0])
    horizontal = np.concatenate([first.horizontal, second.horizontal[1:]])
    center = np.concatenate([first.center, second.center[1:]])
    rule = first.lift_rule if first.lift_rule == second.lift_rule else "mixed"
    return Curve(first.group, times, horizontal, center, rule, path, center_path)


def _normalized(model, times):
    t0, t1 = float(times[0]), float(times[-1])
    if t0 == 0.0 and t1 == 1.0:
        return model
    # model is defined on [t0, t1]; expose it on [0, 1]
    return Reparam(model, -t0 / (t1 - t0), (1.0 - t0) / (t1 - t0))


def reverse(curve: Curve) -> Curve:
    if curve.times[0] != 0.0 or curve.times[-1] != 1.0:
        raise ContractError("reverse expects a curve parameterized on [0, 1]")
    return Curve(curve.group, 1.0 - curve.times[::-1], curve.horizontal[::-1].copy(),
                 curve.center[::-1].copy(), curve.lift_rule,
                 Reversed(curve.path), Reversed(curve.center_path), dict(curve.meta))


def translate(curve: Curve, g: GroupPoint) -> Curve:
    """Left translate t -> g * gamma(t)."""
    grp = curve.group
    if not g.group.compatible(grp):
        raise ContractError("translation element lives in a different ambient group")
    horizontal = curve.horizontal + g.blocks
    center = curve.center + g.center + 0.5 * grp.bracket_arrays(
        np.broadcast_to(g.blocks, curve.horizontal.shape), curve.horizontal)
    return Curve(grp, curve.times.copy(), horizontal, center, curve.lift_rule,
                 Shifted(curve.path, g.blocks), TranslatedCenter(grp, curve.center_path, curve.path, g),
                 dict(curve.meta))


# -- the shrinking construction ----------------------------------------------

def _check_unit(name, value, tol=1e-12):
    if abs(value - 1.0) > tol:
        raise ContractError(f"{name} must have unit norm, got {value!r}")


def shrinking_paths(group: ProductGroup, n: int, c: float, z, w: GroupPoint):
    """Closed-form horizontal and center polynomials of gamma^n and alpha^n on [0, 1].

    gamma_1(t) = t*c*sqrt(n)*w + t^2*(c/2)/sqrt(n)*J_z w lifts to
    gamma_2(t) = (c^2/12) t^3 z; alpha_1(t) = c*sqrt(n)(1-t) w + (c/2)(1-t^2)/sqrt(n) J_z w
    starts at gamma(1) and its lift adds (c^2/12)(1 - (1-t)^3) z.
    """
    if n < 1:
        raise ContractError("n must be a positive integer")
    z = np.asarray(z, dtype=float)
    if z.shape != (group.dim_w,):
        raise ContractError(f"z must have shape ({group.dim_w},)")
    _check_unit("z", float(np.linalg.norm(z)))
    if not w.is_horizontal():
        raise ContractError("w must be horizontal")
    _check_unit("w", w.norm())
    a = c * math.sqrt(n)
    b = c / math.sqrt(n)
    wv = w.blocks
    jw = j_apply_product(z, w).blocks
    zero = np.zeros_like(wv)
    k = c * c / 12.0
    gamma1 = PolyPath([zero, a * wv, 0.5 * b * jw])
    gamma2 = PolyPath([0 * z, 0 * z, 0 * z, k * z])
    alpha1 = PolyPath([a * wv + 0.5 * b * jw, -a * wv, -0.5 * b * jw])
    alpha2 = PolyPath([k * z, 3 * k * z, -3 * k * z, k * z])
    return gamma1, gamma2, alpha1, alpha2


def _closed_form_curve(group, hpath, cpath, start_center, nodes, meta):
    times = np.linspace(0.0, 1.0, nodes)
    lifted = horizontal_lift(group, hpath, start_center, times)
    return Curve(group, times, lifted.horizontal, lifted.center, "gauss2", hpath, cpath, meta)


def shrinking_halves(group: ProductGroup, n: int, c: float, z, w: GroupPoint,
                     nodes: int = DEFAULT_NODES):
    """(gamma^n, alpha^n) as separate curves on [0, 1].

    Node samples come from the numerical lift; the center model is the closed
    form, so the horizontality residual compares two independent routes.
    """
    g1, g2, a1, a2 = shrinking_paths(group, n, c, z, w)
    gamma = _closed_form_curve(group, g1, g2, None, nodes, {"n": n, "c": c, "part": "gamma"})
    alpha = _closed_form_curve(group, a1, a2, gamma.center[-1], nodes, {"n": n, "c": c, "part": "alpha"})
    return gamma, alpha


def shrinking_pair(group: ProductGroup, n: int, c: float, z, w: GroupPoint,
                   nodes: int = DEFAULT_NODES) -> Curve:
    """The concatenation alpha^n * gamma^n, a horizontal loop from 0 to (c^2/6) z."""
    g1, g2, a1, a2 = shrinking_paths(group, n, c, z, w)
    hpath = PiecewisePath([Reparam(g1, 0.0, 0.5), Reparam(a1, 0.5, 1.0)], [0.0, 0.5, 1.0])
    cpath = PiecewisePath([Reparam(g2, 0.0, 0.5), Reparam(a2, 0.5, 1.0)], [0.0, 0.5, 1.0])
    z = np.asarray(z, dtype=float)
    jw = j_apply_product(z, w)
    a, b = c * math.sqrt(n), c / math.sqrt(n)
    meta = {
        "n": n, "c": c, "part": "alpha*gamma",
        "gamma_end": group.point(a * w.blocks + 0.5 * b * jw.blocks, c * c / 12.0 * z),
        "endpoint": group.point(center=c * c / 6.0 * z),
    }
    return _closed_form_curve(group, hpath, cpath, None, 2 * (nodes - 1) + 1, meta)


def finsler_lower_bound(metric, p: GroupPoint, q: GroupPoint, C: float = 1.0) -> float:
    """F_0(pi_1 p - pi_1 q) / C: no curve joining p and q is shorter."""
    p._check(q)
    if C <= 0:
        raise ContractError("projection constant C must be positive")
    return float(metric.horizontal_norm(p.blocks - q.blocks)) / C


def export_curve_csv(curve: Curve, path) -> None:
    """Write t, horizontal coordinates x_<block>_<i>, center coordinates z_<a>."""
    g = curve.group
    header = ["t"] + [f"x_{k + 1}_{i + 1}" for k in range(g.N) for i in range(g.dim_v)] \
        + [f"z_{a + 1}" for a in range(g.dim_w)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for t, x, z in zip(curve.times, curve.horizontal, curve.center):
            wr.writerow([repr(float(t))] + [repr(float(v)) for v in x.ravel()]
                        + [repr(float(v)) for v in z])
