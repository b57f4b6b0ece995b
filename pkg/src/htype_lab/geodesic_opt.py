"""Variational search for short horizontal curves between two fixed points.

The decision variables are the interior horizontal nodes of a polygonal path;
its lift is exact (the center increment over a segment is beta(x_i, x_{i+1})/2),
so the center-endpoint condition is a quadratic equality constraint.  We
minimize the discrete energy under that constraint with an augmented
Lagrangian whose inner problems go to L-BFGS, then report the exact polygon
length of the result.

Blocks that vanish identically on the initial curve and at both endpoints
receive zero gradient from every term, so they stay zero; the solver works on
the remaining active blocks only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .curves import Curve, DEFAULT_NODES, finsler_lower_bound, horizontal_lift, length, shrinking_pair
from .errors import ContractError
from .group import GroupPoint, ProductGroup
from .metrics import (FinslerSpec, RiemannianSpec, Strictness, classify_strictness,
                      shrinking_sequence)

KKT_TOL = 1e-6
MAX_PENALTY = 1e10


@dataclass
class OptProblem:
    group: ProductGroup
    metric: object
    start: GroupPoint
    end: GroupPoint
    nodes: int = DEFAULT_NODES
    penalty_weight: float = 10.0
    max_iters: int = 40
    inner_max_iters: int = 20000
    grad_tol: float = 1e-9
    constraint_tol: float = 1e-8
    smoothing: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.nodes < 9:
            raise ContractError("the optimizer needs at least 9 nodes")
        if not (self.start.group.compatible(self.group) and self.end.group.compatible(self.group)):
            raise ContractError("endpoints must live in the problem's ambient group")
        if not isinstance(self.metric, (RiemannianSpec, FinslerSpec)):
            raise ContractError("metric must be a RiemannianSpec or FinslerSpec")
        if self.penalty_weight <= 0:
            raise ContractError("penalty_weight must be positive")


@dataclass
class OptResult:
    curve: Curve
    length: float
    constraint_residual: float
    iterations: int
    converged: bool
    certified_lower_bound: float
    energy: float = math.nan
    outer_iterations: int = 0
    multiplier: np.ndarray = None
    merit_history: list = field(default_factory=list)
    message: str = ""


class Discretization:
    """Energy and center constraint of a polygon on a fixed time grid.

    ``X`` is the interior node array of shape (M-1, K, dim_v) restricted to
    the ``active`` blocks; the endpoints are held fixed.
    """

    def __init__(self, problem: OptProblem, times, active):
        self.problem = problem
        self.group = problem.group
        self.times = np.asarray(times, dtype=float)
        self.h = np.diff(self.times)
        self.active = np.asarray(active, dtype=int)
        self.p1 = problem.start.blocks[self.active]
        self.q1 = problem.end.blocks[self.active]
        self.dz = problem.end.center - problem.start.center
        self.beta = self.group.algebra.beta
        self.shape = (len(self.times) - 2, len(self.active), self.group.dim_v)
        metric = problem.metric
        if isinstance(metric, RiemannianSpec):
            self.a = metric.weights(self.group.N)[self.active]
        else:
            self.p = metric.p
            self.eps2 = problem.smoothing ** 2
            # inactive blocks contribute the constant eps^p each
            self.s_inactive = (self.group.N - len(self.active)) * problem.smoothing ** self.p

    def full_nodes(self, X):
        X = X.reshape(self.shape)
        return np.concatenate([self.p1[None], X, self.q1[None]])

    def velocities(self, nodes):
        return np.diff(nodes, axis=0) / self.h[:, None, None]

    def _phi(self, d):
        """Per-segment integrand and its gradient with respect to d."""
        if isinstance(self.problem.metric, RiemannianSpec):
            phi = np.einsum("k,mki,mki->m", self.a, d, d)
            return phi, 2.0 * self.a[None, :, None] * d
        r = np.einsum("mki,mki->mk", d, d) + self.eps2
        s = r ** (self.p / 2)
        S = s.sum(axis=1) + self.s_inactive
        phi = S ** (2 / self.p)
        G = 2.0 * (S ** (2 / self.p - 1))[:, None, None] * (r ** (self.p / 2 - 1))[:, :, None] * d
        return phi, G

    def energy_terms(self, X):
        phi, _ = self._phi(self.velocities(self.full_nodes(X)))
        return self.h * phi

    def constraint_terms(self, X):
        """Per-segment center increments beta(x_i, x_{i+1}) / 2, shape (M, dim_w)."""
        nodes = self.full_nodes(X)
        xb = np.tensordot(nodes[:-1], self.beta, axes=([-1], [1]))
        return 0.5 * np.einsum("mkaj,mkj->ma", xb, nodes[1:])

    def energy(self, X, with_grad=True):
        nodes = self.full_nodes(X)
        d = self.velocities(nodes)
        phi, G = self._phi(d)
        E = float(np.sum(self.h * phi))
        if not with_grad:
            return E
        grad = G[:-1] - G[1:]
        return E, grad.ravel()

    def constraint(self, X, with_jac=True):
        nodes = self.full_nodes(X)
        xb = np.tensordot(nodes[:-1], self.beta, axes=([-1], [1]))  # (M, K, a, j)
        c = 0.5 * np.einsum("mkaj,mkj->a", xb, nodes[1:]) - self.dz
        if not with_jac:
            return c
        diff = nodes[2:] - nodes[:-2]
        jac = 0.5 * np.einsum("aij,mkj->amki", self.beta, diff)
        return c, jac.reshape(len(c), -1)

    def force_scale(self, X):
        """max |phi'(d_i)|: the size of the per-segment forces whose differences form the gradient."""
        _, G = self._phi(self.velocities(self.full_nodes(X)))
        return float(np.max(np.abs(G)))

    def segment_speeds(self, X):
        d = self.velocities(self.full_nodes(X))
        return np.sqrt(np.einsum("mki,mki->mk", d, d))


def _initial_nodes(problem: OptProblem, times):
    g = problem.group
    t = times[:, None, None]
    nodes = problem.start.blocks[None] + t * (problem.end.blocks - problem.start.blocks)[None]
    straight_dz = 0.5 * g.bracket_arrays(problem.start.blocks, problem.end.blocks)
    need = problem.end.center - problem.start.center
    if np.linalg.norm(straight_dz - need) > problem.constraint_tol:
        # a seeded loop gives the constraint something to work with
        rng = np.random.default_rng(problem.seed)
        scale = math.sqrt(max(np.linalg.norm(need), 1e-3))
        for m in (1, 2):
            r = rng.standard_normal((g.N, g.dim_v)) * scale / math.sqrt(g.N)
            nodes = nodes + np.sin(m * math.pi * t) * r[None]
    return nodes


def _check_warm_start(problem, curve: Curve):
    if not curve.group.compatible(problem.group):
        raise ContractError("warm start lives in a different ambient group")
    if curve.times[0] != 0.0 or curve.times[-1] != 1.0:
        raise ContractError("warm start must be parameterized on [0, 1]")
    gap = max(np.max(np.abs(curve.horizontal[0] - problem.start.blocks)),
              np.max(np.abs(curve.horizontal[-1] - problem.end.blocks)))
    if gap > 1e-10:
        raise ContractError(f"warm start does not join the horizontal endpoints (gap {gap:.3e})")


def _result_curve(problem, times, nodes):
    return horizontal_lift(problem.group, nodes, problem.start.center, times)


def minimize_length(problem: OptProblem, warm_start: Curve = None) -> OptResult:
    g = problem.group
    bound = finsler_lower_bound(problem.metric, problem.start, problem.end)
    if (problem.start - problem.end).norm() == 0.0:
        times = np.linspace(0.0, 1.0, problem.nodes)
        nodes = np.broadcast_to(problem.start.blocks, (problem.nodes,) + problem.start.blocks.shape)
        curve = _result_curve(problem, times, nodes.copy())
        return OptResult(curve, 0.0, 0.0, 0, True, bound, 0.0, message="start equals end")

    if warm_start is not None:
        _check_warm_start(problem, warm_start)
        times = warm_start.times.copy()
        init = warm_start.horizontal.copy()
        init[0], init[-1] = problem.start.blocks, problem.end.blocks
    else:
        times = np.linspace(0.0, 1.0, problem.nodes)
        init = _initial_nodes(problem, times)
    used = np.any(init != 0, axis=(0, 2)) | np.any(problem.start.blocks != 0, axis=1) \
        | np.any(problem.end.blocks != 0, axis=1)
    active = np.flatnonzero(used)
    if len(active) == 0:
        raise ContractError("no active blocks: supply a warm start that leaves the center axis")
    disc = Discretization(problem, times, active)
    X = init[1:-1][:, active].ravel()

    lam = np.zeros(g.dim_w)
    mu = problem.penalty_weight
    history = []
    total_iters = 0
    converged = False
    prev_c = math.inf
    message = ""
    outer = 0
    for outer in range(1, problem.max_iters + 1):
        def merit(Xv, lam=lam, mu=mu):
            E, gE = disc.energy(Xv)
            c, jac = disc.constraint(Xv)
            f = E - lam @ c + 0.5 * mu * (c @ c)
            return f, gE + jac.T @ (mu * c - lam)

        trace = []

        def record(intermediate_result):
            trace.append(float(intermediate_result.fun))

        res = minimize(merit, X, jac=True, method="L-BFGS-B", callback=record,
                       options={"maxiter": problem.inner_max_iters, "gtol": problem.grad_tol,
                                "ftol": 1e-15, "maxcor": 20, "maxls": 40})
        X = res.x
        total_iters += int(res.nit)
        history.append(trace)
        c, jac = disc.constraint(X)
        cn = float(np.linalg.norm(c))
        lam = lam - mu * c
        _, gE = disc.energy(X)
        # stationarity against the least-squares multiplier, which stays
        # meaningful once mu is large and c is at roundoff level
        lam_ls = np.linalg.lstsq(jac.T, gE, rcond=None)[0]
        kkt = float(np.max(np.abs(gE - jac.T @ lam_ls)))
        if cn <= problem.constraint_tol and kkt <= KKT_TOL * max(disc.force_scale(X), 1e-300):
            converged = True
            message = "converged"
            break
        if cn > problem.constraint_tol and cn > 0.25 * prev_c:
            mu = min(10.0 * mu, MAX_PENALTY)
        prev_c = cn
    else:
        message = f"no convergence in {problem.max_iters} outer iterations (|c| = {cn:.3e}, kkt = {kkt:.3e})"

    nodes = np.zeros((len(times), g.N, g.dim_v))
    nodes[:, active] = disc.full_nodes(X)
    curve = _result_curve(problem, times, nodes)
    L = length(curve, problem.metric, "subfinsler")
    residual = float(np.linalg.norm(curve.end.center - problem.end.center))
    return OptResult(curve, L, residual, total_iters, converged and residual <= problem.constraint_tol,
                     bound, disc.energy(X, with_grad=False), outer, lam, history, message)


@dataclass
class GradientCheckReport:
    max_rel_error: float
    checked: int
    skipped: list


def gradient_check(problem: OptProblem, curve: Curve = None, n_coords: int = 20,
                   step: float = 1e-6, seed: int = 0) -> GradientCheckReport:
    """Central differences against the analytic energy and constraint gradients.

    The relative error of a coordinate is |fd - an| / max(|fd|, |an|, floor),
    with floor = 1e-6 * (gradient scale), 1e-8 minimum.  The energy's scale is
    the per-segment force max |phi'(d_i)|, since its gradient entries are
    differences of those forces and vanish on stationary curves; a constraint
    component uses max |grad|.
    For the p-norm energy, coordinates touching a segment with a block speed
    too small for the difference stencil are skipped and listed.
    """
    g = problem.group
    if curve is not None:
        _check_warm_start(problem, curve)
        times, nodes = curve.times, curve.horizontal
    else:
        times = np.linspace(0.0, 1.0, problem.nodes)
        nodes = _initial_nodes(problem, times)
    disc = Discretization(problem, times, np.arange(g.N))
    X = nodes[1:-1].ravel().astype(float)
    _, gE = disc.energy(X)
    _, jac = disc.constraint(X)
    # differences are taken segment by segment before summing, so the stencil
    # does not lose digits to the magnitude of the total
    funcs = [(disc.energy_terms, gE, disc.force_scale(X))]
    for a in range(jac.shape[0]):
        funcs.append((lambda Xv, a=a: disc.constraint_terms(Xv)[:, a], jac[a], float(np.max(np.abs(jac[a])))))

    rng = np.random.default_rng(seed)
    coords = rng.choice(X.size, size=min(n_coords, X.size), replace=False)
    skipped = []
    if isinstance(problem.metric, FinslerSpec):
        speeds = disc.segment_speeds(X)
        threshold = 100.0 * step / float(np.min(disc.h))
        keep = []
        for j in coords:
            m, k, _ = np.unravel_index(j, disc.shape)
            # interior node m sits between segments m and m+1
            if min(speeds[m, k], speeds[m + 1, k]) < threshold:
                skipped.append(int(j))
            else:
                keep.append(j)
        coords = np.array(keep, dtype=int)

    worst = 0.0
    for f, grad, scale in funcs:
        floor = max(1e-8, 1e-6 * scale)
        for j in coords:
            xp, xm = X.copy(), X.copy()
            xp[j] += step
            xm[j] -= step
            fd = float(np.sum(f(xp) - f(xm))) / (2 * step)
            err = abs(fd - grad[j]) / max(abs(fd), abs(grad[j]), floor)
            worst = max(worst, err)
    return GradientCheckReport(worst, int(len(coords)), skipped)


@dataclass
class SweepRow:
    n: int
    warm_length: float
    optimized_length: float
    lower_bound: float
    constraint_residual: float
    iterations: int
    converged: bool


def degeneration_sweep(spec, group: ProductGroup, z, n_list, c: float = math.sqrt(6.0),
                       nodes: int = DEFAULT_NODES, **problem_options):
    """Optimize from the shrinking loops alpha^n * gamma^n, which join 0 to (c^2/6) z."""
    if classify_strictness(spec) is not Strictness.STRICTLY_WEAK:
        raise ContractError("degeneration sweeps need a strictly weak metric; strong metrics keep rho_S > 0")
    z = np.asarray(z, dtype=float)
    start = group.zero()
    end = group.point(center=c * c / 6.0 * z)
    rows = []
    for n in n_list:
        w = shrinking_sequence(spec, n, group)
        warm = shrinking_pair(group, n, c, z, w, nodes)
        warm_len = length(warm, spec, "subfinsler")
        problem = OptProblem(group, spec, start, end, nodes=warm.nodes, **problem_options)
        res = minimize_length(problem, warm)
        rows.append(SweepRow(n, warm_len, res.length, res.certified_lower_bound,
                             res.constraint_residual, res.iterations, res.converged))
    return rows
