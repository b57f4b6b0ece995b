"""B-adjoint vectors, Arnold's sectional curvature and the Levi-Civita obstruction.

All routines assume a graded ``RiemannianSpec``: A acts blockwise by a_k on the
horizontal layer and by the SPD matrix A_W on the center.  Under that
assumption the B-adjoint has the closed form B(y, x) = A^{-1} J_{A y_2} x_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .group import GroupPoint, ProductGroup, bracket, j_apply_product
from .metrics import RiemannianSpec, Strictness, classify_strictness, degenerate_sequence

ORTHO_TOL = 1e-12
MAX_PLANE_CONDITION = 1e12


def _require_riemannian(spec):
    if not isinstance(spec, RiemannianSpec):
        raise ContractError("curvature computations need a graded RiemannianSpec")


@dataclass(frozen=True)
class Plane:
    raw_basis: tuple
    ortho_basis: tuple


def make_plane(spec: RiemannianSpec, u: GroupPoint, v: GroupPoint,
               max_condition: float = MAX_PLANE_CONDITION) -> Plane:
    """sigma_0-orthonormalize (u, v) by Gram-Schmidt with one re-orthogonalization pass.

    The condition test uses the Gram matrix of the sigma_0-normalized pair, so it
    measures near-dependence rather than the (possibly tiny) weak norms.
    """
    _require_riemannian(spec)
    u._check(v)
    nu, nv = spec.norm(u), spec.norm(v)
    if nu == 0 or nv == 0:
        raise ContractError("plane basis vectors must be nonzero")
    cos = spec.inner(u, v) / (nu * nv)
    gram = np.array([[1.0, cos], [cos, 1.0]])
    cond = np.linalg.cond(gram)
    if not cond <= max_condition:
        raise ContractError(f"plane basis is numerically dependent (sigma-Gram condition {cond:.3e})")
    e1 = u / nu
    f = v
    for _ in range(2):
        f = f - e1 * spec.inner(e1, f)
    e2 = f / spec.norm(f)
    return Plane((u, v), (e1, e2))


def plane_gram(spec: RiemannianSpec, plane: Plane):
    e1, e2 = plane.ortho_basis
    return np.array([[spec.inner(e1, e1), spec.inner(e1, e2)],
                     [spec.inner(e2, e1), spec.inner(e2, e2)]])


@dataclass(frozen=True)
class BAdjointResult:
    """``exists`` is always True for finitely supported inputs: A_V is blockwise
    a_k > 0, so every truncated vector lies in its image.  ``conditioning`` is
    the largest factor 1/a_k applied to an occupied block.
    """

    exists: bool
    vector: GroupPoint
    conditioning: float


def b_adjoint(spec: RiemannianSpec, y: GroupPoint, x: GroupPoint) -> BAdjointResult:
    """The representer B(y, x) of u -> sigma_0([x, u], y)."""
    _require_riemannian(spec)
    y._check(x)
    spec._check_center(x.group)
    g = x.group
    u = g.algebra.j(spec.apply_A_center(y.center), x.blocks)
    a = spec.weights(g.N)
    occupied = np.any(u != 0, axis=1)
    conditioning = float(np.max(1.0 / a[occupied])) if occupied.any() else 1.0
    return BAdjointResult(True, g.point(u / a[:, None]), conditioning)


def b_adjoint_residual(spec: RiemannianSpec, y: GroupPoint, x: GroupPoint, vector: GroupPoint,
                       probes) -> float:
    """max over probes u of |sigma_0(u, B) - sigma_0([x, u], y)|."""
    return max(abs(spec.inner(u, vector) - spec.inner(bracket(x, u), y)) for u in probes)


def arnold_terms(spec: RiemannianSpec, x: GroupPoint, y: GroupPoint) -> dict:
    bxy = b_adjoint(spec, x, y).vector
    byx = b_adjoint(spec, y, x).vector
    bxx = b_adjoint(spec, x, x).vector
    byy = b_adjoint(spec, y, y).vector
    delta = 0.5 * (bxy + byx)
    beta = 0.5 * (bxy - byx)
    alpha = 0.5 * bracket(x, y)
    bx, by = 0.5 * bxx, 0.5 * byy
    return {
        "delta_delta": spec.inner(delta, delta),
        "alpha_beta": spec.inner(alpha, beta),
        "alpha_alpha": spec.inner(alpha, alpha),
        "bx_by": spec.inner(bx, by),
    }


def arnold_from_terms(t: dict) -> float:
    return t["delta_delta"] + 2 * t["alpha_beta"] - 3 * t["alpha_alpha"] - 4 * t["bx_by"]


def arnold_curvature(spec: RiemannianSpec, plane: Plane, tol: float = ORTHO_TOL) -> float:
    _require_riemannian(spec)
    gram = plane_gram(spec, plane)
    err = np.max(np.abs(gram - np.eye(2)))
    if err > tol:
        raise ContractError(f"plane basis is not sigma_0-orthonormal (Gram defect {err:.3e})")
    return arnold_from_terms(arnold_terms(spec, *plane.ortho_basis))


def sectional_curvature(spec: RiemannianSpec, u: GroupPoint, v: GroupPoint) -> float:
    return arnold_curvature(spec, make_plane(spec, u, v))


def horizontal_plane_curvature(spec: RiemannianSpec, x: GroupPoint, y: GroupPoint) -> float:
    """-3/4 ||[x, y]||^2_sigma for a sigma_0-orthonormal horizontal pair."""
    return -0.75 * spec.norm(bracket(x, y)) ** 2


def mixed_plane_curvature(spec: RiemannianSpec, z, x: GroupPoint) -> float:
    """Closed form on span{J_{Az}(Ax), z}:
    |Az|^4 ||x||^2 / (4 ||J_{Az}(Ax)||^2 ||z||^2), all norms in sigma_0."""
    g = x.group
    az = spec.apply_A_center(z)
    jv = j_apply_product(az, spec.apply_A(x))
    zc = g.point(center=z)
    return 0.25 * float(az @ az) ** 2 * spec.norm(x) ** 2 / (spec.norm(jv) ** 2 * spec.norm(zc) ** 2)


@dataclass(frozen=True)
class BlowupResult:
    n: int
    a_n: float
    P: Plane
    Q: Plane
    K_P: float
    K_Q: float


def blowup_closed_forms(spec: RiemannianSpec, n: int, z):
    """(K_P, K_Q) for w_n = e_1 in block n with blockwise-scalar A.

    K_P = -3 (z^T A_W z) / (4 a_n^2 |z|^2) and K_Q = |A_W z|^2 / (4 a_n^2 z^T A_W z);
    with A_W = Id and |z| = 1 these are -3/(4 a_n^2) and 1/(4 a_n^2).
    """
    z = np.asarray(z, dtype=float)
    a = float(spec.v_law(n))
    zaz = float(z @ spec.w_matrix @ z)
    az = spec.apply_A_center(z)
    nz2 = float(z @ z)
    return -0.75 * zaz / (nz2 * a ** 2), 0.25 * float(az @ az) / (a ** 2 * zaz)


def blowup_planes(spec: RiemannianSpec, n: int, z, group: ProductGroup) -> BlowupResult:
    """P_n = span{w_n, J_z w_n} and Q_n = span{z, J_{Az} w_n} with their curvatures."""
    _require_riemannian(spec)
    if classify_strictness(spec) is not Strictness.STRICTLY_WEAK:
        raise ContractError("blow-up sequences need a strictly weak metric")
    z = np.asarray(z, dtype=float)
    if z.shape != (group.dim_w,) or not np.any(z):
        raise ContractError(f"z must be a nonzero vector of shape ({group.dim_w},)")
    w = degenerate_sequence(spec, n, group)
    P = make_plane(spec, w, j_apply_product(z, w))
    Q = make_plane(spec, group.point(center=z), j_apply_product(spec.apply_A_center(z), w))
    return BlowupResult(n, float(spec.v_law(n)), P, Q,
                        arnold_curvature(spec, P), arnold_curvature(spec, Q))


def levi_civita_candidate(spec: RiemannianSpec, x: GroupPoint) -> GroupPoint:
    """-A^{-1}(J_{A x_2} x_1): the value nabla_X X(0) would be forced to take."""
    _require_riemannian(spec)
    return -b_adjoint(spec, x, x).vector


def levi_civita_obstruction(spec: RiemannianSpec, x2, n: int, group: ProductGroup) -> float:
    """|A^{-1}(J_{A x_2} x_1)| for x_1 = J_{A x_2} v_n, v_n = e_1 in block n.

    Equals |A x_2|^2 / a_n; it stays bounded in n exactly for strong laws.
    """
    _require_riemannian(spec)
    x2 = np.asarray(x2, dtype=float)
    if x2.shape != (group.dim_w,) or not np.any(x2):
        raise ContractError("x2 must be a nonzero center vector")
    if not 1 <= n <= group.N:
        raise ContractError(f"block index {n} outside 1..{group.N}")
    ax2 = spec.apply_A_center(x2)
    e = np.zeros(group.dim_v)
    e[0] = 1.0
    v = group.block_vector(n, e)
    x1 = j_apply_product(ax2, v)
    u = j_apply_product(ax2, x1)
    return spec.apply_A_inv(u).norm()


def curvature_sweep(spec: RiemannianSpec, group: ProductGroup, z, x2, n_list):
    """Rows (n, a_n, K_P, K_Q, obstruction) for each n."""
    rows = []
    for n in n_list:
        r = blowup_planes(spec, n, z, group)
        rows.append({"n": n, "a_n": r.a_n, "K_P": r.K_P, "K_Q": r.K_Q,
                     "obstruction": levi_civita_obstruction(spec, x2, n, group)})
    return rows


def growth_exponent(ns, values) -> float:
    """Least-squares slope of log(value) against log(n)."""
    ln = np.log(np.asarray(ns, dtype=float))
    lv = np.log(np.asarray(values, dtype=float))
    if len(ln) < 2:
        return math.nan
    return float(np.polyfit(ln, lv, 1)[0])
