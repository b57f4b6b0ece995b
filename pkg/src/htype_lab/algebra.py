"""Finite-dimensional H-type base algebras n = v (+) w.

The skew structure tensor ``beta`` is the stored primitive: ``beta[a]`` is the
matrix B_a with ``[x, y]_a = x^T B_a y``.  The J maps are derived from it so
that ``<J_z x, y> = <z, [x, y]>``, which gives ``J_z = sum_a z_a B_a^T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContractError

DEFAULT_SEED = 20240501
SKEW_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class HTypeAlgebra:
    beta: np.ndarray
    name: str = "custom"
    jmats: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.ndim != 3 or beta.shape[1] != beta.shape[2] or 0 in beta.shape:
            raise ContractError(f"beta must have shape (dim_w, dim_v, dim_v), got {beta.shape}")
        skew = np.max(np.abs(beta + beta.transpose(0, 2, 1)))
        if skew > SKEW_TOL:
            raise ContractError(f"structure tensor is not skew-symmetric (max defect {skew:.3e})")
        beta.flags.writeable = False
        jmats = np.ascontiguousarray(beta.transpose(0, 2, 1))
        jmats.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "jmats", jmats)

    @property
    def dim_v(self) -> int:
        return self.beta.shape[1]

    @property
    def dim_w(self) -> int:
        return self.beta.shape[0]

    def bracket(self, x, y):
        """beta(x, y), batched over leading axes of x and y."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        # (x^T B_a)_j then contract with y_j; faster than a three-operand einsum
        xb = np.tensordot(x, self.beta, axes=([-1], [1]))
        return np.einsum("...aj,...j->...a", xb, y)

    def j_matrix(self, z):
        return np.tensordot(np.asarray(z, dtype=float), self.jmats, axes=(0, 0))

    def j(self, z, x):
        """J_z x for a single center vector z, batched over leading axes of x."""
        return np.asarray(x, dtype=float) @ self.j_matrix(z).T

    def same_as(self, other: "HTypeAlgebra") -> bool:
        return self is other or (self.beta.shape == other.beta.shape
                                 and np.array_equal(self.beta, other.beta))

    def __repr__(self):
        return f"HTypeAlgebra(name={self.name!r}, dim_v={self.dim_v}, dim_w={self.dim_w})"


def make_heisenberg() -> HTypeAlgebra:
    beta = np.array([[[0.0, 1.0], [-1.0, 0.0]]])
    return HTypeAlgebra(beta, name="heisenberg")


def quaternion_product(p, q):
    """Hamilton product of quaternions stored as (real, i, j, k)."""
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return np.array([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ])


def make_quaternionic() -> HTypeAlgebra:
    # J_{e_a} is left multiplication by the imaginary unit e_a in {i, j, k};
    # B_a is then read off from <J_{e_a} e_p, e_q> = beta(e_p, e_q)_a.
    basis = np.eye(4)
    beta = np.zeros((3, 4, 4))
    for a in range(3):
        unit = np.zeros(4)
        unit[a + 1] = 1.0
        for p in range(4):
            jp = quaternion_product(unit, basis[p])
            for q in range(4):
                beta[a, p, q] = jp @ basis[q]
    return HTypeAlgebra(beta, name="quaternionic")


_BUILTIN = {"heisenberg": make_heisenberg, "quaternionic": make_quaternionic}


@lru_cache(maxsize=None)
def get_algebra(name: str) -> HTypeAlgebra:
    try:
        return _BUILTIN[name]()
    except KeyError:
        raise ContractError(f"unknown algebra {name!r}; choose from {sorted(_BUILTIN)}") from None


def algebra_names():
    return sorted(_BUILTIN)


def j_apply(alg: HTypeAlgebra, z, x):
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    if z.shape != (alg.dim_w,) or x.shape != (alg.dim_v,):
        raise ContractError(
            f"j_apply expects z of shape ({alg.dim_w},) and x of shape ({alg.dim_v},), "
            f"got {z.shape} and {x.shape}")
    return alg.j(z, x)


@dataclass
class AxiomReport:
    """Max residual per identity over random samples; ``failures`` names the ones above tol."""

    algebra: str
    trials: int
    tol: float
    seed: int
    residuals: dict
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures


def _axiom_residuals(bracket, jz, inner, norm, xs, ys, zs):
    """Residuals of the H-type identity chain for sampled triples.

    ``bracket``, ``jz`` etc. are callables, so the same chain serves the base
    algebra and the product group.
    """
    res = {name: 0.0 for name in (
        "defining_identity", "j_squared", "j_skew_adjoint", "j_isometry",
        "z2x2", "bracket_bound", "x_jzx")}
    for x, y, z in zip(xs, ys, zs):
        nz2 = float(z @ z)
        jx = jz(z, x)
        jy = jz(z, y)
        bxy = bracket(x, y)
        nx, ny = norm(x), norm(y)
        res["defining_identity"] = max(res["defining_identity"], abs(inner(jx, y) - float(z @ bxy)))
        res["j_squared"] = max(res["j_squared"], norm(jz(z, jx) + nz2 * x))
        res["j_skew_adjoint"] = max(res["j_skew_adjoint"], abs(inner(jx, y) + inner(x, jy)))
        res["j_isometry"] = max(res["j_isometry"], abs(norm(jx) - np.sqrt(nz2) * nx))
        bxjx = bracket(x, jx)
        res["z2x2"] = max(res["z2x2"], abs(float(z @ bxjx) - nz2 * nx ** 2))
        res["bracket_bound"] = max(res["bracket_bound"], max(0.0, float(np.linalg.norm(bxy)) - nx * ny))
        res["x_jzx"] = max(res["x_jzx"], float(np.linalg.norm(bxjx - nx ** 2 * z)))
    return res


def verify_axioms(alg: HTypeAlgebra, trials: int = 100, tol: float = 1e-12,
                  seed: int = DEFAULT_SEED) -> AxiomReport:
    if tol <= 0:
        raise ContractError("tol must be positive")
    if trials < 1:
        raise ContractError("trials must be a positive integer")
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((trials, alg.dim_v))
    ys = rng.standard_normal((trials, alg.dim_v))
    zs = rng.standard_normal((trials, alg.dim_w))
    res = _axiom_residuals(alg.bracket, alg.j, lambda a, b: float(a @ b),
                           lambda a: float(np.linalg.norm(a)), xs, ys, zs)
    res["beta_skew"] = float(np.max(np.abs(alg.beta + alg.beta.transpose(0, 2, 1))))
    failures = [k for k, v in res.items() if not v <= tol]
    return AxiomReport(alg.name, trials, tol, seed, res, failures)
