"""Truncated product group M_N = v^N (+) w built from a base H-type algebra.

Points store their horizontal part as an ``(N, dim_v)`` block array and their
center part as a ``dim_w`` vector.  Tangent vectors share the layout, since
the tangent space at any point is identified with M itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import DEFAULT_SEED, HTypeAlgebra, _axiom_residuals, get_algebra
from .errors import ContractError


@dataclass(frozen=True, eq=False)
class ProductGroup:
    algebra: HTypeAlgebra
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ContractError(f"truncation N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @classmethod
    def from_name(cls, name: str, N: int) -> "ProductGroup":
        return cls(get_algebra(name), N)

    @property
    def dim_v(self):
        return self.algebra.dim_v

    @property
    def dim_w(self):
        return self.algebra.dim_w

    @property
    def dim(self):
        return self.N * self.dim_v + self.dim_w

    def compatible(self, other: "ProductGroup") -> bool:
        return self is other or (self.N == other.N and self.algebra.same_as(other.algebra))

    def point(self, blocks=None, center=None) -> "GroupPoint":
        if blocks is None:
            blocks = np.zeros((self.N, self.dim_v))
        if center is None:
            center = np.zeros(self.dim_w)
        return GroupPoint(self, blocks, center)

    def zero(self) -> "GroupPoint":
        return self.point()

    def center_vector(self, z) -> "GroupPoint":
        return self.point(center=z)

    def block_vector(self, k: int, x) -> "GroupPoint":
        """Vector supported in block ``k`` (1-based, as in the block index law)."""
        if not 1 <= k <= self.N:
            raise ContractError(f"block index {k} outside 1..{self.N}")
        blocks = np.zeros((self.N, self.dim_v))
        blocks[k - 1] = x
        return self.point(blocks)

    def from_flat(self, vec) -> "GroupPoint":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.dim,):
            raise ContractError(f"flat vector must have length {self.dim}")
        nv = self.N * self.dim_v
        return self.point(vec[:nv].reshape(self.N, self.dim_v), vec[nv:])

    def random(self, rng, horizontal=True, center=True) -> "GroupPoint":
        blocks = rng.standard_normal((self.N, self.dim_v)) if horizontal else None
        z = rng.standard_normal(self.dim_w) if center else None
        return self.point(blocks, z)

    # batched array-level operations, used by the curve and optimizer loops

    def bracket_arrays(self, x, y):
        """sum_k beta(x_k, y_k) for block arrays of shape (..., N, dim_v)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xb = np.tensordot(x, self.algebra.beta, axes=([-1], [1]))  # (..., N, dim_w, dim_v)
        return np.einsum("...kaj,...kj->...a", xb, y)

    def __repr__(self):
        return f"ProductGroup({self.algebra.name}, N={self.N})"


@dataclass(frozen=True, eq=False)
class GroupPoint:
    group: ProductGroup
    blocks: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        g = self.group
        blocks = np.array(self.blocks, dtype=float)
        center = np.array(self.center, dtype=float).reshape(-1)
        if blocks.shape != (g.N, g.dim_v):
            raise ContractError(f"blocks must have shape ({g.N}, {g.dim_v}), got {blocks.shape}")
        if center.shape != (g.dim_w,):
            raise ContractError(f"center must have shape ({g.dim_w},), got {center.shape}")
        blocks.flags.writeable = False
        center.flags.writeable = False
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "center", center)

    @property
    def N(self):
        return self.group.N

    def flat(self):
        return np.concatenate([self.blocks.ravel(), self.center])

    def _check(self, other):
        if not isinstance(other, GroupPoint):
            raise ContractError(f"expected a GroupPoint, got {type(other).__name__}")
        if not self.group.compatible(other.group):
            raise ContractError(
                f"truncation mismatch: {self.group!r} vs {other.group!r}")

    def __add__(self, other):
        self._check(other)
        return GroupPoint(self.group, self.blocks + other.blocks, self.center + other.center)

    def __sub__(self, other):
        self._check(other)
        return GroupPoint(self.group, self.blocks - other.blocks, self.center - other.center)

    def __neg__(self):
        return GroupPoint(self.group, -self.blocks, -self.center)

    def __mul__(self, s):
        return GroupPoint(self.group, s * self.blocks, s * self.center)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return GroupPoint(self.group, self.blocks / s, self.center / s)

    def inner(self, other) -> float:
        self._check(other)
        return float(np.vdot(self.blocks, other.blocks) + self.center @ other.center)

    def sq_norm(self) -> float:
        return self.inner(self)

    def norm(self) -> float:
        return float(np.sqrt(self.sq_norm()))

    def allclose(self, other, atol=1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.blocks, other.blocks, rtol=0, atol=atol)
                    and np.allclose(self.center, other.center, rtol=0, atol=atol))

    def is_horizontal(self) -> bool:
        return not np.any(self.center)

    def is_central(self) -> bool:
        return not np.any(self.blocks)

    def __repr__(self):
        return f"GroupPoint(N={self.N}, |x|={np.linalg.norm(self.blocks):.6g}, z={self.center})"


TangentVector = GroupPoint


def bracket(u: GroupPoint, v: GroupPoint) -> GroupPoint:
    u._check(v)
    return u.group.point(center=u.group.bracket_arrays(u.blocks, v.blocks))


def group_multiply(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    """BCH product p + q + [p, q]/2 (exact for a two-step group)."""
    p._check(q)
    return GroupPoint(p.group, p.blocks + q.blocks,
                      p.center + q.center + 0.5 * p.group.bracket_arrays(p.blocks, q.blocks))


def group_inverse(p: GroupPoint) -> GroupPoint:
    return -p


def j_apply_product(z, x: GroupPoint) -> GroupPoint:
    z = np.asarray(z, dtype=float)
    g = x.group
    if z.shape != (g.dim_w,):
        raise ContractError(f"center vector must have shape ({g.dim_w},)")
    if not x.is_horizontal():
        raise ContractError("J_z acts on the horizontal layer; x has a nonzero center")
    return g.point(g.algebra.j(z, x.blocks))


def left_translation_differential(p: GroupPoint, v: TangentVector) -> TangentVector:
    """(dL_p)_q v = v + [p, v]/2, independent of the base point q."""
    p._check(v)
    return GroupPoint(v.group, v.blocks, v.center + 0.5 * p.group.bracket_arrays(p.blocks, v.blocks))


def inverse_left_translation_differential(p: GroupPoint, v: TangentVector) -> TangentVector:
    """(dL_{-p})_p v = v - [p, v]/2, pulling v at p back to the identity."""
    p._check(v)
    return GroupPoint(v.group, v.blocks, v.center - 0.5 * p.group.bracket_arrays(p.blocks, v.blocks))


def project_horizontal(p: GroupPoint) -> GroupPoint:
    return p.group.point(p.blocks)


def project_center(p: GroupPoint) -> GroupPoint:
    return p.group.point(center=p.center)


def verify_product_axioms(group: ProductGroup, trials: int = 100, tol: float = 1e-12,
                          seed: int = DEFAULT_SEED):
    """Run the H-type identity chain at product level plus group-law checks.

    Returns ``(residuals, failures)``.
    """
    rng = np.random.default_rng(seed)
    # blocks scaled by 1/sqrt(N) keep |x| of order sqrt(dim_v) at every truncation
    s = 1.0 / np.sqrt(group.N)

    def sample(center=True):
        return group.random(rng, center=center) * s

    pts = [(sample(False), sample(False), rng.standard_normal(group.dim_w)) for _ in range(trials)]

    def br(x, y):
        return bracket(x, y).center

    res = _axiom_residuals(br, j_apply_product, lambda a, b: a.inner(b), lambda a: a.norm(),
                           [p[0] for p in pts], [p[1] for p in pts], [p[2] for p in pts])
    assoc = nilp = 0.0
    for _ in range(trials):
        p, q, r = (sample() for _ in range(3))
        lhs = group_multiply(group_multiply(p, q), r)
        rhs = group_multiply(p, group_multiply(q, r))
        assoc = max(assoc, (lhs - rhs).norm())
        nilp = max(nilp, bracket(p, bracket(q, r)).norm())
    res["associativity"] = assoc
    res["two_step_nilpotency"] = nilp
    failures = [k for k, v in res.items() if not v <= tol]
    return res, failures
