"""Weak graded metrics on the truncated group.

Two families are represented:

* ``RiemannianSpec``: sigma_0(v, w) = <v, A w> with A acting on block k as
  ``a_k * Id`` (a symbolic ``WeightLaw``) and as an SPD matrix on the center.
* ``FinslerSpec``: F_0(x + z) = (sum_k |x_k|^p)^(1/p) + |z|_{A_W}; its
  restriction to the horizontal layer is the sub-Finsler norm S_0.

Whether a metric is strictly weak is decided by the symbolic law, never by the
truncated matrix, which is invertible at every finite N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CapacityError, ContractError
from .group import GroupPoint, ProductGroup, inverse_left_translation_differential


class Strictness(str, Enum):
    STRONG = "strong"
    STRICTLY_WEAK = "strictly_weak"


_LAW_KINDS = ("constant", "inverse_power", "exponential")


@dataclass(frozen=True)
class WeightLaw:
    """Block weights a_k for k >= 1.

    constant(c): a_k = c;  inverse_power(q): a_k = k**-q;
    exponential(r): a_k = r**k with 0 < r < 1.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in _LAW_KINDS:
            raise ContractError(f"unknown weight law {self.kind!r}")
        p = float(self.param)
        if self.kind == "constant" and not p > 0:
            raise ContractError("constant law needs c > 0")
        if self.kind == "inverse_power" and not p >= 0:
            # q < 0 gives unbounded weights, so sigma_0 would not be continuous
            raise ContractError("inverse_power law needs q >= 0")
        if self.kind == "exponential" and not 0 < p < 1:
            raise ContractError("exponential law needs 0 < r < 1")
        object.__setattr__(self, "param", p)

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", c)

    @classmethod
    def inverse_power(cls, q):
        return cls("inverse_power", q)

    @classmethod
    def exponential(cls, r):
        return cls("exponential", r)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        if np.any(k < 1):
            raise ContractError("block indices start at 1")
        if self.kind == "constant":
            return np.full_like(k, self.param)
        if self.kind == "inverse_power":
            return k ** (-self.param)
        return self.param ** k

    def weights(self, N):
        return self(np.arange(1, N + 1))

    def sup(self) -> float:
        return float(self(1)) if self.kind != "constant" else self.param

    def degenerate(self) -> bool:
        """inf_k a_k == 0."""
        return (self.kind == "inverse_power" and self.param > 0) or self.kind == "exponential"

    def first_index_below(self, eps: float) -> int:
        """Smallest k with a_k <= eps (only meaningful for degenerate laws)."""
        if not self.degenerate():
            raise ContractError(f"weights of {self} are bounded below; no index reaches {eps}")
        if eps >= self.sup():
            return 1
        if self.kind == "inverse_power":
            k = max(1, math.ceil(eps ** (-1.0 / self.param)))
        else:
            k = max(1, math.ceil(math.log(eps) / math.log(self.param)))
        if k >= 2 ** 52:
            # beyond float integer resolution the rounding guards cannot move k
            return k
        # guard the float rounding of the closed-form index in both directions
        while k > 1 and float(self(k - 1)) <= eps:
            k -= 1
        while float(self(k)) > eps:
            k += 1
        return k

    def to_json(self):
        return {self.kind: self.param}

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or len(obj) != 1:
            raise ContractError('weight law must be a single-key object, e.g. {"inverse_power": 1}')
        (kind, param), = obj.items()
        if not isinstance(param, (int, float)) or isinstance(param, bool):
            raise ContractError(f"weight law parameter must be a number, got {param!r}")
        return cls(kind, param)


def _spd(matrix, dim_w):
    if matrix is None:
        m = np.eye(dim_w)
    else:
        m = np.array(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractError("w_matrix must be square")
    if not np.allclose(m, m.T, rtol=0, atol=1e-14):
        raise ContractError("w_matrix must be symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise ContractError("w_matrix must be positive definite") from None
    m.flags.writeable = False
    return m


class _CenterNorm:
    def center_norm(self, z):
        z = np.asarray(z, dtype=float)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", z, self.w_matrix, z), 0.0))

    def _check_center(self, group):
        if self.w_matrix.shape != (group.dim_w, group.dim_w):
            raise ContractError(
                f"w_matrix is {self.w_matrix.shape}, group center has dimension {group.dim_w}")


@dataclass(frozen=True, eq=False)
class RiemannianSpec(_CenterNorm):
    v_law: WeightLaw
    w_matrix: np.ndarray = None

    def __post_init__(self):
        dim_w = None if self.w_matrix is None else np.shape(self.w_matrix)[0]
        object.__setattr__(self, "w_matrix", _spd(self.w_matrix, dim_w or 1))

    @classmethod
    def for_group(cls, group: ProductGroup, v_law: WeightLaw, w_matrix=None):
        return cls(v_law, np.eye(group.dim_w) if w_matrix is None else w_matrix)

    def weights(self, N):
        return self.v_law.weights(N)

    @property
    def c0(self) -> float:
        """Continuity constant: ||v||_sigma <= c0 |v|."""
        return math.sqrt(max(self.v_law.sup(), float(np.linalg.eigvalsh(self.w_matrix)[-1])))

    @property
    def c0_horizontal(self) -> float:
        return math.sqrt(self.v_law.sup())

    # A and its inverse, blockwise scalar on the horizontal layer

    def apply_A(self, v: GroupPoint) -> GroupPoint:
        self._check_center(v.group)
        a = self.weights(v.N)[:, None]
        return v.group.point(a * v.blocks, self.w_matrix @ v.center)

    def apply_A_inv(self, v: GroupPoint) -> GroupPoint:
        self._check_center(v.group)
        a = self.weights(v.N)[:, None]
        return v.group.point(v.blocks / a, np.linalg.solve(self.w_matrix, v.center))

    def apply_A_center(self, z):
        return self.w_matrix @ np.asarray(z, dtype=float)

    # batched norms on raw arrays: blocks (..., N, dim_v), center (..., dim_w)

    def horizontal_sq(self, blocks):
        blocks = np.asarray(blocks)
        a = self.weights(blocks.shape[-2])
        return np.einsum("k,...ki,...ki->...", a, blocks, blocks)

    def horizontal_norm(self, blocks):
        return np.sqrt(self.horizontal_sq(blocks))

    def norm_arrays(self, blocks, center):
        return np.sqrt(self.horizontal_sq(blocks) + self.center_norm(center) ** 2)

    def inner(self, v: GroupPoint, w: GroupPoint) -> float:
        v._check(w)
        self._check_center(v.group)
        a = self.weights(v.N)
        return float(np.einsum("k,ki,ki->", a, v.blocks, w.blocks)
                     + v.center @ self.w_matrix @ w.center)

    def norm(self, v: GroupPoint) -> float:
        return math.sqrt(max(self.inner(v, v), 0.0))

    def to_json(self):
        return {"type": "riemannian", "law": self.v_law.to_json(),
                "w_matrix": self.w_matrix.tolist()}


@dataclass(frozen=True, eq=False)
class FinslerSpec(_CenterNorm):
    p: float
    w_matrix: np.ndarray = None

    def __post_init__(self):
        p = float(self.p)
        if not p >= 2:
            raise ContractError(f"block p-norm exponent must be >= 2, got {self.p}")
        object.__setattr__(self, "p", p)
        dim_w = None if self.w_matrix is None else np.shape(self.w_matrix)[0]
        object.__setattr__(self, "w_matrix", _spd(self.w_matrix, dim_w or 1))

    @classmethod
    def for_group(cls, group: ProductGroup, p, w_matrix=None):
        return cls(p, np.eye(group.dim_w) if w_matrix is None else w_matrix)

    @property
    def c1(self) -> float:
        """F_0(v) <= c1 |v|, from ||x||_p <= |x| and Cauchy-Schwarz on the sum."""
        return math.sqrt(1.0 + float(np.linalg.eigvalsh(self.w_matrix)[-1]))

    @property
    def c0_horizontal(self) -> float:
        return 1.0

    # F_0(pi_i v) <= F_0(v) holds with C = 1 for the additive split
    C = 1.0

    def horizontal_norm(self, blocks):
        blocks = np.asarray(blocks)
        bn = np.sqrt(np.einsum("...ki,...ki->...k", blocks, blocks))
        m = bn.max(axis=-1, initial=0.0)
        safe = np.where(m > 0, m, 1.0)
        # scaled to avoid overflow/underflow of |x_k|^p
        return np.where(m > 0, safe * np.sum((bn / safe[..., None]) ** self.p, axis=-1) ** (1 / self.p), 0.0)

    def norm_arrays(self, blocks, center):
        return self.horizontal_norm(blocks) + self.center_norm(center)

    def norm(self, v: GroupPoint) -> float:
        self._check_center(v.group)
        return float(self.norm_arrays(v.blocks, v.center))

    def to_json(self):
        return {"type": "finsler", "p": self.p, "w_matrix": self.w_matrix.tolist()}


MetricSpec = RiemannianSpec | FinslerSpec


def sigma_norm(spec: RiemannianSpec, v: GroupPoint) -> float:
    return spec.norm(v)


def sigma_inner(spec: RiemannianSpec, v: GroupPoint, w: GroupPoint) -> float:
    return spec.inner(v, w)


def metric_at(spec: RiemannianSpec, p: GroupPoint, v: GroupPoint, w: GroupPoint) -> float:
    """Left-invariant extension sigma_p(v, w) = sigma_0(dL_{-p} v, dL_{-p} w)."""
    return spec.inner(inverse_left_translation_differential(p, v),
                      inverse_left_translation_differential(p, w))


def finsler_norm_at(spec, p: GroupPoint, v: GroupPoint) -> float:
    """F_p(v) = F_0(dL_{-p} v); a RiemannianSpec acts through its sigma_0 norm."""
    return spec.norm(inverse_left_translation_differential(p, v))


def subfinsler_norm(spec, v: GroupPoint) -> float:
    if not v.is_horizontal():
        raise ContractError("S_0 is defined on the horizontal layer only")
    return float(spec.horizontal_norm(v.blocks))


def classify_strictness(spec) -> Strictness:
    if isinstance(spec, RiemannianSpec):
        weak = spec.v_law.degenerate()
    elif isinstance(spec, FinslerSpec):
        weak = spec.p > 2
    else:
        raise ContractError(f"unknown metric spec {type(spec).__name__}")
    return Strictness.STRICTLY_WEAK if weak else Strictness.STRONG


def _require_weak(spec):
    if classify_strictness(spec) is not Strictness.STRICTLY_WEAK:
        raise ContractError(f"{spec.to_json()} is a strong metric: no degenerate sequence exists")


def spread_count(p: float, n: int) -> int:
    """m(n) = ceil(n^(2p/(p-2))), the block count giving S_0 = m^(1/p - 1/2) <= 1/n."""
    x = n ** (2 * p / (p - 2))
    m = max(1, math.ceil(x - 1e-9 * x))
    while m ** (1 / p - 0.5) > 1 / n:
        m += 1
    return m


def _unit_direction(group):
    e = np.zeros(group.dim_v)
    e[0] = 1.0
    return e


def _spread_vector(spec: FinslerSpec, n, group):
    m = spread_count(spec.p, n)
    if m > group.N:
        raise CapacityError(f"p-norm degenerate vector w_{n} needs N >= {m} blocks, ambient has {group.N}",
                            required=m)
    blocks = np.zeros((group.N, group.dim_v))
    blocks[:m] = _unit_direction(group) / math.sqrt(m)
    return group.point(blocks)


def degenerate_sequence(spec, n: int, group: ProductGroup) -> GroupPoint:
    """Unit horizontal vector w_n whose weak norm tends to 0 as n grows.

    Riemannian: e_1 placed in block n, so ||w_n||_sigma = sqrt(a_n) and
    w_n = A(w_n / a_n) lies in the image of A.  p-norm: e_1 spread uniformly
    over ``spread_count(p, n)`` blocks, giving S_0(w_n) <= 1/n.
    """
    if n < 1:
        raise ContractError("sequence index starts at 1")
    _require_weak(spec)
    if isinstance(spec, RiemannianSpec):
        if n > group.N:
            raise CapacityError(f"w_{n} lives in block {n}, ambient has N = {group.N}", required=n)
        return group.block_vector(n, _unit_direction(group))
    return _spread_vector(spec, n, group)


def shrinking_sequence(spec, n: int, group: ProductGroup) -> GroupPoint:
    """Unit horizontal vector with S_0(w) <= 1/n, as the shrinking curves need.

    For the Riemannian family this is e_1 in the first block k with
    a_k <= 1/n^2; for the p-norm family it coincides with
    ``degenerate_sequence``.
    """
    if n < 1:
        raise ContractError("sequence index starts at 1")
    _require_weak(spec)
    if isinstance(spec, RiemannianSpec):
        k = spec.v_law.first_index_below(1.0 / n ** 2)
        if k > group.N:
            raise CapacityError(f"shrinking vector for n = {n} lives in block {k}, ambient has N = {group.N}",
                                required=k)
        return group.block_vector(k, _unit_direction(group))
    return _spread_vector(spec, n, group)


def shrinking_capacity(spec, n: int) -> int:
    """Block count needed by ``shrinking_sequence(spec, n, .)``."""
    _require_weak(spec)
    if isinstance(spec, RiemannianSpec):
        return spec.v_law.first_index_below(1.0 / n ** 2)
    return spread_count(spec.p, n)


def metric_from_json(obj, group: ProductGroup):
    if not isinstance(obj, dict):
        raise ContractError("metric must be an object")
    kind = obj.get("type", "riemannian")
    allowed = {"riemannian": {"type", "law", "w_matrix"}, "finsler": {"type", "p", "w_matrix"}}
    if kind not in allowed:
        raise ContractError(f"metric type must be 'riemannian' or 'finsler', got {kind!r}")
    extra = set(obj) - allowed[kind]
    if extra:
        raise ContractError(f"unknown metric keys {sorted(extra)}")
    w = obj.get("w_matrix")
    if kind == "riemannian":
        if "law" not in obj:
            raise ContractError("riemannian metric needs a 'law'")
        spec = RiemannianSpec.for_group(group, WeightLaw.from_json(obj["law"]), w)
    else:
        if "p" not in obj:
            raise ContractError("finsler metric needs 'p'")
        spec = FinslerSpec.for_group(group, obj["p"], w)
    spec._check_center(group)
    return spec
