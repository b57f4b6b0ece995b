import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from htype_lab.errors import CapacityError, ContractError
from htype_lab.group import ProductGroup, group_multiply, left_translation_differential
from htype_lab.metrics import (FinslerSpec, RiemannianSpec, Strictness, WeightLaw, classify_strictness,
                               degenerate_sequence, finsler_norm_at, metric_at, metric_from_json,
                               shrinking_capacity, shrinking_sequence, spread_count, subfinsler_norm)


@pytest.fixture
def heis():
    return ProductGroup.from_name("heisenberg", 16)


def test_weight_values():
    assert np.allclose(WeightLaw.inverse_power(1).weights(4), [1, 1 / 2, 1 / 3, 1 / 4])
    assert np.allclose(WeightLaw.exponential(0.5).weights(3), [0.5, 0.25, 0.125])
    assert np.array_equal(WeightLaw.constant(2.0).weights(3), [2.0, 2.0, 2.0])


@pytest.mark.parametrize("kind, param", [("constant", 0.0), ("inverse_power", -1.0),
                                         ("exponential", 1.0), ("exponential", 0.0), ("cubic", 1.0)])
def test_invalid_laws(kind, param):
    with pytest.raises(ContractError):
        WeightLaw(kind, param)


def test_block_index_starts_at_one():
    with pytest.raises(ContractError):
        WeightLaw.inverse_power(1)(0)


@pytest.mark.parametrize("law, expected", [
    (WeightLaw.constant(1), Strictness.STRONG),
    (WeightLaw.inverse_power(0), Strictness.STRONG),
    (WeightLaw.inverse_power(0.5), Strictness.STRICTLY_WEAK),
    (WeightLaw.exponential(0.9), Strictness.STRICTLY_WEAK),
])
def test_riemannian_strictness(heis, law, expected):
    assert classify_strictness(RiemannianSpec.for_group(heis, law)) is expected


def test_finsler_strictness(heis):
    assert classify_strictness(FinslerSpec.for_group(heis, 2)) is Strictness.STRONG
    assert classify_strictness(FinslerSpec.for_group(heis, 3)) is Strictness.STRICTLY_WEAK
    with pytest.raises(ContractError):
        FinslerSpec.for_group(heis, 1.5)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(1e-6, 0.99))
def test_first_index_below_inverse_power(q, eps):
    law = WeightLaw.inverse_power(q)
    k = law.first_index_below(eps)
    assume(k < 2 ** 52)  # k - 1 must be distinguishable from k
    assert law(k) <= eps
    assert k == 1 or law(k - 1) > eps


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(1e-8, 0.99))
def test_first_index_below_exponential(r, eps):
    law = WeightLaw.exponential(r)
    k = law.first_index_below(eps)
    assert law(k) <= eps and (k == 1 or law(k - 1) > eps)


def test_first_index_below_strong_law():
    with pytest.raises(ContractError):
        WeightLaw.constant(1).first_index_below(0.5)


def test_c0_is_continuity_constant(heis, rng):
    spec = RiemannianSpec.for_group(heis, WeightLaw.constant(3.0), [[0.5]])
    assert spec.c0 == pytest.approx(math.sqrt(3.0))
    for _ in range(20):
        v = heis.random(rng)
        assert spec.norm(v) <= spec.c0 * v.norm() * (1 + 1e-14)


def test_finsler_c1_bound(heis, rng):
    spec = FinslerSpec.for_group(heis, 4, [[2.0]])
    assert spec.c1 == pytest.approx(math.sqrt(3.0))
    for _ in range(20):
        v = heis.random(rng)
        assert spec.norm(v) <= spec.c1 * v.norm() * (1 + 1e-14)


def test_w_matrix_validation(heis):
    with pytest.raises(ContractError, match="symmetric"):
        RiemannianSpec.for_group(ProductGroup.from_name("quaternionic", 1), WeightLaw.constant(1),
                                 [[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ContractError, match="positive definite"):
        RiemannianSpec.for_group(heis, WeightLaw.constant(1), [[-1.0]])


def test_metric_is_left_invariant(rng):
    g = ProductGroup.from_name("quaternionic", 4)
    spec = RiemannianSpec.for_group(g, WeightLaw.exponential(0.6))
    p, q, v, w = (g.random(rng) for _ in range(4))
    # sigma_{q p}(dL_q v, dL_q w) = sigma_p(v, w)
    lhs = metric_at(spec, group_multiply(q, p), left_translation_differential(q, v),
                    left_translation_differential(q, w))
    assert lhs == pytest.approx(metric_at(spec, p, v, w), rel=1e-11)
    assert finsler_norm_at(spec, g.zero(), v) == pytest.approx(spec.norm(v))


def test_subfinsler_norm_needs_horizontal(heis, rng):
    spec = RiemannianSpec.for_group(heis, WeightLaw.constant(1))
    with pytest.raises(ContractError):
        subfinsler_norm(spec, heis.random(rng))


@pytest.mark.parametrize("n", [1, 3, 9, 16])
def test_degenerate_sequence_riemannian(heis, n):
    spec = RiemannianSpec.for_group(heis, WeightLaw.inverse_power(1))
    w = degenerate_sequence(spec, n, heis)
    assert w.norm() == pytest.approx(1.0)
    assert spec.norm(w) == pytest.approx(1 / math.sqrt(n))


def test_degenerate_sequence_capacity(heis):
    spec = RiemannianSpec.for_group(heis, WeightLaw.inverse_power(1))
    with pytest.raises(CapacityError) as info:
        degenerate_sequence(spec, 17, heis)
    assert info.value.required == 17


def test_degenerate_sequence_rejects_strong(heis):
    with pytest.raises(ContractError, match="strong"):
        degenerate_sequence(RiemannianSpec.for_group(heis, WeightLaw.constant(1)), 1, heis)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_shrinking_sequence_weak_norm(n):
    g = ProductGroup.from_name("heisenberg", 64)
    spec = RiemannianSpec.for_group(g, WeightLaw.inverse_power(1))
    w = shrinking_sequence(spec, n, g)
    assert w.norm() == pytest.approx(1.0)
    assert spec.norm(w) <= 1 / n * (1 + 1e-15)
    assert shrinking_capacity(spec, n) == n * n


@pytest.mark.parametrize("p, n", [(4, 1), (4, 3), (6, 5)])
def test_spread_vector(p, n):
    m = spread_count(p, n)
    g = ProductGroup.from_name("heisenberg", m)
    spec = FinslerSpec.for_group(g, p)
    w = degenerate_sequence(spec, n, g)
    assert w.norm() == pytest.approx(1.0)
    assert spec.horizontal_norm(w.blocks) <= 1 / n * (1 + 1e-12)
    assert m == 1 or (m - 1) ** (1 / p - 0.5) > 1 / n


def test_metric_from_json(heis):
    spec = metric_from_json({"type": "riemannian", "law": {"exponential": 0.5}}, heis)
    assert spec.v_law == WeightLaw.exponential(0.5)
    f = metric_from_json({"type": "finsler", "p": 4}, heis)
    assert isinstance(f, FinslerSpec) and f.p == 4.0
    assert metric_from_json(spec.to_json(), heis).to_json() == spec.to_json()


@pytest.mark.parametrize("obj, match", [
    ({"type": "kähler"}, "type"),
    ({"type": "riemannian"}, "law"),
    ({"type": "riemannian", "law": {"inverse_power": 1}, "extra": 1}, "unknown"),
    ({"type": "riemannian", "law": {"inverse_power": 1, "constant": 1}}, "single-key"),
    ({"type": "finsler", "p": 4, "w_matrix": [[1, 0], [0, 1]]}, "dimension"),
])
def test_metric_from_json_errors(heis, obj, match):
    with pytest.raises(ContractError, match=match):
        metric_from_json(obj, heis)
