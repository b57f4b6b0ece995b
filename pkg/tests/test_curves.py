import math

import numpy as np
import pytest

from htype_lab.curves import (LinearPath, PolyPath, concatenate, export_curve_csv, finsler_lower_bound,
                              horizontal_lift, horizontality_residual, is_horizontal, length, reverse,
                              sampled_curve, shrinking_halves, shrinking_pair, shrinking_paths, translate)
from htype_lab.errors import ContractError
from htype_lab.group import ProductGroup
from htype_lab.metrics import FinslerSpec, RiemannianSpec, WeightLaw, shrinking_sequence

SQRT6 = math.sqrt(6.0)


@pytest.fixture
def heis():
    return ProductGroup.from_name("heisenberg", 16)


def unit_circle(group, turns=1.0):
    # x(t) = (cos 2 pi t - 1, sin 2 pi t) in block 1, sampled finely
    t = np.linspace(0, 1, 2001)
    x = np.zeros((len(t), group.N, group.dim_v))
    x[:, 0, 0] = np.cos(2 * math.pi * turns * t) - 1
    x[:, 0, 1] = np.sin(2 * math.pi * turns * t)
    return t, x


def test_circle_lift_encloses_area(heis):
    t, x = unit_circle(heis)
    curve = horizontal_lift(heis, x, times=t)
    # (1/2) * integral of x dy - y dx over the unit circle is pi; polygon error is O(h^2)
    assert curve.end.center[0] == pytest.approx(math.pi, rel=1e-5)
    assert is_horizontal(curve)


def test_quadratic_lift_is_exact(heis):
    w = heis.block_vector(2, [1.0, 0.0])
    g1, g2, _, _ = shrinking_paths(heis, 3, 1.7, [1.0], w)
    curve = horizontal_lift(heis, g1, times=np.linspace(0, 1, 5))
    assert np.allclose(curve.center, g2.value(curve.times), atol=1e-15)


def test_closed_form_lifts(algebra_name):
    g = ProductGroup.from_name(algebra_name, 9)
    spec = RiemannianSpec.for_group(g, WeightLaw.inverse_power(1))
    z = np.zeros(g.dim_w)
    z[-1] = 1.0
    w = shrinking_sequence(spec, 3, g)
    gamma, alpha = shrinking_halves(g, 3, 2.0, z, w, nodes=65)
    assert horizontality_residual(gamma) < 1e-13 and horizontality_residual(alpha) < 1e-13
    assert np.allclose(gamma.end.center, 4.0 / 12 * z, atol=1e-14)
    assert np.allclose(alpha.end.center, 4.0 / 6 * z, atol=1e-14)
    assert np.allclose(alpha.end.blocks, 0.0, atol=1e-15)


def test_shrinking_pair_meta_and_endpoint(heis):
    spec = RiemannianSpec.for_group(heis, WeightLaw.inverse_power(1))
    w = shrinking_sequence(spec, 2, heis)
    curve = shrinking_pair(heis, 2, SQRT6, [1.0], w, nodes=33)
    assert curve.nodes == 65
    assert abs(curve.end.center[0] - 1.0) < 1e-14
    assert curve.meta["endpoint"].allclose(curve.end, atol=1e-14)
    mid = curve.horizontal[32]
    assert np.allclose(mid, curve.meta["gamma_end"].blocks, atol=1e-14)


def test_shrinking_paths_checks_units(heis):
    w = heis.block_vector(1, [1.0, 0.0])
    with pytest.raises(ContractError, match="unit"):
        shrinking_paths(heis, 1, 1.0, [2.0], w)
    with pytest.raises(ContractError, match="unit"):
        shrinking_paths(heis, 1, 1.0, [1.0], w * 2.0)


def test_straight_segment_length(heis, rng):
    spec = RiemannianSpec.for_group(heis, WeightLaw.exponential(0.8))
    x = rng.standard_normal((heis.N, 2))
    t = np.linspace(0, 1, 11)
    curve = horizontal_lift(heis, t[:, None, None] * x[None], times=t)
    assert length(curve, spec) == pytest.approx(float(spec.horizontal_norm(x)), rel=1e-13)
    # a straight ray through 0 has zero lift
    assert np.allclose(curve.center, 0.0, atol=1e-15)


def test_subfinsler_equals_finsler_on_horizontal(heis):
    t, x = unit_circle(heis)
    curve = horizontal_lift(heis, x, times=t)
    for spec in (RiemannianSpec.for_group(heis, WeightLaw.inverse_power(1)), FinslerSpec.for_group(heis, 4)):
        assert length(curve, spec, "finsler") == pytest.approx(length(curve, spec, "subfinsler"), abs=1e-12)


def test_non_horizontal_curve(heis):
    t = np.linspace(0, 1, 9)
    x = np.zeros((9, heis.N, 2))
    x[:, 0, 0] = t
    center = np.stack([t], axis=1)  # moves in the center without any area
    curve = sampled_curve(heis, t, x, center)
    spec = RiemannianSpec.for_group(heis, WeightLaw.constant(1))
    assert horizontality_residual(curve) > 0.1
    with pytest.raises(ContractError, match="not horizontal"):
        length(curve, spec)
    # Finsler length still counts the center motion
    assert length(curve, spec, "riemannian") == pytest.approx(math.sqrt(2), rel=1e-12)


def test_length_is_left_invariant(heis, rng):
    spec = RiemannianSpec.for_group(heis, WeightLaw.inverse_power(1))
    t, x = unit_circle(heis)
    curve = horizontal_lift(heis, x, times=t)
    moved = translate(curve, heis.random(rng))
    assert is_horizontal(moved)
    assert length(moved, spec, "finsler") == pytest.approx(length(curve, spec, "finsler"), rel=1e-11)
    assert length(moved, spec) == pytest.approx(length(curve, spec), rel=1e-13)


def test_reverse_and_concatenate(heis):
    spec = RiemannianSpec.for_group(heis, WeightLaw.constant(1))
    w = heis.block_vector(1, [1.0, 0.0])
    gamma, alpha = shrinking_halves(heis, 1, 1.0, [1.0], w, nodes=17)
    both = concatenate(gamma, alpha)
    assert length(both, spec) == pytest.approx(length(gamma, spec) + length(alpha, spec), rel=1e-13)
    back = reverse(gamma)
    assert length(back, spec) == pytest.approx(length(gamma, spec), rel=1e-13)
    assert back.start.allclose(gamma.end, atol=0)
    with pytest.raises(ContractError, match="do not meet"):
        concatenate(alpha, alpha)


def test_curve_grid_validation(heis):
    with pytest.raises(ContractError):
        sampled_curve(heis, [0.0, 0.0], np.zeros((2, heis.N, 2)), np.zeros((2, 1)))
    with pytest.raises(ContractError):
        horizontal_lift(heis, np.zeros((1, heis.N, 2)))


def test_lower_bound(heis, rng):
    spec = FinslerSpec.for_group(heis, 4)
    p, q = heis.random(rng), heis.random(rng)
    assert finsler_lower_bound(spec, p, q) == pytest.approx(float(spec.horizontal_norm(p.blocks - q.blocks)))
    assert finsler_lower_bound(spec, p, p) == 0.0
    with pytest.raises(ContractError):
        finsler_lower_bound(spec, p, q, C=0)


def test_export_curve_csv(tmp_path):
    g = ProductGroup.from_name("heisenberg", 2)
    path = PolyPath([np.zeros((2, 2)), np.ones((2, 2))])
    curve = horizontal_lift(g, path, times=np.linspace(0, 1, 3))
    out = tmp_path / "c.csv"
    export_curve_csv(curve, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x_1_1,x_1_2,x_2_1,x_2_2,z_1"
    assert len(lines) == 4


def test_linear_path_interpolates():
    t = np.array([0.0, 0.5, 1.0])
    v = np.arange(6.0).reshape(3, 1, 2)
    lp = LinearPath(t, v)
    assert np.allclose(lp.value(np.array([0.25])), [[[1.0, 2.0]]])
    assert np.allclose(lp.deriv(np.array([0.75])), [[[4.0, 4.0]]])
