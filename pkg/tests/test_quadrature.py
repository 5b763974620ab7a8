import numpy as np
import pytest

from hpcrack import quadrature as quad


class TestGaussRule:
    def test_single_point(self):
        rule = quad.gauss_rule(1)
        assert rule.points.shape == (1, 2)
        assert np.allclose(rule.points[0], [0.0, 0.0])
        assert rule.weights[0] == pytest.approx(4.0)

    def test_two_point_classic(self):
        rule = quad.gauss_rule(2)
        assert sorted(set(np.round(rule.points[:, 0], 15))) == pytest.approx(
            [-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)]
        )
        assert np.allclose(rule.weights, 1.0)

    def test_weights_sum_to_reference_measure(self):
        for n in range(1, 17):
            assert quad.gauss_rule(n).weights.sum() == pytest.approx(4.0, abs=1e-12)

    def test_monomial_x8y6(self):
        # int_{[-1,1]^2} x^8 y^6 = (2/9)(2/7)
        rule = quad.gauss_rule(5)
        val = np.sum(rule.weights * rule.points[:, 0] ** 8 * rule.points[:, 1] ** 6)
        assert val == pytest.approx((2.0 / 9.0) * (2.0 / 7.0), rel=1e-13)

    def test_exactness_up_to_design_order(self):
        for n in (1, 2, 3, 5, 8):
            rule = quad.gauss_rule(n)
            for a in range(0, 2 * n, 3):
                for b in range(0, 2 * n, 2):
                    exact_a = 0.0 if a % 2 else 2.0 / (a + 1)
                    exact_b = 0.0 if b % 2 else 2.0 / (b + 1)
                    got = np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
                    assert got == pytest.approx(exact_a * exact_b, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            quad.gauss_rule(0)
        with pytest.raises(ValueError):
            quad.gauss_rule(17)


class TestTabulate:
    def test_bilinear_center(self):
        tab = quad.tabulate_at(1, [(0.0, 0.0)])
        assert np.allclose(tab.values[0], 0.25)

    @pytest.mark.parametrize("p", [1, 2, 3, 4, 5, 6])
    def test_partition_of_unity(self, p):
        tab = quad.tabulate(p, 5)
        assert np.allclose(tab.values.sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(tab.gradients.sum(axis=1), 0.0, atol=1e-11)

    @pytest.mark.parametrize("p", [1, 2, 4, 6])
    def test_gradients_match_fd(self, p):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-0.9, 0.9, size=(5, 2))
        tab = quad.tabulate_at(p, pts)
        h = 1e-7
        for d in range(2):
            shift = np.zeros(2)
            shift[d] = h
            plus = quad.tabulate_at(p, pts + shift).values
            minus = quad.tabulate_at(p, pts - shift).values
            fd = (plus - minus) / (2 * h)
            assert np.allclose(tab.gradients[:, :, d], fd, atol=1e-8)

    def test_nodal_property(self):
        p = 3
        nodes = quad.lobatto_nodes(p)
        pts = [(x, y) for y in nodes for x in nodes]
        tab = quad.tabulate_at(p, pts)
        assert np.allclose(tab.values, np.eye((p + 1) ** 2), atol=1e-12)


class TestMapToPhysical:
    def test_identity_cell(self):
        # reference-sized cell: hx = hy = 2 centered anywhere
        rule = quad.gauss_rule(2)
        pts, scale, meas = quad.map_to_physical((-1.0, -1.0, 2.0, 2.0), rule)
        assert np.allclose(pts, rule.points)
        assert np.allclose(scale, 1.0)
        assert meas.sum() == pytest.approx(4.0)

    def test_half_cell_measure(self):
        rule = quad.gauss_rule(1)
        _, _, meas = quad.map_to_physical((0.0, 0.0, 0.5, 0.5), rule)
        # (0.5*0.5)/4 per unit weight
        assert meas[0] / rule.weights[0] == pytest.approx(0.0625)

    def test_cell_area(self):
        rule = quad.gauss_rule(3)
        for box in ((0.0, 0.0, 0.25, 0.125), (0.5, 0.75, 0.03125, 0.0625)):
            _, _, meas = quad.map_to_physical(box, rule)
            assert meas.sum() == pytest.approx(box[2] * box[3], abs=1e-14)

    def test_degenerate_cell(self):
        with pytest.raises(ValueError):
            quad.map_to_physical((0.0, 0.0, 0.0, 0.5), quad.gauss_rule(1))
