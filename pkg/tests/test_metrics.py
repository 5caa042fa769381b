import math

import numpy as np
import pytest

from hmds.core import validate_tensor
from hmds.metrics import CurveSet, build_tensor, hellinger


def random_curves(rng, shape):
    v = rng.gamma(2.0, 1.0, shape)
    return v / v.sum(axis=-1, keepdims=True)


class TestHellinger:
    def test_identity(self):
        p = np.array([0.2, 0.3, 0.5])
        assert hellinger(p, p) == 0.0

    def test_disjoint_support_attains_one(self):
        assert hellinger([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-15)

    def test_known_value(self):
        # direct evaluation: sqrt(((sqrt(.5)-sqrt(.25))^2 + (sqrt(.5)-sqrt(.75))^2)/2)
        expected = math.sqrt(
            ((math.sqrt(0.5) - math.sqrt(0.25)) ** 2 + (math.sqrt(0.5) - math.sqrt(0.75)) ** 2) / 2.0
        )
        got = hellinger([0.5, 0.5], [0.25, 0.75])
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(0.18459, abs=1e-5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            hellinger([0.5, 0.5], [1.0])

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            p, q = random_curves(rng, (2, 16))
            d = hellinger(p, q)
            assert d == hellinger(q, p)
            assert -1e-12 <= d <= 1.0 + 1e-12

    def test_triangle_inequality(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            p, q, r = random_curves(rng, (3, 12))
            assert hellinger(p, r) <= hellinger(p, q) + hellinger(q, r) + 1e-12


class TestBuildTensor:
    def test_identical_curves_floored(self):
        base = random_curves(np.random.default_rng(2), (8,))
        cs = CurveSet(np.tile(base, (3, 2, 1)))
        with pytest.raises(ValueError, match="degenerate"):
            build_tensor(cs)  # all distances zero: nothing to normalize against

    def test_one_identical_pair_floored(self):
        rng = np.random.default_rng(3)
        curves = random_curves(rng, (3, 2, 8))
        curves[1] = curves[0]  # entities 0 and 1 identical on every replicate
        t = build_tensor(CurveSet(curves), floor=1e-6)
        assert np.all(t.values[0, 1, :] == 1e-6)

    def test_two_entities_single_replicate_normalizes_to_one(self):
        rng = np.random.default_rng(4)
        cs = CurveSet(random_curves(rng, (2, 1, 16)))
        t = build_tensor(cs)
        assert t.values[0, 1, 0] == pytest.approx(1.0)

    def test_matches_hand_computed_matrix(self):
        rng = np.random.default_rng(5)
        curves = random_curves(rng, (3, 2, 10))
        t = build_tensor(CurveSet(curves), floor=1e-9)
        raw = np.zeros((3, 3, 2))
        for p in range(2):
            for i in range(3):
                for j in range(3):
                    if i != j:
                        diff = np.sqrt(curves[i, p]) - np.sqrt(curves[j, p])
                        raw[i, j, p] = math.sqrt(float(np.sum(diff * diff)) / 2.0)
        raw /= raw.max()
        np.testing.assert_allclose(t.values, raw, rtol=1e-12)

    def test_output_validates(self):
        rng = np.random.default_rng(6)
        t = build_tensor(CurveSet(random_curves(rng, (4, 3, 12))))
        assert validate_tensor(t) == []

    def test_entity_permutation_consistency(self):
        rng = np.random.default_rng(7)
        curves = random_curves(rng, (4, 2, 12))
        perm = np.array([2, 0, 3, 1])
        t = build_tensor(CurveSet(curves))
        tp = build_tensor(CurveSet(curves[perm]))
        np.testing.assert_allclose(tp.values, t.values[np.ix_(perm, perm)], rtol=1e-12)
