import numpy as np
import pytest

from hmds.core import (
    DistanceTensor,
    Hyperparams,
    ModelState,
    normalize_tensor,
    pair_indices,
    read_tensor,
    symmetrize,
    upper_to_square,
    validate_tensor,
    write_tensor,
)


def make_tensor(n=3, m=2, seed=0):
    rng = np.random.default_rng(seed)
    v = np.zeros((n, n, m))
    iu, ju = pair_indices(n)
    vals = rng.uniform(0.1, 1.0, (len(iu), m))
    v[iu, ju, :] = vals
    v[ju, iu, :] = vals
    return DistanceTensor(v)


class TestValidate:
    def test_clean_tensor_has_no_violations(self):
        assert validate_tensor(make_tensor()) == []

    def test_zero_off_diagonal_reported(self):
        t = make_tensor()
        v = np.array(t.values)
        v[0, 1, 0] = v[1, 0, 0] = 0.0
        problems = validate_tensor(DistanceTensor(v))
        assert any("non-positive off-diagonal at (0,1,0)" in p for p in problems)

    def test_asymmetry_reported(self):
        t = make_tensor()
        v = np.array(t.values)
        v[0, 1, 0] = v[1, 0, 0] + 0.25
        problems = validate_tensor(DistanceTensor(v))
        assert any("asymmetry at (0,1,0)" in p for p in problems)

    def test_nonzero_diagonal_reported(self):
        v = np.array(make_tensor().values)
        v[2, 2, 1] = 0.5
        problems = validate_tensor(DistanceTensor(v))
        assert any("nonzero diagonal at (2,2,1)" in p for p in problems)

    def test_non_finite_reported(self):
        v = np.array(make_tensor().values)
        v[0, 1, 0] = np.nan
        assert any("non-finite" in p for p in validate_tensor(DistanceTensor(v)))


class TestNormalize:
    def test_scales_by_max(self):
        t = make_tensor()
        v = np.array(t.values) * (2.0 / t.values.max())
        out = normalize_tensor(DistanceTensor(v))
        np.testing.assert_allclose(out.values, v / 2.0)

    def test_max_one_unchanged_except_floor(self):
        t = make_tensor()
        v = np.array(t.values) / t.values.max()
        out = normalize_tensor(DistanceTensor(v), floor=1e-6)
        np.testing.assert_array_equal(out.values, v)

    def test_zero_pair_floored(self):
        v = np.array(make_tensor().values)
        v[0, 2, :] = v[2, 0, :] = 0.0
        out = normalize_tensor(DistanceTensor(v), floor=1e-6)
        assert np.all(out.values[0, 2, :] == 1e-6)
        assert np.all(out.values.diagonal() == 0.0)

    def test_all_zero_tensor_rejected(self):
        with pytest.raises(ValueError, match="degenerate tensor"):
            normalize_tensor(DistanceTensor(np.zeros((3, 3, 2))))

    def test_idempotent(self):
        t = make_tensor(seed=5)
        once = normalize_tensor(t, floor=1e-4)
        twice = normalize_tensor(once, floor=1e-4)
        np.testing.assert_array_equal(once.values, twice.values)

    def test_floor_must_be_positive(self):
        with pytest.raises(ValueError):
            normalize_tensor(make_tensor(), floor=0.0)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        t = make_tensor(n=3, m=2, seed=3)
        path = tmp_path / "t.csv"
        write_tensor(t, path)
        back = read_tensor(path)
        assert back == t
        assert np.array_equal(back.values, t.values)

    def test_round_trip_awkward_floats(self, tmp_path):
        v = np.zeros((2, 2, 1))
        v[0, 1, 0] = v[1, 0, 0] = 1.0 / 3.0
        t = DistanceTensor(v)
        write_tensor(t, tmp_path / "t.csv")
        assert read_tensor(tmp_path / "t.csv") == t

    def test_index_out_of_range(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("i,j,p,y\n5,1,0,0.3\n")
        with pytest.raises(ValueError, match="line 2.*out of range"):
            read_tensor(path, n_entities=3, n_replicates=1)

    def test_reader_mirrors_upper_rows(self, tmp_path):
        # j > i rows only must reconstruct the full symmetric tensor
        path = tmp_path / "t.csv"
        path.write_text(
            "i,j,p,y\n0,1,0,0.5\n0,2,0,0.25\n1,2,0,0.75\n"
        )
        t = read_tensor(path)
        expected = np.zeros((3, 3, 1))
        for (i, j), y in [((0, 1), 0.5), ((0, 2), 0.25), ((1, 2), 0.75)]:
            expected[i, j, 0] = expected[j, i, 0] = y
        np.testing.assert_array_equal(t.values, expected)

    def test_duplicate_row_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("i,j,p,y\n0,1,0,0.5\n0,1,0,0.6\n")
        with pytest.raises(ValueError, match="line 3.*duplicate"):
            read_tensor(path)

    def test_malformed_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("i,j,p,y\n0,1,zero,0.5\n")
        with pytest.raises(ValueError, match="line 2"):
            read_tensor(path)

    def test_lower_triangle_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("i,j,p,y\n1,0,0,0.5\n")
        with pytest.raises(ValueError, match="line 2.*j > i"):
            read_tensor(path)

    def test_missing_entry_rejected(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("i,j,p,y\n0,1,0,0.5\n0,2,0,0.25\n")
        with pytest.raises(ValueError, match="missing entry"):
            read_tensor(path)


class TestTypes:
    def test_tensor_is_immutable(self):
        t = make_tensor()
        with pytest.raises(ValueError):
            t.values[0, 1, 0] = 2.0

    def test_model_state_shape_checks(self):
        with pytest.raises(ValueError, match="delta"):
            ModelState(X=np.zeros((3, 2)), delta=np.ones(2), tau=np.ones(2), psi=1, gamma_shrink=1)

    def test_model_state_validate(self):
        s = ModelState(
            X=np.zeros((3, 2)), delta=np.array([1.0, 1.0, -1.0]), tau=np.ones(2),
            psi=1.0, gamma_shrink=1.0,
        )
        assert s.validate() == ["delta has non-positive entries"]

    def test_hyperparams_positive(self):
        with pytest.raises(ValueError):
            Hyperparams(lambda_diag=np.array([1.0, -1.0]))
        with pytest.raises(ValueError):
            Hyperparams(lambda_diag=np.ones(2), alpha=0.0)

    def test_upper_square_helpers(self):
        vec = np.array([1.0, 2.0, 3.0])
        mat = upper_to_square(vec, 3)
        assert mat[0, 1] == 1.0 and mat[0, 2] == 2.0 and mat[1, 2] == 3.0
        full = symmetrize(mat)
        np.testing.assert_array_equal(full, full.T)
