"""Dataset container, standardization, and CSV round-trip tests."""

import numpy as np
import pytest

from nngpiu.data import Dataset, Standardization, load_csv, save_csv, standardize
from nngpiu.errors import DataSchemaError


class TestStandardization:
    def test_learned_moments(self):
        rng = np.random.default_rng(0)
        x = rng.normal(3.0, 2.0, size=(50, 2))
        y = rng.normal(-1.0, 0.5, size=(50, 1))
        transform = Standardization.from_training(x, y)
        assert np.allclose(transform.x_mean, x.mean(axis=0))
        assert np.allclose(transform.x_scale, x.std(axis=0))
        applied = transform.apply_x(x)
        assert np.allclose(applied.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(applied.std(axis=0), 1.0, atol=1e-12)

    def test_constant_column_gets_unit_scale(self):
        x = np.column_stack([np.ones(10), np.arange(10.0)])
        y = np.zeros((10, 1))
        transform = Standardization.from_training(x, y)
        assert transform.x_scale[0] == 1.0
        assert transform.y_scale[0] == 1.0
        assert np.all(np.isfinite(transform.apply_x(x)))

    def test_restore_round_trip(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(20, 1))
        y = rng.normal(5.0, 3.0, size=(20, 2))
        transform = Standardization.from_training(x, y)
        standardized = transform.apply_y(y)
        for j in range(2):
            assert np.allclose(transform.restore_y_mean(standardized[:, j], j), y[:, j])
        assert np.allclose(transform.restore_y_var(np.ones(4), 1), transform.y_scale[1] ** 2)


class TestDataset:
    def test_promotes_1d_targets(self):
        ds = Dataset(x=np.zeros((3, 2)), y=np.arange(3.0))
        assert ds.y.shape == (3, 1)
        assert ds.n == 3 and ds.input_dim == 2 and ds.n_outputs == 1

    def test_rejects_misaligned_rows(self):
        with pytest.raises(DataSchemaError, match="rows"):
            Dataset(x=np.zeros((3, 1)), y=np.zeros(4))

    def test_rejects_non_finite(self):
        with pytest.raises(DataSchemaError, match="finite"):
            Dataset(x=np.array([[0.0], [np.nan]]), y=np.zeros(2))

    def test_rejects_bad_names(self):
        with pytest.raises(DataSchemaError, match="input_names"):
            Dataset(x=np.zeros((2, 2)), y=np.zeros(2), input_names=("a",))

    def test_standardize_once(self):
        rng = np.random.default_rng(2)
        ds = Dataset(x=rng.normal(4.0, 2.0, size=(30, 1)), y=rng.normal(size=30))
        out = standardize(ds)
        assert abs(out.x.mean()) < 1e-12 and abs(out.x.std() - 1.0) < 1e-12
        assert out.standardization is not None
        with pytest.raises(ValueError, match="already"):
            standardize(out)


class TestCsv:
    def write(self, path, text):
        path.write_text(text)
        return str(path)

    def test_load_by_column_role(self, tmp_path):
        path = self.write(tmp_path / "d.csv", "a,b,out\n1,2,3\n4,5,6\n")
        ds = load_csv(path, ["a", "b"], ["out"])
        assert np.array_equal(ds.x, [[1.0, 2.0], [4.0, 5.0]])
        assert np.array_equal(ds.y, [[3.0], [6.0]])
        assert ds.input_names == ("a", "b") and ds.output_names == ("out",)

    def test_missing_column(self, tmp_path):
        path = self.write(tmp_path / "d.csv", "a,b\n1,2\n")
        with pytest.raises(DataSchemaError, match="missing columns"):
            load_csv(path, ["a"], ["c"])

    def test_bad_cell_reports_line(self, tmp_path):
        path = self.write(tmp_path / "d.csv", "a,out\n1,2\nnope,4\n")
        with pytest.raises(DataSchemaError, match="line 3"):
            load_csv(path, ["a"], ["out"])

    def test_empty_file(self, tmp_path):
        path = self.write(tmp_path / "d.csv", "")
        with pytest.raises(DataSchemaError, match="empty"):
            load_csv(path, ["a"], ["out"])

    def test_header_only(self, tmp_path):
        path = self.write(tmp_path / "d.csv", "a,out\n")
        with pytest.raises(DataSchemaError, match="no data rows"):
            load_csv(path, ["a"], ["out"])

    def test_overlapping_roles(self, tmp_path):
        path = self.write(tmp_path / "d.csv", "a,out\n1,2\n")
        with pytest.raises(DataSchemaError, match="both input and output"):
            load_csv(path, ["a"], ["a"])

    def test_save_load_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        ds = Dataset(
            x=rng.normal(size=(12, 2)),
            y=rng.normal(size=(12, 1)),
            input_names=("u", "v"),
            output_names=("w",),
        )
        path = tmp_path / "round.csv"
        save_csv(path, ds)
        back = load_csv(path, ["u", "v"], ["w"])
        assert np.array_equal(back.x, ds.x)
        assert np.array_equal(back.y, ds.y)
