import json

import numpy as np
import pytest

from nngpiu import benchmarks as bm
from nngpiu.data import save_csv, Dataset
from nngpiu.errors import ConfigurationError, DataSchemaError


def linear_cfg(**overrides):
    kwargs = dict(
        target=bm.zigzag(),
        n_train=12,
        design="equispaced",
        sigma_u_sq=0.0,
        sigma_eps_sq=0.0,
        models=(("Linear", {"model": "linear"}),),
        replications=1,
        eval_grid_size=64,
        master_seed=0,
    )
    kwargs.update(overrides)
    return bm.ExperimentConfig(**kwargs)


class TestTargets:
    def test_zigzag_values(self):
        f = bm.zigzag()
        x = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0])
        expected = np.array([0.0, 0.5, 1.0, 0.5, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(bm.eval_target(f, x), expected, atol=1e-15)

    def test_zigzag_range_and_period(self):
        f = bm.zigzag()
        x = np.linspace(0.0, 2.0, 501)
        y = bm.eval_target(f, x)
        assert y.min() >= 0.0 and y.max() <= 1.0
        np.testing.assert_allclose(bm.eval_target(f, x + 2.0), y, atol=1e-12)

    def test_near_square_values(self):
        f = bm.near_square_wave()
        assert bm.eval_target(f, np.array([0.0]))[0] == 0.0
        peak = bm.eval_target(f, np.array([np.pi / 2.0]))[0]
        assert abs(peak - np.tanh(10.0)) < 1e-15
        assert peak > 0.99999999
        trough = bm.eval_target(f, np.array([3.0 * np.pi / 2.0]))[0]
        assert abs(trough + np.tanh(10.0)) < 1e-12

    def test_out_of_domain_clamped_with_warning(self):
        f = bm.zigzag()
        with pytest.warns(UserWarning, match="clamped"):
            y = bm.eval_target(f, np.array([-0.5, 4.5]))
        np.testing.assert_allclose(y, [0.0, 0.0], atol=1e-15)

    def test_custom_target(self):
        f = bm.TargetFunction(name="custom", domain=(0.0, 1.0), fn=lambda x: 2.0 * x)
        np.testing.assert_allclose(bm.eval_target(f, np.array([0.25])), [0.5])

    def test_bad_targets_rejected(self):
        with pytest.raises(ValueError, match="unknown target"):
            bm.TargetFunction(name="sine", domain=(0.0, 1.0))
        with pytest.raises(ValueError, match="callable"):
            bm.TargetFunction(name="custom", domain=(0.0, 1.0))
        with pytest.raises(ValueError, match="interval"):
            bm.TargetFunction(name="zigzag", domain=(1.0, 1.0))


class TestTotalDeformation:
    def test_examples(self):
        assert bm.total_deformation(0.0, 0.0) == 0.0
        assert bm.total_deformation(3.0, 4.0) == 5.0

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        dy, dz = rng.normal(size=91), rng.normal(size=91)
        loop = np.array([bm.total_deformation(a, b) for a, b in zip(dy, dz)])
        np.testing.assert_array_equal(bm.total_deformation(dy, dz), loop)


class TestGenerateData:
    def test_replications_differ_and_repeat(self):
        cfg = linear_cfg(sigma_u_sq=0.1, sigma_eps_sq=0.01, replications=3)
        d0 = bm.generate_data(cfg, 0)
        d0_again = bm.generate_data(cfg, 0)
        d1 = bm.generate_data(cfg, 1)
        np.testing.assert_array_equal(d0.y, d0_again.y)
        assert not np.array_equal(d0.y, d1.y)

    def test_nominal_design_stored_noise_free(self):
        cfg = linear_cfg(sigma_u_sq=0.5, sigma_eps_sq=0.3, n_train=20)
        data = bm.generate_data(cfg, 0)
        np.testing.assert_allclose(data.x[:, 0], np.linspace(0.0, 4.0, 20))

    def test_zero_noise_reproduces_target(self):
        cfg = linear_cfg(n_train=20)
        data = bm.generate_data(cfg, 0)
        np.testing.assert_allclose(
            data.y[:, 0], bm.eval_target(cfg.target, data.x[:, 0]), atol=1e-15
        )

    def test_uniform_design_sorted_in_domain(self):
        cfg = linear_cfg(design="uniform", n_train=15)
        x = bm.generate_data(cfg, 0).x[:, 0]
        assert np.all(np.diff(x) >= 0)
        assert x.min() >= 0.0 and x.max() <= 4.0

    def test_model_seed_distinct(self):
        seeds = {bm.model_seed(0, r, j) for r in range(3) for j in range(4)}
        assert len(seeds) == 12


class TestRunExperiment:
    def test_linear_model_on_linear_target(self):
        target = bm.TargetFunction(name="custom", domain=(0.0, 1.0), fn=lambda x: 3.0 * x + 1.0)
        cfg = linear_cfg(target=target)
        report = bm.run_experiment(cfg)
        assert report.metric == "mse"
        assert report.mean["Linear"] < 1e-16
        assert report.failures["Linear"] == ()

    def test_failure_isolated_per_model(self):
        cfg = linear_cfg(
            models=(
                ("Linear", {"model": "linear"}),
                ("Broken", {"model": "linear", "trend": False}),  # rejected combination
            ),
            replications=2,
        )
        report = bm.run_experiment(cfg)
        assert report.mean["Linear"] is not None
        assert report.mean["Broken"] is None
        assert len(report.failures["Broken"]) == 2
        assert "ConfigurationError" in report.failures["Broken"][0][1]

    def test_duplicate_labels_rejected(self):
        cfg = linear_cfg(models=(("A", {"model": "linear"}), ("A", {"model": "linear"})))
        with pytest.raises(ConfigurationError, match="unique"):
            bm.run_experiment(cfg)

    def test_adjusted_kind_inherits_protocol_noise(self):
        params = bm._inject_protocol(
            "NNGPIU", {"model": "nngpiu"}, linear_cfg(sigma_u_sq=0.07)
        )
        assert params["sigma_u_sq"] == 0.07
        explicit = bm._inject_protocol(
            "NNGPIU", {"model": "nngpiu", "sigma_u_sq": 0.2}, linear_cfg(sigma_u_sq=0.07)
        )
        assert explicit["sigma_u_sq"] == 0.2
        plain = bm._inject_protocol("NNGP", {"model": "nngp"}, linear_cfg(sigma_u_sq=0.07))
        assert "sigma_u_sq" not in plain

    def test_report_reproducible_bytes(self, tmp_path):
        cfg = linear_cfg(
            models=(
                ("Linear", {"model": "linear"}),
                ("GP", {"model": "shallow_gp", "n_restarts": 2, "maxiter": 10}),
            ),
            sigma_u_sq=0.05,
            sigma_eps_sq=0.01,
            replications=2,
        )
        blobs = []
        for _ in range(2):
            report = bm.run_experiment(cfg)
            blobs.append(json.dumps(bm.report_to_dict(report), sort_keys=True))
        assert blobs[0] == blobs[1]

    def test_grid_refinement_stable(self):
        # the grid MSE is a quadrature; doubling the resolution moves it <1%
        cfg = linear_cfg(
            models=(("GP", {"model": "shallow_gp", "n_restarts": 2, "maxiter": 10}),),
            sigma_eps_sq=0.01,
            n_train=10,
            eval_grid_size=1000,
        )
        coarse = bm.run_experiment(cfg).mean["GP"]
        fine = bm.run_experiment(linear_cfg(
            models=cfg.models, sigma_eps_sq=0.01, n_train=10, eval_grid_size=2000
        )).mean["GP"]
        assert abs(fine - coarse) / coarse < 0.01

    def test_curve_store_populated(self):
        store = {}
        cfg = linear_cfg(eval_grid_size=50)
        bm.run_experiment(cfg, curve_store=store)
        assert store["_grid"].shape == (50,)
        mean, var = store["Linear"]
        assert mean.shape == (50,) and var.shape == (50,)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="design"):
            linear_cfg(design="latin")
        with pytest.raises(ValueError, match="n_train"):
            linear_cfg(n_train=1)
        with pytest.raises(ValueError, match="replications"):
            linear_cfg(replications=0)
        with pytest.raises(ValueError, match="nonnegative"):
            linear_cfg(sigma_u_sq=-0.1)
        with pytest.raises(ValueError, match="at least one model"):
            linear_cfg(models=())


def write_table(path, x, y, input_names, output_names):
    save_csv(
        path,
        Dataset(x=x, y=y, input_names=tuple(input_names), output_names=tuple(output_names)),
    )


class TestRunTabular:
    def make_tables(self, tmp_path, n=16):
        rng = np.random.default_rng(5)
        x = rng.uniform(-1.0, 1.0, size=(n, 2))
        y = np.column_stack([x @ [1.0, -2.0] + 0.5, x @ [0.5, 0.5]])
        train, test = tmp_path / "train.csv", tmp_path / "test.csv"
        write_table(train, x, y, ["a", "b"], ["dy", "dz"])
        write_table(test, x, y, ["a", "b"], ["dy", "dz"])
        return train, test

    def test_linear_interpolates_linear_table(self, tmp_path):
        train, test = self.make_tables(tmp_path)
        report = bm.run_tabular(
            train, test, ["a", "b"], ["dy", "dz"], (("Linear", {"model": "linear"}),)
        )
        assert report.metric == "mae"
        assert all(v < 1e-10 for v in report.values["Linear"])

    def test_derived_output_appended(self, tmp_path):
        train, test = self.make_tables(tmp_path)
        report = bm.run_tabular(
            train,
            test,
            ["a", "b"],
            ["dy", "dz"],
            (("Linear", {"model": "linear"}),),
            derived_outputs={"total": ("dy", "dz")},
        )
        assert report.config_echo["output_columns"] == ["dy", "dz", "total"]
        assert len(report.values["Linear"]) == 3
        assert report.values["Linear"][2] < 1e-10

    def test_derived_output_unknown_column(self, tmp_path):
        train, test = self.make_tables(tmp_path)
        with pytest.raises(ConfigurationError, match="derived output"):
            bm.run_tabular(
                train,
                test,
                ["a", "b"],
                ["dy", "dz"],
                (("Linear", {"model": "linear"}),),
                derived_outputs={"total": ("dy", "nope")},
            )

    def test_schema_mismatch_rejected(self, tmp_path):
        train, _ = self.make_tables(tmp_path)
        other = tmp_path / "other.csv"
        rng = np.random.default_rng(0)
        write_table(other, rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), ["a", "c"], ["dy", "dz"])
        with pytest.raises(DataSchemaError):
            bm.run_tabular(train, other, ["a", "b"], ["dy", "dz"], (("L", {"model": "linear"}),))

    def test_failure_isolated(self, tmp_path):
        train, test = self.make_tables(tmp_path)
        report = bm.run_tabular(
            train,
            test,
            ["a", "b"],
            ["dy", "dz"],
            (
                ("Linear", {"model": "linear"}),
                ("Broken", {"model": "nngpiu"}),  # adjusted kind without noise spec
            ),
        )
        assert report.mean["Linear"] is not None
        assert report.mean["Broken"] is None
        assert report.failures["Broken"]


class TestWriters:
    def test_metrics_csv(self, tmp_path):
        cfg = linear_cfg(replications=2)
        report = bm.run_experiment(cfg)
        path = tmp_path / "metrics.csv"
        bm.write_metrics_csv(report, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "replication,Linear"
        assert len(lines) == 3

    def test_curves_csv_roundtrip(self, tmp_path):
        store = {}
        bm.run_experiment(linear_cfg(eval_grid_size=20), curve_store=store)
        path = tmp_path / "curves.csv"
        bm.write_curves_csv(store, path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "x,truth,Linear_mean,Linear_var"
        assert len(rows) == 21
        back = np.loadtxt(path, delimiter=",", skiprows=1)
        np.testing.assert_array_equal(back[:, 0], store["_grid"])
        np.testing.assert_array_equal(back[:, 2], store["Linear"][0])
