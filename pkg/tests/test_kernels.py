"""Kernel evaluations against hand-derived values and scalar-path oracles."""

import math

import numpy as np
import pytest

from nngpiu import kernels
from nngpiu.errors import NumericError
from nngpiu.kernels import (
    KernelSpec,
    arccos_layer,
    arcsin_layer,
    base_cov,
    composite_cov,
    cov,
    diag_values,
    gram,
    shallow_cov,
)


def spec(family="arccosine", d=1, **kw):
    return KernelSpec(family=family, input_dim=d, **kw)


def random_spec(rng, families=kernels.FAMILIES, max_dim=4):
    family = families[rng.integers(len(families))]
    return KernelSpec(
        family=family,
        input_dim=int(rng.integers(1, max_dim + 1)),
        depth=int(rng.integers(1, 4)),
        sigma_b_sq=float(rng.uniform(0.0, 2.0)),
        sigma_w_sq=float(rng.uniform(0.1, 3.0)),
        length_scale=float(rng.uniform(0.2, 3.0)),
        signal_var=float(rng.uniform(0.1, 3.0)),
    )


class TestSpecValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            KernelSpec(family="arccosine", input_dim=1, sigma_w_sq=0.0)
        with pytest.raises(ValueError):
            KernelSpec(family="arccosine", input_dim=1, sigma_b_sq=-0.1)
        with pytest.raises(ValueError):
            KernelSpec(family="rbf", input_dim=1, length_scale=0.0)
        with pytest.raises(ValueError):
            KernelSpec(family="rbf", input_dim=1, signal_var=-1.0)
        with pytest.raises(ValueError):
            KernelSpec(family="nope", input_dim=1)
        with pytest.raises(ValueError):
            KernelSpec(family="rbf", input_dim=0)
        with pytest.raises(ValueError):
            KernelSpec(family="arcsine", input_dim=1, depth=-1)


class TestBaseCov:
    def test_zero_inputs_leave_bias(self):
        assert base_cov([0.0], [0.0], spec()) == 1.0

    def test_unit_example(self):
        assert base_cov([1.0], [2.0], spec()) == 3.0

    def test_orthogonal_no_bias(self):
        s = spec(d=2, sigma_b_sq=0.0, sigma_w_sq=2.0)
        assert base_cov([1.0, 1.0], [1.0, -1.0], s) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            base_cov([1.0, 2.0], [1.0], spec())


class TestArccosLayer:
    def test_equal_covariances(self):
        # theta = 0 collapses the map to sb + sw*c/2
        assert arccos_layer(1.0, 1.0, 1.0, spec()) == pytest.approx(1.5, abs=1e-12)

    def test_orthogonal(self):
        s = spec(sigma_b_sq=0.0)
        assert arccos_layer(1.0, 1.0, 0.0, s) == pytest.approx(
            0.15915494309189535, abs=1e-12
        )

    def test_scaled(self):
        s = spec(sigma_b_sq=0.0, sigma_w_sq=2.0)
        assert arccos_layer(4.0, 4.0, 4.0, s) == pytest.approx(4.0, abs=1e-12)

    def test_nonpositive_diagonal_raises(self):
        with pytest.raises(NumericError):
            arccos_layer(0.0, 1.0, 0.0, spec())


class TestArcsinLayer:
    def test_equal_covariances(self):
        # hand evaluation: 1 + (2/pi) asin(2/3)
        got = arcsin_layer(1.0, 1.0, 1.0, spec("arcsine"))
        assert got == pytest.approx(1.46455905439754, abs=1e-12)

    def test_zero_offdiagonal_leaves_bias(self):
        assert arcsin_layer(0.7, 0.3, 0.0, spec("arcsine")) == pytest.approx(1.0, abs=1e-15)

    def test_half(self):
        s = spec("arcsine", sigma_b_sq=0.0)
        # 2*0.5/(1+2*0.5) = 0.5, asin(1/2) = pi/6
        assert arcsin_layer(0.5, 0.5, 0.5, s) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_nonpositive_denominator_raises(self):
        with pytest.raises(NumericError):
            arcsin_layer(-0.6, 1.0, 0.0, spec("arcsine"))


class TestCompositeCov:
    def test_arccos_diagonal_recursion(self):
        # repeated theta=0 closed form: c0=1, c1=1.5, c2=1.75
        s = spec("arccosine", depth=2)
        assert composite_cov([0.0], [0.0], s) == pytest.approx(1.75, abs=1e-12)
        assert composite_cov([0.0], [0.0], s.with_params(depth=1)) == pytest.approx(1.5)

    def test_depth_one_is_single_layer_call(self):
        rng = np.random.default_rng(0)
        for family in kernels.COMPOSITE_FAMILIES:
            s = spec(family, d=2, depth=1, sigma_b_sq=0.5, sigma_w_sq=1.3)
            layer = arccos_layer if family == "arccosine" else arcsin_layer
            for _ in range(10):
                x, x2 = rng.normal(size=2), rng.normal(size=2)
                expected = layer(
                    base_cov(x, x, s), base_cov(x2, x2, s), base_cov(x, x2, s), s
                )
                assert composite_cov(x, x2, s) == pytest.approx(expected, abs=1e-14)

    def test_arcsine_depth_one_at_origin(self):
        s = spec("arcsine", depth=1)
        assert composite_cov([0.0], [0.0], s) == pytest.approx(1.46455905439754, abs=1e-12)

    def test_requires_composite_family(self):
        with pytest.raises(ValueError):
            composite_cov([0.0], [0.0], spec("rbf"))
        with pytest.raises(ValueError):
            composite_cov([0.0], [0.0], spec("arccosine", depth=0))


class TestShallowCov:
    def test_zero_distance_is_signal_var(self):
        s = spec("rbf", signal_var=2.3)
        assert shallow_cov([1.5], [1.5], s) == pytest.approx(2.3)

    def test_rbf_unit_distance(self):
        assert shallow_cov([0.0], [1.0], spec("rbf")) == pytest.approx(
            0.6065306597126334, abs=1e-15
        )

    def test_matern_half(self):
        s = spec("matern12", length_scale=2.0, signal_var=2.0)
        assert shallow_cov([0.0], [2.0], s) == pytest.approx(
            0.7357588823428847, abs=1e-15
        )


class TestGram:
    def test_single_point(self):
        s = spec("arccosine", depth=2)
        g = gram(np.array([[0.5]]), s)
        assert g.shape == (1, 1)
        assert g.values[0, 0] == pytest.approx(composite_cov([0.5], [0.5], s), abs=1e-12)

    def test_matches_scalar_path(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            s = random_spec(rng)
            x = rng.normal(size=(6, s.input_dim))
            g = gram(x, s)
            for i in range(6):
                for j in range(6):
                    assert g.values[i, j] == pytest.approx(
                        cov(x[i], x[j], s), abs=1e-12
                    ), (s, i, j)

    def test_cross_matches_scalar_path(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            s = random_spec(rng)
            x = rng.normal(size=(4, s.input_dim))
            x2 = rng.normal(size=(3, s.input_dim))
            k = gram(x, s, x2)
            assert k.shape == (4, 3)
            for i in range(4):
                for j in range(3):
                    assert k[i, j] == pytest.approx(cov(x[i], x2[j], s), abs=1e-12)

    def test_duplicate_rows_give_duplicate_entries(self):
        s = spec("arcsine", d=2, depth=2)
        x = np.array([[0.3, -1.0], [0.5, 0.2], [0.3, -1.0]])
        g = gram(x, s).values
        np.testing.assert_allclose(g[0], g[2], rtol=0, atol=0)
        np.testing.assert_allclose(g[:, 0], g[:, 2], rtol=0, atol=0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gram(np.zeros((3, 2)), spec("rbf", d=1))


class TestProperties:
    """Randomized invariant sweeps; the acceptance suite reruns these at n=1000."""

    N_CASES = 200

    def test_symmetry(self):
        rng = np.random.default_rng(10)
        for _ in range(self.N_CASES):
            s = random_spec(rng)
            x, x2 = rng.normal(size=s.input_dim), rng.normal(size=s.input_dim)
            assert cov(x, x2, s) == pytest.approx(cov(x2, x, s), abs=1e-12)

    def test_psd(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            s = random_spec(rng)
            n = int(rng.integers(2, 31))
            x = rng.normal(size=(n, s.input_dim)) * rng.uniform(0.5, 2.0)
            eig = np.linalg.eigvalsh(gram(x, s).values)
            assert eig.min() >= -1e-8 * max(eig.max(), 1e-300)

    def test_bias_floor(self):
        rng = np.random.default_rng(12)
        for _ in range(self.N_CASES):
            s = random_spec(rng, families=kernels.COMPOSITE_FAMILIES)
            x = rng.normal(size=(1, s.input_dim))
            c = s.sigma_b_sq + s.sigma_w_sq / s.input_dim * float(x[0] @ x[0])
            assert c >= s.sigma_b_sq
            for depth in range(1, s.depth + 1):
                c = diag_values(x, s.with_params(depth=depth))[0]
                assert c >= s.sigma_b_sq - 1e-15

    def test_diagonal_shortcut_equals_general_path(self):
        rng = np.random.default_rng(13)
        for _ in range(self.N_CASES):
            s = random_spec(rng, families=kernels.COMPOSITE_FAMILIES)
            x = rng.normal(size=(1, s.input_dim))
            shortcut = diag_values(x, s)[0]
            general = composite_cov(x[0], np.array(x[0]), s)
            assert shortcut == pytest.approx(general, abs=1e-12)

    def test_clamp_safety(self):
        rng = np.random.default_rng(14)
        for _ in range(self.N_CASES):
            s = random_spec(rng)
            scale = 10.0 ** rng.integers(-3, 4)
            x = rng.normal(size=s.input_dim) * scale
            x2 = x + rng.normal(size=s.input_dim) * 1e-14
            assert math.isfinite(cov(x, x2, s))
            assert math.isfinite(cov(x, x, s))

    def test_gram_jitter_recorded(self):
        rng = np.random.default_rng(15)
        s = spec("arcsine", depth=3)
        x = np.repeat(rng.normal(size=(4, 1)), 3, axis=0)  # duplicates force singularity
        g = gram(x, s)
        assert g.jitter_applied >= 0.0
        np.linalg.cholesky(g.regularized())
