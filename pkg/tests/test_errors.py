"""Tests for bounded measurement errors and the quantizer."""
import sys

sys.path.insert(0, 'src')

import math

import numpy as np
import pytest

from errors import ErrorMode, ErrorModel, draw_error, draw_errors, pair_index, quantize
from exceptions import InputError


class TestErrorModel:
    """Error-model configuration."""

    def test_parse_aliases(self):
        """Test CLI short names and long names."""
        assert ErrorMode.parse("shared") is ErrorMode.SHARED
        assert ErrorMode.parse("shared_per_source") is ErrorMode.SHARED
        assert ErrorMode.parse("Quantizer") is ErrorMode.QUANTIZER
        assert ErrorMode.parse("none") is ErrorMode.NONE

    def test_parse_unknown(self):
        """Test an unknown mode is rejected."""
        with pytest.raises(InputError):
            ErrorMode.parse("gaussian")

    def test_negative_epsilon(self):
        """Test a negative bound is rejected."""
        with pytest.raises(InputError):
            ErrorModel(ErrorMode.BALL, -0.1)

    def test_silent(self):
        """Test mode none and eps 0 are both silent."""
        assert ErrorModel(ErrorMode.NONE, 1.0).is_silent
        assert ErrorModel(ErrorMode.BALL, 0.0).is_silent
        assert not ErrorModel(ErrorMode.BALL, 0.1).is_silent


class TestDrawError:
    """Keyed error draws."""

    def test_zero_bound(self):
        """Test eps = 0 gives the zero vector."""
        e = draw_error(ErrorModel(ErrorMode.BALL, 0.0, seed=3), 0, 1, 5, 0, 4)
        assert e.tolist() == [0.0] * 4

    def test_mode_none(self):
        """Test mode none gives exactly zero."""
        e = draw_error(ErrorModel(ErrorMode.NONE, 5.0), 0, 1, 0, 0, 3)
        assert not np.any(e)

    def test_ball_bound(self):
        """Test 1000 ball draws stay inside the eps-ball."""
        model = ErrorModel(ErrorMode.BALL, 0.1, seed=1)
        norms = [np.linalg.norm(draw_error(model, 0, 1, k, 0, 10)) for k in range(1000)]
        assert max(norms) <= 0.1 + 1e-12
        assert min(norms) < 0.05

    def test_sphere_magnitude(self):
        """Test sphere draws have norm eps."""
        model = ErrorModel(ErrorMode.SPHERE, 0.7, seed=1)
        for k in range(50):
            assert np.linalg.norm(draw_error(model, 2, 0, k, 1, 6)) == pytest.approx(0.7, abs=1e-12)

    def test_shared_independent_of_receiver(self):
        """Test shared errors depend only on the source."""
        model = ErrorModel(ErrorMode.SHARED, 0.5, seed=4)
        a = draw_error(model, 1, 3, 5, 0, 8)
        b = draw_error(model, 2, 3, 5, 0, 8)
        assert np.array_equal(a, b)

    def test_ball_depends_on_receiver(self):
        """Test per-pair errors differ between receivers."""
        model = ErrorModel(ErrorMode.BALL, 0.5, seed=4)
        assert not np.array_equal(draw_error(model, 1, 3, 5, 0, 8), draw_error(model, 2, 3, 5, 0, 8))

    def test_deterministic(self):
        """Test equal keys give bitwise-equal vectors and distinct k differ."""
        model = ErrorModel(ErrorMode.BALL, 1.0, seed=9)
        assert np.array_equal(draw_error(model, 0, 1, 7, 2, 5), draw_error(model, 0, 1, 7, 2, 5))
        assert not np.array_equal(draw_error(model, 0, 1, 7, 2, 5), draw_error(model, 0, 1, 8, 2, 5))
        assert not np.array_equal(draw_error(model, 0, 1, 7, 2, 5), draw_error(model, 0, 1, 7, 3, 5))

    def test_bound_all_modes(self, rng):
        """Test the norm bound for every mode over many keys."""
        value = rng.standard_normal(6)
        for mode in ErrorMode:
            model = ErrorModel(mode, 0.3, seed=2)
            for k in range(500):
                e = draw_error(model, 0, 1, k, k % 7, 6, value=value * (k + 1))
                assert np.linalg.norm(e) <= 0.3 + 1e-12

    def test_same_peer(self):
        """Test receiver == source is rejected."""
        with pytest.raises(InputError):
            draw_error(ErrorModel(ErrorMode.BALL, 0.1), 2, 2, 0, 0, 3)

    def test_negative_iteration(self):
        """Test k < 0 is rejected."""
        with pytest.raises(InputError):
            draw_error(ErrorModel(ErrorMode.BALL, 0.1), 0, 1, -1, 0, 3)

    def test_quantizer_needs_value(self):
        """Test quantizer errors are quantize(v) - v and need v."""
        model = ErrorModel(ErrorMode.QUANTIZER, 0.1)
        v = np.array([0.25])
        assert draw_error(model, 0, 1, 0, 0, 1, value=v).tolist() == pytest.approx([-0.05])
        with pytest.raises(InputError):
            draw_error(model, 0, 1, 0, 0, 1)


class TestDrawErrors:
    """The vectorized (receiver, source) block."""

    @pytest.mark.parametrize("mode", [ErrorMode.BALL, ErrorMode.SHARED, ErrorMode.SPHERE])
    def test_matches_pairwise(self, mode):
        """Test every block entry equals the per-pair draw."""
        model = ErrorModel(mode, 0.2, seed=6)
        block = draw_errors(model, 4, 1, 3, 5)
        for i in range(3):
            assert not np.any(block[i, i])
            for j in range(3):
                if i != j:
                    assert np.array_equal(block[i, j], draw_error(model, i, j, 4, 1, 5))

    def test_mask(self):
        """Test entries outside the mask stay zero."""
        mask = np.array([[False, True, False], [True, False, True], [False, True, False]])
        block = draw_errors(ErrorModel(ErrorMode.BALL, 1.0, seed=1), 0, 0, 3, 2, mask=mask)
        assert not np.any(block[0, 2])
        assert not np.any(block[2, 0])
        assert np.any(block[0, 1])

    def test_silent_block(self):
        """Test a silent model gives an all-zero block."""
        assert not np.any(draw_errors(ErrorModel(ErrorMode.BALL, 0.0), 0, 0, 4, 3))

    def test_slots_fill_the_square(self):
        """Test the pairs of N peers occupy slots 0..N^2-1 once each."""
        slots = sorted(pair_index(i, j) for i in range(5) for j in range(5))
        assert slots == list(range(25))

    @pytest.mark.parametrize("mode", [ErrorMode.BALL, ErrorMode.SHARED])
    def test_independent_of_network_size(self, mode):
        """Test a pair draws the same error in a 3-peer and a 5-peer round."""
        model = ErrorModel(mode, 0.4, seed=12)
        small = draw_errors(model, 9, 2, 3, 4)
        large = draw_errors(model, 9, 2, 5, 4)
        assert np.array_equal(small, large[:3, :3])

    def test_quantizer_block(self, rng):
        """Test the quantizer block repeats each source's rounding error."""
        model = ErrorModel(ErrorMode.QUANTIZER, 0.5)
        values = rng.standard_normal((3, 4))
        block = draw_errors(model, 0, 0, 3, 4, values=values)
        for j in range(3):
            expected = draw_error(model, (j + 1) % 3, j, 0, 0, 4, value=values[j])
            for i in range(3):
                if i != j:
                    assert np.array_equal(block[i, j], expected)
        with pytest.raises(InputError):
            draw_errors(model, 0, 0, 3, 4)


class TestQuantize:
    """Deterministic bounded rounding."""

    def test_grid_points_unchanged(self):
        """Test values on the grid are returned unchanged."""
        eps = 0.3
        step = 2 * eps / math.sqrt(4)
        v = np.array([3.0, -2.0, 0.0, 5.0]) * step
        assert np.array_equal(quantize(v, eps), v)

    def test_hand_rounding(self):
        """Test 0.25 rounds to 0.2 on the 0.2 grid."""
        out = quantize(np.array([0.25]), 0.1)
        assert out.tolist() == pytest.approx([0.2])
        assert abs(out[0] - 0.25) <= 0.1

    def test_ties_away_from_zero(self):
        """Test half-way values round away from zero."""
        out = quantize(np.array([0.5, -0.5, 2.5, -1.5]), 1.0)
        assert out.tolist() == [1.0, -1.0, 3.0, -2.0]

    def test_error_bound(self, rng):
        """Test the quantization error never exceeds eps."""
        for _ in range(1000):
            v = rng.standard_normal(10) * 5
            assert np.linalg.norm(quantize(v, 1.0) - v) <= 1.0 + 1e-12

    def test_tie_vectors_stay_within_bound(self, rng):
        """Test quantizer errors on half-step ties never exceed eps, without slack."""
        model = ErrorModel(ErrorMode.QUANTIZER, 0.7)
        step = 2 * 0.7 / math.sqrt(3)
        for _ in range(2000):
            value = (rng.integers(-50, 50, size=3) + 0.5) * step
            assert np.linalg.norm(quantize(value, 0.7) - value) <= 0.7 * (1 + 1e-12)
            assert np.linalg.norm(draw_error(model, 0, 1, 0, 0, 3, value=value)) <= 0.7

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_non_positive_epsilon(self, eps):
        """Test eps <= 0 is rejected."""
        with pytest.raises(InputError):
            quantize(np.array([1.0]), eps)
