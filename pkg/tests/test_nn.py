"""Networks: init, forward modes, heads, Adam, power constraint, checkpoints."""

import numpy as np
import pytest

from cortical.autodiff import Tape, grad_check
from cortical.nn import (
    AdamState,
    CheckpointError,
    MlpSpec,
    NetParams,
    NnError,
    NonFiniteGradient,
    adam_step,
    discriminator_spec,
    generator_spec,
    load_mlp,
    mlp_forward,
    mlp_init,
    power_normalize,
    save_mlp,
    watch_params,
)


class TestSpecValidation:
    def test_discriminator_shape(self):
        spec = discriminator_spec(2, "softplus")
        assert spec.input_dim == 4
        assert spec.hidden == (100, 100)
        assert spec.dropout == (0.3, 0.0)

    def test_generator_shape(self):
        spec = generator_spec(30, 2)
        assert spec.layer_dims == [(30, 100), (100, 100), (100, 100), (100, 2)]
        assert spec.head == "power_norm"

    def test_bad_head_rejected(self):
        with pytest.raises(NnError, match="head"):
            MlpSpec(2, (4,), 1, "tanh")

    def test_dropout_length_mismatch_rejected(self):
        with pytest.raises(NnError, match="dropout"):
            MlpSpec(2, (4, 4), 1, "linear", (0.3,))

    def test_dropout_range(self):
        with pytest.raises(NnError, match="dropout"):
            MlpSpec(2, (4,), 1, "linear", (1.0,))


class TestInit:
    def test_deterministic(self):
        spec = MlpSpec(4, (100, 100), 1, "sigmoid")
        assert mlp_init(spec, 0) == mlp_init(spec, 0)

    def test_seeds_differ(self):
        spec = MlpSpec(4, (8,), 1)
        assert mlp_init(spec, 0) != mlp_init(spec, 1)

    def test_biases_zero(self):
        params = mlp_init(MlpSpec(3, (7, 5), 2), 3)
        for _, b in params.layers:
            np.testing.assert_array_equal(b, 0.0)

    def test_weight_bound_2_to_100(self):
        params = mlp_init(MlpSpec(2, (100,), 1), 1)
        w = params.layers[0][0]
        assert np.abs(w).max() <= np.sqrt(6.0 / 102.0)
        # the draw actually explores the range
        assert np.abs(w).max() > 0.9 * np.sqrt(6.0 / 102.0)


class TestForward:
    def _run(self, spec, x, mode="eval", rng=None, seed=0, power=1.0):
        tape = Tape()
        params = mlp_init(spec, seed)
        out, pre = mlp_forward(tape, params, spec, tape.constant(x), mode, rng, power)
        return out.data, pre.data

    def test_sigmoid_head_in_unit_interval(self):
        x = np.random.default_rng(42).normal(size=(32, 4)) * 3
        out, _ = self._run(MlpSpec(4, (16,), 1, "sigmoid"), x)
        assert ((out > 0) & (out < 1)).all()

    def test_softplus_head_positive(self):
        x = np.random.default_rng(42).normal(size=(32, 4)) * 3
        out, _ = self._run(MlpSpec(4, (16,), 1, "softplus"), x)
        assert (out > 0).all()

    def test_softplus_head_at_zero_pre_activation(self):
        # zero weights in the last layer force pre_activation = 0
        spec = MlpSpec(2, (4,), 1, "softplus")
        params = mlp_init(spec, 0)
        params.layers[-1] = (np.zeros_like(params.layers[-1][0]),
                             np.zeros_like(params.layers[-1][1]))
        tape = Tape()
        x = tape.constant(np.random.default_rng(1).normal(size=(8, 2)))
        out, pre = mlp_forward(tape, params, spec, x)
        np.testing.assert_array_equal(pre.data, 0.0)
        np.testing.assert_allclose(out.data, 0.6931471805599453, rtol=0, atol=1e-15)

    def test_eval_ignores_dropout(self):
        x = np.random.default_rng(7).normal(size=(16, 2))
        with_do, _ = self._run(MlpSpec(2, (8,), 1, "linear", (0.3,)), x, "eval")
        without, _ = self._run(MlpSpec(2, (8,), 1, "linear"), x, "eval")
        np.testing.assert_array_equal(with_do, without)

    def test_train_dropout_changes_output_and_needs_rng(self):
        spec = MlpSpec(2, (64,), 1, "linear", (0.5,))
        x = np.random.default_rng(7).normal(size=(16, 2))
        out_eval, _ = self._run(spec, x, "eval")
        out_train, _ = self._run(spec, x, "train", np.random.default_rng(0))
        assert not np.array_equal(out_eval, out_train)
        with pytest.raises(NnError, match="rng"):
            self._run(spec, x, "train", None)

    def test_dropout_mask_scale_preserves_mean(self):
        """Inverted dropout: kept activations are scaled by 1/(1-rate)."""
        spec = MlpSpec(2, (400,), 1, "linear", (0.3,))
        params = mlp_init(spec, 0)
        x = np.abs(np.random.default_rng(3).normal(size=(64, 2)))
        outs = []
        for s in range(200):
            tape = Tape()
            out, _ = mlp_forward(tape, params, spec, tape.constant(x), "train",
                                 np.random.default_rng(s))
            outs.append(out.data.mean())
        tape = Tape()
        ref, _ = mlp_forward(tape, params, spec, tape.constant(x), "eval")
        assert abs(np.mean(outs) - ref.data.mean()) < 0.05 * max(1.0, abs(ref.data.mean()))

    def test_logit_identity_sigmoid_head(self):
        """log((1-D)/D) equals -pre_activation wherever D is unsaturated."""
        spec = discriminator_spec(2, "sigmoid")
        params = mlp_init(spec, 5)
        tape = Tape()
        x = tape.constant(np.random.default_rng(11).normal(size=(256, 4)))
        out, pre = mlp_forward(tape, params, spec, x)
        d = out.data
        ok = (d >= 1e-6) & (d <= 1 - 1e-6)
        np.testing.assert_allclose(
            np.log((1 - d[ok]) / d[ok]), -pre.data[ok], rtol=0, atol=1e-9
        )

    def test_power_norm_head(self):
        spec = generator_spec(4, 2)
        out, pre = self._run(spec, np.random.default_rng(2).normal(size=(64, 4)),
                             power=3.0)
        np.testing.assert_allclose(np.mean(out**2), 3.0, rtol=0, atol=1e-10)
        assert not np.allclose(out, pre)

    def test_input_width_mismatch(self):
        with pytest.raises(NnError, match="input"):
            self._run(MlpSpec(3, (4,), 1), np.zeros((5, 2)))

    def test_gradients_flow_to_watched_params(self):
        spec = MlpSpec(3, (8, 8), 1, "softplus")
        init = mlp_init(spec, 9)
        x = np.random.default_rng(1).normal(size=(16, 3))

        def loss(tape, leaves):
            out, _ = mlp_forward(tape, leaves, spec, tape.constant(x))
            return tape.mean(tape.log(out))

        assert grad_check(loss, init.flat()) < 1e-4


class TestAdam:
    def test_first_step_magnitude(self):
        params = NetParams([(np.array([[1.0]]), np.array([0.0]))])
        grads = [np.array([[1.0]]), np.array([0.0])]
        adam_step(params, grads, AdamState.for_params(params), lr=0.002)
        np.testing.assert_allclose(params.layers[0][0], 1.0 - 0.002, rtol=1e-7)

    def test_zero_gradient_is_noop(self):
        spec = MlpSpec(2, (4,), 1)
        params = mlp_init(spec, 0)
        before = params.copy()
        adam_step(params, [np.zeros_like(a) for a in params.flat()],
                  AdamState.for_params(params), lr=0.1)
        assert params == before

    def test_determinism(self):
        spec = MlpSpec(2, (4,), 1)
        grads = [np.random.default_rng(3).normal(size=a.shape)
                 for a in mlp_init(spec, 0).flat()]
        results = []
        for _ in range(2):
            params = mlp_init(spec, 0)
            state = AdamState.for_params(params)
            for _ in range(5):
                adam_step(params, grads, state, lr=0.01)
            results.append(params)
        assert results[0] == results[1]

    def test_non_finite_gradient_aborts(self):
        params = NetParams([(np.ones((2, 2)), np.zeros(2))])
        grads = [np.full((2, 2), np.nan), np.zeros(2)]
        state = AdamState.for_params(params)
        with pytest.raises(NonFiniteGradient):
            adam_step(params, grads, state, lr=0.01)
        assert state.t == 0  # aborted before the counter moved

    def test_step_counter_increments_once(self):
        params = NetParams([(np.ones((1, 1)), np.zeros(1))])
        state = AdamState.for_params(params)
        adam_step(params, [np.ones((1, 1)), np.ones(1)], state, lr=0.01)
        assert state.t == 1


class TestPowerNormalize:
    def test_known_scale(self):
        """Mean-square 4 with P=1: every centered value is halved."""
        x = np.array([[2.0, -2.0], [-2.0, 2.0]])
        np.testing.assert_allclose(power_normalize(x, 1.0), x / 2.0)

    def test_power_invariant(self):
        x = np.random.default_rng(0).normal(size=(500, 3)) * 5 + 2
        out = power_normalize(x, 1.0)
        np.testing.assert_allclose(np.mean(out**2), 1.0, rtol=0, atol=1e-10)

    def test_shift_invariance(self):
        x = np.random.default_rng(1).normal(size=(32, 2))
        np.testing.assert_allclose(
            power_normalize(x + 11.0, 1.0), power_normalize(x, 1.0), atol=1e-12
        )

    def test_degenerate_batch(self):
        with pytest.raises(NnError, match="degenerate"):
            power_normalize(np.ones((8, 2)), 1.0)

    def test_matches_tape_primitive(self):
        x = np.random.default_rng(2).normal(size=(16, 2))
        tape = Tape()
        np.testing.assert_array_equal(
            tape.power_norm(tape.constant(x), 1.7).data, power_normalize(x, 1.7)
        )


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        spec = MlpSpec(4, (100, 100), 1, "softplus", (0.3, 0.0))
        params = mlp_init(spec, 123)
        path = tmp_path / "disc.txt"
        save_mlp(path, spec, params)
        spec2, params2 = load_mlp(path)
        assert (spec2.input_dim, spec2.hidden, spec2.output_dim, spec2.head) == (
            4, (100, 100), 1, "softplus")
        assert spec2.dropout == ()  # training-time setting, not stored
        assert params2 == params

    def test_header_format(self, tmp_path):
        spec = MlpSpec(30, (100, 100, 100), 2, "power_norm")
        path = tmp_path / "gen.txt"
        save_mlp(path, spec, mlp_init(spec, 0))
        header = path.read_text().splitlines()[0]
        assert header == "mlp 30 100 100 100 2 power_norm"

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a checkpoint\n")
        with pytest.raises(CheckpointError, match="header"):
            load_mlp(path)

    def test_wrong_line_count(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("mlp 2 4 1 linear\n1 2 3 4 5 6 7 8\n")
        with pytest.raises(CheckpointError, match="lines"):
            load_mlp(path)

    def test_wrong_layer_size(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("mlp 2 1 linear\n1 2 3\n0\n")
        with pytest.raises(CheckpointError, match="layer 0"):
            load_mlp(path)

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("mlp 1 1 linear\nx\n0\n")
        with pytest.raises(CheckpointError, match="non-numeric"):
            load_mlp(path)

    def test_watch_params_round_trip_gradients(self):
        spec = MlpSpec(2, (4,), 1)
        params = mlp_init(spec, 0)
        tape = Tape()
        leaves = watch_params(tape, params)
        out, _ = mlp_forward(tape, leaves, spec,
                             tape.constant(np.ones((4, 2))))
        grads = tape.backward(tape.mean(out))
        assert all(leaf in grads for leaf in leaves)
