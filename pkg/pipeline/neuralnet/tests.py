import numpy as np
from django.test import SimpleTestCase, tag

from core.errors import ChecksumMismatch, DimensionMismatch, FileFormatError, MalformedHeader
from pipeline.neuralnet.adam import AdamState, adam_step
from pipeline.neuralnet.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from pipeline.neuralnet.errors import NetworkError, NonFiniteGradient, TrainingDiverged
from pipeline.neuralnet.layers import DenseLayer, elu, elu_derivative, sigmoid, sigmoid_derivative
from pipeline.neuralnet.schemas import VaeConfig
from pipeline.neuralnet.training import train
from pipeline.neuralnet.vae import (
    VaeModel,
    batch_loss,
    decode,
    decoder_vjp,
    encode,
    expected_parameter_count,
    reconstruct,
    reparameterize,
    sample_latent,
    vae_gradients,
    vae_loss,
)
from pipeline.tests import TempDirMixin

FD_STEP = 1e-5
FD_TOLERANCE = 1e-5


class GradientHelper:
    @classmethod
    def numeric_gradient(cls, loss, array, step=FD_STEP):
        """Central differences of loss() with respect to every entry of array, perturbed in place."""
        grad = np.zeros_like(array, dtype=np.float64)
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + step
            plus = loss()
            array[index] = original - step
            minus = loss()
            array[index] = original
            grad[index] = (plus - minus) / (2 * step)
        return grad

    @classmethod
    def relative_error(cls, analytic, numeric):
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        return np.linalg.norm(np.asarray(analytic) - numeric) / scale

    @classmethod
    def small_model(cls, seed=0):
        return VaeModel.build(32, 4, hidden_width=16, hidden_layers=2, seed=seed, dtype=np.float64)

    @classmethod
    def random_batch(cls, seed=0, batch=3, input_dim=32, latent_dim=4):
        rng = np.random.default_rng(seed)
        return rng.random((batch, input_dim)), rng.standard_normal((batch, latent_dim))

    @classmethod
    def toy_images(cls, count, seed=0):
        """Flattened 8x8 quadrant and half-plane patterns."""
        templates = []
        for rows, cols in ((slice(0, 4), slice(0, 4)), (slice(0, 4), slice(4, 8)), (slice(4, 8), slice(0, 4)),
                           (slice(4, 8), slice(4, 8)), (slice(0, 4), slice(None)), (slice(4, 8), slice(None)),
                           (slice(None), slice(0, 4)), (slice(None), slice(4, 8))):
            image = np.zeros((8, 8))
            image[rows, cols] = 1.0
            templates.append(image.ravel())
        choice = np.random.default_rng(seed).integers(len(templates), size=count)
        return np.array([templates[i] for i in choice])


class ActivationTests(SimpleTestCase):
    def test_elu_values(self):
        """Test elu at zero and on both branches"""
        self.assertEqual(elu(np.array(0.0)), 0.0)
        self.assertEqual(elu_derivative(np.array(0.0)), 1.0)
        self.assertEqual(elu(np.array(2.5)), 2.5)
        self.assertAlmostEqual(float(elu(np.array(-1.0))), np.exp(-1.0) - 1.0, places=15)

    def test_sigmoid_values(self):
        """Test sigmoid at zero and far in the negative tail"""
        self.assertEqual(sigmoid(np.array(0.0)), 0.5)
        self.assertGreater(sigmoid(np.array(-800.0)), 0.0)
        self.assertEqual(sigmoid(np.array(-800.0)), sigmoid(np.array(-500.0)))
        self.assertEqual(sigmoid(np.array(800.0)), 1.0)

    def test_derivatives_match_finite_differences(self):
        """Test both exact derivatives away from the elu kink"""
        x = np.array([-3.0, -0.7, -0.1, 0.2, 1.5, 4.0])
        for function, derivative in ((elu, elu_derivative), (sigmoid, sigmoid_derivative)):
            numeric = (function(x + FD_STEP) - function(x - FD_STEP)) / (2 * FD_STEP)
            np.testing.assert_allclose(derivative(x), numeric, rtol=1e-8)


class DenseLayerTests(SimpleTestCase):
    def test_identity_layer(self):
        """Test identity weights, zero bias and identity activation"""
        layer = DenseLayer(np.eye(5), np.zeros(5))
        x = np.arange(5.0)
        output, _ = layer.forward(x)
        np.testing.assert_array_equal(output, x)

    def test_zero_weights_give_bias(self):
        """Test zero weights with a bias"""
        bias = np.array([1.0, -2.0, 3.0])
        output, _ = DenseLayer(np.zeros((3, 4)), bias).forward(np.ones(4))
        np.testing.assert_array_equal(output, bias)

    def test_shape_mismatch(self):
        """Test an input of the wrong width"""
        layer = DenseLayer.zeros(4, 3)
        with self.assertRaises(DimensionMismatch):
            layer.forward(np.ones(5))

    def test_batched_and_single_inputs_agree(self):
        """Test that rows of a batch equal single-vector forwards"""
        layer = DenseLayer.glorot(np.random.default_rng(0), 6, 4, "elu", np.float64)
        batch = np.random.default_rng(1).standard_normal((3, 6))
        outputs, _ = layer.forward(batch)
        for row, output in zip(batch, outputs):
            np.testing.assert_allclose(layer.forward(row)[0], output, rtol=1e-12)

    def test_backward_matches_finite_differences(self):
        """Test input and parameter gradients of every activation"""
        rng = np.random.default_rng(2)
        for activation in ("identity", "elu", "sigmoid"):
            layer = DenseLayer.glorot(rng, 7, 5, activation, np.float64)
            x = rng.standard_normal((3, 7))
            upstream = rng.standard_normal((3, 5))

            def loss():
                return float(np.sum(layer.forward(x)[0] * upstream))

            _, cache = layer.forward(x)
            grad_in, grads = layer.backward(upstream, cache)
            for analytic, array in ((grad_in, x), (grads.weights, layer.weights), (grads.bias, layer.bias)):
                numeric = GradientHelper.numeric_gradient(loss, array)
                self.assertLess(GradientHelper.relative_error(analytic, numeric), 1e-6, msg=activation)


class VaeModelTests(SimpleTestCase):
    def test_parameter_count_matches_plan(self):
        """Test the parameter count of the litho-sized network"""
        model = VaeModel.build(2 * 64 * 64, 10, seed=0)
        self.assertEqual(model.parameter_count, expected_parameter_count(2 * 64 * 64, 10, 512, 4))
        self.assertEqual(len(model.layers), 11)
        self.assertEqual(model.dtype, np.float32)

    def test_layer_activations(self):
        """Test elu hidden layers, identity heads and a sigmoid output"""
        model = GradientHelper.small_model()
        self.assertEqual([layer.activation for layer in model.layers],
                         ["elu", "elu", "identity", "identity", "elu", "elu", "sigmoid"])
        self.assertEqual((model.input_dim, model.latent_dim), (32, 4))

    def test_zero_model(self):
        """Test zero-parameter propagation through encoder and decoder"""
        model = VaeModel.zeros(32, 4)
        mu, logvar = encode(model, np.random.default_rng(0).random(32))
        np.testing.assert_array_equal(mu, 0.0)
        np.testing.assert_array_equal(logvar, 0.0)
        np.testing.assert_array_equal(decode(model, np.ones(4)), 0.5)
        np.testing.assert_array_equal(reconstruct(model, np.ones(32)), 0.5)

    def test_outputs_are_deterministic_and_bounded(self):
        """Test repeatable finite outputs strictly inside (0, 1) on random inputs"""
        model = GradientHelper.small_model(seed=3)
        inputs = np.random.default_rng(4).random((100, 32))
        mu, logvar = encode(model, inputs)
        again, _ = encode(model, inputs)

        np.testing.assert_array_equal(mu, again)
        self.assertTrue(np.all(np.isfinite(mu)) and np.all(np.isfinite(logvar)))
        decoded = decode(model, mu)
        self.assertTrue(np.all((decoded > 0) & (decoded < 1)))

    def test_shape_mismatch(self):
        """Test wrong input and latent widths"""
        model = GradientHelper.small_model()
        with self.assertRaises(DimensionMismatch):
            encode(model, np.zeros(31))
        with self.assertRaises(DimensionMismatch):
            decode(model, np.zeros(5))

    def test_decoder_vjp_matches_finite_differences(self):
        """Test the decoder vector-Jacobian product"""
        rng = np.random.default_rng(5)
        model = GradientHelper.small_model(seed=5)
        z = rng.standard_normal(4)
        weights = rng.standard_normal(32)

        numeric = GradientHelper.numeric_gradient(lambda: float(decode(model, z) @ weights), z)
        self.assertLess(GradientHelper.relative_error(decoder_vjp(model, z, weights), numeric), FD_TOLERANCE)

    def test_prior_samples(self):
        """Test that prior samples are seeded"""
        model = GradientHelper.small_model()
        np.testing.assert_array_equal(sample_latent(model, 3, seed=1), sample_latent(model, 3, seed=1))
        self.assertEqual(sample_latent(model, 3, seed=1).shape, (3, 32))


class ReparameterizeTests(SimpleTestCase):
    def test_closed_cases(self):
        """Test zero noise and zero log-variance"""
        mu, noise = np.array([0.3, -1.0]), np.array([0.5, 2.0])
        np.testing.assert_array_equal(reparameterize(mu, np.array([0.7, -0.2]), np.zeros(2)), mu)
        np.testing.assert_array_equal(reparameterize(mu, np.zeros(2), noise), mu + noise)

    def test_logvar_gradient(self):
        """Test dz/dlogvar = exp(logvar / 2) noise / 2"""
        mu, logvar, noise = np.array([0.1]), np.array([0.4]), np.array([1.3])
        numeric = GradientHelper.numeric_gradient(lambda: float(reparameterize(mu, logvar, noise)[0]), logvar)
        np.testing.assert_allclose(numeric, 0.5 * np.exp(0.2) * 1.3, rtol=1e-8)

    def test_shape_mismatch(self):
        """Test differently shaped arguments"""
        with self.assertRaises(DimensionMismatch):
            reparameterize(np.zeros(2), np.zeros(3), np.zeros(2))


class LossTests(SimpleTestCase):
    def test_kl_closed_forms(self):
        """Test KL at the prior and at unit mean"""
        x = np.full((1, 4), 0.5)
        report, _ = vae_loss(x, x, np.zeros((1, 3)), np.zeros((1, 3)))
        self.assertEqual(report.kl, 0.0)

        report, _ = vae_loss(x, x, np.ones((1, 1)), np.zeros((1, 1)))
        self.assertAlmostEqual(report.kl, 0.5, delta=1e-12)

    def test_kl_is_non_negative(self):
        """Test KL >= 0 on random posteriors"""
        rng = np.random.default_rng(0)
        x = np.full((5, 2), 0.5)
        for _ in range(50):
            report, _ = vae_loss(x, x, rng.standard_normal((5, 4)), rng.standard_normal((5, 4)))
            self.assertGreaterEqual(report.kl, 0.0)

    def test_bce_clipping_floor(self):
        """Test the loss of a perfect binary reconstruction"""
        x = (np.random.default_rng(1).random((1, 50)) > 0.5).astype(float)
        report, _ = vae_loss(x, x, np.zeros((1, 2)), np.zeros((1, 2)))
        self.assertAlmostEqual(report.reconstruction, -50 * np.log1p(-1e-7), delta=1e-12)

    def test_total_is_sum(self):
        """Test loss additivity"""
        rng = np.random.default_rng(2)
        report, _ = vae_loss(rng.random((4, 8)), rng.random((4, 8)), rng.standard_normal((4, 2)),
                             rng.standard_normal((4, 2)))
        self.assertEqual(report.total, report.reconstruction + report.kl)

    def test_batch_average(self):
        """Test that repeating a sample leaves the batch loss unchanged"""
        rng = np.random.default_rng(3)
        x_tilde, x, mu, logvar = rng.random((1, 6)), rng.random((1, 6)), rng.random((1, 2)), rng.random((1, 2))
        single, _ = vae_loss(x_tilde, x, mu, logvar)
        double, _ = vae_loss(*(np.vstack([a, a]) for a in (x_tilde, x, mu, logvar)))
        self.assertAlmostEqual(single.total, double.total, places=12)

    def test_gradients_match_finite_differences(self):
        """Test loss gradients with respect to output, mu and logvar"""
        rng = np.random.default_rng(4)
        x_tilde = 0.1 + 0.8 * rng.random((3, 8))
        x, mu, logvar = rng.random((3, 8)), rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
        _, grads = vae_loss(x_tilde, x, mu, logvar)

        def loss():
            return vae_loss(x_tilde, x, mu, logvar)[0].total

        for analytic, array in ((grads.x_tilde, x_tilde), (grads.mu, mu), (grads.logvar, logvar)):
            numeric = GradientHelper.numeric_gradient(loss, array)
            self.assertLess(GradientHelper.relative_error(analytic, numeric), FD_TOLERANCE)


class VaeGradientTests(SimpleTestCase):
    def test_full_gradient_matches_finite_differences(self):
        """Test every layer gradient of the VAE loss on ten random networks"""
        for seed in range(10):
            model = GradientHelper.small_model(seed=seed)
            x, noise = GradientHelper.random_batch(seed=seed)
            _, layer_grads = vae_gradients(model, x, noise)

            def loss():
                return batch_loss(model, x, noise).total

            for index, (layer, grads) in enumerate(zip(model.layers, layer_grads)):
                for analytic, array in ((grads.weights, layer.weights), (grads.bias, layer.bias)):
                    numeric = GradientHelper.numeric_gradient(loss, array)
                    self.assertLess(
                        GradientHelper.relative_error(analytic, numeric), FD_TOLERANCE,
                        msg=f"seed {seed}, layer {index}",
                    )

    def test_report_matches_batch_loss(self):
        """Test that the training pass reports the plain forward loss"""
        model = GradientHelper.small_model(seed=1)
        x, noise = GradientHelper.random_batch(seed=1)
        report, _ = vae_gradients(model, x, noise)
        self.assertAlmostEqual(report.total, batch_loss(model, x, noise).total, places=10)


class AdamTests(SimpleTestCase):
    def test_first_step_is_sign_step(self):
        """Test that bias correction gives an lr-sized first step"""
        w = np.zeros(3)
        g = np.array([3.0, -2.0, 0.5])
        state = AdamState.zeros_like([w], lr=1e-3)
        adam_step([w], [g], state)

        np.testing.assert_allclose(w, -1e-3 * np.sign(g), rtol=1e-6)
        self.assertEqual(state.step, 1)

    def test_zero_gradient_leaves_parameters(self):
        """Test a stream of zero gradients"""
        w = np.array([1.0, -2.0])
        state = AdamState.zeros_like([w])
        for _ in range(20):
            adam_step([w], [np.zeros(2)], state)
        np.testing.assert_array_equal(w, [1.0, -2.0])

    def test_quadratic_bowl(self):
        """Test strictly decreasing loss on 0.5 |w|^2 for 100 steps"""
        w = np.array([3.0, -2.5, 4.0, -3.5])
        state = AdamState.zeros_like([w], lr=1e-2)
        previous = 0.5 * w @ w
        for _ in range(100):
            adam_step([w], [w.copy()], state)
            current = 0.5 * w @ w
            self.assertLess(current, previous)
            previous = current

    def test_non_finite_gradient(self):
        """Test that a NaN gradient is refused without touching the state"""
        w = np.ones(2)
        state = AdamState.zeros_like([w])
        with self.assertRaises(NonFiniteGradient):
            adam_step([w], [np.array([np.nan, 0.0])], state)
        np.testing.assert_array_equal(w, 1.0)
        self.assertEqual(state.step, 0)


class CheckpointTests(TempDirMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.model = VaeModel.build(32, 4, hidden_width=16, hidden_layers=2, seed=7)
        self.state = AdamState.zeros_like(self.model.parameters(), lr=3e-4)
        self.state.step = 12
        rng = np.random.default_rng(0)
        for moment in self.state.first_moments + self.state.second_moments:
            moment[...] = rng.standard_normal(moment.shape)

    def test_round_trip_is_bit_exact(self):
        """Test model and optimizer state through a file"""
        path = save_checkpoint(self.tmp / "model.lvnn", self.model, self.state)
        model, state = load_checkpoint(path)

        for original, loaded in zip(self.model.layers, model.layers):
            self.assertEqual(original.activation, loaded.activation)
            np.testing.assert_array_equal(original.weights, loaded.weights)
            np.testing.assert_array_equal(original.bias, loaded.bias)
        for original, loaded in zip(self.state.second_moments, state.second_moments):
            np.testing.assert_array_equal(original, loaded)
        self.assertEqual((state.step, state.lr), (12, 3e-4))
        self.assertEqual(encode_checkpoint(model, state), path.read_bytes())

    def test_header(self):
        """Test magic, version and layer count"""
        buffer = encode_checkpoint(self.model, self.state)
        self.assertEqual(buffer[:4], b"LVNN")
        self.assertEqual(int.from_bytes(buffer[4:8], "little"), 1)
        self.assertEqual(int.from_bytes(buffer[8:12], "little"), 7)

    def test_corruption_is_detected(self):
        """Test a flipped payload byte"""
        buffer = bytearray(encode_checkpoint(self.model, self.state))
        buffer[40] ^= 0xFF
        with self.assertRaises(ChecksumMismatch):
            decode_checkpoint(bytes(buffer))

    def test_truncation_is_detected(self):
        """Test a checkpoint cut short"""
        buffer = encode_checkpoint(self.model, self.state)
        with self.assertRaises(FileFormatError):
            decode_checkpoint(buffer[:-100])

    def test_bad_magic(self):
        """Test a foreign file"""
        buffer = b"LVAE" + encode_checkpoint(self.model, self.state)[4:]
        with self.assertRaises(MalformedHeader):
            decode_checkpoint(buffer)

    def test_mismatched_moments_are_refused(self):
        """Test saving a model with optimizer moments of another shape"""
        other = VaeModel.build(32, 3, hidden_width=16, hidden_layers=2, seed=7)
        with self.assertRaises(NetworkError):
            encode_checkpoint(self.model, AdamState.zeros_like(other.parameters()))
        with self.assertRaises(NetworkError):
            encode_checkpoint(self.model, AdamState(self.state.first_moments[:-1], self.state.second_moments))

    def test_float64_model_reloads_as_float32_cast(self):
        """Test the stored precision of a float64 model"""
        wide = self.model.astype(np.float64)
        model, state = decode_checkpoint(encode_checkpoint(wide, self.state.astype(np.float64)))

        self.assertEqual(model.dtype, np.float32)
        for original, loaded in zip(wide.astype(np.float32).layers, model.layers):
            np.testing.assert_array_equal(original.weights, loaded.weights)
        np.testing.assert_array_equal(state.first_moments[0], self.state.first_moments[0])


class TrainTests(TempDirMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.data = GradientHelper.toy_images(10)
        self.config = VaeConfig(hidden_width=16, hidden_layers=2, latent_dim=3, batch_size=4, epochs=1, seed=5)

    def build(self):
        return VaeModel.from_config(64, self.config)

    def test_checkpoint_after_one_epoch(self):
        """Test that the epoch checkpoint reloads to the trained parameters"""
        path = self.tmp / "model.lvnn"
        result = train(self.build(), self.data, self.config, checkpoint=path)
        model, state = load_checkpoint(path)

        for trained, loaded in zip(result.model.parameters(), model.parameters()):
            np.testing.assert_array_equal(trained, loaded)
        self.assertEqual(state.step, 3)
        self.assertEqual(len(result.history.batch_losses), 3)

    def test_fixed_seed_is_reproducible(self):
        """Test bit-identical loss histories and parameters"""
        config = self.config.model_copy(update={"epochs": 3})
        first = train(self.build(), self.data, config)
        second = train(self.build(), self.data, config)

        self.assertEqual(first.history.batch_losses, second.history.batch_losses)
        for a, b in zip(first.model.parameters(), second.model.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_batch_size_one_is_reproducible(self):
        """Test per-sample updates with equal seeds"""
        config = self.config.model_copy(update={"batch_size": 1, "epochs": 2})
        first = train(self.build(), self.data, config)
        second = train(self.build(), self.data, config)
        for a, b in zip(first.model.parameters(), second.model.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_divergence_keeps_last_good_checkpoint(self):
        """Test that a NaN loss aborts and leaves the previous checkpoint"""
        path = self.tmp / "model.lvnn"
        result = train(self.build(), self.data, self.config, checkpoint=path)
        good = path.read_bytes()

        poisoned = self.data.copy()
        poisoned[:, 0] = np.nan
        with self.assertRaises(TrainingDiverged) as ctx:
            train(result.model, poisoned, self.config, checkpoint=path, state=result.state)
        self.assertEqual(ctx.exception.epoch, 0)
        self.assertEqual(path.read_bytes(), good)

    def test_plateau_stops_early(self):
        """Test the patience rule"""
        config = self.config.model_copy(update={"epochs": 50, "patience": 2, "min_improvement": 0.5})
        result = train(self.build(), self.data, config)
        self.assertTrue(result.history.stopped_early)
        self.assertEqual(result.history.epochs, 3)

    @tag("slow")
    def test_toy_training(self):
        """Test loss halving and reconstruction accuracy on a 200-sample toy set"""
        data = GradientHelper.toy_images(200, seed=1)
        config = VaeConfig(hidden_width=64, hidden_layers=2, latent_dim=4, batch_size=8, epochs=200,
                           patience=200, seed=0)
        result = train(VaeModel.from_config(64, config), data, config)

        losses = result.history.epoch_losses
        self.assertLessEqual(losses[-1], 0.5 * losses[0])
        accuracy = np.mean((reconstruct(result.model, data) > 0.5) == (data > 0.5))
        self.assertGreater(accuracy, 0.9)
