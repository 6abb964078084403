import numpy as np
import pytest

from trajaudit import nn, targets
from trajaudit.errors import ConfigError, ShapeError, ValidationError
from trajaudit.trajectory import synth_mobility


def nets_equal(a: nn.Mlp, b: nn.Mlp) -> bool:
    return (
        a.activations == b.activations
        and all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
        and all(np.array_equal(x, y) for x, y in zip(a.biases, b.biases))
    )


def mean_confidence(model, trajs):
    return float(np.mean([targets.discriminator_confidence(model, tr) for tr in trajs]))


def mean_denoise_loss(model, trajs, seed=0):
    """Exhaustive-timestep denoising loss, one noise draw per timestep."""
    rng = np.random.default_rng(seed)
    sched = model.schedule
    total = 0.0
    for tr in trajs:
        flat = tr.flat_xy()
        for t in range(1, sched.t_max + 1):
            eps = rng.standard_normal(flat.size)
            x_t = targets.forward_noising(flat, t, eps, sched)
            pred = nn.forward(
                model.noise_net, np.concatenate([x_t, [t / sched.t_max]])
            )
            total += float(np.sum((pred - eps) ** 2))
    return total / (len(trajs) * sched.t_max)


class TestNoiseSchedule:
    def test_linear_schedule_shape(self):
        s = targets.NoiseSchedule.linear(100)
        assert s.t_max == 100
        assert s.betas[0] == 1e-4 and s.betas[-1] == 0.02

    def test_alpha_bar_convention_and_monotonicity(self):
        s = targets.NoiseSchedule.linear(100)
        assert s.alpha_bar(0) == 1.0
        bars = np.array([s.alpha_bar(t) for t in range(1, 101)])
        assert np.all(np.diff(bars) < 0)
        assert np.all(bars > 0) and np.all(bars <= 1)

    def test_rejects_bad_betas(self):
        with pytest.raises(ConfigError):
            targets.NoiseSchedule(np.array([0.1, 1.5]))
        with pytest.raises(ConfigError):
            targets.NoiseSchedule(np.array([0.0, 0.1]))


class TestForwardNoising:
    def test_zero_noise_limit(self):
        # beta tiny everywhere: abar ~ 1, x_t ~ x0
        s = targets.NoiseSchedule(np.full(10, 1e-12))
        x0 = np.array([0.5, -0.5, 1.0, 0.0])
        out = targets.forward_noising(x0, 10, np.ones(4), s)
        np.testing.assert_allclose(out, x0, atol=1e-5)

    def test_pure_noise_limit(self):
        s = targets.NoiseSchedule(np.full(50, 0.5))
        eps = np.array([1.0, -2.0, 0.5, 3.0])
        out = targets.forward_noising(np.ones(4), 50, eps, s)
        np.testing.assert_allclose(out, eps, atol=1e-6)

    def test_hand_computed_oracle(self):
        # 4-dim example against scalar evaluation of the closed form
        s = targets.NoiseSchedule.linear(100)
        x0 = np.array([0.2, -0.4, 0.6, -0.8])
        eps = np.array([1.0, 0.5, -0.5, -1.0])
        t = 37
        abar = 1.0
        for i in range(t):
            abar *= 1.0 - s.betas[i]
        expected = np.array(
            [np.sqrt(abar) * x0[i] + np.sqrt(1.0 - abar) * eps[i] for i in range(4)]
        )
        np.testing.assert_array_equal(targets.forward_noising(x0, t, eps, s), expected)

    def test_t_out_of_range(self):
        s = targets.NoiseSchedule.linear(10)
        with pytest.raises(ValidationError):
            targets.forward_noising(np.zeros(2), 0, np.zeros(2), s)
        with pytest.raises(ValidationError):
            targets.forward_noising(np.zeros(2), 11, np.zeros(2), s)

    @pytest.mark.parametrize("t", [1, 50, 100])
    def test_marginal_variance_law(self, t):
        s = targets.NoiseSchedule.linear(100)
        rng = np.random.default_rng(8)
        x0 = np.zeros(4)
        draws = np.stack(
            [
                targets.forward_noising(x0, t, rng.standard_normal(4), s)
                for _ in range(10_000)
            ]
        )
        expected = 1.0 - s.alpha_bar(t)
        np.testing.assert_allclose(draws.var(axis=0), expected, rtol=0.05)


@pytest.fixture(scope="module")
def small_data():
    return synth_mobility(80, 10, seed=101)


class TestTrainGan:
    def test_deterministic_one_epoch(self, small_data):
        cfg = targets.TrainConfig(epochs=1, batch_size=16, lr=0.01, seed=5, hidden=(8,))
        a = targets.train_gan(small_data[:32], cfg)
        b = targets.train_gan(small_data[:32], cfg)
        assert nets_equal(a.generator, b.generator)
        assert nets_equal(a.discriminator, b.discriminator)
        assert a.loss_trace == b.loss_trace

    def test_overfit_regime_separates_members(self):
        data = synth_mobility(128, 10, seed=77)
        members, held_out = data[:64], data[64:]
        cfg = targets.TrainConfig(epochs=2000, batch_size=32, lr=0.02, seed=7, hidden=(64, 32))
        model = targets.train_gan(members, cfg)
        gap = mean_confidence(model, members) - mean_confidence(model, held_out)
        assert gap >= 0.05

    def test_generalized_regime_no_gap(self):
        data = synth_mobility(4200, 10, seed=78)
        members, held_out = data[:4096], data[4096:]
        cfg = targets.TrainConfig(epochs=50, batch_size=128, lr=0.02, seed=7, hidden=(64, 32))
        model = targets.train_gan(members, cfg)
        gap = mean_confidence(model, members) - mean_confidence(model, held_out[:100])
        assert abs(gap) < 0.02

    def test_batch_size_exceeds_data(self, small_data):
        cfg = targets.TrainConfig(epochs=1, batch_size=200, lr=0.01, seed=0)
        with pytest.raises(ConfigError):
            targets.train_gan(small_data, cfg)

    def test_records_config_and_trace(self, small_data):
        cfg = targets.TrainConfig(epochs=3, batch_size=16, lr=0.01, seed=5, hidden=(8,))
        model = targets.train_gan(small_data[:32], cfg)
        assert model.train_config.dataset_size == 32
        assert len(model.loss_trace) == 3


class TestTrainDiffusion:
    def test_deterministic_one_epoch(self, small_data):
        sched = targets.NoiseSchedule.linear(20)
        cfg = targets.TrainConfig(epochs=1, batch_size=16, lr=0.01, seed=5, hidden=(8,))
        a = targets.train_diffusion(small_data[:32], cfg, sched)
        b = targets.train_diffusion(small_data[:32], cfg, sched)
        assert nets_equal(a.noise_net, b.noise_net)
        assert a.loss_trace == b.loss_trace

    def test_overfit_regime_lowers_member_loss(self):
        data = synth_mobility(128, 10, seed=79)
        members, held_out = data[:64], data[64:]
        sched = targets.NoiseSchedule.linear(100)
        # small batches = many steps per epoch, which drives memorization
        cfg = targets.TrainConfig(epochs=3000, batch_size=16, lr=0.01, seed=9, hidden=(256, 128))
        model = targets.train_diffusion(members, cfg, sched)
        member_loss = mean_denoise_loss(model, members[:32])
        non_member_loss = mean_denoise_loss(model, held_out[:32])
        assert member_loss < non_member_loss
        assert (non_member_loss - member_loss) / non_member_loss >= 0.05

    def test_overfit_gap_grows_with_epochs(self):
        data = synth_mobility(96, 10, seed=81)
        members, held_out = data[:64], data[64:]
        sched = targets.NoiseSchedule.linear(100)
        gaps = []
        for epochs in (100, 1000, 3000):
            cfg = targets.TrainConfig(
                epochs=epochs, batch_size=16, lr=0.01, seed=9, hidden=(256, 128)
            )
            model = targets.train_diffusion(members, cfg, sched)
            gaps.append(
                mean_denoise_loss(model, held_out) - mean_denoise_loss(model, members)
            )
        assert gaps[0] <= gaps[1] <= gaps[2]

    def test_single_trajectory_approaches_noise_floor(self):
        data = []
        for i in range(16):
            copy = synth_mobility(1, 10, seed=81)[0]
            copy.id = f"rep-{i}"
            data.append(copy)
        sched = targets.NoiseSchedule.linear(100)
        cfg = targets.TrainConfig(epochs=400, batch_size=16, lr=0.01, seed=3, hidden=(64, 32))
        model = targets.train_diffusion(data, cfg, sched)
        assert model.loss_trace[-1] < model.loss_trace[0]


class TestSampleDiffusion:
    def test_deterministic(self, small_data):
        sched = targets.NoiseSchedule.linear(20)
        cfg = targets.TrainConfig(epochs=1, batch_size=16, lr=0.01, seed=5, hidden=(8,))
        model = targets.train_diffusion(small_data[:32], cfg, sched)
        a = targets.sample_diffusion(model, 2, seed=42)
        b = targets.sample_diffusion(model, 2, seed=42)
        for ta, tb in zip(a, b):
            np.testing.assert_array_equal(ta.xy, tb.xy)

    def test_output_invariants(self, small_data):
        sched = targets.NoiseSchedule.linear(20)
        cfg = targets.TrainConfig(epochs=1, batch_size=16, lr=0.01, seed=5, hidden=(8,))
        model = targets.train_diffusion(small_data[:32], cfg, sched)
        for tr in targets.sample_diffusion(model, 5, seed=1):
            assert len(tr) == 10
            assert np.all(tr.xy >= -1.0) and np.all(tr.xy <= 1.0)
            assert np.all(np.diff(tr.t) > 0)

    def test_trained_model_samples_near_anchors(self):
        # anchors from the data-generation seed (drawn first by synth_mobility)
        seed = 202
        anchors = np.random.default_rng(seed).uniform(-0.8, 0.8, size=(3, 2))
        data = synth_mobility(512, 10, seed=seed, n_anchors=3)
        sched = targets.NoiseSchedule.linear(100)
        cfg = targets.TrainConfig(epochs=400, batch_size=64, lr=0.01, seed=4, hidden=(256, 128))
        model = targets.train_diffusion(data, cfg, sched)
        samples = targets.sample_diffusion(model, 200, seed=9)
        ends = np.stack([tr.xy[-1] for tr in samples])
        dists = np.min(
            np.linalg.norm(ends[:, None, :] - anchors[None, :, :], axis=2), axis=1
        )
        assert np.mean(dists < 0.3) >= 0.5


class TestDiscriminatorConfidence:
    def test_zero_weight_discriminator_gives_half(self, small_data):
        disc = nn.Mlp([np.zeros((1, 20))], [np.zeros(1)], ["sigmoid"])
        gen = nn.init_mlp([8, 20], ["tanh"], np.random.default_rng(0))
        cfg = targets.TrainConfig(epochs=1, batch_size=1, lr=0.1, seed=0)
        model = targets.GanTarget(gen, disc, cfg, seq_len=10)
        assert targets.discriminator_confidence(model, small_data[0]) == 0.5

    def test_saturated_output_clamped(self, small_data):
        disc = nn.Mlp([np.zeros((1, 20))], [np.full(1, 1e3)], ["sigmoid"])
        gen = nn.init_mlp([8, 20], ["tanh"], np.random.default_rng(0))
        cfg = targets.TrainConfig(epochs=1, batch_size=1, lr=0.1, seed=0)
        model = targets.GanTarget(gen, disc, cfg, seq_len=10)
        assert targets.discriminator_confidence(model, small_data[0]) == 1.0 - 1e-7

    def test_matches_direct_forward(self, small_data):
        cfg = targets.TrainConfig(epochs=1, batch_size=16, lr=0.01, seed=5, hidden=(8,))
        model = targets.train_gan(small_data[:32], cfg)
        tr = small_data[40]
        direct = float(nn.forward(model.discriminator, tr.flat_xy())[0])
        assert targets.discriminator_confidence(model, tr) == pytest.approx(direct, abs=1e-12)

    def test_wrong_length_rejected(self):
        disc = nn.Mlp([np.zeros((1, 20))], [np.zeros(1)], ["sigmoid"])
        gen = nn.init_mlp([8, 20], ["tanh"], np.random.default_rng(0))
        cfg = targets.TrainConfig(epochs=1, batch_size=1, lr=0.1, seed=0)
        model = targets.GanTarget(gen, disc, cfg, seq_len=10)
        with pytest.raises(ShapeError):
            targets.discriminator_confidence(model, synth_mobility(1, 8, seed=0)[0])


class TestCheckpoint:
    def test_gan_round_trip(self, small_data, tmp_path):
        cfg = targets.TrainConfig(epochs=2, batch_size=16, lr=0.01, seed=5, hidden=(8,))
        model = targets.train_gan(small_data[:32], cfg)
        targets.save_target(model, tmp_path / "gan")
        loaded = targets.load_target(tmp_path / "gan")
        assert loaded.family == "gan"
        assert nets_equal(model.generator, loaded.generator)
        assert nets_equal(model.discriminator, loaded.discriminator)
        assert loaded.train_config == model.train_config

    def test_diffusion_round_trip(self, small_data, tmp_path):
        sched = targets.NoiseSchedule.linear(20)
        cfg = targets.TrainConfig(epochs=2, batch_size=16, lr=0.01, seed=5, hidden=(8,))
        model = targets.train_diffusion(small_data[:32], cfg, sched)
        targets.save_target(model, tmp_path / "diff")
        loaded = targets.load_target(tmp_path / "diff")
        assert loaded.family == "diffusion"
        assert nets_equal(model.noise_net, loaded.noise_net)
        np.testing.assert_array_equal(model.schedule.betas, loaded.schedule.betas)
