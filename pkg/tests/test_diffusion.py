import numpy as np
import pytest
from hypothesis import given, strategies as st

from sigflow.diffusion import (
    Normalizer,
    NoiseSchedule,
    ScoreCheckpoint,
    ScoreNet,
    dsm_loss_and_grads,
    forward_perturb,
    loss_and_grads,
    probability_flow,
    sample,
    time_embedding,
    train,
)
from sigflow.evaluation import ks_two_sample
from sigflow.exceptions import ConfigError, DomainError, InputError


def fd_check(net, params, rng, h=1e-5):
    x = rng.normal(size=(6, net.width))
    t = rng.uniform(0.05, 1.0, 6)
    noise = rng.normal(size=x.shape)
    sched = NoiseSchedule()
    _, g = loss_and_grads(net, params, x, t, noise, sched)
    fd = np.empty_like(params)
    for i in range(len(params)):
        d = np.zeros_like(params)
        d[i] = h
        fd[i] = (loss_and_grads(net, params + d, x, t, noise, sched)[0]
                 - loss_and_grads(net, params - d, x, t, noise, sched)[0]) / (2 * h)
    return np.abs(fd - g).max() / max(np.abs(g).max(), 1e-12)


def test_schedule_closed_form():
    s = NoiseSchedule()
    assert s.B(0.0) == 0.0
    assert s.B(1.0) == pytest.approx(2.55)
    assert s.mean_coef(1.0) == pytest.approx(np.exp(-1.275))
    assert s.std(1.0) ** 2 == pytest.approx(1 - np.exp(-2.55))
    ts = np.linspace(0, 1, 50)
    assert np.all(np.diff(s.B(ts)) > 0)
    with pytest.raises(ConfigError):
        NoiseSchedule(0.0, 1.0)
    with pytest.raises(ConfigError):
        NoiseSchedule(2.0, 1.0)


def test_forward_perturb_examples():
    s = NoiseSchedule()
    x0 = np.array([[1.0, -2.0]])
    xt, std = forward_perturb(x0, 0.0, s, np.ones((1, 2)))
    np.testing.assert_array_equal(xt, x0)
    assert std == 0.0
    with pytest.raises(DomainError):
        forward_perturb(x0, 1.5, s, np.ones((1, 2)))
    with pytest.raises(InputError):
        forward_perturb(x0, 0.5, s, np.ones((1, 3)))


def test_forward_marginals_match_euler_maruyama():
    # dx = -beta/2 x dt + sqrt(beta) dW with 10^3 steps, 10^5 paths
    rng = np.random.default_rng(0)
    s = NoiseSchedule()
    n, steps = 100_000, 1000
    x0 = 1.5
    x = np.full(n, x0)
    dt = 1.0 / steps
    marks = {250: 0.25, 500: 0.5, 1000: 1.0}
    for k in range(1, steps + 1):
        b = s.beta((k - 1) * dt)
        x = x - 0.5 * b * x * dt + np.sqrt(b * dt) * rng.standard_normal(n)
        if k in marks:
            t = marks[k]
            xt, _ = forward_perturb(np.full(n, x0), np.full(n, t), s, rng.standard_normal(n))
            assert x.mean() == pytest.approx(x0 * s.mean_coef(t), rel=0.02)
            assert x.var() == pytest.approx(s.std(t) ** 2, rel=0.02)
            assert xt.mean() == pytest.approx(x.mean(), rel=0.02)


def test_time_embedding():
    emb = time_embedding(np.array([0.0, 0.5]), 8)
    assert emb.shape == (2, 8)
    np.testing.assert_array_equal(emb[0, :4], 0.0)
    np.testing.assert_array_equal(emb[0, 4:], 1.0)
    with pytest.raises(ConfigError):
        time_embedding(0.1, 3)


def test_net_shapes():
    net = ScoreNet(1, hidden=(3,), time_dim=2)
    assert net.n_params == 16
    big = ScoreNet(450)
    assert big.shapes == [(466, 64), (64, 64), (64, 450)]
    out = big.forward(big.init_params(np.random.default_rng(0)), np.zeros((3, 450)), 0.3)
    assert out.shape == (3, 450)


@pytest.mark.parametrize("skip", [False, True])
def test_gradients_16_param_net(skip):
    net = ScoreNet(1, hidden=(3,), time_dim=2, skip=skip)
    rng = np.random.default_rng(1)
    assert fd_check(net, rng.normal(size=16), rng) < 1e-4


@given(st.integers(0, 2**31))
def test_gradients_random_points(seed):
    rng = np.random.default_rng(seed)
    net = ScoreNet(3, hidden=(5, 4), time_dim=4)
    assert fd_check(net, rng.normal(size=net.n_params) * 0.5, rng) < 1e-4


def test_dsm_loss_determinism_and_validation():
    net = ScoreNet(2, hidden=(4,), time_dim=2)
    p = net.init_params(np.random.default_rng(0))
    batch = np.random.default_rng(1).normal(size=(5, 2))
    a = dsm_loss_and_grads(net, p, batch, NoiseSchedule(), np.random.default_rng(7))
    b = dsm_loss_and_grads(net, p, batch, NoiseSchedule(), np.random.default_rng(7))
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    with pytest.raises(InputError):
        dsm_loss_and_grads(net, p, np.zeros((0, 2)), NoiseSchedule(), np.random.default_rng(0))


def test_exact_gaussian_score_flow():
    # data N(m, s^2): p_t is N(m a, s^2 a^2 + std^2) with a = exp(-B/2)
    sched = NoiseSchedule()
    m, sd = 2.0, 0.5

    def score(t, x):
        a = sched.mean_coef(t)
        return -(x - m * a) / (sd**2 * a**2 + sched.std(t) ** 2)

    rng = np.random.default_rng(3)
    x1 = rng.normal(m * sched.mean_coef(1.0), np.sqrt(sd**2 * sched.mean_coef(1.0) ** 2 + sched.std(1.0) ** 2),
                    (2000, 1))
    out = probability_flow(score, x1, sched, t_end=1e-3)
    _, reject = ks_two_sample(out[:, 0], rng.normal(m, sd, 2000))
    assert not reject


def test_untrained_skip_net_preserves_standard_normal():
    net = ScoreNet(2, hidden=(8,), time_dim=4, skip=True)
    params = np.zeros(net.n_params)
    rng = np.random.default_rng(4)
    out = probability_flow(lambda t, y: net.score(params, y, t), rng.standard_normal((2000, 2)), net.schedule)
    for j in range(2):
        assert not ks_two_sample(out[:, j], rng.standard_normal(2000))[1]


def test_normalizer_modes():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(200, 4)) @ rng.normal(size=(4, 4))
    data = np.hstack([data, np.full((200, 1), 3.0)])
    for mode in ("pca", "zscore"):
        nz = Normalizer.fit(data, mode)
        assert nz.latent_width == 4 and np.all(nz.scale > 0)
        z = nz.transform(data)
        np.testing.assert_allclose(nz.inverse(z), data, atol=1e-10)
        np.testing.assert_allclose(z.std(axis=0), 1.0, rtol=1e-10)
    np.testing.assert_allclose(np.cov(Normalizer.fit(data).transform(data).T, bias=True), np.eye(4), atol=1e-10)
    with pytest.raises(ConfigError):
        Normalizer.fit(data, "minmax")
    with pytest.raises(ConfigError):
        Normalizer(np.zeros(2), np.eye(2), np.array([1.0, 0.0]))


def test_train_epochs_zero_and_errors():
    data = np.random.default_rng(0).normal(size=(10, 3))
    ck = train(data, epochs=0, seed=3)
    assert len(ck.loss_history) == 0 and ck.epochs == 0
    net = ck.net
    np.testing.assert_array_equal(ck.params, net.init_params(np.random.default_rng(3)))
    bad = data.copy()
    bad[4, 2] = np.nan
    with pytest.raises(InputError, match="row 4, coordinate 2"):
        train(bad, epochs=1)
    with pytest.raises(InputError):
        train(np.zeros((0, 3)))


def test_constant_data_checkpoint():
    ck = train(np.full((5, 3), 2.0), epochs=3)
    assert ck.latent_width == 0
    np.testing.assert_array_equal(sample(ck, 4, np.random.default_rng(0)), 2.0)


def test_train_is_deterministic_and_loss_decreases():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(256, 3)) * [1.0, 2.0, 0.5] + np.sin(rng.normal(size=(256, 1)))
    a = train(data, epochs=200, batch_size=64, seed=11, hidden=(32, 32))
    b = train(data, epochs=200, batch_size=64, seed=11, hidden=(32, 32))
    np.testing.assert_array_equal(a.params, b.params)
    assert not a.skip
    assert a.loss_history[-10:].mean() < a.loss_history[:10].mean()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_loss_decreases_on_bimodal_data(seed):
    rng = np.random.default_rng(seed)
    centers = np.array([[-3.0, 0.0], [3.0, 0.0]])
    data = centers[rng.integers(0, 2, 256)] + 0.5 * rng.normal(size=(256, 2))
    hist = train(data, epochs=200, batch_size=64, seed=seed, hidden=(32, 32)).loss_history
    assert hist[-10:].mean() < hist[:10].mean()


def test_skip_auto_rule():
    data = np.random.default_rng(0).normal(size=(64, 6))
    assert not train(data, epochs=0, hidden=(8, 8)).skip
    assert train(data, epochs=0, hidden=(8, 4)).skip
    assert train(data, epochs=0, hidden=(8, 8), skip=True).skip


def test_one_dim_normal_model():
    rng = np.random.default_rng(5)
    data = rng.standard_normal((512, 1))
    ck = train(data, epochs=500, batch_size=128, seed=0, hidden=(32, 32), normalization="zscore")
    out = sample(ck, 1000, np.random.default_rng(9))
    assert not ks_two_sample(out[:, 0], np.random.default_rng(10).standard_normal(1000))[1]


def test_sampling_contract(tmp_path):
    data = np.random.default_rng(2).normal(size=(40, 3))
    ck = train(data, epochs=2, batch_size=16, seed=1)
    a = sample(ck, 5, np.random.default_rng(3), steps=16)
    b = sample(ck, 5, np.random.default_rng(3), steps=16)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (5, 3)
    assert sample(ck, 0, np.random.default_rng(3)).shape == (0, 3)
    with pytest.raises(InputError):
        sample(ck, -1, np.random.default_rng(3))


def test_checkpoint_roundtrip(tmp_path):
    data = np.random.default_rng(2).normal(size=(40, 3))
    ck = train(data, epochs=3, batch_size=16, seed=1, fingerprint={"lyndon": "abc"})
    path = tmp_path / "ck.npz"
    ck.save(path)
    back = ScoreCheckpoint.load(path)
    np.testing.assert_array_equal(back.params, ck.params)
    np.testing.assert_array_equal(back.normalizer.components, ck.normalizer.components)
    assert back.fingerprint == {"lyndon": "abc"} and back.epochs == 3 and back.width == 3
    again = tmp_path / "again.npz"
    back.save(again)
    assert again.read_bytes() == path.read_bytes()
    with pytest.raises(InputError):
        ScoreCheckpoint.load(tmp_path / "missing.npz")
