"""Tests for the autodiff tape, encoder, heads and checkpoints."""

import numpy as np
import pytest

from halop.nets import (
    EncoderConfig,
    ExecutionNet,
    HeadConfig,
    Tensor,
    constant,
    linearized,
)

SMALL_ENC = EncoderConfig(n_features=4, window=8, channels=(6,), kernel=3,
                          stride=2, attn_heads=2, out_dim=5)
SMALL_HEAD = HeadConfig(hidden=7)


def make_net(seed=0, variant="halop", enc=SMALL_ENC, head=SMALL_HEAD):
    return ExecutionNet(enc, head, variant=variant, seed=seed)


def fd_full_check(net, loss_fn, rng, n_coords=150, h=1e-5, tol=1e-4):
    """Central finite differences over a random subset of parameters."""
    net.store.zero_grad()
    loss_fn().backward()
    analytic = net.store.flat_grad()
    theta0 = net.store.flat()
    coords = rng.choice(theta0.size, size=min(n_coords, theta0.size), replace=False)
    worst = 0.0
    for i in coords:
        for sign, out in ((1, "p"), (-1, "m")):
            theta = theta0.copy()
            theta[i] += sign * h
            net.store.set_flat(theta)
            if sign == 1:
                lp = loss_fn().item()
            else:
                lm = loss_fn().item()
        fd = (lp - lm) / (2 * h)
        a = analytic[i]
        denom = max(abs(a), abs(fd))
        if denom > 1e-7:
            worst = max(worst, abs(a - fd) / denom)
        else:
            worst = max(worst, 0.0 if abs(a - fd) < 1e-7 else 1.0)
    net.store.set_flat(theta0)
    assert worst < tol, f"worst relative error {worst}"


class TestAutodiffCore:
    def test_backward_requires_scalar(self):
        t = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            t.backward()

    def test_backward_without_recorded_graph(self):
        # a bare constant has no recorded forward graph to differentiate
        c = constant(5.0)
        with pytest.raises(RuntimeError):
            c.backward()

    def test_double_accumulation_is_exactly_twice(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        loss = (p * p).sum()
        loss.backward()
        g1 = p.grad.copy()
        loss.backward()
        assert np.array_equal(p.grad, 2 * g1)

    def test_constant_loss_zero_grads(self):
        p = Tensor(np.array([3.0]), requires_grad=True)
        loss = (p * 0.0).sum()
        loss.backward()
        assert np.array_equal(p.grad, np.zeros(1))

    def test_linearized_chains_local_grads(self):
        mu = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        sg = Tensor(np.array([0.5, 0.5]), requires_grad=True)
        value = np.array([10.0, 20.0])
        node = linearized(value, [mu, sg], [np.array([2.0, 3.0]), np.array([-1.0, 4.0])])
        (node * constant(np.array([1.0, 10.0]))).sum().backward()
        assert np.allclose(mu.grad, [2.0, 30.0])
        assert np.allclose(sg.grad, [-1.0, 40.0])

    def test_minimum_maximum_subgradients(self):
        a = Tensor(np.array([1.0, 5.0]), requires_grad=True)
        b = Tensor(np.array([2.0, 2.0]), requires_grad=True)
        a_grad_branch = a.minimum(b).sum()
        a_grad_branch.backward()
        assert np.array_equal(a.grad, [1.0, 0.0])
        assert np.array_equal(b.grad, [0.0, 1.0])

    def test_softmax_rows_sum_to_one(self):
        x = Tensor(np.random.default_rng(0).standard_normal((4, 6)), requires_grad=True)
        s = x.softmax(axis=-1)
        assert np.allclose(s.data.sum(axis=-1), 1.0)


class TestEncode:
    def test_zero_input_finite(self):
        net = make_net()
        out = net.encode(np.zeros((2, 8, 4)))
        assert np.isfinite(out.data).all()

    def test_deterministic(self):
        net = make_net()
        x = np.random.default_rng(1).standard_normal((3, 8, 4))
        a = net.encode(x).data
        b = net.encode(x).data
        assert np.array_equal(a, b)

    def test_same_seed_same_params(self):
        a = make_net(seed=9)
        b = make_net(seed=9)
        assert np.array_equal(a.store.flat(), b.store.flat())
        c = make_net(seed=10)
        assert not np.array_equal(a.store.flat(), c.store.flat())

    def test_temporal_sensitivity(self):
        # swapping two time steps must change the representation for a
        # randomly initialized encoder (generic position sensitivity)
        rng = np.random.default_rng(2)
        for seed in range(5):
            net = make_net(seed=seed)
            x = rng.standard_normal((1, 8, 4))
            swapped = x.copy()
            swapped[0, [1, 5]] = swapped[0, [5, 1]]
            a = net.encode(x).data
            b = net.encode(swapped).data
            assert not np.allclose(a, b, atol=1e-10)

    def test_shape_mismatch(self):
        net = make_net()
        with pytest.raises(ValueError, match="expected windows"):
            net.encode(np.zeros((2, 7, 4)))

    def test_single_window_promoted(self):
        net = make_net()
        out = net.encode(np.zeros((8, 4)))
        assert out.data.shape == (1, 5)


class TestHeads:
    def test_sigma_floor(self):
        net = make_net()
        rng = np.random.default_rng(3)
        rep = net.encode(rng.standard_normal((4, 8, 4)) * 50.0)
        _, sigma1 = net.actor_head(1, rep)
        _, sigma2 = net.actor_head(2, rep, rng.standard_normal((4, 3)))
        assert np.all(sigma1.data >= SMALL_HEAD.sigma_min)
        assert np.all(sigma2.data >= SMALL_HEAD.sigma_min)

    def test_deterministic_params(self):
        net = make_net()
        x = np.random.default_rng(4).standard_normal((2, 8, 4))
        rep = net.encode(x)
        mu_a, sg_a = net.actor_head(1, rep)
        mu_b, sg_b = net.actor_head(1, net.encode(x))
        assert np.array_equal(mu_a.data, mu_b.data)
        assert np.array_equal(sg_a.data, sg_b.data)

    def test_private_state_contract(self):
        net = make_net()
        rep = net.encode(np.zeros((1, 8, 4)))
        with pytest.raises(ValueError, match="private"):
            net.actor_head(2, rep)
        with pytest.raises(ValueError, match="public"):
            net.actor_head(1, rep, np.zeros(3))
        with pytest.raises(ValueError):
            net.actor_head(3, rep)

    def test_critic_finite_on_zero(self):
        net = make_net()
        rep = net.encode(np.zeros((1, 8, 4)))
        v1 = net.critic_head(1, rep)
        v2 = net.critic_head(2, rep, np.zeros(3))
        assert np.isfinite(v1.data).all() and np.isfinite(v2.data).all()


class TestGradientChecks:
    def test_actor_mu_gradient(self):
        net = make_net(seed=11)
        x = np.random.default_rng(5).standard_normal((3, 8, 4))
        priv = np.random.default_rng(6).standard_normal((3, 3))

        def loss():
            rep = net.encode(x)
            mu, _ = net.actor_head(2, rep, priv)
            return (mu * constant(np.array([1.0, -2.0, 0.5]))).sum()

        fd_full_check(net, loss, np.random.default_rng(7))

    def test_critic_gradient(self):
        net = make_net(seed=12)
        x = np.random.default_rng(8).standard_normal((2, 8, 4))

        def loss():
            return net.critic_head(1, net.encode(x)).square().sum()

        fd_full_check(net, loss, np.random.default_rng(9))

    def test_encoder_sum_gradient(self):
        net = make_net(seed=13)
        x = np.random.default_rng(10).standard_normal((2, 8, 4))

        def loss():
            return net.encode(x).sum()

        fd_full_check(net, loss, np.random.default_rng(11))

    def test_random_small_configs(self):
        rng = np.random.default_rng(14)
        for trial in range(3):
            heads = int(rng.choice([1, 2]))
            ch = int(rng.choice([4, 6])) * heads
            enc = EncoderConfig(n_features=int(rng.integers(2, 5)), window=8,
                                channels=(ch,), kernel=3, stride=2,
                                attn_heads=heads, out_dim=int(rng.integers(3, 7)))
            net = make_net(seed=trial, enc=enc, head=HeadConfig(hidden=5))
            x = rng.standard_normal((2, 8, enc.n_features))
            priv = rng.standard_normal((2, 3))

            def loss():
                rep = net.encode(x)
                mu1, sg1 = net.actor_head(1, rep)
                mu2, sg2 = net.actor_head(2, rep, priv)
                v = net.critic_head(2, rep, priv)
                return (mu1 + sg1 * 2.0).sum() + (mu2 * sg2).sum() + v.tanh().sum()

            fd_full_check(net, loss, rng, n_coords=80)


class TestSharedEncoder:
    def test_stage2_loss_touches_encoder_not_stage1_heads(self):
        net = make_net(seed=15)
        x = np.random.default_rng(16).standard_normal((2, 8, 4))
        priv = np.random.default_rng(17).standard_normal((2, 3))
        net.store.zero_grad()
        mu2, _ = net.actor_head(2, net.encode(x), priv)
        mu2.sum().backward()
        grads = {name: (None if p.grad is None else np.abs(p.grad).sum())
                 for name, p in net.store.items()}
        assert any(v for n, v in grads.items() if n.startswith("enc.") and v)
        assert all(not v for n, v in grads.items()
                   if n.startswith(("actor1.", "critic1.")) and v is not None)

    def test_stage2_update_changes_stage1_outputs(self):
        net = make_net(seed=18)
        x = np.random.default_rng(19).standard_normal((2, 8, 4))
        priv = np.random.default_rng(20).standard_normal((2, 3))
        mu1_before, _ = net.actor_head(1, net.encode(x))
        net.store.zero_grad()
        mu2, _ = net.actor_head(2, net.encode(x), priv)
        mu2.sum().backward()
        theta = net.store.flat() - 0.05 * net.store.flat_grad()
        net.store.set_flat(theta)
        mu1_after, _ = net.actor_head(1, net.encode(x))
        assert not np.allclose(mu1_before.data, mu1_after.data)


class TestConfigValidation:
    def test_window_stride_divisibility(self):
        with pytest.raises(ValueError, match="divisible"):
            EncoderConfig(window=6, channels=(4, 4), stride=2).validate()

    def test_heads_divide_channels(self):
        with pytest.raises(ValueError, match="heads"):
            EncoderConfig(window=8, channels=(6,), attn_heads=4).validate()

    def test_sigma_init_above_floor(self):
        with pytest.raises(ValueError, match="sigma_init"):
            HeadConfig(sigma_min=1e-3, sigma_init_stage1=1e-4).validate()


class TestCheckpoints:
    def test_round_trip_bit_exact(self, tmp_path):
        net = make_net(seed=21)
        path = tmp_path / "net.ckpt"
        net.save(path)
        loaded = ExecutionNet.load(path)
        for name in net.store.names():
            assert np.array_equal(net.store[name].data, loaded.store[name].data)
        assert loaded.variant == net.variant

    def test_resave_identical_bytes(self, tmp_path):
        net = make_net(seed=22)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        net.save(p1)
        ExecutionNet.load(p1).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(ValueError, match="checkpoint"):
            ExecutionNet.load(path)
