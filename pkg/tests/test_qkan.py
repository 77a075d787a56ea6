"""Encoder / edge-grid / decoder network: sizing, gradients, sampling."""

import numpy as np
import pytest

from gqfwp import tensor as tt
from gqfwp.qkan import (
    HqkanConfig,
    hqkan_forward,
    hqkan_forward_sampled,
    init_hqkan_params,
    qkan_apply,
    unflatten_params,
)


def test_param_count_worked_example():
    # in=1, latent=2, out=1, 2 layers: enc 2+2, edges 4*10, dec 2+1
    cfg = HqkanConfig(in_dim=1, latent=2, out_dim=1, layers=2)
    assert cfg.n_params == 47
    assert cfg.offsets()[-1] == 47


def test_unflatten_views_alias_flat_vector():
    cfg = HqkanConfig(in_dim=2, latent=3, out_dim=2)
    flat = np.zeros(cfg.n_params)
    parts = unflatten_params(cfg, flat)
    parts["dec_b"][:] = 7.0
    assert flat[-cfg.out_dim:].tolist() == [7.0, 7.0]
    with pytest.raises(ValueError):
        unflatten_params(cfg, np.zeros(cfg.n_params + 1))


def central_diff(f, x, eps=1e-6):
    g = np.empty_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp = x.copy()
        xp[i] += eps
        xm = x.copy()
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g


def _loss_shared(cfg, flat, x0, up):
    with tt.Tape():
        y = hqkan_forward(cfg, tt.Tensor(flat), tt.Tensor(x0))
        return float((y.data * up).sum())


def test_shared_params_gradients_match_fd():
    rng = np.random.default_rng(0)
    cfg = HqkanConfig(in_dim=2, latent=3, out_dim=2, layers=2)
    flat = init_hqkan_params(cfg, rng)
    x0 = rng.normal(size=(4, 2))
    up = rng.normal(size=(4, 2))
    with tt.Tape() as tape:
        p = tt.Tensor(flat, requires_grad=True)
        x = tt.Tensor(x0, requires_grad=True)
        y = hqkan_forward(cfg, p, x)
        tape.backward(tt.tsum(tt.mul(y, tt.Tensor(up))))
    fd_p = central_diff(lambda v: _loss_shared(cfg, v, x0, up), flat)
    fd_x = central_diff(lambda v: _loss_shared(cfg, flat, v, up), x0)
    assert np.abs(p.grad - fd_p).max() < 1e-7
    assert np.abs(x.grad - fd_x).max() < 1e-7


def test_per_sample_params_gradients_match_fd():
    rng = np.random.default_rng(1)
    cfg = HqkanConfig(in_dim=1, latent=2, out_dim=1, layers=2)
    B = 3
    flat = np.stack([init_hqkan_params(cfg, rng) for _ in range(B)])
    flat += 0.05 * rng.normal(size=flat.shape)
    x0 = rng.normal(size=(B, 1))
    up = rng.normal(size=(B, 1))

    def loss(v):
        with tt.Tape():
            y = hqkan_forward(cfg, tt.Tensor(v), tt.Tensor(x0))
            return float((y.data * up).sum())

    with tt.Tape() as tape:
        p = tt.Tensor(flat, requires_grad=True)
        y = hqkan_forward(cfg, p, tt.Tensor(x0))
        tape.backward(tt.tsum(tt.mul(y, tt.Tensor(up))))
    fd = central_diff(loss, flat)
    assert np.abs(p.grad - fd).max() < 1e-7


def test_per_sample_with_tiled_params_matches_shared():
    rng = np.random.default_rng(2)
    cfg = HqkanConfig(in_dim=2, latent=2, out_dim=3, layers=1)
    flat = init_hqkan_params(cfg, rng)
    x0 = rng.normal(size=(5, 2))
    with tt.Tape():
        y_shared = hqkan_forward(cfg, tt.Tensor(flat), tt.Tensor(x0)).data
        tiled = np.tile(flat, (5, 1))
        y_per = hqkan_forward(cfg, tt.Tensor(tiled), tt.Tensor(x0)).data
    assert np.abs(y_shared - y_per).max() < 1e-14


def test_qkan_apply_is_edge_sum():
    """node_j equals the sum over i of the i->j edge activation."""
    from gqfwp.daruan import daruan_forward, init_edge_params

    rng = np.random.default_rng(3)
    edges = init_edge_params(2, rng, size=(3 * 2,))  # 3 inputs, 2 outputs
    x0 = rng.normal(size=(4, 3))
    with tt.Tape():
        out = qkan_apply(tt.Tensor(edges), tt.Tensor(x0), 3, 2).data
    grid = edges.reshape(3, 2, -1)
    for b in range(4):
        for j in range(2):
            ref = sum(daruan_forward(grid[i, j], x0[b, i]) for i in range(3))
            assert abs(out[b, j] - ref) < 1e-12


def test_sampled_forward_exact_when_shots_none():
    rng = np.random.default_rng(4)
    cfg = HqkanConfig(in_dim=2, latent=3, out_dim=2, layers=2)
    flat = init_hqkan_params(cfg, rng)
    x0 = rng.normal(size=(6, 2))
    with tt.Tape():
        exact = hqkan_forward(cfg, tt.Tensor(flat), tt.Tensor(x0)).data
    sampled = hqkan_forward_sampled(cfg, flat, x0, shots=None)
    assert np.abs(exact - sampled).max() < 1e-14
    # per-sample path too
    tiled = np.tile(flat, (6, 1))
    sampled_ps = hqkan_forward_sampled(cfg, tiled, x0, shots=None)
    assert np.abs(exact - sampled_ps).max() < 1e-14


def test_sampled_forward_converges_with_shots():
    rng = np.random.default_rng(5)
    cfg = HqkanConfig(in_dim=1, latent=2, out_dim=1, layers=2)
    flat = init_hqkan_params(cfg, rng)
    x0 = rng.normal(size=(8, 1))
    exact = hqkan_forward_sampled(cfg, flat, x0, shots=None)
    errs = []
    for shots in (16, 4096):
        reps = [
            hqkan_forward_sampled(cfg, flat, x0, shots, np.random.default_rng(100 + r))
            for r in range(30)
        ]
        errs.append(np.mean([(r - exact) ** 2 for r in reps]))
    # variance scales like 1/shots: 256x more shots, expect ~256x smaller
    assert errs[1] < errs[0] / 50


def test_shape_contracts():
    cfg = HqkanConfig(in_dim=2, latent=2, out_dim=1)
    flat = np.zeros(cfg.n_params)
    with pytest.raises(tt.NumericsError):
        hqkan_forward(cfg, tt.Tensor(flat), tt.Tensor(np.zeros((3, 5))))
    with pytest.raises(tt.NumericsError):
        hqkan_forward(cfg, tt.Tensor(np.zeros(cfg.n_params - 1)), tt.Tensor(np.zeros((3, 2))))
