"""Single-qubit re-uploading activations: forward values, adjoint
gradients, the parameter-shift oracle, and shot statistics."""

import numpy as np
import pytest

from gqfwp.daruan import (
    DaruanEdge,
    daruan_backward,
    daruan_forward,
    daruan_forward_cached,
    daruan_grad,
    daruan_sample,
    gate_norms,
    init_edge_params,
    num_params,
    parameter_shift,
    unpack_params,
)


def chain_oracle(params, x):
    """Independent forward: explicit 2x2 matrix products."""
    w, b, theta, phi, s, o = unpack_params(params)
    psi = np.array([1.0, 0.0], dtype=np.complex128)

    def ry(t):
        c, sn = np.cos(t / 2), np.sin(t / 2)
        return np.array([[c, -sn], [sn, c]], dtype=np.complex128)

    def rz(t):
        return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])

    for l in range(w.shape[-1]):
        psi = ry(phi[l]) @ rz(theta[l]) @ ry(w[l] * x + b[l]) @ psi
    z = abs(psi[0]) ** 2 - abs(psi[1]) ** 2
    return s * z + o


def test_forward_matches_matrix_chain():
    rng = np.random.default_rng(0)
    for L in (1, 2, 3):
        p = init_edge_params(L, rng)
        for x in (-1.3, 0.0, 0.7):
            assert abs(daruan_forward(p, x) - chain_oracle(p, x)) < 1e-12


def test_identity_circuit_fixed_point():
    # all angles zero: state stays |0>, so <Z> = 1 and y = s + o
    p = np.zeros(num_params(2))
    p[-2] = 1.7  # s
    p[-1] = -0.4  # o
    assert abs(daruan_forward(p, 5.0) - 1.3) < 1e-15


def test_norm_preserved_through_gates():
    rng = np.random.default_rng(1)
    p = init_edge_params(3, rng, size=(4,))
    norms = gate_norms(p, np.array([0.3, -2.0, 1.0, 0.0]))
    assert np.abs(norms - 1.0).max() < 1e-12


def test_adjoint_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    p = init_edge_params(2, rng)
    x = 0.85
    _, cache = daruan_forward_cached(p, np.float64(x))
    dp, dx = daruan_backward(cache, np.float64(1.0))
    eps = 1e-6
    for i in range(p.size):
        pp, pm = p.copy(), p.copy()
        pp[i] += eps
        pm[i] -= eps
        fd = (daruan_forward(pp, x) - daruan_forward(pm, x)) / (2 * eps)
        assert abs(dp[i] - fd) < 1e-8
    fdx = (daruan_forward(p, x + eps) - daruan_forward(p, x - eps)) / (2 * eps)
    assert abs(dx - fdx) < 1e-8


def test_parameter_shift_oracle():
    """Analytic theta/phi gradients equal the +-pi/2 shift formula."""
    rng = np.random.default_rng(3)
    L = 2
    p = init_edge_params(L, rng)
    x = -0.4
    _, cache = daruan_forward_cached(p, np.float64(x))
    dp, _ = daruan_backward(cache, np.float64(1.0))
    for l in range(L):
        for idx in (4 * l + 2, 4 * l + 3):  # theta_l, phi_l
            assert abs(dp[idx] - parameter_shift(p, x, idx)) < 1e-10


def test_edge_record_roundtrip_and_grad_keys():
    rng = np.random.default_rng(4)
    flat = init_edge_params(2, rng)
    edge = DaruanEdge.from_flat(flat)
    assert np.array_equal(edge.to_flat(), flat)
    rec = daruan_grad(edge, 0.3, upstream=2.0)
    assert set(rec) == {"w", "b", "theta", "phi", "s", "o", "x"}
    # do/dy = upstream exactly
    assert rec["o"] == 2.0


def test_fourier_band_limit():
    """L layers admit at most L frequencies: an (L+1)-th harmonic probe
    integrates to zero against the activation."""
    rng = np.random.default_rng(5)
    L = 2
    p = init_edge_params(L, rng)
    # force unit data weights so the frequency axis is x itself
    for l in range(L):
        p[4 * l] = 1.0
    xs = np.linspace(-np.pi, np.pi, 4096, endpoint=False)
    ys = daruan_forward(p, xs)
    for k in (L + 1, L + 2):
        c = np.mean(ys * np.exp(-1j * k * xs))
        assert abs(c) < 1e-10


def test_shot_sampling_statistics():
    rng = np.random.default_rng(6)
    p = init_edge_params(2, rng)
    x = 0.2
    exact = daruan_forward(p, x)
    shots = 4096
    reps = np.array([
        daruan_sample(p, x, shots, np.random.default_rng(1000 + r))
        for r in range(200)
    ])
    w, b, theta, phi, s, o = unpack_params(p)
    z = (exact - o) / s
    predicted_var = s**2 * (1.0 - z**2) / shots
    assert abs(reps.mean() - exact) < 5 * np.sqrt(predicted_var / 200)
    assert 0.5 < reps.var() / predicted_var < 2.0


def test_sample_rejects_bad_shots():
    p = init_edge_params(1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        daruan_sample(p, 0.0, 0, np.random.default_rng(0))


def test_vectorized_forward_matches_scalar_loop():
    rng = np.random.default_rng(7)
    grid = init_edge_params(2, rng, size=(3, 5))
    xs = rng.normal(size=(4, 1, 1))  # broadcast over the edge grid
    ys = daruan_forward(grid, xs)
    assert ys.shape == (4, 3, 5)
    for i in range(3):
        for j in range(5):
            for k in range(4):
                assert abs(ys[k, i, j] - daruan_forward(grid[i, j], xs[k, 0, 0])) < 1e-14
