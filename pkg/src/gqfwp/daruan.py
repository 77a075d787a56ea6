"""Exact single-qubit data re-uploading activations.

Each activation is the Pauli-Z expectation of a single qubit driven by L
re-uploading layers, followed by a trainable affine output:

    y(x) = s * <Z> + o,   <Z> = <0| U(x)^dag Z U(x) |0>,
    U(x) = prod_{l=L..1} RY(phi_l) RZ(theta_l) RY(w_l * x + b_l)

(layer 1 applied first). Repeating the data rotation across layers gives
the activation an L-frequency Fourier spectrum in x.

All kernels are vectorized over arbitrary leading axes so a whole grid of
edges (and a batch of inputs) is simulated with a handful of numpy calls.
Gradients are computed analytically with an adjoint sweep over the 3L
gates; the parameter-shift rule is provided purely as a test oracle.

Packed parameter layout per edge (length 4L+2, layer-major):
    [w_1, b_1, theta_1, phi_1, ..., w_L, b_L, theta_L, phi_L, s, o]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DaruanEdge",
    "daruan_backward",
    "daruan_forward",
    "daruan_forward_cached",
    "daruan_grad",
    "daruan_sample",
    "gate_norms",
    "init_edge_params",
    "num_params",
    "parameter_shift",
    "unpack_params",
]


def num_params(layers: int) -> int:
    return 4 * layers + 2


def unpack_params(params: np.ndarray):
    """Split packed [..., 4L+2] parameters into (w, b, theta, phi, s, o).

    The per-layer blocks have shape [..., L]; s and o have the leading shape.
    """
    p = np.asarray(params, dtype=np.float64)
    if (p.shape[-1] - 2) % 4 != 0:
        raise ValueError(f"bad packed parameter length {p.shape[-1]}")
    L = (p.shape[-1] - 2) // 4
    body = p[..., : 4 * L].reshape(p.shape[:-1] + (L, 4))
    return (
        body[..., 0],
        body[..., 1],
        body[..., 2],
        body[..., 3],
        p[..., 4 * L],
        p[..., 4 * L + 1],
    )


def _apply_ry(al, be, t):
    c = np.cos(0.5 * t)
    s = np.sin(0.5 * t)
    return c * al - s * be, s * al + c * be


def _apply_rz(al, be, t):
    e = np.exp(-0.5j * t)
    return e * al, np.conj(e) * be


def daruan_forward_cached(params: np.ndarray, x: np.ndarray):
    """Expectation forward pass; returns (y, cache) with cache for backward.

    params: [..., 4L+2]; x broadcastable against the leading shape.
    """
    w, b, theta, phi, s, o = unpack_params(params)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to activation")
    L = w.shape[-1]
    shape = np.broadcast_shapes(w.shape[:-1], x.shape)
    al = np.ones(shape, dtype=np.complex128)
    be = np.zeros(shape, dtype=np.complex128)
    states = [(al, be)]
    angles = []
    for l in range(L):
        t = w[..., l] * x + b[..., l]
        angles.append(t)
        al, be = _apply_ry(al, be, t)
        states.append((al, be))
        angles.append(theta[..., l])
        al, be = _apply_rz(al, be, theta[..., l])
        states.append((al, be))
        angles.append(phi[..., l])
        al, be = _apply_ry(al, be, phi[..., l])
        states.append((al, be))
    z = (al.real**2 + al.imag**2) - (be.real**2 + be.imag**2)
    y = s * z + o
    cache = (states, angles, w, x, s, z, L, shape)
    return y, cache


def daruan_forward(params: np.ndarray, x) -> np.ndarray:
    """s * <Z> + o for packed parameters; vectorized over leading axes."""
    y, _ = daruan_forward_cached(params, x)
    return y


def daruan_backward(cache, upstream):
    """Adjoint sweep: gradients of sum(upstream * y) w.r.t. params and x.

    Returns (dparams [..., 4L+2], dx) with dx summed over nothing (same
    leading shape as the forward broadcast); the caller reduces dx onto
    the actual x shape if x was broadcast.
    """
    states, angles, w, x, s, z, L, shape = cache
    upstream = np.broadcast_to(np.asarray(upstream, dtype=np.float64), shape)
    al, be = states[-1]
    # lambda = Z |psi>
    lam0 = al.copy()
    lam1 = -be
    dang = [None] * (3 * L)
    for k in range(3 * L - 1, -1, -1):
        a0, b0 = states[k]
        t = angles[k]
        if k % 3 == 1:  # RZ gate
            e = np.exp(-0.5j * t)
            g0 = -0.5j * e * a0
            g1 = 0.5j * np.conj(e) * b0
            dang[k] = 2.0 * (np.conj(lam0) * g0 + np.conj(lam1) * g1).real
            lam0, lam1 = np.conj(e) * lam0, e * lam1
        else:  # RY gate
            c = np.cos(0.5 * t)
            sn = np.sin(0.5 * t)
            g0 = 0.5 * (-sn * a0 - c * b0)
            g1 = 0.5 * (c * a0 - sn * b0)
            dang[k] = 2.0 * (np.conj(lam0) * g0 + np.conj(lam1) * g1).real
            lam0, lam1 = c * lam0 + sn * lam1, -sn * lam0 + c * lam1
    us = upstream * s
    dparams = np.zeros(shape + (4 * L + 2,))
    dx = np.zeros(shape)
    for l in range(L):
        d_data = us * dang[3 * l]
        dparams[..., 4 * l + 0] = d_data * x
        dparams[..., 4 * l + 1] = d_data
        dparams[..., 4 * l + 2] = us * dang[3 * l + 1]
        dparams[..., 4 * l + 3] = us * dang[3 * l + 2]
        dx += d_data * w[..., l]
    dparams[..., 4 * L] = upstream * z
    dparams[..., 4 * L + 1] = upstream
    return dparams, dx


def daruan_sample(params: np.ndarray, x, shots: int, rng: np.random.Generator):
    """Finite-shot estimate: N Bernoulli outcomes of Z, then s*mean(z)+o."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    y_exact, cache = daruan_forward_cached(params, x)
    _, _, _, _, s, z, _, _ = cache
    _, _, _, _, _, o = unpack_params(params)
    p_plus = np.clip((1.0 + z) / 2.0, 0.0, 1.0)
    k = rng.binomial(shots, p_plus)
    mean_z = 2.0 * k / shots - 1.0
    return s * mean_z + o


def gate_norms(params: np.ndarray, x) -> np.ndarray:
    """State norms after each of the 3L gates (norm-preservation check)."""
    _, cache = daruan_forward_cached(params, x)
    states = cache[0]
    return np.stack(
        [np.abs(a) ** 2 + np.abs(b) ** 2 for a, b in states[1:]], axis=-1
    )


def parameter_shift(params: np.ndarray, x, index: int) -> np.ndarray:
    """(f(p + pi/2 e_i) - f(p - pi/2 e_i)) / 2 for a rotation-angle index.

    Valid for the theta/phi entries (generator spectrum +-1/2); w and b
    carry an extra chain-rule factor and are not plain shift angles.
    """
    p = np.asarray(params, dtype=np.float64)
    plus = p.copy()
    minus = p.copy()
    plus[..., index] += np.pi / 2
    minus[..., index] -= np.pi / 2
    return (daruan_forward(plus, x) - daruan_forward(minus, x)) / 2.0


@dataclass
class DaruanEdge:
    """Parameters of one activation: per-layer (w, b, theta, phi) + (s, o)."""

    w: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    s: float = 1.0
    o: float = 0.0

    @property
    def layers(self) -> int:
        return len(self.w)

    def to_flat(self) -> np.ndarray:
        L = self.layers
        flat = np.empty(4 * L + 2)
        flat[0 : 4 * L : 4] = self.w
        flat[1 : 4 * L : 4] = self.b
        flat[2 : 4 * L : 4] = self.theta
        flat[3 : 4 * L : 4] = self.phi
        flat[4 * L] = self.s
        flat[4 * L + 1] = self.o
        return flat

    @classmethod
    def from_flat(cls, flat: np.ndarray) -> "DaruanEdge":
        w, b, theta, phi, s, o = unpack_params(flat)
        return cls(w=w.copy(), b=b.copy(), theta=theta.copy(), phi=phi.copy(),
                   s=float(s), o=float(o))


def init_edge_params(layers: int, rng: np.random.Generator, size=()) -> np.ndarray:
    """Near-identity init: small angles, data weights scaled by 1/L, s=1, o=0.

    Returns packed parameters of shape size + (4L+2,).
    """
    size = tuple(size)
    p = np.zeros(size + (num_params(layers),))
    for l in range(layers):
        p[..., 4 * l + 0] = rng.uniform(-1.0, 1.0, size) / layers
        p[..., 4 * l + 1] = rng.uniform(-np.pi / 8, np.pi / 8, size)
        p[..., 4 * l + 2] = rng.uniform(-np.pi / 8, np.pi / 8, size)
        p[..., 4 * l + 3] = rng.uniform(-np.pi / 8, np.pi / 8, size)
    p[..., 4 * layers] = 1.0
    return p


def daruan_grad(edge: DaruanEdge, x: float, upstream: float = 1.0):
    """Analytic gradient record for a single edge at scalar input x.

    Returns a dict with per-layer arrays 'w', 'b', 'theta', 'phi', scalars
    's', 'o', and the input derivative 'x', all scaled by upstream.
    """
    flat = edge.to_flat()
    _, cache = daruan_forward_cached(flat, np.float64(x))
    dparams, dx = daruan_backward(cache, np.float64(upstream))
    L = edge.layers
    return {
        "w": dparams[0 : 4 * L : 4].copy(),
        "b": dparams[1 : 4 * L : 4].copy(),
        "theta": dparams[2 : 4 * L : 4].copy(),
        "phi": dparams[3 : 4 * L : 4].copy(),
        "s": float(dparams[4 * L]),
        "o": float(dparams[4 * L + 1]),
        "x": float(dx),
    }
