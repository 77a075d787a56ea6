"""Fast-weight programmers: gated/ungated updates and the model variants.

A slow programmer reads each input x_t and emits an update proposal plus
(in the gated variants) a scalar gate g_t = sigmoid(logit). The fast
programmer's parameters then evolve as

    ungated:  W_{t+1} = W_t + Delta_t
    gated:    W_{t+1} = g_t W_t + (1 - g_t) Delta_t

and the prediction at step t is produced by the fast programmer under the
pre-update state W_t. Because every (Delta_t, g_t) depends on x_t alone,
all slow-programmer passes for a window run as one batched forward, and
the recursion collapses into a single fused accumulation op whose
backward is the scalar-rescaled chain rule: dDelta_k = beta_{k} dW_T,
with beta the convex memory coefficients.

Variants (gate, slow programmer, fast programmer):
    fwp            no   mlp     linear
    g-fwp          yes  mlp     linear
    gqkan-fwp      yes  hqkan   linear
    g-qkanfwp      yes  mlp     hqkan
    gqkan-qkanfwp  yes  hqkan   hqkan

The classical linear fast programmer computes y = x W + b with the update
proposal formed as an outer product Delta W = L (x) D plus a bias update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .qkan import HqkanConfig, hqkan_forward, hqkan_forward_sampled, init_hqkan_params

__all__ = [
    "VARIANTS",
    "FastWeightModel",
    "VariantConfig",
    "additive_accumulate",
    "backward_through_time",
    "beta_coefficients",
    "gated_accumulate",
    "gated_step",
    "ungated_step",
]

# name -> (gated, slow_kind, fast_kind)
VARIANTS = {
    "fwp": (False, "mlp", "linear"),
    "g-fwp": (True, "mlp", "linear"),
    "gqkan-fwp": (True, "hqkan", "linear"),
    "g-qkanfwp": (True, "mlp", "hqkan"),
    "gqkan-qkanfwp": (True, "hqkan", "hqkan"),
}


def ungated_step(w: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Additive update; accumulates every proposal with coefficient one."""
    if w.shape != delta.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {delta.shape}")
    return w + delta


def gated_step(w: np.ndarray, delta: np.ndarray, g: float) -> np.ndarray:
    """Convex blend of retention and overwrite with a scalar gate."""
    if not 0.0 <= g <= 1.0:
        raise ValueError(f"gate {g} outside [0, 1]")
    if w.shape != delta.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {delta.shape}")
    return g * w + (1.0 - g) * delta


def beta_coefficients(gates) -> np.ndarray:
    """Convex memory coefficients (beta_{0,t}, beta_{1,t}, ..., beta_{t,t}).

    beta_0 weights the initial state, beta_k the k-th proposal; they are
    nonnegative and sum to one for gates in [0, 1].
    """
    g = np.asarray(gates, dtype=np.float64)
    if np.any((g < 0.0) | (g > 1.0)):
        raise ValueError("gates outside [0, 1]")
    t = g.shape[0]
    # suffix[k] = prod_{s >= k} g_s, suffix[t] = 1
    suffix = np.ones(t + 1)
    suffix[:t] = np.cumprod(g[::-1])[::-1]
    beta = np.empty(t + 1)
    beta[0] = suffix[0]
    beta[1:] = (1.0 - g) * suffix[1:]
    return beta


def backward_through_time(gates, w1, deltas, d_wT):
    """Reverse recursion through the gated trajectory (reference path).

    Given the loss gradient at the final pre-update state, returns
    (d_w1, d_deltas, d_gates) where d_deltas[k] = beta_{k} * d_wT and
    d_gates[k] = <d_{W_{k+1}}, W_k - Delta_k>.
    """
    g = np.asarray(gates, dtype=np.float64)
    w = np.asarray(w1, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    d_wT = np.asarray(d_wT, dtype=np.float64)
    S = g.shape[0]
    if deltas.shape != (S,) + w.shape or d_wT.shape != w.shape:
        raise ValueError("trajectory/gradient shape mismatch")
    pre = np.empty((S,) + w.shape)
    for s in range(S):
        pre[s] = w
        w = g[s] * w + (1.0 - g[s]) * deltas[s]
    d_w = d_wT.copy()
    d_deltas = np.empty_like(deltas)
    d_gates = np.empty(S)
    for s in range(S - 1, -1, -1):
        d_deltas[s] = (1.0 - g[s]) * d_w
        d_gates[s] = np.sum(d_w * (pre[s] - deltas[s]))
        d_w = g[s] * d_w
    return d_w, d_deltas, d_gates


def gated_accumulate(w1: tt.Tensor, gates: tt.Tensor, deltas: tt.Tensor) -> tt.Tensor:
    """Fused gated recursion: final pre-update state from S steps.

    w1 [F], gates [B, S], deltas [B, S, F] -> [B, F]. The backward pass
    is the scalar-rescaled reverse recursion (no dense Jacobians).
    """
    gd = gates.data
    dd = deltas.data
    B, S = gd.shape
    F = w1.data.shape[0]
    if dd.shape != (B, S, F):
        raise tt.NumericsError(f"deltas shape {dd.shape} != {(B, S, F)}")
    # closed convex-coefficient form: W_T = beta_0 W_1 + sum_k beta_k Delta_k
    # with beta_0 = prod g and beta_k = (1 - g_k) prod_{r>k} g_r, which is
    # algebraically identical to the step recursion but fully vectorized
    rev = np.cumprod(gd[:, ::-1], axis=1)[:, ::-1]  # rev[:, s] = prod_{r>=s}
    suf = np.empty_like(gd)
    suf[:, :-1] = rev[:, 1:]
    suf[:, -1] = 1.0
    beta0 = rev[:, 0]
    betak = (1.0 - gd) * suf
    w = beta0[:, None] * w1.data[None, :] + np.einsum("bs,bsf->bf", betak, dd)

    def bwd(gout):
        if deltas.requires_grad:
            tt._accum(deltas, betak[:, :, None] * gout[:, None, :])
        if gates.requires_grad:
            # dg_s = <dW_{s+1}, W_s - Delta_s> with dW_{s+1} = suf_s * dW_T;
            # c tracks <dW_T, W_s> through the forward recursion (scalars
            # per batch element, so this loop is cheap)
            d = np.einsum("bsf,bf->bs", dd, gout)
            c = gout @ w1.data
            d_g = np.empty((B, S))
            for s in range(S):
                d_g[:, s] = suf[:, s] * (c - d[:, s])
                c = gd[:, s] * c + (1.0 - gd[:, s]) * d[:, s]
            tt._accum(gates, d_g)
        if w1.requires_grad:
            tt._accum(w1, beta0 @ gout)

    return tt.register_op(w, (w1, gates, deltas), bwd, "gated_accumulate")


def additive_accumulate(w1: tt.Tensor, deltas: tt.Tensor) -> tt.Tensor:
    """Fused ungated recursion: W_T = W_1 + sum_k Delta_k."""
    dd = deltas.data
    B, S, F = dd.shape
    out = w1.data[None, :] + dd.sum(axis=1)

    def bwd(gout):
        if deltas.requires_grad:
            tt._accum(deltas, np.broadcast_to(gout[:, None, :], (B, S, F)).copy())
        if w1.requires_grad:
            tt._accum(w1, gout.sum(axis=0))

    return tt.register_op(out, (w1, deltas), bwd, "additive_accumulate")


@dataclass(frozen=True)
class VariantConfig:
    """Architecture of one model variant; dims are per-task settings."""

    name: str
    in_dim: int = 1
    out_dim: int = 1
    slow_hidden: int = 16  # mlp slow programmer width
    slow_latent: int = 4  # hqkan slow programmer latent width
    slow_layers: int = 2  # re-uploading depth of the hqkan slow programmer
    fast_latent: int = 4  # hqkan fast programmer latent width
    fast_layers: int = 2

    def __post_init__(self):
        if self.name not in VARIANTS:
            raise ValueError(
                f"unknown variant {self.name!r}; valid: {sorted(VARIANTS)}"
            )

    @property
    def gated(self) -> bool:
        return VARIANTS[self.name][0]

    @property
    def slow_kind(self) -> str:
        return VARIANTS[self.name][1]

    @property
    def fast_kind(self) -> str:
        return VARIANTS[self.name][2]

    @property
    def fast_cfg(self) -> HqkanConfig:
        return HqkanConfig(self.in_dim, self.fast_latent, self.out_dim,
                           self.fast_layers)

    @property
    def fast_dim(self) -> int:
        """Flat size of the fast state."""
        if self.fast_kind == "linear":
            return self.in_dim * self.out_dim + self.out_dim
        return self.fast_cfg.n_params

    @property
    def slow_out_dim(self) -> int:
        if self.fast_kind == "linear":
            base = self.in_dim + 2 * self.out_dim  # L, D, and bias update
        else:
            base = self.fast_dim
        return base + (1 if self.gated else 0)

    @property
    def slow_cfg(self) -> HqkanConfig | None:
        if self.slow_kind == "hqkan":
            return HqkanConfig(self.in_dim, self.slow_latent, self.slow_out_dim,
                               self.slow_layers)
        return None

    @property
    def slow_n_params(self) -> int:
        if self.slow_kind == "hqkan":
            return self.slow_cfg.n_params
        h, so = self.slow_hidden, self.slow_out_dim
        return self.in_dim * h + h + h * so + so

    @property
    def n_params(self) -> int:
        return self.slow_n_params + self.fast_dim


class FastWeightModel:
    """One variant with its full trainable parameter vector.

    Layout: [slow programmer parameters | initial fast state]. Both the
    initial fast state and every slow-programmer weight are trainable.
    """

    def __init__(self, cfg: VariantConfig):
        self.cfg = cfg

    @property
    def n_params(self) -> int:
        return self.cfg.n_params

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        cfg = self.cfg
        flat = np.empty(cfg.n_params)
        if cfg.slow_kind == "hqkan":
            slow = init_hqkan_params(cfg.slow_cfg, rng)
            from .qkan import unflatten_params

            parts = unflatten_params(cfg.slow_cfg, slow)
            parts["dec_w"] *= 0.1  # small initial proposals
            if cfg.gated:
                parts["dec_b"][-1] = 2.0  # start in the retention regime
        else:
            h, so = cfg.slow_hidden, cfg.slow_out_dim
            w1 = rng.normal(size=(cfg.in_dim, h)) / np.sqrt(cfg.in_dim)
            b1 = np.zeros(h)
            w2 = rng.normal(size=(h, so)) * (0.1 / np.sqrt(h))
            b2 = np.zeros(so)
            if cfg.gated:
                b2[-1] = 2.0
            slow = np.concatenate([w1.ravel(), b1, w2.ravel(), b2])
        if cfg.fast_kind == "linear":
            fast = np.concatenate(
                [
                    rng.normal(size=cfg.in_dim * cfg.out_dim) * 0.1,
                    np.zeros(cfg.out_dim),
                ]
            )
        else:
            fast = init_hqkan_params(cfg.fast_cfg, rng)
        flat[: cfg.slow_n_params] = slow
        flat[cfg.slow_n_params :] = fast
        return flat

    # --- forward pieces -------------------------------------------------

    def _slow_forward(self, params: tt.Tensor, x: tt.Tensor) -> tt.Tensor:
        """Slow programmer on a batch of raw inputs x [N, in] -> [N, so]."""
        cfg = self.cfg
        if cfg.slow_kind == "hqkan":
            sp = tt.slice_last(params, 0, cfg.slow_n_params)
            return hqkan_forward(cfg.slow_cfg, sp, x)
        h, so = cfg.slow_hidden, cfg.slow_out_dim
        o0 = 0
        o1 = o0 + cfg.in_dim * h
        o2 = o1 + h
        o3 = o2 + h * so
        o4 = o3 + so
        w1 = tt.reshape(tt.slice_last(params, o0, o1), (cfg.in_dim, h))
        b1 = tt.slice_last(params, o1, o2)
        w2 = tt.reshape(tt.slice_last(params, o2, o3), (h, so))
        b2 = tt.slice_last(params, o3, o4)
        hid = tt.tanh(tt.add_rowvec(tt.matmul(x, w1), b1))
        return tt.add_rowvec(tt.matmul(hid, w2), b2)

    def _heads(self, slow_out: tt.Tensor):
        """Split slow output [.., so] into (delta [.., F], gate logit or None)."""
        cfg = self.cfg
        so = cfg.slow_out_dim
        logit = tt.slice_last(slow_out, so - 1, so) if cfg.gated else None
        if cfg.fast_kind == "linear":
            m, n = cfg.in_dim, cfg.out_dim
            l_head = tt.slice_last(slow_out, 0, m)
            d_head = tt.slice_last(slow_out, m, m + n)
            b_head = tt.slice_last(slow_out, m + n, m + 2 * n)
            delta = tt.concat_last(tt.outer_last(l_head, d_head), b_head)
        else:
            delta = tt.slice_last(slow_out, 0, cfg.fast_dim)
        return delta, logit

    def _fast_forward(self, w: tt.Tensor, x_last: tt.Tensor) -> tt.Tensor:
        """Fast programmer under per-sample state w [B, F] at input [B, in]."""
        cfg = self.cfg
        if cfg.fast_kind == "linear":
            m, n = cfg.in_dim, cfg.out_dim
            B = w.data.shape[0]
            wmat = tt.reshape(tt.slice_last(w, 0, m * n), (B, m, n))
            bias = tt.slice_last(w, m * n, m * n + n)
            return tt.add(tt.bmm(x_last, wmat), bias)
        return hqkan_forward(cfg.fast_cfg, w, x_last)

    def forward(self, params: tt.Tensor, xs: np.ndarray, return_state: bool = False):
        """Run the full sequence; returns the final-step prediction [B, out].

        xs: [B, T, in_dim]. The prediction uses the pre-update state W_T,
        i.e. proposals from steps 1..T-1; step T's proposal never
        influences its own output.
        """
        cfg = self.cfg
        xs = np.asarray(xs, dtype=np.float64)
        B, T, in_dim = xs.shape
        if in_dim != cfg.in_dim or T < 1:
            raise tt.NumericsError(f"bad input shape {xs.shape}")
        w1 = tt.slice_last(params, cfg.slow_n_params, cfg.n_params)
        S = T - 1
        if S == 0:
            # broadcast the initial state across the batch via a zero add
            zeros = tt.Tensor(np.zeros((B, cfg.fast_dim)))
            w_final = tt.add_rowvec(zeros, w1)
            gates_np = np.zeros((B, 0))
        else:
            x_steps = tt.Tensor(xs[:, :S].reshape(B * S, in_dim))
            slow_out = self._slow_forward(params, x_steps)
            slow_out = tt.reshape(slow_out, (B, S, cfg.slow_out_dim))
            delta, logit = self._heads(slow_out)
            if cfg.gated:
                gates = tt.reshape(tt.sigmoid(logit), (B, S))
                w_final = gated_accumulate(w1, gates, delta)
                gates_np = gates.data
            else:
                w_final = additive_accumulate(w1, delta)
                gates_np = np.ones((B, S))
        y = self._fast_forward(w_final, tt.Tensor(xs[:, -1]))
        if return_state:
            return y, {"w_final": w_final.data, "gates": gates_np}
        return y

    # --- inference-only paths -------------------------------------------

    def forward_sampled(self, params: np.ndarray, xs: np.ndarray, shots: int,
                        rng: np.random.Generator) -> np.ndarray:
        """Final prediction with finite-shot fast-programmer activations.

        The slow programmer and the gated recursion run exactly; only the
        fast programmer's expectation values are shot-sampled.
        """
        if self.cfg.fast_kind != "linear":
            _, state = self.forward(tt.Tensor(params), xs, return_state=True)
            return hqkan_forward_sampled(
                self.cfg.fast_cfg, state["w_final"], xs[:, -1], shots, rng
            )
        raise ValueError("shot sampling requires a DARUAN fast programmer")

    def trajectory(self, params: np.ndarray, xs_single: np.ndarray) -> dict:
        """Full per-step record for one window [T, in]: gates, proposals,
        pre-update states, convex coefficients, and the prediction."""
        cfg = self.cfg
        xs = np.asarray(xs_single, dtype=np.float64)[None]  # [1, T, in]
        T = xs.shape[1]
        pt = tt.Tensor(params)
        slow_out = self._slow_forward(pt, tt.Tensor(xs[0])).data  # [T, so]
        delta, logit = self._heads(tt.Tensor(slow_out))
        deltas = delta.data
        if cfg.gated:
            gates = 1.0 / (1.0 + np.exp(-logit.data[:, 0]))
        else:
            gates = np.ones(T)
        w1 = params[cfg.slow_n_params :]
        pre = np.empty((T, cfg.fast_dim))
        w = w1.copy()
        for t in range(T):
            pre[t] = w
            if cfg.gated:
                w = gated_step(w, deltas[t], gates[t])
            else:
                w = ungated_step(w, deltas[t])
        y = self.forward(pt, xs).data[0]
        betas = beta_coefficients(gates[: T - 1]) if cfg.gated else None
        return {
            "gates": gates,
            "deltas": deltas,
            "pre_states": pre,
            "betas": betas,
            "y": y,
        }
