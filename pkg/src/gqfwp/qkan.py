"""QKAN layers and the encoder-processor-decoder programmer network.

A QKAN layer places one re-uploading activation on every (input, output)
edge and sums edge outputs at each node. The full network sandwiches one
QKAN layer between an affine encoder and an affine decoder; the encoder
and decoder are pure affine maps, so all nonlinearity comes from the
activations.

Every network is owned by a single flat float64 parameter vector with a
fixed documented ordering (encoder weights row-major, encoder bias, edge
activation parameters edge-row-major / layer-major, decoder weights,
decoder bias). The same forward works with a shared parameter vector [P]
or a per-sample batch of parameter vectors [B, P]; the latter is what the
fast programmer uses when its parameters evolve over time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .daruan import (
    daruan_backward,
    daruan_forward,
    daruan_forward_cached,
    daruan_sample,
    init_edge_params,
    num_params,
)

__all__ = [
    "HqkanConfig",
    "hqkan_forward",
    "hqkan_forward_sampled",
    "init_hqkan_params",
    "qkan_apply",
    "unflatten_params",
]


@dataclass(frozen=True)
class HqkanConfig:
    in_dim: int
    latent: int
    out_dim: int
    layers: int = 2

    @property
    def edge_params(self) -> int:
        return num_params(self.layers)

    @property
    def n_edges(self) -> int:
        return self.latent * self.latent

    @property
    def n_params(self) -> int:
        enc = self.in_dim * self.latent + self.latent
        qkan = self.n_edges * self.edge_params
        dec = self.latent * self.out_dim + self.out_dim
        return enc + qkan + dec

    def offsets(self):
        """(enc_w, enc_b, qkan, dec_w, dec_b) start offsets plus total."""
        o0 = 0
        o1 = o0 + self.in_dim * self.latent
        o2 = o1 + self.latent
        o3 = o2 + self.n_edges * self.edge_params
        o4 = o3 + self.latent * self.out_dim
        o5 = o4 + self.out_dim
        return o0, o1, o2, o3, o4, o5


def unflatten_params(cfg: HqkanConfig, flat: np.ndarray) -> dict:
    """Views into a flat [P] vector; mutating a view mutates the vector."""
    flat = np.asarray(flat)
    if flat.shape != (cfg.n_params,):
        raise ValueError(f"expected flat shape ({cfg.n_params},), got {flat.shape}")
    o0, o1, o2, o3, o4, o5 = cfg.offsets()
    return {
        "enc_w": flat[o0:o1].reshape(cfg.in_dim, cfg.latent),
        "enc_b": flat[o1:o2],
        "edges": flat[o2:o3].reshape(cfg.latent, cfg.latent, cfg.edge_params),
        "dec_w": flat[o3:o4].reshape(cfg.latent, cfg.out_dim),
        "dec_b": flat[o4:o5],
    }


def init_hqkan_params(cfg: HqkanConfig, rng: np.random.Generator) -> np.ndarray:
    flat = np.zeros(cfg.n_params)
    parts = unflatten_params(cfg, flat)
    parts["enc_w"][:] = rng.normal(size=parts["enc_w"].shape) / np.sqrt(cfg.in_dim)
    parts["edges"][:] = init_edge_params(cfg.layers, rng, size=(cfg.latent, cfg.latent))
    parts["dec_w"][:] = rng.normal(size=parts["dec_w"].shape) / np.sqrt(cfg.latent)
    return flat


def qkan_apply(params: tt.Tensor, x: tt.Tensor, in_dim: int, out_dim: int) -> tt.Tensor:
    """Edge-grid activation layer: node_j = sum_i phi_ij(x_i).

    params: [E, K] shared or [B, E, K] per-sample, E = in_dim*out_dim,
    K = activation parameter count. x: [B, in_dim]. Returns [B, out_dim].
    """
    pd = params.data
    per_sample = pd.ndim == 3
    B = x.data.shape[0]
    K = pd.shape[-1]
    lead = (B,) if per_sample else ()
    pgrid = pd.reshape(lead + (in_dim, out_dim, K))
    xe = x.data[:, :, None]  # [B, in, 1] broadcast against edge grid
    y_edge, cache = daruan_forward_cached(pgrid, xe)  # [B, in, out]
    out = y_edge.sum(axis=1)

    def bwd(g):
        dparams, dx = daruan_backward(cache, g[:, None, :])
        if x.requires_grad:
            tt._accum(x, dx.sum(axis=2))
        if params.requires_grad:
            if per_sample:
                tt._accum(params, dparams.reshape(B, in_dim * out_dim, K))
            else:
                tt._accum(params, dparams.sum(axis=0).reshape(in_dim * out_dim, K))

    return tt.register_op(out, (params, x), bwd, "qkan_apply")


def hqkan_forward(cfg: HqkanConfig, params: tt.Tensor, x: tt.Tensor) -> tt.Tensor:
    """decoder(qkan(encoder(x))) for x [B, in_dim]; returns [B, out_dim].

    params is a flat [P] tensor (shared across the batch) or [B, P]
    (per-sample parameters, e.g. a fast state produced by the recursion).
    """
    if x.data.ndim != 2 or x.data.shape[1] != cfg.in_dim:
        raise tt.NumericsError(f"expected x [B,{cfg.in_dim}], got {x.data.shape}")
    if params.data.shape[-1] != cfg.n_params:
        raise tt.NumericsError(
            f"expected {cfg.n_params} parameters, got {params.data.shape[-1]}"
        )
    o0, o1, o2, o3, o4, o5 = cfg.offsets()
    per_sample = params.data.ndim == 2
    if per_sample:
        B = params.data.shape[0]
        enc_w = tt.reshape(tt.slice_last(params, o0, o1), (B, cfg.in_dim, cfg.latent))
        h = tt.add(tt.bmm(x, enc_w), tt.slice_last(params, o1, o2))
        edges = tt.reshape(
            tt.slice_last(params, o2, o3), (B, cfg.n_edges, cfg.edge_params)
        )
        q = qkan_apply(edges, h, cfg.latent, cfg.latent)
        dec_w = tt.reshape(tt.slice_last(params, o3, o4), (B, cfg.latent, cfg.out_dim))
        return tt.add(tt.bmm(q, dec_w), tt.slice_last(params, o4, o5))
    enc_w = tt.reshape(tt.slice_last(params, o0, o1), (cfg.in_dim, cfg.latent))
    h = tt.add_rowvec(tt.matmul(x, enc_w), tt.slice_last(params, o1, o2))
    edges = tt.reshape(tt.slice_last(params, o2, o3), (cfg.n_edges, cfg.edge_params))
    q = qkan_apply(edges, h, cfg.latent, cfg.latent)
    dec_w = tt.reshape(tt.slice_last(params, o3, o4), (cfg.latent, cfg.out_dim))
    return tt.add_rowvec(tt.matmul(q, dec_w), tt.slice_last(params, o4, o5))


def hqkan_forward_sampled(
    cfg: HqkanConfig,
    params: np.ndarray,
    x: np.ndarray,
    shots: int | None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Inference-only forward with finite-shot activation estimates.

    shots=None reproduces the exact expectation path. params may be [P]
    or per-sample [B, P]; x is [B, in_dim].
    """
    params = np.asarray(params, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    B = x.shape[0]
    o0, o1, o2, o3, o4, o5 = cfg.offsets()
    per_sample = params.ndim == 2
    lead = (B,) if per_sample else ()

    def part(a, b):
        return params[..., a:b]

    enc_w = part(o0, o1).reshape(lead + (cfg.in_dim, cfg.latent))
    if per_sample:
        h = np.einsum("bm,bmn->bn", x, enc_w) + part(o1, o2)
    else:
        h = x @ enc_w + part(o1, o2)
    edges = part(o2, o3).reshape(lead + (cfg.latent, cfg.latent, cfg.edge_params))
    xe = h[:, :, None]
    if shots is None:
        y_edge = daruan_forward(edges, xe)
    else:
        y_edge = daruan_sample(edges, xe, shots, rng)
    q = y_edge.sum(axis=1)
    dec_w = part(o3, o4).reshape(lead + (cfg.latent, cfg.out_dim))
    if per_sample:
        return np.einsum("bm,bmn->bn", q, dec_w) + part(o4, o5)
    return q @ dec_w + part(o4, o5)
