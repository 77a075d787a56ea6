"""Sliding-window assembly, losses, Adam, training loops, and metrics.

Two protocols are wired in. Single-step tasks use an 80/20 chronological
split, plain MSE, 50 epochs, batch 4, lr 1e-3, values scaled to [-1, 1].
The solar multi-step task uses 80/10/10, a peak-aware loss, 100 epochs,
values scaled to [0, 1], and keeps the checkpoint with the lowest
validation loss. Normalization statistics always come from the training
split alone; test values may land outside the nominal range.

A window belongs to the split that contains its final target index, so
no window's target leaks across a split boundary.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tt
from .datasets import Normalizer, fit_normalizer
from .fastweight import FastWeightModel, VariantConfig

__all__ = [
    "AdamState",
    "MetricsReport",
    "TrainConfig",
    "TrainResult",
    "WindowSpec",
    "Windows",
    "adam_step",
    "evaluate",
    "load_checkpoint",
    "loss_mse",
    "loss_peak_aware",
    "make_windows",
    "save_checkpoint",
    "seed_stream",
    "stage_sweep",
    "train",
]


def seed_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose under one master seed."""
    key = zlib.crc32(name.encode())
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window geometry: N past values in, H future values out."""

    n: int
    horizon: int = 1

    def __post_init__(self):
        if self.n < 1 or self.horizon < 1:
            raise ValueError("window and horizon must be positive")

    def count(self, series_len: int) -> int:
        return series_len - self.n - self.horizon + 1


@dataclass
class Windows:
    """One split's windows: inputs [n, N, 1] and targets [n, H]."""

    x: np.ndarray
    y: np.ndarray
    start: np.ndarray  # window start indices into the source series

    def __len__(self):
        return self.x.shape[0]


def make_windows(values: np.ndarray, spec: WindowSpec, splits=(0.8, 0.0, 0.2)):
    """Chronological split into (train, val, test) window sets.

    splits are fractions of the series length; a window goes to the split
    containing its final target index.
    """
    values = np.asarray(values, dtype=np.float64)
    T = values.shape[0]
    total = spec.count(T)
    if total < 1:
        raise ValueError(f"series of length {T} too short for {spec}")
    if abs(sum(splits) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    b1 = int(round(T * splits[0]))
    b2 = b1 + int(round(T * splits[1]))
    starts = np.arange(total)
    final_target = starts + spec.n + spec.horizon - 1
    idx = np.arange(spec.n)[None, :] + starts[:, None]
    x_all = values[idx][:, :, None]
    y_idx = np.arange(spec.horizon)[None, :] + (starts + spec.n)[:, None]
    y_all = values[y_idx]
    out = []
    for lo, hi in ((0, b1), (b1, b2), (b2, T)):
        mask = (final_target >= lo) & (final_target < hi)
        out.append(Windows(x_all[mask], y_all[mask], starts[mask]))
    return tuple(out)


def train_boundary(series_len: int, splits=(0.8, 0.0, 0.2)) -> int:
    """Index below which values belong to the training split."""
    return int(round(series_len * splits[0]))


# --- losses -----------------------------------------------------------------


def loss_mse(pred: tt.Tensor, target: np.ndarray) -> tt.Tensor:
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.data.shape} vs {target.shape}")
    d = tt.sub(pred, tt.Tensor(target))
    return tt.tmean(tt.mul(d, d))


def loss_peak_aware(pred: tt.Tensor, target: np.ndarray, alpha: float = 1.0) -> tt.Tensor:
    """Squared error weighted by (1 + alpha * target).

    With targets scaled to [0, 1], errors near cycle maxima cost up to
    (1 + alpha) times more than errors near minima. alpha = 0 recovers
    the plain MSE exactly.
    """
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.data.shape} vs {target.shape}")
    d = tt.sub(pred, tt.Tensor(target))
    w = tt.Tensor(1.0 + alpha * target)
    return tt.tmean(tt.mul(tt.mul(d, d), w))


# --- Adam -------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> np.ndarray:
    """One Adam update with bias correction; mutates state, returns params."""
    bad = ~np.isfinite(grads)
    if bad.any():
        raise tt.NumericsError(
            f"non-finite gradient at parameter index {int(np.argmax(bad))}"
        )
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grads
    state.v = beta2 * state.v + (1.0 - beta2) * grads * grads
    mhat = state.m / (1.0 - beta1**state.step)
    vhat = state.v / (1.0 - beta2**state.step)
    params -= lr * mhat / (np.sqrt(vhat) + eps)
    return params


# --- training ---------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 4
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss_kind: str = "mse"  # or "peak_aware"
    alpha: float = 1.0
    splits: tuple = (0.8, 0.0, 0.2)
    norm_range: tuple = (-1.0, 1.0)
    keep_best_val: bool = False
    divergence_limit: float = 1e6

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if abs(sum(self.splits) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.loss_kind not in ("mse", "peak_aware"):
            raise ValueError(f"unknown loss {self.loss_kind!r}")


@dataclass
class TrainResult:
    params: np.ndarray  # the retained checkpoint (best-val when enabled)
    final_params: np.ndarray
    history: list  # dicts: epoch, train_loss, val_loss
    normalizer: Normalizer
    windows: tuple  # (train, val, test) in normalized units


def _batch_loss(model, params_t, xb, yb, cfg: TrainConfig) -> tt.Tensor:
    pred = model.forward(params_t, xb)
    if cfg.loss_kind == "peak_aware":
        return loss_peak_aware(pred, yb, cfg.alpha)
    return loss_mse(pred, yb)


def train(model: FastWeightModel, values: np.ndarray, spec: WindowSpec,
          cfg: TrainConfig, init_params: np.ndarray | None = None) -> TrainResult:
    """Windowed training run; deterministic given cfg.seed."""
    values = np.asarray(values, dtype=np.float64)
    if model.cfg.out_dim != spec.horizon:
        raise ValueError("model output dim must equal the horizon")
    norm = fit_normalizer(values[: train_boundary(len(values), cfg.splits)],
                          *cfg.norm_range)
    scaled = norm.apply(values)
    tr, va, te = make_windows(scaled, spec, cfg.splits)
    if len(tr) < 1:
        raise ValueError("no training windows under this split")
    init_rng = seed_stream(cfg.seed, "model-init")
    shuffle_rng = seed_stream(cfg.seed, "batch-shuffle")
    params = (model.init_params(init_rng) if init_params is None
              else np.array(init_params, dtype=np.float64))
    state = AdamState.zeros(params.size)
    history = []
    best_val = np.inf
    best_params = params.copy()
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(tr))
        epoch_loss = 0.0
        nb = 0
        for lo in range(0, len(order), cfg.batch_size):
            sel = order[lo : lo + cfg.batch_size]
            with tt.Tape() as tape, tt.no_finite_check():
                pt = tt.Tensor(params, requires_grad=True)
                loss = _batch_loss(model, pt, tr.x[sel], tr.y[sel], cfg)
                lv = float(loss.data)
                if not np.isfinite(lv) or lv > cfg.divergence_limit:
                    raise RuntimeError(
                        f"divergence at epoch {epoch}, batch {nb}: loss {lv:.3e}"
                    )
                tape.backward(loss)
            adam_step(params, pt.grad, state, cfg.learning_rate,
                      cfg.beta1, cfg.beta2, cfg.eps)
            epoch_loss += lv
            nb += 1
        row = {"epoch": epoch, "train_loss": epoch_loss / max(nb, 1)}
        if len(va) > 0:
            vl = _eval_loss(model, params, va, cfg)
            row["val_loss"] = vl
            if cfg.keep_best_val and vl < best_val:
                best_val = vl
                best_params = params.copy()
        history.append(row)
    retained = best_params if (cfg.keep_best_val and len(va) > 0) else params
    return TrainResult(retained, params, history, norm, (tr, va, te))


def _eval_loss(model, params, win: Windows, cfg: TrainConfig,
               chunk: int = 16) -> float:
    total = 0.0
    for lo in range(0, len(win), chunk):
        xb, yb = win.x[lo : lo + chunk], win.y[lo : lo + chunk]
        with tt.Tape():
            loss = _batch_loss(model, tt.Tensor(params), xb, yb, cfg)
        total += float(loss.data) * xb.shape[0]
    return total / len(win)


def predict(model, params, x: np.ndarray, chunk: int = 16) -> np.ndarray:
    """Exact-expectation predictions for windows x [n, N, 1] -> [n, H]."""
    outs = []
    for lo in range(0, x.shape[0], chunk):
        with tt.Tape():
            outs.append(model.forward(tt.Tensor(params), x[lo : lo + chunk]).data)
    return np.concatenate(outs, axis=0)


# --- metrics ----------------------------------------------------------------


@dataclass
class MetricsReport:
    scaled_mse: float
    pae: float
    pte: float
    rel_mse: float | None = None  # sampled vs exact outputs, when shots given
    n_windows: int = 0

    def to_dict(self):
        d = {"scaled_mse": self.scaled_mse, "pae": self.pae, "pte": self.pte,
             "n_windows": self.n_windows}
        if self.rel_mse is not None:
            d["rel_mse"] = self.rel_mse
        return d


def evaluate(model: FastWeightModel, params: np.ndarray, win: Windows,
             norm: Normalizer, shots: int | None = None,
             rng: np.random.Generator | None = None,
             chunk: int = 8) -> MetricsReport:
    """Test-set metrics: MSE in normalized units, peak amplitude error in
    de-normalized units, peak timing error in steps (first-occurrence
    argmax on both sides)."""
    if len(win) < 1:
        raise ValueError("empty window set")
    pred = predict(model, params, win.x, chunk=chunk)
    scaled_mse = float(np.mean((pred - win.y) ** 2))
    y_raw = norm.invert(win.y)
    p_raw = norm.invert(pred)
    pae = float(np.mean(np.abs(y_raw.max(axis=1) - p_raw.max(axis=1))))
    pte = float(np.mean(np.abs(
        np.argmax(win.y, axis=1) - np.argmax(pred, axis=1))))
    rel = None
    if shots is not None:
        if rng is None:
            rng = np.random.default_rng(0)
        samp = np.concatenate(
            [model.forward_sampled(params, win.x[lo : lo + chunk], shots, rng)
             for lo in range(0, len(win), chunk)], axis=0)
        rel = float(np.mean((samp - pred) ** 2) / max(np.mean(pred**2), 1e-300))
    return MetricsReport(scaled_mse, pae, pte, rel, len(win))


# --- sweeps -----------------------------------------------------------------


def stage_sweep(variant_names, n_values, datasets: dict, seeds: int = 5,
                base_cfg: TrainConfig | None = None, model_dims=None):
    """mean +- std test MSE per (variant, dataset, N) over fresh seeds.

    datasets maps name -> raw value array. Returns a list of row dicts
    with keys variant, dataset, N, seed_losses, mean, std.
    """
    base = base_cfg or TrainConfig()
    dims = model_dims or {}
    rows = []
    for name in variant_names:
        for ds_name, values in datasets.items():
            for n in n_values:
                losses = []
                for s in range(seeds):
                    cfg = TrainConfig(
                        epochs=base.epochs, batch_size=base.batch_size,
                        learning_rate=base.learning_rate, seed=base.seed + s,
                        loss_kind=base.loss_kind, alpha=base.alpha,
                        splits=base.splits, norm_range=base.norm_range,
                        divergence_limit=base.divergence_limit)
                    vcfg = VariantConfig(name, **dims)
                    model = FastWeightModel(vcfg)
                    try:
                        res = train(model, values, WindowSpec(n), cfg)
                        te = res.windows[2]
                        losses.append(_eval_loss(model, res.params, te, cfg))
                    except RuntimeError:
                        losses.append(float("inf"))  # diverged run, recorded
                losses = np.asarray(losses)
                rows.append({
                    "variant": name, "dataset": ds_name, "N": n,
                    "seed_losses": losses.tolist(),
                    "mean": float(losses.mean()), "std": float(losses.std()),
                })
    return rows


def write_sweep_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("variant,dataset,N,mean,std,seed_losses\n")
        for r in rows:
            seeds = ";".join(repr(v) for v in r["seed_losses"])
            fh.write(f"{r['variant']},{r['dataset']},{r['N']},"
                     f"{r['mean']!r},{r['std']!r},{seeds}\n")


# --- checkpoints ------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, vcfg: VariantConfig, params: np.ndarray,
                    norm: Normalizer, spec: WindowSpec, extra: dict | None = None):
    """JSON checkpoint; float lists round-trip bit-exactly through repr."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "variant": vcfg.name,
        "dims": {
            "in_dim": vcfg.in_dim, "out_dim": vcfg.out_dim,
            "slow_hidden": vcfg.slow_hidden, "slow_latent": vcfg.slow_latent,
            "slow_layers": vcfg.slow_layers, "fast_latent": vcfg.fast_latent,
            "fast_layers": vcfg.fast_layers,
        },
        "window": {"n": spec.n, "horizon": spec.horizon},
        "normalizer": norm.to_dict(),
        "extra": extra or {},
        "params": [float(v) for v in params],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')}")
    vcfg = VariantConfig(doc["variant"], **doc["dims"])
    params = np.asarray(doc["params"], dtype=np.float64)
    if params.size != vcfg.n_params:
        raise ValueError("checkpoint parameter count does not match dims")
    norm = Normalizer.from_dict(doc["normalizer"])
    spec = WindowSpec(doc["window"]["n"], doc["window"]["horizon"])
    return vcfg, params, norm, spec, doc.get("extra", {})
