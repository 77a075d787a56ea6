"""Multi-step solar-cycle forecasting with a gated quantum programmer.

The hard configuration: read 528 months of the sunspot record, emit the
next 132 months (one full cycle) in a single shot. Training uses the
peak-aware loss, which up-weights errors near cycle maxima, and keeps
the checkpoint with the lowest validation loss. Evaluation reports the
scaled MSE plus two astronomy-flavored metrics: peak amplitude error
(sunspot units) and peak timing error (months).

A synthetic cycle series stands in for the monthly archive so the demo
runs offline; point load_silso at a real monthly file to use the
archive (the file format is identical).

Note: ~25 minutes on one CPU core at the default 20 epochs.

Run:  python demos/04_solar_forecast.py
"""

import os

import numpy as np

from gqfwp.datasets import gen_synthetic_sunspots
from gqfwp.fastweight import FastWeightModel, VariantConfig
from gqfwp.training import TrainConfig, WindowSpec, evaluate, train

EPOCHS = int(os.environ.get("EPOCHS", "20"))

series = gen_synthetic_sunspots()
print(f"monthly series: {len(series)} records "
      f"({series.t[0]:.1f} .. {series.t[-1]:.1f})")

vcfg = VariantConfig("gqkan-qkanfwp", out_dim=132, slow_latent=5,
                     fast_latent=8)
model = FastWeightModel(vcfg)
print(f"model: {vcfg.name}, {model.n_params} parameters "
      f"(fast state {vcfg.fast_dim})")

cfg = TrainConfig(
    epochs=EPOCHS,
    seed=0,
    loss_kind="peak_aware",
    alpha=1.0,
    splits=(0.8, 0.1, 0.1),
    norm_range=(0.0, 1.0),
    keep_best_val=True,
)
spec = WindowSpec(528, 132)
result = train(model, series.v, spec, cfg)

for row in result.history:
    if row["epoch"] % 5 == 0 or row["epoch"] == EPOCHS - 1:
        print(f"  epoch {row['epoch']:3d}  train {row['train_loss']:.4f}  "
              f"val {row['val_loss']:.4f}")

report = evaluate(model, result.params, result.windows[2], result.normalizer)
print(f"\ntest windows: {report.n_windows}")
print(f"scaled MSE          : {report.scaled_mse:.4f}")
print(f"peak amplitude error: {report.pae:.1f} sunspot units")
print(f"peak timing error   : {report.pte:.1f} months")

# one forecast, de-normalized, next to its target
te = result.windows[2]
from gqfwp.training import predict

pred = result.normalizer.invert(predict(model, result.params, te.x[:1])[0])
true = result.normalizer.invert(te.y[0])
print("\nfirst test window, months 1/33/66/99/132 (predicted vs actual):")
for m in (0, 32, 65, 98, 131):
    print(f"  +{m + 1:3d} mo: {pred[m]:7.1f} vs {true[m]:7.1f}")
