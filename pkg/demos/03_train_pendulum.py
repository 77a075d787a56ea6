"""Train every model variant on the damped pendulum benchmark.

The task: given a 16-step window of the pendulum's angular velocity,
predict the next value. The five variants differ in whether the update
is gated, and whether the slow and fast programmers are small MLPs,
linear maps, or quantum-activation networks. A short run is enough to
see the characteristic ordering; crank EPOCHS up to 50 to reproduce the
benchmark-grade numbers.

Run:  python demos/03_train_pendulum.py
"""

import numpy as np

from gqfwp.datasets import gen_damped_shm
from gqfwp.fastweight import VARIANTS, FastWeightModel, VariantConfig
from gqfwp.training import TrainConfig, WindowSpec, evaluate, train

EPOCHS = 10
SEED = 0

values = gen_damped_shm().v
spec = WindowSpec(16)
print(f"pendulum series: {len(values)} samples, window {spec.n} -> 1 step")
print(f"training each variant for {EPOCHS} epochs (seed {SEED})\n")

rows = []
for name in sorted(VARIANTS):
    model = FastWeightModel(VariantConfig(name))
    cfg = TrainConfig(epochs=EPOCHS, seed=SEED)
    result = train(model, values, spec, cfg)
    report = evaluate(model, result.params, result.windows[2],
                      result.normalizer)
    rows.append((name, model.n_params, result.history[-1]["train_loss"],
                 report.scaled_mse))

print(f"{'variant':<16}{'params':>8}{'train mse':>14}{'test mse':>14}")
for name, n, tr, te in sorted(rows, key=lambda r: r[3]):
    print(f"{name:<16}{n:>8}{tr:>14.3e}{te:>14.3e}")

print("\nat this short budget the quantum-slow-programmer variants already")
print("lead; longer runs and longer windows widen the gated/ungated gap")
print("(see tests/test_acceptance.py for the benchmark-grade protocols).")
