"""Quantization-aware training on 14x14 digits.

Trains a float64 baseline MLP (196-64-32-32-10), derives an 8-bit and a
4-bit-dominant precision plan from gradient-weighted sensitivities, runs
QAT under each, and reports the accuracy gap to the baseline.
"""

import time

from polaron import (
    EngineConfig,
    PolicyConfig,
    TrainConfig,
    build_mlp,
    build_plan,
    evaluate,
    train_epochs,
)
from polaron.data import load_digits_14x14
from polaron.engine import refit_plan

t0 = time.time()
xtr, ytr, xte, yte = load_digits_14x14(seed=0)
print(f"digits upsampled to 14x14: {xtr.shape[0]} train / {xte.shape[0]} test")

model = build_mlp([196, 64, 32, 32, 10], seed=1)
ident = EngineConfig(identity_quant=True)
train_epochs(model, (xtr, ytr), None, TrainConfig(lr=0.1, seed=2), 30, ident)
base = evaluate(model, xte, yte, None, ident)
print(f"float64 baseline accuracy: {base:.4f}")

calib = (xtr[:64], ytr[:64])
for label, policy in [("8-bit", PolicyConfig(p_low=0.0, p_high=100.0)),
                      ("4-bit-dominant", PolicyConfig(p_low=100.0,
                                                      p_high=100.0))]:
    plan = build_plan(model, calib, policy)
    widths = [e.n for e in plan.entries.values()]
    before = evaluate(model, xte, yte, plan)
    q = model.copy()
    hyper = TrainConfig(lr=0.02, lr_alpha=0.001, seed=3)
    for _ in range(12):
        train_epochs(q, (xtr, ytr), plan, hyper, 1)
        refit_plan(q, plan, xtr[:64])
    after = evaluate(q, xte, yte, plan)
    print(f"\n{label} plan {widths}")
    print(f"  post-training quantization: {before:.4f} "
          f"({100 * (base - before):+.2f} points vs baseline)")
    print(f"  after QAT:                  {after:.4f} "
          f"({100 * (base - after):+.2f} points vs baseline)")

print(f"\ntotal time {time.time() - t0:.1f}s")
