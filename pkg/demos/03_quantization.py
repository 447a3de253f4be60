"""Distribution-aware quantization and layer-adaptive precision.

Walks the weight quantizer (scale factor, adaptive thresholds, codes),
the learnable activation clipping, and the sensitivity-driven bit-width
assignment on a small model.
"""

import numpy as np

from polaron import (
    EngineConfig,
    PactParams,
    PolicyConfig,
    TrainConfig,
    build_mlp,
    build_plan,
    compute_scale,
    fit_quant_params,
    pact_forward,
    pact_quantize,
    quantize_adaptive,
    train_epochs,
)

rng = np.random.default_rng(0)
w = rng.normal(scale=0.4, size=200)

print("=== scale factor and adaptive thresholds ===")
for n in (4, 8):
    s = compute_scale(w, n)
    p = fit_quant_params(w, n)
    print(f"  n={n}: scale {s.value:.4f}, thresholds "
          f"[{p.w_low:.3f}, {p.w_high:.3f}], step {p.step:.5f}")

p8 = fit_quant_params(w, 8)
res = quantize_adaptive(w, p8)
print(f"\n  8-bit codes span [{res.codes.min()}, {res.codes.max()}]; "
      f"max |dequant - clip(w/k)| = "
      f"{np.max(np.abs(res.dequantized - np.clip(w / p8.scale_k, p8.w_low, p8.w_high))):.2e}"
      f" (half step = {p8.step / 2:.2e})")

print("\n=== learnable activation clipping ===")
x = rng.normal(loc=0.5, scale=1.0, size=10)
pa = PactParams(alpha=1.2, n=4)
y = pact_forward(x, pa)
q = pact_quantize(y, pa)
for xi, yi, qi in zip(x[:5], y[:5], q[:5]):
    print(f"  x={xi:+.3f} -> clip={yi:.3f} -> lattice={qi:.3f}")
print(f"  lattice has {len(np.unique(pact_quantize(np.linspace(0, 1.2, 500), pa)))}"
      f" levels (2^4 = 16 max)")

print("\n=== sensitivity-driven precision assignment ===")
from polaron.data import load_digits_14x14

xtr, ytr, xte, yte = load_digits_14x14(seed=0)
model = build_mlp([196, 64, 32, 32, 10], seed=1)
train_epochs(model, (xtr, ytr), None, TrainConfig(lr=0.1, seed=2), 10,
             EngineConfig(identity_quant=True))
plan = build_plan(model, (xtr[:64], ytr[:64]), PolicyConfig())
print("  layer widths from gradient-weighted sensitivity:")
for e in plan.entries.values():
    print(f"    {e.layer_id}: {e.n:2d} bits ({e.fmt}), "
          f"alpha={e.act.alpha:.3f}")
print(plan.to_json())
