"""Desk-scale execution simulator: layer graphs on the SIMD MAC engine.

A model is a sequential chain of dense / conv2d / flatten / activation
layers.  Under a quantization plan, every multiply-accumulate runs as an
exact integer dot product of centered quantizer codes (the same wide
accumulation the MAC pipeline performs, vectorized; bit-identity with
the lane-level path is asserted by tests), followed by float64
scale-and-shift, bias add and the CORDIC activation unit.  Cycle counts
follow the 16x/4x/1x lane law; a bank-conflict model observes weight
fetch traffic.

Training runs the same quantized forward with straight-through
estimators on the backward pass and SGD updates into float64 master
weights; clip thresholds (PACT alpha) are learnable.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .activations import ActivationKind, activation_apply
from .formats import parse_format
from .mac import PipelineStats, PrecisionMode
from .quantize import (
    PactParams,
    PlanEntry,
    PolicyConfig,
    QuantParams,
    QuantPlan,
    assign_precisions,
    fit_quant_params,
    layer_sensitivity,
    pact_forward,
    pact_gradients,
    quantize_adaptive,
    read_tensor,
    write_tensor,
)

__all__ = [
    "LayerKind",
    "LayerSpec",
    "ModelGraph",
    "ExecStats",
    "LayerStats",
    "MemoryModel",
    "EngineConfig",
    "TrainConfig",
    "memory_access",
    "run_inference",
    "train_step",
    "train_epochs",
    "evaluate",
    "build_mlp",
    "build_plan",
    "refit_plan",
    "uniform_plan",
    "save_model",
    "load_model",
]


class LayerKind(enum.Enum):
    DENSE = "dense"
    CONV2D = "conv2d"
    ACTIVATION = "activation"
    FLATTEN = "flatten"


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the sequential graph.

    dims: Dense -> (in_features, out_features); Conv2D -> (in_ch, out_ch,
    kernel, stride, in_h, in_w); Activation/Flatten -> ().
    """

    id: str
    kind: LayerKind
    dims: tuple[int, ...] = ()
    activation: ActivationKind = ActivationKind.NONE
    precision: str = "fxp8:f6"

    def __post_init__(self):
        parse_format(self.precision)
        if self.kind is LayerKind.DENSE and len(self.dims) != 2:
            raise ValueError(f"{self.id}: dense needs (in, out) dims")
        if self.kind is LayerKind.CONV2D and len(self.dims) != 6:
            raise ValueError(
                f"{self.id}: conv2d needs (in_ch, out_ch, k, stride, h, w)")

    @property
    def has_weights(self) -> bool:
        return self.kind in (LayerKind.DENSE, LayerKind.CONV2D)

    def conv_geometry(self) -> tuple[int, int, int, int, int, int, int, int]:
        in_ch, out_ch, k, stride, h, w = self.dims
        out_h = (h - k) // stride + 1
        out_w = (w - k) // stride + 1
        return in_ch, out_ch, k, stride, h, w, out_h, out_w


@dataclass
class ModelGraph:
    """Ordered layer chain with float64 master weights keyed by layer id."""

    layers: list[LayerSpec]
    weights: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def weight_layers(self) -> list[LayerSpec]:
        return [l for l in self.layers if l.has_weights]

    def copy(self) -> "ModelGraph":
        return ModelGraph(
            list(self.layers),
            {k: {n: v.copy() for n, v in t.items()}
             for k, t in self.weights.items()})


class LayerStats(NamedTuple):
    pipeline: PipelineStats
    macs: int
    bank_conflicts: int


@dataclass
class ExecStats:
    """Aggregated execution counters; totals equal per-layer sums."""

    per_layer: dict[str, LayerStats] = field(default_factory=dict)

    @property
    def total_cycles(self) -> int:
        return sum(s.pipeline.cycles for s in self.per_layer.values())

    @property
    def total_macs(self) -> int:
        return sum(s.macs for s in self.per_layer.values())

    @property
    def total_conflicts(self) -> int:
        return sum(s.bank_conflicts for s in self.per_layer.values())

    @property
    def weighted_utilization(self) -> float:
        num = den = 0
        for s in self.per_layer.values():
            num += s.pipeline.mac_ops
            den += s.pipeline.mac_ops + s.pipeline.skipped_lanes
        return num / den if den else 0.0

    def to_dict(self) -> dict:
        return {
            "cycles": self.total_cycles,
            "macs": self.total_macs,
            "utilization": self.weighted_utilization,
            "conflicts": self.total_conflicts,
            "per_layer": {
                lid: {
                    "cycles": s.pipeline.cycles,
                    "vector_ops": s.pipeline.vector_ops,
                    "mac_ops": s.pipeline.mac_ops,
                    "skipped_lanes": s.pipeline.skipped_lanes,
                    "utilization": s.pipeline.lane_utilization,
                    "macs": s.macs,
                    "conflicts": s.bank_conflicts,
                }
                for lid, s in self.per_layer.items()
            },
        }


# ── memory bank model ────────────────────────────────────────────


@dataclass
class MemoryModel:
    """Bank-conflict accounting; observational only."""

    banks: int = 8
    ports_per_bank: int = 2
    accesses: int = 0
    conflicts: int = 0


def memory_access(mem: MemoryModel, addresses: Sequence[int],
                  cycle: int | None = None) -> int:
    """Count same-cycle accesses landing on one bank beyond its ports."""
    counts: dict[int, int] = {}
    for a in addresses:
        bank = a % mem.banks
        counts[bank] = counts.get(bank, 0) + 1
    over = sum(max(0, c - mem.ports_per_bank) for c in counts.values())
    mem.accesses += len(addresses)
    mem.conflicts += over
    return over


def _conflicts_per_vector_op(lanes: int, mem: MemoryModel) -> int:
    # consecutive addresses spread evenly over banks
    q, r = divmod(lanes, mem.banks)
    return ((mem.banks - r) * max(0, q - mem.ports_per_bank)
            + r * max(0, q + 1 - mem.ports_per_bank))


# ── configuration ────────────────────────────────────────────────


@dataclass(frozen=True)
class EngineConfig:
    zero_skip: bool = True
    identity_quant: bool = False  # bypass quantizers (gradient checks)
    cordic_iterations: int = 16
    banks: int = 8
    ports_per_bank: int = 2


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    lr_alpha: float = 0.001
    batch_size: int = 64
    seed: int = 0


# ── quantized linear algebra ─────────────────────────────────────


class _QuantLinear(NamedTuple):
    """Centered integer codes plus the affine coefficients that map
    them back to real values: value = a * code_centered + b."""

    codes: np.ndarray  # int64, centered
    a: float
    b: float


def _quant_weights(w: np.ndarray, qp: QuantParams) -> _QuantLinear:
    codes, _ = quantize_adaptive(w, qp)
    half = 1 << (qp.n - 1)
    step = qp.step
    a = qp.scale_k * step
    b = qp.scale_k * (step * half + qp.w_low)
    return _QuantLinear(codes - half, a, b)


def _quant_acts(x: np.ndarray, pp: PactParams) -> _QuantLinear:
    levels = (1 << pp.n) - 1
    y = pact_forward(x, pp)
    codes = np.rint(y * (levels / pp.alpha)).astype(np.int64)
    half = 1 << (pp.n - 1)
    a = pp.alpha / levels
    return _QuantLinear(codes - half, a, a * half)


def _exact_code_matmul(cw: np.ndarray, cx: np.ndarray) -> np.ndarray:
    """Exact int64 products-and-sums of centered codes.

    The wide accumulator budget is 2**16 worst-case 16-bit products;
    the same bound keeps these sums inside int64 (30 + 16 bits).
    """
    if cw.shape[1] > (1 << 16):
        raise ValueError("reduction too long for the accumulator budget")
    return cw @ cx


# ── forward pass ─────────────────────────────────────────────────


class _LayerTape(NamedTuple):
    spec: LayerSpec
    x_in: np.ndarray          # real-valued input to the layer
    x_q: np.ndarray | None    # dequantized activations actually multiplied
    w_q: np.ndarray | None    # dequantized weights actually multiplied
    pre_act: np.ndarray       # layer output before activation
    out: np.ndarray


def _plan_entry(plan: QuantPlan | None, layer: LayerSpec) -> PlanEntry | None:
    if plan is None:
        return None
    if layer.id not in plan:
        raise ValueError(f"plan does not cover layer {layer.id!r}")
    return plan[layer.id]


def _dense_forward(layer, x, w, bias, entry, cfg, stats, batch):
    qw = qx = None
    if cfg.identity_quant or entry is None:
        pre = x @ w.T + bias[None, :]
        x_q, w_q = x, w
    else:
        qp, pp = entry.weight, entry.act
        qw = _quant_weights(w, qp)
        qx = _quant_acts(x, pp)
        s1 = _exact_code_matmul(qw.codes, qx.codes.T)
        s2 = np.sum(qw.codes, axis=1, dtype=np.int64)
        s3 = np.sum(qx.codes, axis=1, dtype=np.int64)
        k = w.shape[1]
        y = (qw.a * qx.a) * s1 + (qw.a * qx.b) * s2[:, None] \
            + (qx.a * qw.b) * s3[None, :] + k * qw.b * qx.b
        pre = y.T + bias[None, :]
        w_q = qw.a * qw.codes + qw.b
        x_q = qx.a * qx.codes + qx.b
    _record_dense_stats(layer, entry, qw, qx, w, cfg, stats, batch)
    return pre, x_q, w_q


def _record_dense_stats(layer, entry, qw, qx, w, cfg, stats, batch):
    fmt = parse_format(entry.fmt if entry is not None else layer.precision)
    mode = PrecisionMode.for_format(fmt)
    out_f, in_f = w.shape
    dots = out_f * batch
    vec_per_dot = -(-in_f // mode.lanes)
    vector_ops = dots * vec_per_dot
    pad = vec_per_dot * mode.lanes - in_f
    skipped = dots * pad
    if cfg.zero_skip and qw is not None:
        # a lane is skippable when either centered-code operand is zero
        w_nz = (qw.codes != 0).astype(np.int64)
        x_nz = (qx.codes != 0).astype(np.int64)
        nonzero_pairs = int((w_nz @ x_nz.T).sum())
        skipped += dots * in_f - nonzero_pairs
    pipeline = PipelineStats.from_counts(vector_ops, mode.lanes, skipped)
    mem = MemoryModel(cfg.banks, cfg.ports_per_bank)
    conflicts = vector_ops * _conflicts_per_vector_op(mode.lanes, mem)
    stats.per_layer[layer.id] = LayerStats(pipeline, dots * in_f, conflicts)


def _im2col(x: np.ndarray, layer: LayerSpec) -> tuple[np.ndarray, tuple]:
    in_ch, out_ch, k, stride, h, w, out_h, out_w = layer.conv_geometry()
    batch = x.shape[0]
    x = x.reshape(batch, in_ch, h, w)
    cols = np.empty((batch, out_h * out_w, in_ch * k * k), dtype=np.float64)
    idx = 0
    for oy in range(out_h):
        for ox in range(out_w):
            patch = x[:, :, oy * stride:oy * stride + k,
                      ox * stride:ox * stride + k]
            cols[:, idx, :] = patch.reshape(batch, -1)
            idx += 1
    return cols.reshape(batch * out_h * out_w, in_ch * k * k), (
        batch, out_ch, out_h, out_w)


def _forward(model: ModelGraph, x: np.ndarray, plan: QuantPlan | None,
             cfg: EngineConfig, stats: ExecStats,
             keep_tape: bool) -> tuple[np.ndarray, list[_LayerTape]]:
    tape: list[_LayerTape] = []
    batch = x.shape[0]
    for layer in model.layers:
        x_in = x
        x_q = w_q = None
        if layer.kind is LayerKind.FLATTEN:
            pre = x.reshape(batch, -1)
        elif layer.kind is LayerKind.ACTIVATION:
            pre = x
        elif layer.kind is LayerKind.DENSE:
            w = model.weights[layer.id]["W"]
            bias = model.weights[layer.id]["b"]
            entry = _plan_entry(plan, layer)
            pre, x_q, w_q = _dense_forward(layer, x, w, bias, entry, cfg,
                                           stats, batch)
        elif layer.kind is LayerKind.CONV2D:
            w = model.weights[layer.id]["W"]  # (out_ch, in_ch*k*k)
            bias = model.weights[layer.id]["b"]
            entry = _plan_entry(plan, layer)
            cols, (b, out_ch, oh, ow) = _im2col(x, layer)
            pre_flat, x_q, w_q = _dense_forward(layer, cols, w, bias, entry,
                                                cfg, stats, b * oh * ow)
            pre = pre_flat.reshape(b, oh * ow, out_ch).transpose(0, 2, 1)
            pre = pre.reshape(b, out_ch * oh * ow)
        else:
            raise ValueError(f"unsupported layer kind {layer.kind}")
        out = activation_apply(layer.activation, pre,
                               iterations=cfg.cordic_iterations)
        if keep_tape:
            tape.append(_LayerTape(layer, x_in, x_q, w_q, pre, out))
        x = out
    return x, tape


class InferenceResult(NamedTuple):
    output: np.ndarray
    stats: ExecStats


def run_inference(model: ModelGraph, x: np.ndarray,
                  plan: QuantPlan | None = None,
                  cfg: EngineConfig = EngineConfig()) -> InferenceResult:
    """Quantized forward pass; deterministic for fixed inputs and plan."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    stats = ExecStats()
    out, _ = _forward(model, x, plan, cfg, stats, keep_tape=False)
    return InferenceResult(out, stats)


# ── training ─────────────────────────────────────────────────────


def _softmax_xent(logits: np.ndarray, labels: np.ndarray,
                  ) -> tuple[float, np.ndarray]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    loss = -float(np.mean(np.log(probs[np.arange(n), labels] + 1e-300)))
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


class TrainStepResult(NamedTuple):
    model: "ModelGraph"
    loss: float


def train_step(model: ModelGraph, batch: tuple[np.ndarray, np.ndarray],
               plan: QuantPlan | None, hyper: TrainConfig,
               cfg: EngineConfig = EngineConfig()) -> TrainStepResult:
    """One SGD step: quantized forward, straight-through backward.

    Weight gradients pass through the quantizer inside the clip range;
    activation gradients follow the PACT rule, whose alpha term also
    updates the plan's learnable thresholds in place.  Master weights
    stay float64 and update in the returned (same) graph.
    """
    x, labels = batch
    x = np.asarray(x, dtype=np.float64)
    stats = ExecStats()
    logits, tape = _forward(model, x, plan, cfg, stats, keep_tape=True)
    loss, delta = _softmax_xent(logits, labels)

    for t in reversed(tape):
        layer = t.spec
        if layer.kind is LayerKind.ACTIVATION or layer.activation is not ActivationKind.NONE:
            delta = _activation_backward(t, delta)
        if layer.kind is LayerKind.FLATTEN:
            delta = delta.reshape(t.x_in.shape)
            continue
        if layer.kind is LayerKind.DENSE:
            delta = _dense_backward(model, t, delta, plan, hyper, cfg)
        elif layer.kind is LayerKind.CONV2D:
            delta = _conv_backward(model, t, delta, plan, hyper, cfg)
    return TrainStepResult(model, loss)


def _activation_backward(t: _LayerTape, delta: np.ndarray) -> np.ndarray:
    kind = t.spec.activation
    if kind is ActivationKind.NONE:
        return delta
    if kind is ActivationKind.RELU:
        return delta * (t.pre_act > 0.0)
    if kind is ActivationKind.SOFTMAX:
        raise ValueError("train against logits; softmax belongs to the loss")
    if kind is ActivationKind.TANH:
        return delta * (1.0 - t.out ** 2)
    if kind is ActivationKind.SIGMOID:
        return delta * t.out * (1.0 - t.out)
    raise ValueError(f"no backward rule for {kind}")


def _dense_backward(model, t, delta, plan, hyper, cfg):
    layer = t.spec
    w = model.weights[layer.id]["W"]
    bias = model.weights[layer.id]["b"]
    entry = _plan_entry(plan, layer)
    if cfg.identity_quant or entry is None:
        x_used, w_used = t.x_in, w
        ste_mask = np.ones_like(w)
        act_mask = np.ones_like(t.x_in, dtype=bool)
    else:
        x_used, w_used = t.x_q, t.w_q
        qp = entry.weight
        scaled = w / qp.scale_k
        ste_mask = ((scaled >= qp.w_low) & (scaled <= qp.w_high)).astype(
            np.float64)
    grad_w = delta.T @ x_used
    grad_b = delta.sum(axis=0)
    delta_prev = delta @ w_used
    if entry is not None and not cfg.identity_quant:
        pg = pact_gradients(t.x_in, entry.act.alpha, delta_prev)
        new_alpha = entry.act.alpha - hyper.lr_alpha * pg.dalpha
        entry.act = PactParams(max(new_alpha, 1e-3), entry.act.n)
        delta_prev = pg.dx
        grad_w = grad_w * ste_mask
    model.weights[layer.id]["W"] = w - hyper.lr * grad_w
    model.weights[layer.id]["b"] = bias - hyper.lr * grad_b
    return delta_prev


def _conv_backward(model, t, delta, plan, hyper, cfg):
    layer = t.spec
    in_ch, out_ch, k, stride, h, w_dim, out_h, out_w = layer.conv_geometry()
    batch = t.x_in.shape[0]
    # delta arrives as (batch, out_ch*oh*ow); reshape to per-patch rows
    d = delta.reshape(batch, out_ch, out_h * out_w).transpose(0, 2, 1)
    d = d.reshape(batch * out_h * out_w, out_ch)
    cols, _ = _im2col(t.x_in, layer)
    wmat = model.weights[layer.id]["W"]
    entry = _plan_entry(plan, layer)
    if cfg.identity_quant or entry is None:
        w_used = wmat
        cols_used = cols
    else:
        w_used = t.w_q
        cols_used = t.x_q
    grad_w = d.T @ cols_used
    grad_b = d.sum(axis=0)
    dcols = d @ w_used  # (batch*oh*ow, in_ch*k*k)
    if entry is not None and not cfg.identity_quant:
        qp = entry.weight
        scaled = wmat / qp.scale_k
        grad_w = grad_w * ((scaled >= qp.w_low) & (scaled <= qp.w_high))
    model.weights[layer.id]["W"] = wmat - hyper.lr * grad_w
    model.weights[layer.id]["b"] = model.weights[layer.id]["b"] - hyper.lr * grad_b
    # scatter column gradients back to the input image
    dx = np.zeros((batch, in_ch, h, w_dim), dtype=np.float64)
    dcols = dcols.reshape(batch, out_h * out_w, in_ch, k, k)
    idx = 0
    for oy in range(out_h):
        for ox in range(out_w):
            dx[:, :, oy * stride:oy * stride + k,
               ox * stride:ox * stride + k] += dcols[:, idx]
            idx += 1
    return dx.reshape(batch, -1)


def train_epochs(model: ModelGraph, data: tuple[np.ndarray, np.ndarray],
                 plan: QuantPlan | None, hyper: TrainConfig, epochs: int,
                 cfg: EngineConfig = EngineConfig()) -> list[float]:
    """Mini-batch SGD with a seeded shuffle; returns per-epoch mean loss."""
    x, y = data
    rng = np.random.default_rng(hyper.seed)
    losses = []
    n = x.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        batches = 0
        for start in range(0, n, hyper.batch_size):
            sel = order[start:start + hyper.batch_size]
            total += train_step(model, (x[sel], y[sel]), plan, hyper, cfg).loss
            batches += 1
        losses.append(total / batches)
    return losses


def evaluate(model: ModelGraph, x: np.ndarray, y: np.ndarray,
             plan: QuantPlan | None = None,
             cfg: EngineConfig = EngineConfig()) -> float:
    """Classification accuracy of the (optionally quantized) forward."""
    out = run_inference(model, x, plan, cfg).output
    return float(np.mean(np.argmax(out, axis=1) == y))


# ── plan construction ────────────────────────────────────────────


def _calibration_gradients(model: ModelGraph,
                           batch: tuple[np.ndarray, np.ndarray],
                           cfg: EngineConfig) -> dict[str, np.ndarray]:
    """Unquantized backward pass over one labeled mini-batch."""
    x, labels = batch
    stats = ExecStats()
    ident = replace(cfg, identity_quant=True)
    logits, tape = _forward(model, np.asarray(x, dtype=np.float64), None,
                            ident, stats, keep_tape=True)
    _, delta = _softmax_xent(logits, labels)
    grads: dict[str, np.ndarray] = {}
    for t in reversed(tape):
        layer = t.spec
        delta = _activation_backward(t, delta)
        if layer.kind is LayerKind.FLATTEN:
            delta = delta.reshape(t.x_in.shape)
        elif layer.kind is LayerKind.DENSE:
            grads[layer.id] = delta.T @ t.x_in
            delta = delta @ model.weights[layer.id]["W"]
        elif layer.kind is LayerKind.CONV2D:
            d = delta.reshape(t.x_in.shape[0], layer.dims[1], -1)
            d = d.transpose(0, 2, 1).reshape(-1, layer.dims[1])
            cols, _ = _im2col(t.x_in, layer)
            grads[layer.id] = d.T @ cols
            dcols = d @ model.weights[layer.id]["W"]
            in_ch, _, k, stride, h, w_dim, out_h, out_w = layer.conv_geometry()
            dx = np.zeros((t.x_in.shape[0], in_ch, h, w_dim))
            dcols = dcols.reshape(t.x_in.shape[0], out_h * out_w, in_ch, k, k)
            idx = 0
            for oy in range(out_h):
                for ox in range(out_w):
                    dx[:, :, oy * stride:oy * stride + k,
                       ox * stride:ox * stride + k] += dcols[:, idx]
                    idx += 1
            delta = dx.reshape(t.x_in.shape[0], -1)
    return grads


def _fit_entry_params(model: ModelGraph, entry: PlanEntry,
                      calib_acts: np.ndarray, *,
                      symmetric: bool = False) -> None:
    w = model.weights[entry.layer_id]["W"]
    entry.weight = fit_quant_params(w, entry.n, symmetric=symmetric)
    hi = float(np.percentile(calib_acts, 99.9)) if calib_acts.size else 1.0
    alpha = entry.act.alpha if entry.act is not None else max(hi, 1e-3)
    entry.act = PactParams(max(alpha, 1e-3), entry.n)


def build_plan(model: ModelGraph, calib: tuple[np.ndarray, np.ndarray],
               policy: PolicyConfig = PolicyConfig(),
               cfg: EngineConfig = EngineConfig(), *,
               symmetric: bool = False) -> QuantPlan:
    """Sensitivity-driven plan from one labeled calibration batch.

    The current quantizer in the sensitivity metric is the aggressive
    4-bit default; candidates re-instantiate it at 8 and 4 bits, so the
    score measures the gradient-weighted error a layer recovers when
    given more bits.
    """
    grads = _calibration_gradients(model, calib, cfg)
    sens = []
    for layer in model.weight_layers():
        w = model.weights[layer.id]["W"]
        current = fit_quant_params(w, 4, symmetric=symmetric)
        candidates = {
            8: fit_quant_params(w, 8, symmetric=symmetric),
            4: current,
        }
        sens.append(layer_sensitivity(layer.id, w, grads[layer.id],
                                      current, candidates))
    plan = assign_precisions(sens, policy)
    _fit_plan_params(model, plan, calib[0], cfg, symmetric=symmetric)
    return plan


def _fit_plan_params(model: ModelGraph, plan: QuantPlan,
                     calib_x: np.ndarray, cfg: EngineConfig, *,
                     symmetric: bool = False) -> None:
    # propagate the calibration batch to observe activation ranges
    x = np.asarray(calib_x, dtype=np.float64)
    stats = ExecStats()
    ident = replace(cfg, identity_quant=True)
    _, tape = _forward(model, x, None, ident, stats, keep_tape=True)
    acts = {t.spec.id: t.x_in for t in tape if t.spec.has_weights}
    for layer in model.weight_layers():
        entry = plan[layer.id]
        _fit_entry_params(model, entry, acts[layer.id], symmetric=symmetric)


def refit_plan(model: ModelGraph, plan: QuantPlan,
               calib_x: np.ndarray, cfg: EngineConfig = EngineConfig(), *,
               symmetric: bool = False) -> None:
    """Re-derive scale/threshold params from the current weights,
    keeping bit-widths and learned alphas."""
    _fit_plan_params(model, plan, calib_x, cfg, symmetric=symmetric)


def uniform_plan(model: ModelGraph, n: int,
                 calib_x: np.ndarray | None = None,
                 cfg: EngineConfig = EngineConfig(), *,
                 end_floor_bits: int = 8,
                 symmetric: bool = False) -> QuantPlan:
    """Every layer at n bits, end layers floored to end_floor_bits."""
    plan = QuantPlan()
    wl = model.weight_layers()
    fmts = dict(PolicyConfig().formats)
    for i, layer in enumerate(wl):
        bits = n
        if i in (0, len(wl) - 1) and bits < end_floor_bits:
            bits = end_floor_bits
        plan.add(PlanEntry(layer.id, bits, fmts[bits]))
    if calib_x is not None:
        _fit_plan_params(model, plan, calib_x, cfg, symmetric=symmetric)
    return plan


# ── model construction and files ─────────────────────────────────


def build_mlp(dims: Sequence[int], seed: int = 0,
              precision: str = "fxp8:f6") -> ModelGraph:
    """Fully-connected ReLU stack; final layer linear (softmax in loss)."""
    rng = np.random.default_rng(seed)
    layers = []
    weights = {}
    for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        lid = f"fc{i + 1}"
        layers.append(LayerSpec(
            lid, LayerKind.DENSE, (fan_in, fan_out),
            ActivationKind.NONE if last else ActivationKind.RELU,
            precision))
        scale = np.sqrt(2.0 / fan_in)
        weights[lid] = {
            "W": rng.normal(0.0, scale, size=(fan_out, fan_in)),
            "b": np.zeros(fan_out),
        }
    return ModelGraph(layers, weights)


_KIND_NAMES = {k.value: k for k in LayerKind}
_ACT_NAMES = {a.value: a for a in ActivationKind}


def save_model(model: ModelGraph, directory: str) -> None:
    """Manifest JSON plus one PLRN tensor file per weight array."""
    os.makedirs(directory, exist_ok=True)
    manifest = {"layers": [
        {
            "id": l.id,
            "kind": l.kind.value,
            "dims": list(l.dims),
            "activation": l.activation.value,
            "precision": l.precision,
        }
        for l in model.layers
    ]}
    with open(os.path.join(directory, "model.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for lid, tensors in model.weights.items():
        for name, arr in tensors.items():
            write_tensor(os.path.join(directory, f"{lid}.{name}.plrn"), arr)


def load_model(directory: str) -> ModelGraph:
    with open(os.path.join(directory, "model.json")) as fh:
        manifest = json.load(fh)
    layers = []
    weights = {}
    for entry in manifest["layers"]:
        spec = LayerSpec(
            entry["id"], _KIND_NAMES[entry["kind"]],
            tuple(entry.get("dims", ())),
            _ACT_NAMES[entry.get("activation", "none")],
            entry.get("precision", "fxp8:f6"))
        layers.append(spec)
        if spec.has_weights:
            weights[spec.id] = {
                "W": read_tensor(os.path.join(directory, f"{spec.id}.W.plrn")),
                "b": read_tensor(os.path.join(directory, f"{spec.id}.b.plrn")),
            }
    return ModelGraph(layers, weights)
