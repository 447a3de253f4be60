"""Distribution-aware quantization with learnable activation clipping.

Weights quantize through an adaptive affine scheme: a scale factor
derived from the mean magnitude, saturation thresholds fitted to the
observed distribution (percentiles by default, symmetric [-1, 1] as a
compatibility mode), and uniform codes on [0, 2**n - 1].  Activations
clip through the PACT function with a learnable threshold alpha.
Layer bit-widths are assigned from a gradient-weighted sensitivity
metric via a percentile policy.

Tensors are plain float64 ndarrays (row-major).  The ``PLRN`` binary
tensor file format and the quantization-plan JSON layout live here.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .formats import parse_format

__all__ = [
    "QuantParams",
    "PactParams",
    "LayerSensitivity",
    "PlanEntry",
    "QuantPlan",
    "PolicyConfig",
    "ScaleResult",
    "QuantizeResult",
    "compute_scale",
    "fit_quant_params",
    "quantize_adaptive",
    "dequantize_codes",
    "pact_forward",
    "pact_quantize",
    "pact_gradients",
    "layer_sensitivity",
    "assign_precisions",
    "write_tensor",
    "read_tensor",
]


# ── parameters ───────────────────────────────────────────────────


@dataclass(frozen=True)
class QuantParams:
    """Weight-quantizer parameters: bit-width, clip thresholds, scale."""

    n: int
    w_low: float
    w_high: float
    scale_k: float
    degenerate: bool = False

    def __post_init__(self):
        if self.n not in (4, 8, 16):
            raise ValueError("bit-width must be 4, 8 or 16")
        if not self.w_low < self.w_high:
            raise ValueError("w_low must be below w_high")
        if not self.scale_k > 0:
            raise ValueError("scale_k must be positive")

    @property
    def levels(self) -> int:
        return (1 << self.n) - 1

    @property
    def step(self) -> float:
        return (self.w_high - self.w_low) / self.levels


@dataclass(frozen=True)
class PactParams:
    """Learnable clipping threshold and activation bit-width."""

    alpha: float
    n: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.n < 2:
            raise ValueError("need at least two quantization levels")


class ScaleResult(NamedTuple):
    value: float
    degenerate: bool


class QuantizeResult(NamedTuple):
    codes: np.ndarray       # int64 in [0, 2**n - 1]
    dequantized: np.ndarray


@dataclass(frozen=True)
class LayerSensitivity:
    layer_id: str
    s_sc8: float
    s_sc4: float
    s_l: float
    n_l: int
    grad_norm: float


@dataclass
class PlanEntry:
    layer_id: str
    n: int
    fmt: str
    weight: QuantParams | None = None
    act: PactParams | None = None


@dataclass
class QuantPlan:
    """Per-layer precision assignments; every layer appears exactly once."""

    entries: dict[str, PlanEntry] = field(default_factory=dict)

    def add(self, entry: PlanEntry) -> None:
        if entry.layer_id in self.entries:
            raise ValueError(f"duplicate layer {entry.layer_id!r}")
        parse_format(entry.fmt)  # reject unknown format strings
        self.entries[entry.layer_id] = entry

    def __getitem__(self, layer_id: str) -> PlanEntry:
        return self.entries[layer_id]

    def __contains__(self, layer_id: str) -> bool:
        return layer_id in self.entries

    def layer_ids(self) -> list[str]:
        return list(self.entries)

    def to_json(self) -> str:
        layers = []
        for e in self.entries.values():
            if e.weight is None or e.act is None:
                raise ValueError(f"layer {e.layer_id!r} has unfitted params")
            layers.append({
                "id": e.layer_id,
                "format": e.fmt,
                "n": e.n,
                "W_l": e.weight.w_low,
                "W_h": e.weight.w_high,
                "scale_k": e.weight.scale_k,
                "alpha": e.act.alpha,
            })
        return json.dumps({"layers": layers}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "QuantPlan":
        plan = cls()
        doc = json.loads(text)
        for layer in doc["layers"]:
            n = int(layer["n"])
            plan.add(PlanEntry(
                layer_id=layer["id"], n=n, fmt=layer["format"],
                weight=QuantParams(n, float(layer["W_l"]), float(layer["W_h"]),
                                   float(layer["scale_k"])),
                act=PactParams(float(layer["alpha"]), n)))
        return plan


# ── scale factor and adaptive quantization ───────────────────────


def compute_scale(w: np.ndarray, n: int) -> ScaleResult:
    """Scale factor mean(|W|) * (2**n - 1) / 2**(n-1).

    An all-zero tensor has no usable magnitude; it reports scale 1.0
    with the degeneracy flag set.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.size == 0:
        raise ValueError("empty tensor")
    mean_abs = float(np.mean(np.abs(w)))
    if mean_abs == 0.0:
        return ScaleResult(1.0, True)
    return ScaleResult(mean_abs * ((1 << n) - 1) / (1 << (n - 1)), False)


def fit_quant_params(w: np.ndarray, n: int, *, low_pct: float = 0.5,
                     high_pct: float = 99.5,
                     symmetric: bool = False) -> QuantParams:
    """Fit thresholds to the scaled weight distribution.

    Default thresholds are the 0.5th/99.5th percentiles of W/k;
    ``symmetric`` forces the [-1, 1] compatibility range.
    """
    scale = compute_scale(w, n)
    if symmetric or scale.degenerate:
        return QuantParams(n, -1.0, 1.0, scale.value, scale.degenerate)
    scaled = np.asarray(w, dtype=np.float64) / scale.value
    lo = float(np.percentile(scaled, low_pct))
    hi = float(np.percentile(scaled, high_pct))
    if not lo < hi:  # near-constant tensor
        lo, hi = lo - 0.5, lo + 0.5
    return QuantParams(n, lo, hi, scale.value)


def quantize_adaptive(w: np.ndarray, p: QuantParams) -> QuantizeResult:
    """Uniform affine codes of clip(W/k) on [w_low, w_high].

    codes = round((clip(W/k, W_l, W_h) - W_l) * (2**n - 1) / (W_h - W_l))
    dequantized = codes * (W_h - W_l) / (2**n - 1) + W_l
    Rounding is half-to-even; codes always land in [0, 2**n - 1].
    """
    w = np.asarray(w, dtype=np.float64)
    clipped = np.clip(w / p.scale_k, p.w_low, p.w_high)
    levels = p.levels
    codes = np.rint((clipped - p.w_low) * (levels / (p.w_high - p.w_low)))
    codes = codes.astype(np.int64)
    deq = codes * ((p.w_high - p.w_low) / levels) + p.w_low
    return QuantizeResult(codes, deq)


def dequantize_codes(codes: np.ndarray, p: QuantParams) -> np.ndarray:
    return np.asarray(codes, dtype=np.float64) * (
        (p.w_high - p.w_low) / p.levels) + p.w_low


def reconstruct(w: np.ndarray, p: QuantParams) -> np.ndarray:
    """Quantize-dequantize in the original weight domain (scale applied)."""
    return quantize_adaptive(w, p).dequantized * p.scale_k


# ── PACT activation clipping ─────────────────────────────────────


def pact_forward(x: np.ndarray, p: PactParams) -> np.ndarray:
    """0.5 * (|x| - |x - alpha| + alpha), identical to clip(x, 0, alpha)."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (np.abs(x) - np.abs(x - p.alpha) + p.alpha)


def pact_quantize(y: np.ndarray, p: PactParams) -> np.ndarray:
    """Snap clipped activations onto the 2**n-level lattice [0, alpha]."""
    y = np.asarray(y, dtype=np.float64)
    levels = (1 << p.n) - 1
    return np.rint(y * (levels / p.alpha)) * (p.alpha / levels)


class PactGradients(NamedTuple):
    dx: np.ndarray
    dalpha: float


def pact_gradients(x: np.ndarray, alpha: float,
                   upstream: np.ndarray) -> PactGradients:
    """Straight-through gradients of the clipped activation.

    dx passes upstream inside [0, alpha]; dalpha collects upstream
    where the input saturates high (x >= alpha).
    """
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    inside = (x >= 0.0) & (x <= alpha)
    dx = upstream * inside
    dalpha = float(np.sum(upstream * (x >= alpha)))
    return PactGradients(dx, dalpha)


# ── layer sensitivity and precision assignment ───────────────────


def layer_sensitivity(layer_id: str, w: np.ndarray, grad: np.ndarray,
                      current: QuantParams,
                      candidates: Mapping[int, QuantParams],
                      ) -> LayerSensitivity:
    """Gradient-weighted quantization-error sensitivity of one layer.

    s_k = (||Q(w) - w|| - ||Q_k(w) - w||) * ||grad|| / n_l with L2
    norms, where Q is the current quantizer and Q_k the same scheme
    re-instantiated at candidate bit-width k; the layer score is the
    max over the 8- and 4-bit candidates.
    """
    w = np.asarray(w, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if w.shape != grad.shape:
        raise ValueError("gradient shape must match weights")
    n_l = w.size
    if n_l == 0:
        raise ValueError("empty layer")
    gnorm = float(np.linalg.norm(grad))
    base_err = float(np.linalg.norm(reconstruct(w, current) - w))

    def score(k: int) -> float:
        err_k = float(np.linalg.norm(reconstruct(w, candidates[k]) - w))
        return (base_err - err_k) * gnorm / n_l

    s8 = score(8)
    s4 = score(4)
    return LayerSensitivity(layer_id, s8, s4, max(s8, s4), n_l, gnorm)


_DEFAULT_FORMATS = {4: "fxp4:f2", 8: "fxp8:f6", 16: "fxp16:f14"}


@dataclass(frozen=True)
class PolicyConfig:
    """Percentile thresholds for the width bands plus end-layer floor."""

    p_low: float = 30.0
    p_high: float = 85.0
    end_floor_bits: int = 8
    formats: Mapping[int, str] = field(
        default_factory=lambda: dict(_DEFAULT_FORMATS))


def assign_precisions(sensitivities: Sequence[LayerSensitivity],
                      policy: PolicyConfig = PolicyConfig()) -> QuantPlan:
    """Percentile banding of layer scores into 4/8/16-bit widths.

    Scores strictly below the p_low percentile take 4 bits, strictly
    above p_high take 16, the rest take 8; the first and last layers
    are floored to at least ``end_floor_bits``.  Scaling every score
    by a positive constant leaves the plan unchanged.
    """
    if not sensitivities:
        raise ValueError("no layers")
    scores = np.array([s.s_l for s in sensitivities], dtype=np.float64)
    lo = float(np.percentile(scores, policy.p_low))
    hi = float(np.percentile(scores, policy.p_high))
    plan = QuantPlan()
    last = len(sensitivities) - 1
    for i, s in enumerate(sensitivities):
        if s.s_l < lo:
            n = 4
        elif s.s_l > hi:
            n = 16
        else:
            n = 8
        if i in (0, last) and n < policy.end_floor_bits:
            n = policy.end_floor_bits
        plan.add(PlanEntry(s.layer_id, n, policy.formats[n]))
    return plan


# ── tensor files ─────────────────────────────────────────────────

_MAGIC = b"PLRN"
_VERSION = 1


def write_tensor(path: str, arr: np.ndarray) -> None:
    """Binary tensor file: magic PLRN, u16 version, u16 rank, u32 dims,
    float64 little-endian payload in row-major order."""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HH", _VERSION, arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<I", d))
        fh.write(arr.astype("<f8").tobytes())


def read_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a PLRN tensor file")
        version, rank = struct.unpack("<HH", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        shape = struct.unpack(f"<{rank}I", fh.read(4 * rank)) if rank else ()
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
        if data.size != count:
            raise ValueError(f"{path}: truncated payload")
        return data.reshape(shape).copy()
