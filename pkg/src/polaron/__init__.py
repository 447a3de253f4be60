"""Bit-exact trans-precision SIMD MAC emulation, adaptive quantization
and a desk-scale execution simulator."""

from .formats import (
    BF16,
    EncodedScalar,
    ExactReal,
    FormatDescriptor,
    FP8_E4M3,
    FP8_E5M2,
    FP16_E5M10,
    FP16_E6M9,
    FXP4,
    FXP8,
    FXP16,
    Kind,
    POSIT8,
    POSIT16,
    RoundingMode,
    SpecialValue,
    SUPPORTED_FORMATS,
    UnpackedOperand,
    conformance_table_csv,
    decode,
    encode,
    fxp,
    pack_normalize_round,
    parse_format,
    posit,
    unpack,
)
from .mac import (
    Accumulation,
    DotResult,
    MacConfig,
    MacOp,
    PipelineStats,
    PrecisionMode,
    VectorWord,
    WideAccumulator,
    booth_multiply_4x4,
    csa_reduce,
    dot_product,
    dot_product_many,
    exponent_max_align,
    lane_multiply,
    pipeline_trace,
    run_pipeline,
    simd_mac_step,
    tile_multiply,
)
from .oracle import RationalAcc, oracle_dot, oracle_round
from .quantize import (
    PactParams,
    PlanEntry,
    PolicyConfig,
    QuantParams,
    QuantPlan,
    assign_precisions,
    compute_scale,
    fit_quant_params,
    layer_sensitivity,
    pact_forward,
    pact_gradients,
    pact_quantize,
    quantize_adaptive,
    read_tensor,
    write_tensor,
)
from .activations import (
    ActivationKind,
    activation_apply,
    cordic_exp,
    cordic_sigmoid,
    cordic_sinh_cosh,
    cordic_tanh,
)
from .engine import (
    EngineConfig,
    ExecStats,
    LayerKind,
    LayerSpec,
    MemoryModel,
    ModelGraph,
    TrainConfig,
    build_mlp,
    build_plan,
    evaluate,
    load_model,
    memory_access,
    run_inference,
    save_model,
    train_epochs,
    train_step,
    uniform_plan,
)

__version__ = "0.1.0"
