"""Salience-driven mixed-precision weight quantization."""

from ._core import (  # noqa: F401
    BitPlan,
    PackedModel,
    QuantizationResult,
    QuantizedBlock,
    SlimqError,
    dense_reference,
    fake_quantize,
    hessian,
    load_packed,
    output_kl,
    pack,
    packed_matmul,
    quantize_layer,
    quantize_uniform,
    read_matrix,
    read_tensor,
    salience,
    save_packed,
    unpack,
    write_matrix,
)

__all__ = [name for name in dir() if not name.startswith("_")]
