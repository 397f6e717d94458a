//! On-disk formats and memory accounting.

pub mod format;
pub mod half;
pub mod memory;

pub use format::{
    read_quantized, read_quantized_with_dtype, read_tensor, write_atomic, write_quantized,
    write_tensor, DType,
};
pub use memory::{
    arbrc_cgb_memory_bits, arbrc_memory_bits, billm_memory_bits, fp16_memory_bits,
    layer_memory_bits, llama_13b_shapes, llama_7b_shapes, model_memory_report, preset_shapes,
    ptqtp_memory_bits, transformer_shapes, uniform_memory_bits, LayerShape, MemoryMethod,
    MemoryReport,
};
