//! Baseline JPEG decoding down to the entropy-coded bits, and the two
//! compressed-domain feature representations built from it:
//!
//! * frequency cubes: dequantized DCT coefficients per 8×8 block, one
//!   channel per zigzag index;
//! * bit features: each block's entropy-coded bits, cropped or zero-padded
//!   to a fixed width.

pub mod bits;
pub mod entropy;
pub mod error;
pub mod features;
pub mod huffman;
pub mod jtfx;
pub mod parser;
pub mod zigzag;

pub use bits::{destuff_scan, BitCursor, DestuffedScan};
pub use entropy::{
    decode_block, decode_scan, extend, verify_span_tiling, BlockBitSpan, CoeffBlock, CoeffBlockGrid, ComponentGrid,
    TilingViolation,
};
pub use error::JpegError;
pub use huffman::{build_huffman_decoder, DecodeTable, HuffmanSpec, TableClass};
pub use parser::{parse_jpeg, FrameHeader, ParsedJpeg, QuantTable, ScanHeader};
pub use features::{
    build_bit_features, build_frequency_cubes, component_quant_tables, dequantize_block, extract_features,
    idct_block, BitFeatureSet, ExtractionConfig, FeatureMode, FeatureTensor, FrequencyCubeSet, ImageFeatures,
    ImageGeometry, DEFAULT_CROP_WIDTH,
};
pub use jtfx::{read_features, write_features, FeatureFile, FeatureKind, JtfxError};
pub use zigzag::inverse_zigzag;
