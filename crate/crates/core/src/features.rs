//! Frequency cubes and bit features built from a decoded coefficient grid.

use serde::{Deserialize, Serialize};

use crate::bits::DestuffedScan;
use crate::entropy::{decode_scan, CoeffBlock, CoeffBlockGrid};
use crate::error::Result;
use crate::parser::{parse_jpeg, FrameHeader, ParsedJpeg, QuantTable};
use crate::zigzag::inverse_zigzag;

/// Default per-block bit budget for bitstream features.
pub const DEFAULT_CROP_WIDTH: usize = 128;

/// Pixel dimensions of the luma plane and the two chroma planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageGeometry {
    pub d_w0: usize,
    pub d_h0: usize,
    pub d_w1: usize,
    pub d_h1: usize,
    pub d_w2: usize,
    pub d_h2: usize,
}

impl ImageGeometry {
    pub fn from_frame(frame: &FrameHeader) -> Self {
        let (d_w0, d_h0) = frame.component_dims(0);
        let (d_w1, d_h1) = frame.component_dims(1);
        let (d_w2, d_h2) = frame.component_dims(2);
        ImageGeometry { d_w0, d_h0, d_w1, d_h1, d_w2, d_h2 }
    }

    /// Geometry of a 4:2:0 image of the given luma size.
    pub fn yuv420(width: usize, height: usize) -> Self {
        let (cw, ch) = (width.div_ceil(2), height.div_ceil(2));
        ImageGeometry { d_w0: width, d_h0: height, d_w1: cw, d_h1: ch, d_w2: cw, d_h2: ch }
    }

    /// Block grids `(grid_w, grid_h)` for a 4:2:0 encoding, padded to whole MCUs.
    pub fn grids_420(&self) -> [(usize, usize); 3] {
        let (mx, my) = (self.d_w0.div_ceil(16), self.d_h0.div_ceil(16));
        [(2 * mx, 2 * my), (mx, my), (mx, my)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Transform,
    Bitstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub mode: FeatureMode,
    #[serde(rename = "cropWidth")]
    pub crop_width: usize,
    /// Encoder quality the corpus was produced with; metadata only.
    pub quality: Option<u32>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig { mode: FeatureMode::Transform, crop_width: DEFAULT_CROP_WIDTH, quality: None }
    }
}

impl ExtractionConfig {
    pub fn bitstream(crop_width: usize) -> Self {
        ExtractionConfig { mode: FeatureMode::Bitstream, crop_width, quality: None }
    }
}

/// Dense `[grid_h, grid_w, channels]` tensor, channel-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor<T> {
    pub grid_w: usize,
    pub grid_h: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Default> FeatureTensor<T> {
    pub fn zeros(grid_w: usize, grid_h: usize, channels: usize) -> Self {
        FeatureTensor { grid_w, grid_h, channels, data: vec![T::default(); grid_w * grid_h * channels] }
    }

    /// Channel vector of cell `(gx, gy)`.
    pub fn cell(&self, gx: usize, gy: usize) -> &[T] {
        let at = (gy * self.grid_w + gx) * self.channels;
        &self.data[at..at + self.channels]
    }

    pub fn cell_mut(&mut self, gx: usize, gy: usize) -> &mut [T] {
        let at = (gy * self.grid_w + gx) * self.channels;
        &mut self.data[at..at + self.channels]
    }

    /// `[grid_h, grid_w, channels]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.grid_h, self.grid_w, self.channels]
    }
}

/// Dequantized DCT coefficients per block; channel `k` is zigzag index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCubeSet {
    pub components: [FeatureTensor<f32>; 3],
    pub geometry: ImageGeometry,
}

impl FrequencyCubeSet {
    pub fn element_count(&self) -> usize {
        self.components.iter().map(|t| t.data.len()).sum()
    }
}

/// Per-block entropy-coded bits as 0/1 values, cropped or padded to `crop_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitFeatureSet {
    pub components: [FeatureTensor<u8>; 3],
    pub crop_width: usize,
    /// Blocks whose span was longer than `crop_width`.
    pub truncated_count: usize,
    /// Blocks whose span fit and were zero-padded.
    pub padded_count: usize,
    pub geometry: ImageGeometry,
}

/// `coeffs[k] × table[k]`, zigzag order.
pub fn dequantize_block(block: &CoeffBlock, table: &QuantTable) -> [f32; 64] {
    let mut out = [0f32; 64];
    for k in 0..64 {
        out[k] = block.coeffs[k] as f32 * table.values[k] as f32;
    }
    out
}

/// Quant table for each frame component, in component order.
pub fn component_quant_tables(parsed: &ParsedJpeg) -> Vec<QuantTable> {
    (0..parsed.frame.components.len()).map(|c| parsed.quant_table_for(c).clone()).collect()
}

/// Writes each dequantized block into its grid cell.
pub fn build_frequency_cubes(grid: &CoeffBlockGrid, tables: &[QuantTable], geometry: ImageGeometry) -> FrequencyCubeSet {
    let comps: Vec<FeatureTensor<f32>> = grid
        .components
        .iter()
        .zip(tables)
        .map(|(g, table)| {
            let mut t = FeatureTensor::zeros(g.grid_w, g.grid_h, 64);
            for b in &g.blocks {
                t.cell_mut(b.grid_x, b.grid_y).copy_from_slice(&dequantize_block(b, table));
            }
            t
        })
        .collect();
    let components: [FeatureTensor<f32>; 3] = comps.try_into().expect("three components");
    FrequencyCubeSet { components, geometry }
}

/// Copies each block's span bits into its grid cell, keeping at most
/// `config.crop_width` bits and zero-filling the rest.
pub fn build_bit_features(
    grid: &CoeffBlockGrid,
    scan: &DestuffedScan,
    config: &ExtractionConfig,
    geometry: ImageGeometry,
) -> BitFeatureSet {
    let crop = config.crop_width;
    assert!(crop >= 1, "crop width must be at least 1");
    let mut truncated_count = 0;
    let mut padded_count = 0;
    let comps: Vec<FeatureTensor<u8>> = grid
        .components
        .iter()
        .map(|g| {
            let mut t = FeatureTensor::zeros(g.grid_w, g.grid_h, crop);
            for s in &g.spans {
                let take = if s.len() > crop {
                    truncated_count += 1;
                    crop
                } else {
                    padded_count += 1;
                    s.len()
                };
                let cell = t.cell_mut(s.grid_x, s.grid_y);
                for (i, slot) in cell[..take].iter_mut().enumerate() {
                    *slot = scan.bit(s.start_bit + i);
                }
            }
            t
        })
        .collect();
    let components: [FeatureTensor<u8>; 3] = comps.try_into().expect("three components");
    BitFeatureSet { components, crop_width: crop, truncated_count, padded_count, geometry }
}

// cos((2x+1)uπ/16) · C(u)/2 with C(0) = 1/√2
fn idct_basis() -> [[f64; 8]; 8] {
    let mut m = [[0f64; 8]; 8];
    for (x, row) in m.iter_mut().enumerate() {
        for (u, v) in row.iter_mut().enumerate() {
            let c = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
            *v = 0.5 * c * (((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI) / 16.0).cos();
        }
    }
    m
}

/// Orthonormal 2-D inverse DCT without level shift or clamping.
/// Input and output are `[row][col]`.
pub fn idct_block_f64(coeffs: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let basis = idct_basis();
    // rows then columns
    let mut tmp = [[0f64; 8]; 8];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v][x] = (0..8).map(|u| basis[x][u] * coeffs[v][u]).sum();
        }
    }
    let mut out = [[0f64; 8]; 8];
    for y in 0..8 {
        for x in 0..8 {
            out[y][x] = (0..8).map(|v| basis[y][v] * tmp[v][x]).sum();
        }
    }
    out
}

/// Inverse DCT with +128 level shift, rounded and clamped to `[0, 255]`.
pub fn idct_block(coeffs: &[[f64; 8]; 8]) -> [[u8; 8]; 8] {
    let f = idct_block_f64(coeffs);
    let mut out = [[0u8; 8]; 8];
    for y in 0..8 {
        for x in 0..8 {
            out[y][x] = (f[y][x] + 128.0).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

/// Natural-order 8×8 of dequantized coefficients.
pub fn dequantized_natural(block: &CoeffBlock, table: &QuantTable) -> [[f64; 8]; 8] {
    let deq = dequantize_block(block, table).map(f64::from);
    inverse_zigzag(&deq)
}

/// Reconstructs a component's sample plane (`grid_w*8` × `grid_h*8`, row-major).
/// Verification only.
pub fn reconstruct_component(grid: &CoeffBlockGrid, component: usize, table: &QuantTable) -> Vec<u8> {
    let g = &grid.components[component];
    let stride = g.grid_w * 8;
    let mut plane = vec![0u8; stride * g.grid_h * 8];
    for b in &g.blocks {
        let pixels = idct_block(&dequantized_natural(b, table));
        for (y, row) in pixels.iter().enumerate() {
            let at = (b.grid_y * 8 + y) * stride + b.grid_x * 8;
            plane[at..at + 8].copy_from_slice(row);
        }
    }
    plane
}

/// Either feature representation of one image.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageFeatures {
    Transform(FrequencyCubeSet),
    Bitstream(BitFeatureSet),
}

/// Parses, decodes and builds the configured features for one JPEG file.
pub fn extract_features(bytes: &[u8], config: &ExtractionConfig) -> Result<ImageFeatures> {
    let parsed = parse_jpeg(bytes)?;
    let (grid, scan) = decode_scan(&parsed)?;
    let geometry = ImageGeometry::from_frame(&parsed.frame);
    Ok(match config.mode {
        FeatureMode::Transform => {
            ImageFeatures::Transform(build_frequency_cubes(&grid, &component_quant_tables(&parsed), geometry))
        }
        FeatureMode::Bitstream => ImageFeatures::Bitstream(build_bit_features(&grid, &scan, config, geometry)),
    })
}
