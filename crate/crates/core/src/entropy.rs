//! Huffman decoding of the scan into quantized coefficient blocks, with the
//! exact bit span each block occupies in the destuffed stream.

use std::fmt;

use crate::bits::{destuff_scan, BitCursor, DestuffedScan};
use crate::error::{JpegError, Result};
use crate::huffman::{build_huffman_decoder, DecodeTable};
use crate::parser::ParsedJpeg;

/// Quantized coefficients of one 8×8 block, zigzag order, DC already
/// un-differenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoeffBlock {
    pub coeffs: [i16; 64],
    pub component: usize,
    pub grid_x: usize,
    pub grid_y: usize,
}

/// Half-open `[start_bit, end_bit)` range of a block in the destuffed scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockBitSpan {
    pub start_bit: usize,
    pub end_bit: usize,
    pub component: usize,
    pub grid_x: usize,
    pub grid_y: usize,
    /// False when the block codes zigzag index 63 and so carries no EOB.
    pub has_explicit_eob: bool,
}

impl BlockBitSpan {
    pub fn len(&self) -> usize {
        self.end_bit - self.start_bit
    }

    pub fn is_empty(&self) -> bool {
        self.end_bit == self.start_bit
    }
}

/// Blocks and spans of one component, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentGrid {
    pub grid_w: usize,
    pub grid_h: usize,
    pub h_sampling: usize,
    pub v_sampling: usize,
    pub blocks: Vec<CoeffBlock>,
    pub spans: Vec<BlockBitSpan>,
}

impl ComponentGrid {
    pub fn block(&self, gx: usize, gy: usize) -> &CoeffBlock {
        &self.blocks[gy * self.grid_w + gx]
    }

    pub fn span(&self, gx: usize, gy: usize) -> &BlockBitSpan {
        &self.spans[gy * self.grid_w + gx]
    }
}

/// Decoded coefficient grids for every component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffBlockGrid {
    pub components: Vec<ComponentGrid>,
    pub mcus_x: usize,
    pub mcus_y: usize,
    pub restart_interval: usize,
}

impl CoeffBlockGrid {
    /// `(component, grid_x, grid_y)` in the order blocks appear in the scan.
    pub fn decode_order(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (mx_n, my_n) = (self.mcus_x, self.mcus_y);
        (0..my_n * mx_n).flat_map(move |mcu| {
            let (mx, my) = (mcu % mx_n, mcu / mx_n);
            self.components.iter().enumerate().flat_map(move |(c, g)| {
                (0..g.v_sampling).flat_map(move |r| {
                    (0..g.h_sampling).map(move |s| (c, mx * g.h_sampling + s, my * g.v_sampling + r))
                })
            })
        })
    }

    pub fn total_blocks(&self) -> usize {
        self.components.iter().map(|g| g.blocks.len()).sum()
    }
}

/// Sign-extends a `size`-bit magnitude field (JPEG EXTEND).
#[inline]
pub fn extend(raw: u32, size: u8) -> i32 {
    if size == 0 {
        return 0;
    }
    let raw = raw as i32;
    if raw >= 1 << (size - 1) {
        raw
    } else {
        raw - ((1 << size) - 1)
    }
}

fn to_i16(v: i32, bit: usize) -> Result<i16> {
    i16::try_from(v).map_err(|_| JpegError::CoefficientRange { value: v, bit })
}

/// Decodes one block starting at the cursor.
///
/// Returns the block (with `component` and grid coordinates left at zero),
/// the updated DC predictor, and the span of bits consumed.
pub fn decode_block(
    cursor: &mut BitCursor<'_>,
    dc_table: &DecodeTable,
    ac_table: &DecodeTable,
    dc_pred: i32,
) -> Result<(CoeffBlock, i32, BlockBitSpan)> {
    let start = cursor.position();
    let mut coeffs = [0i16; 64];

    let cat = dc_table.decode(cursor)?;
    if cat > 15 {
        return Err(JpegError::InvalidHuffmanCode { bit: start });
    }
    let diff = extend(cursor.read_bits(cat)?, cat);
    let dc = dc_pred + diff;
    coeffs[0] = to_i16(dc, start)?;

    let mut k = 1usize;
    let mut eob = false;
    while k < 64 {
        let sym_at = cursor.position();
        let rs = ac_table.decode(cursor)?;
        let run = (rs >> 4) as usize;
        let size = rs & 0x0F;
        if size == 0 {
            if run == 0 {
                eob = true;
                break;
            }
            if run != 15 {
                return Err(JpegError::InvalidHuffmanCode { bit: sym_at });
            }
            // ZRL: sixteen zeros
            if k + 16 > 64 {
                return Err(JpegError::CoefficientOverrun { index: k + 15, bit: sym_at });
            }
            k += 16;
            continue;
        }
        k += run;
        if k > 63 {
            return Err(JpegError::CoefficientOverrun { index: k, bit: sym_at });
        }
        let v = extend(cursor.read_bits(size)?, size);
        coeffs[k] = to_i16(v, sym_at)?;
        k += 1;
    }
    let span = BlockBitSpan {
        start_bit: start,
        end_bit: cursor.position(),
        component: 0,
        grid_x: 0,
        grid_y: 0,
        has_explicit_eob: eob,
    };
    Ok((CoeffBlock { coeffs, component: 0, grid_x: 0, grid_y: 0 }, dc, span))
}

/// Destuffs and decodes the whole scan.
pub fn decode_scan(parsed: &ParsedJpeg) -> Result<(CoeffBlockGrid, DestuffedScan)> {
    let scan = destuff_scan(&parsed.scan_bytes)?;
    let grid = decode_destuffed(parsed, &scan)?;
    Ok((grid, scan))
}

/// Decodes an already destuffed scan.
pub fn decode_destuffed(parsed: &ParsedJpeg, scan: &DestuffedScan) -> Result<CoeffBlockGrid> {
    let frame = &parsed.frame;
    let (mcus_x, mcus_y) = frame.mcu_dims();
    // Every block costs at least a DC code and an EOB code; reject before
    // allocating grids a corrupt frame header could make enormous.
    let blocks_per_mcu: usize = frame.components.iter().map(|c| c.h_sampling as usize * c.v_sampling as usize).sum();
    if mcus_x * mcus_y * blocks_per_mcu * 2 > scan.bit_len() {
        return Err(JpegError::BitstreamExhausted { bit: scan.bit_len() });
    }
    let mut tables = Vec::with_capacity(frame.components.len());
    let mut components = Vec::with_capacity(frame.components.len());
    for (c, sc) in parsed.scan.components.iter().enumerate() {
        let dc = parsed.dc_tables[sc.dc_table as usize].as_ref();
        let ac = parsed.ac_tables[sc.ac_table as usize].as_ref();
        let dc = dc.ok_or(JpegError::MissingTable { kind: "DC Huffman", id: sc.dc_table })?;
        let ac = ac.ok_or(JpegError::MissingTable { kind: "AC Huffman", id: sc.ac_table })?;
        tables.push((build_huffman_decoder(dc)?, build_huffman_decoder(ac)?));
        let (grid_w, grid_h) = frame.grid_dims(c);
        let fc = &frame.components[c];
        let empty_block = CoeffBlock { coeffs: [0; 64], component: c, grid_x: 0, grid_y: 0 };
        let empty_span =
            BlockBitSpan { start_bit: 0, end_bit: 0, component: c, grid_x: 0, grid_y: 0, has_explicit_eob: false };
        components.push(ComponentGrid {
            grid_w,
            grid_h,
            h_sampling: fc.h_sampling as usize,
            v_sampling: fc.v_sampling as usize,
            blocks: vec![empty_block; grid_w * grid_h],
            spans: vec![empty_span; grid_w * grid_h],
        });
    }
    let mut grid = CoeffBlockGrid { components, mcus_x, mcus_y, restart_interval: parsed.restart_interval as usize };

    let order: Vec<_> = grid.decode_order().collect();
    let per_mcu = order.len() / (mcus_x * mcus_y);
    let mut cursor = scan.cursor();
    let mut preds = vec![0i32; grid.components.len()];
    let mut next_restart = 0;
    let interval = grid.restart_interval;
    for (i, &(c, gx, gy)) in order.iter().enumerate() {
        let mcu = i / per_mcu;
        if interval > 0 && mcu > 0 && mcu % interval == 0 && i % per_mcu == 0 {
            // Padding up to the marker must be under a byte.
            let at = scan.restarts.get(next_restart).copied();
            match at {
                Some(off) if off >= cursor.position() && off - cursor.position() < 8 => cursor.seek(off),
                _ => return Err(JpegError::MissingRestart { mcu }),
            }
            next_restart += 1;
            preds.iter_mut().for_each(|p| *p = 0);
        }
        let (dc_t, ac_t) = &tables[c];
        let (mut block, pred, mut span) = decode_block(&mut cursor, dc_t, ac_t, preds[c])?;
        preds[c] = pred;
        block.component = c;
        block.grid_x = gx;
        block.grid_y = gy;
        span.component = c;
        span.grid_x = gx;
        span.grid_y = gy;
        let g = &mut grid.components[c];
        let idx = gy * g.grid_w + gx;
        g.blocks[idx] = block;
        g.spans[idx] = span;
    }
    Ok(grid)
}

/// First way in which a set of spans fails to tile a bitstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TilingViolation {
    EmptySpan { position: usize },
    WrongCell { position: usize, expected: (usize, usize, usize), found: (usize, usize, usize) },
    Overlap { position: usize, prev_end: usize, start: usize },
    Gap { position: usize, prev_end: usize, start: usize },
    BadPadding { bit: usize },
    TrailingBits { last_end: usize, stream_len: usize },
}

impl fmt::Display for TilingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TilingViolation::EmptySpan { position } => write!(f, "span #{position} is empty"),
            TilingViolation::WrongCell { position, expected, found } => {
                write!(f, "span #{position} belongs to {found:?}, decode order expects {expected:?}")
            }
            TilingViolation::Overlap { position, prev_end, start } => {
                write!(f, "span #{position} starts at {start}, before previous end {prev_end}")
            }
            TilingViolation::Gap { position, prev_end, start } => {
                write!(f, "span #{position} starts at {start}, leaving an illegal gap after {prev_end}")
            }
            TilingViolation::BadPadding { bit } => write!(f, "padding bit {bit} is 0"),
            TilingViolation::TrailingBits { last_end, stream_len } => {
                write!(f, "{} bits after the last span (stream length {stream_len})", stream_len - last_end)
            }
        }
    }
}

/// Checks that the spans, in decode order, partition the stream.
///
/// Gaps are allowed only as fewer than 8 one-bits of byte-alignment
/// padding that end exactly at a restart offset or at the end of the stream.
pub fn verify_span_tiling(grid: &CoeffBlockGrid, scan: &DestuffedScan) -> std::result::Result<(), TilingViolation> {
    let restarts = &scan.restarts;
    let mut prev_end = 0usize;
    let check_pad = |from: usize, to: usize| -> std::result::Result<(), TilingViolation> {
        match (from..to).find(|&b| scan.bit(b) == 0) {
            Some(bit) => Err(TilingViolation::BadPadding { bit }),
            None => Ok(()),
        }
    };
    for (position, (c, gx, gy)) in grid.decode_order().enumerate() {
        let g = &grid.components[c];
        let span = &g.spans[gy * g.grid_w + gx];
        let found = (span.component, span.grid_x, span.grid_y);
        if found != (c, gx, gy) {
            return Err(TilingViolation::WrongCell { position, expected: (c, gx, gy), found });
        }
        if span.end_bit <= span.start_bit {
            return Err(TilingViolation::EmptySpan { position });
        }
        let start = span.start_bit;
        if start < prev_end {
            return Err(TilingViolation::Overlap { position, prev_end, start });
        }
        if start > prev_end {
            let legal = start - prev_end < 8 && restarts.binary_search(&start).is_ok();
            if !legal {
                return Err(TilingViolation::Gap { position, prev_end, start });
            }
            check_pad(prev_end, start)?;
        }
        prev_end = span.end_bit;
    }
    let stream_len = scan.bit_len();
    if prev_end > stream_len || stream_len - prev_end >= 8 {
        return Err(TilingViolation::TrailingBits { last_end: prev_end, stream_len });
    }
    check_pad(prev_end, stream_len)
}
