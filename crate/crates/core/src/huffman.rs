//! Canonical Huffman tables as carried in DHT segments.

use serde::Serialize;

use crate::bits::BitCursor;
use crate::error::{JpegError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TableClass {
    Dc,
    Ac,
}

/// Code-length counts and symbols for one Huffman table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HuffmanSpec {
    pub class: TableClass,
    pub id: u8,
    /// `counts[i]` is the number of codes of length `i + 1`.
    pub counts: [u8; 16],
    pub symbols: Vec<u8>,
}

/// One assigned codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Codeword {
    pub symbol: u8,
    pub length: u8,
    pub code: u16,
}

impl Codeword {
    /// The code as a string of '0'/'1' characters.
    pub fn bit_string(&self) -> String {
        (0..self.length).rev().map(|i| if self.code >> i & 1 == 1 { '1' } else { '0' }).collect()
    }
}

/// Bit-serial decoder for a canonical Huffman code.
#[derive(Debug, Clone)]
pub struct DecodeTable {
    // Indexed by code length 1..=16; -1 marks lengths with no codes.
    max_code: [i32; 17],
    min_code: [i32; 17],
    val_ptr: [usize; 17],
    symbols: Vec<u8>,
    codes: Vec<Codeword>,
}

/// Assigns canonical codes: increasing length, and within a length, the
/// order symbols are listed in.
pub fn build_huffman_decoder(spec: &HuffmanSpec) -> Result<DecodeTable> {
    let total: usize = spec.counts.iter().map(|&c| c as usize).sum();
    if total != spec.symbols.len() {
        return Err(JpegError::BadMarkerLength {
            marker: 0xC4,
            detail: format!("{} symbols listed for {} codes", spec.symbols.len(), total),
        });
    }
    let mut max_code = [-1i32; 17];
    let mut min_code = [0i32; 17];
    let mut val_ptr = [0usize; 17];
    let mut codes = Vec::with_capacity(total);
    let mut code: u32 = 0;
    let mut k = 0;
    for len in 1..=16usize {
        let n = spec.counts[len - 1] as usize;
        if n > 0 {
            val_ptr[len] = k;
            min_code[len] = code as i32;
            for _ in 0..n {
                codes.push(Codeword { symbol: spec.symbols[k], length: len as u8, code: code as u16 });
                code += 1;
                k += 1;
            }
            // Kraft: all codes of this length must fit in `len` bits.
            if code > 1 << len {
                return Err(JpegError::InvalidCode { length: len });
            }
            max_code[len] = code as i32 - 1;
        }
        code <<= 1;
    }
    Ok(DecodeTable { max_code, min_code, val_ptr, symbols: spec.symbols.clone(), codes })
}

impl DecodeTable {
    pub fn codes(&self) -> &[Codeword] {
        &self.codes
    }

    pub fn code_for(&self, symbol: u8) -> Option<Codeword> {
        self.codes.iter().copied().find(|c| c.symbol == symbol)
    }

    /// Decodes one symbol, reading at most 16 bits.
    pub fn decode(&self, cursor: &mut BitCursor<'_>) -> Result<u8> {
        let start = cursor.position();
        let mut code = 0i32;
        for len in 1..=16 {
            code = (code << 1) | cursor.read_bit()? as i32;
            if code <= self.max_code[len] {
                let idx = self.val_ptr[len] + (code - self.min_code[len]) as usize;
                return Ok(self.symbols[idx]);
            }
        }
        Err(JpegError::InvalidHuffmanCode { bit: start })
    }
}

/// The standard luminance DC table (ITU T.81 Annex K.3).
pub fn annex_k_dc_luminance() -> HuffmanSpec {
    HuffmanSpec {
        class: TableClass::Dc,
        id: 0,
        counts: [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0],
        symbols: (0..12).collect(),
    }
}
