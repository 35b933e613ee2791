//! Byte stuffing removal and a bit cursor over the destuffed scan.

use crate::error::{JpegError, Result};

/// Entropy-coded data with stuffing and restart markers removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DestuffedScan {
    bytes: Vec<u8>,
    /// Bit offsets (into the destuffed stream) at which each RSTn marker sat.
    pub restarts: Vec<usize>,
    /// The `n` of each removed RSTn marker, parallel to `restarts`.
    pub restart_ids: Vec<u8>,
}

impl DestuffedScan {
    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Length of the destuffed stream in bits.
    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }

    /// Bit at `pos` (MSB-first within each byte).
    #[inline]
    pub fn bit(&self, pos: usize) -> u8 {
        (self.bytes[pos >> 3] >> (7 - (pos & 7))) & 1
    }

    /// Copies bits `[start, end)` as 0/1 bytes.
    pub fn bit_range(&self, start: usize, end: usize) -> Vec<u8> {
        (start..end).map(|p| self.bit(p)).collect()
    }

    pub fn cursor(&self) -> BitCursor<'_> {
        BitCursor { bytes: &self.bytes, pos: 0 }
    }

    /// Re-applies byte stuffing and reinserts restart markers.
    pub fn restuff(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.bytes.len() + self.bytes.len() / 64 + 2 * self.restarts.len());
        let mut next = 0;
        for (i, &b) in self.bytes.iter().enumerate() {
            while next < self.restarts.len() && self.restarts[next] == i * 8 {
                out.extend_from_slice(&[0xFF, 0xD0 + self.restart_ids[next]]);
                next += 1;
            }
            out.push(b);
            if b == 0xFF {
                out.push(0x00);
            }
        }
        for &id in &self.restart_ids[next..] {
            out.extend_from_slice(&[0xFF, 0xD0 + id]);
        }
        out
    }
}

/// Removes byte stuffing (`FF 00` → `FF`) and `RSTn` markers from scan data.
///
/// `scan` must be the bytes between the SOS header and the terminating
/// marker, exclusive.
pub fn destuff_scan(scan: &[u8]) -> Result<DestuffedScan> {
    let mut bytes = Vec::with_capacity(scan.len());
    let mut restarts = Vec::new();
    let mut restart_ids = Vec::new();
    let mut i = 0;
    while i < scan.len() {
        let b = scan[i];
        if b != 0xFF {
            bytes.push(b);
            i += 1;
            continue;
        }
        match scan.get(i + 1) {
            Some(0x00) => {
                bytes.push(0xFF);
                i += 2;
            }
            Some(&m @ 0xD0..=0xD7) => {
                restarts.push(bytes.len() * 8);
                restart_ids.push(m - 0xD0);
                i += 2;
            }
            Some(&m) => return Err(JpegError::StrayMarker { marker: m, offset: i }),
            None => return Err(JpegError::TruncatedFile("scan ends inside a marker")),
        }
    }
    Ok(DestuffedScan { bytes, restarts, restart_ids })
}

/// MSB-first bit reader over destuffed bytes.
#[derive(Debug, Clone)]
pub struct BitCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitCursor<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitCursor { bytes, pos: 0 }
    }

    /// Current offset in bits.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn seek(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<u32> {
        let byte = *self
            .bytes
            .get(self.pos >> 3)
            .ok_or(JpegError::BitstreamExhausted { bit: self.pos })?;
        let bit = (byte >> (7 - (self.pos & 7))) & 1;
        self.pos += 1;
        Ok(bit as u32)
    }

    /// Reads `n ≤ 16` bits as an unsigned value, MSB first.
    pub fn read_bits(&mut self, n: u8) -> Result<u32> {
        debug_assert!(n <= 16);
        if self.pos + n as usize > self.bit_len() {
            return Err(JpegError::BitstreamExhausted { bit: self.bit_len() });
        }
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()?;
        }
        Ok(v)
    }
}
