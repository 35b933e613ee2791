//! Marker-level decomposition of baseline JFIF/JPEG files.

use serde::Serialize;

use crate::error::{JpegError, Result};
use crate::huffman::{build_huffman_decoder, HuffmanSpec, TableClass};

const SOI: u8 = 0xD8;
const EOI: u8 = 0xD9;
const SOF0: u8 = 0xC0;
const DHT: u8 = 0xC4;
const DQT: u8 = 0xDB;
const DRI: u8 = 0xDD;
const SOS: u8 = 0xDA;
const DNL: u8 = 0xDC;
const COM: u8 = 0xFE;

/// Quantization table, values in zigzag order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuantTable {
    pub id: u8,
    /// 8 or 16.
    pub precision: u8,
    #[serde(serialize_with = "serialize_values")]
    pub values: [u16; 64],
}

fn serialize_values<S: serde::Serializer>(v: &[u16; 64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameComponent {
    pub id: u8,
    pub h_sampling: u8,
    pub v_sampling: u8,
    pub quant_table_id: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrameHeader {
    pub precision: u8,
    pub width: u16,
    pub height: u16,
    pub components: Vec<FrameComponent>,
}

impl FrameHeader {
    pub fn max_h(&self) -> u8 {
        self.components.iter().map(|c| c.h_sampling).max().unwrap_or(1)
    }

    pub fn max_v(&self) -> u8 {
        self.components.iter().map(|c| c.v_sampling).max().unwrap_or(1)
    }

    /// MCU columns and rows of an interleaved scan.
    pub fn mcu_dims(&self) -> (usize, usize) {
        let mw = 8 * self.max_h() as usize;
        let mh = 8 * self.max_v() as usize;
        ((self.width as usize).div_ceil(mw), (self.height as usize).div_ceil(mh))
    }

    /// Block grid of component `c` covering every block present in the scan.
    pub fn grid_dims(&self, c: usize) -> (usize, usize) {
        let (mx, my) = self.mcu_dims();
        let comp = &self.components[c];
        (mx * comp.h_sampling as usize, my * comp.v_sampling as usize)
    }

    /// Sample dimensions of component `c` before any padding.
    pub fn component_dims(&self, c: usize) -> (usize, usize) {
        let comp = &self.components[c];
        let w = (self.width as usize * comp.h_sampling as usize).div_ceil(self.max_h() as usize);
        let h = (self.height as usize * comp.v_sampling as usize).div_ceil(self.max_v() as usize);
        (w, h)
    }

    /// True for Y 2×2 with 1×1 chroma.
    pub fn is_420(&self) -> bool {
        self.components.len() == 3
            && (self.components[0].h_sampling, self.components[0].v_sampling) == (2, 2)
            && self.components[1..].iter().all(|c| (c.h_sampling, c.v_sampling) == (1, 1))
    }

    pub fn is_444(&self) -> bool {
        self.components.len() == 3 && self.components.iter().all(|c| (c.h_sampling, c.v_sampling) == (1, 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScanComponent {
    pub id: u8,
    pub dc_table: u8,
    pub ac_table: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanHeader {
    pub components: Vec<ScanComponent>,
    pub spectral_start: u8,
    pub spectral_end: u8,
    pub approx_high: u8,
    pub approx_low: u8,
}

/// A marker occurrence, for listings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub marker: u8,
    pub name: String,
    /// Byte offset of the 0xFF that introduces the marker.
    pub offset: usize,
    /// Segment length field (0 for standalone markers).
    pub length: usize,
}

/// APPn or COM payload, kept opaque.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpaqueSegment {
    pub marker: u8,
    pub payload: Vec<u8>,
}

/// A decoded baseline JPEG container.
#[derive(Debug, Clone)]
pub struct ParsedJpeg {
    pub quant_tables: [Option<QuantTable>; 4],
    pub dc_tables: [Option<HuffmanSpec>; 4],
    pub ac_tables: [Option<HuffmanSpec>; 4],
    pub frame: FrameHeader,
    pub scan: ScanHeader,
    /// Entropy-coded data between the SOS header and EOI, stuffing intact.
    pub scan_bytes: Vec<u8>,
    /// MCUs per restart interval; 0 when no DRI was seen.
    pub restart_interval: u16,
    pub segments: Vec<Segment>,
    pub opaque: Vec<OpaqueSegment>,
}

impl ParsedJpeg {
    pub fn quant_table_count(&self) -> usize {
        self.quant_tables.iter().flatten().count()
    }

    pub fn huffman_table_count(&self) -> usize {
        self.dc_tables.iter().chain(&self.ac_tables).flatten().count()
    }

    /// Quant table used by frame component `c`.
    pub fn quant_table_for(&self, c: usize) -> &QuantTable {
        let id = self.frame.components[c].quant_table_id as usize;
        self.quant_tables[id].as_ref().expect("validated at parse time")
    }
}

pub fn marker_name(m: u8) -> String {
    match m {
        0xC0 => "SOF0".into(),
        0xC1..=0xC3 | 0xC5..=0xC7 | 0xC9..=0xCB | 0xCD..=0xCF => format!("SOF{}", m - 0xC0),
        DHT => "DHT".into(),
        0xCC => "DAC".into(),
        0xD0..=0xD7 => format!("RST{}", m - 0xD0),
        SOI => "SOI".into(),
        EOI => "EOI".into(),
        SOS => "SOS".into(),
        DQT => "DQT".into(),
        DNL => "DNL".into(),
        DRI => "DRI".into(),
        0xDE => "DHP".into(),
        0xDF => "EXP".into(),
        0xE0..=0xEF => format!("APP{}", m - 0xE0),
        COM => "COM".into(),
        _ => format!("0x{m:02X}"),
    }
}

fn unsupported(m: u8) -> Option<&'static str> {
    Some(match m {
        0xC1 => "extended sequential",
        0xC2 => "progressive",
        0xC3 => "lossless",
        0xC5..=0xC7 => "differential (hierarchical)",
        0xC9..=0xCB => "arithmetic coding",
        0xCD..=0xCF => "differential arithmetic coding",
        0xCC => "arithmetic conditioning",
        DNL => "define number of lines",
        0xDE | 0xDF => "hierarchical",
        _ => return None,
    })
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u8(&mut self) -> Result<u8> {
        let b = *self.data.get(self.pos).ok_or(JpegError::TruncatedFile("unexpected end of file"))?;
        self.pos += 1;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes([self.u8()?, self.u8()?]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or(JpegError::TruncatedFile("segment runs past end of file"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

fn bad(marker: u8, detail: impl Into<String>) -> JpegError {
    JpegError::BadMarkerLength { marker, detail: detail.into() }
}

/// Parses the container structure of a baseline, three-component JPEG.
pub fn parse_jpeg(bytes: &[u8]) -> Result<ParsedJpeg> {
    if bytes.len() < 2 || bytes[0] != 0xFF || bytes[1] != SOI {
        return Err(if bytes.is_empty() { JpegError::TruncatedFile("empty input") } else { JpegError::NotJpeg });
    }
    let mut r = Reader { data: bytes, pos: 2 };
    let mut segments = vec![Segment { marker: SOI, name: "SOI".into(), offset: 0, length: 0 }];
    let mut quant_tables: [Option<QuantTable>; 4] = Default::default();
    let mut dc_tables: [Option<HuffmanSpec>; 4] = Default::default();
    let mut ac_tables: [Option<HuffmanSpec>; 4] = Default::default();
    let mut frame: Option<FrameHeader> = None;
    let mut restart_interval = 0u16;
    let mut opaque = Vec::new();

    loop {
        let offset = r.pos;
        if r.u8()? != 0xFF {
            return Err(bad(0, format!("expected marker at byte {offset}")));
        }
        let mut m = r.u8()?;
        while m == 0xFF {
            m = r.u8()?;
        }
        if let Some(what) = unsupported(m) {
            return Err(JpegError::UnsupportedMarker { marker: m, what });
        }
        match m {
            EOI => return Err(JpegError::TruncatedFile("EOI before any scan")),
            SOI => return Err(bad(m, "repeated SOI")),
            0x01 | 0xD0..=0xD7 => {
                segments.push(Segment { marker: m, name: marker_name(m), offset, length: 0 });
                continue;
            }
            _ => {}
        }
        let length = r.u16()? as usize;
        if length < 2 {
            return Err(bad(m, format!("length field {length}")));
        }
        let payload = r.take(length - 2)?;
        segments.push(Segment { marker: m, name: marker_name(m), offset, length });
        match m {
            DQT => parse_dqt(payload, &mut quant_tables)?,
            DHT => parse_dht(payload, &mut dc_tables, &mut ac_tables)?,
            SOF0 => {
                if frame.is_some() {
                    return Err(JpegError::UnsupportedFrame("multiple frame headers".into()));
                }
                frame = Some(parse_sof0(payload)?);
            }
            DRI => {
                if payload.len() != 2 {
                    return Err(bad(m, "DRI payload must be 2 bytes"));
                }
                restart_interval = u16::from_be_bytes([payload[0], payload[1]]);
            }
            0xE0..=0xEF | COM => opaque.push(OpaqueSegment { marker: m, payload: payload.to_vec() }),
            SOS => {
                let frame = frame.ok_or_else(|| JpegError::UnsupportedFrame("SOS before SOF0".into()))?;
                let scan = parse_sos(payload, &frame)?;
                let start = r.pos;
                let (end, term) = find_scan_end(bytes, start)?;
                match term {
                    EOI => {}
                    DNL => return Err(JpegError::UnsupportedMarker { marker: DNL, what: "define number of lines" }),
                    _ => return Err(JpegError::UnsupportedFrame("multiple scans".into())),
                }
                segments.push(Segment { marker: EOI, name: "EOI".into(), offset: end, length: 0 });
                let parsed = ParsedJpeg {
                    quant_tables,
                    dc_tables,
                    ac_tables,
                    frame,
                    scan,
                    scan_bytes: bytes[start..end].to_vec(),
                    restart_interval,
                    segments,
                    opaque,
                };
                validate(&parsed)?;
                return Ok(parsed);
            }
            _ => {}
        }
    }
}

/// Finds the marker terminating entropy-coded data starting at `start`.
/// Returns the offset of the first byte not belonging to the scan and the
/// marker code found there.
fn find_scan_end(bytes: &[u8], start: usize) -> Result<(usize, u8)> {
    let mut i = start;
    while i + 1 < bytes.len() {
        if bytes[i] == 0xFF {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j] == 0xFF {
                j += 1;
            }
            match bytes.get(j) {
                Some(0x00) | Some(0xD0..=0xD7) => i = j + 1,
                Some(&m) => return Ok((i, m)),
                None => break,
            }
        } else {
            i += 1;
        }
    }
    Err(JpegError::TruncatedFile("scan not terminated by EOI"))
}

fn parse_dqt(mut p: &[u8], tables: &mut [Option<QuantTable>; 4]) -> Result<()> {
    while !p.is_empty() {
        let pq = p[0] >> 4;
        let id = p[0] & 0x0F;
        if id > 3 || pq > 1 {
            return Err(bad(DQT, format!("table id {id}, precision flag {pq}")));
        }
        let n = if pq == 0 { 64 } else { 128 };
        if p.len() < 1 + n {
            return Err(bad(DQT, "table body shorter than 64 entries"));
        }
        let mut values = [0u16; 64];
        for (k, v) in values.iter_mut().enumerate() {
            *v = if pq == 0 { p[1 + k] as u16 } else { u16::from_be_bytes([p[1 + 2 * k], p[2 + 2 * k]]) };
            if *v == 0 {
                return Err(bad(DQT, format!("table {id} entry {k} is zero")));
            }
        }
        tables[id as usize] = Some(QuantTable { id, precision: if pq == 0 { 8 } else { 16 }, values });
        p = &p[1 + n..];
    }
    Ok(())
}

fn parse_dht(mut p: &[u8], dc: &mut [Option<HuffmanSpec>; 4], ac: &mut [Option<HuffmanSpec>; 4]) -> Result<()> {
    while !p.is_empty() {
        if p.len() < 17 {
            return Err(bad(DHT, "table header shorter than 17 bytes"));
        }
        let tc = p[0] >> 4;
        let id = p[0] & 0x0F;
        if tc > 1 || id > 3 {
            return Err(bad(DHT, format!("class {tc}, id {id}")));
        }
        let mut counts = [0u8; 16];
        counts.copy_from_slice(&p[1..17]);
        let n: usize = counts.iter().map(|&c| c as usize).sum();
        if n > 256 || p.len() < 17 + n {
            return Err(bad(DHT, format!("{n} symbols declared")));
        }
        let class = if tc == 0 { TableClass::Dc } else { TableClass::Ac };
        let spec = HuffmanSpec { class, id, counts, symbols: p[17..17 + n].to_vec() };
        build_huffman_decoder(&spec)?;
        match class {
            TableClass::Dc => dc[id as usize] = Some(spec),
            TableClass::Ac => ac[id as usize] = Some(spec),
        }
        p = &p[17 + n..];
    }
    Ok(())
}

fn parse_sof0(p: &[u8]) -> Result<FrameHeader> {
    if p.len() < 6 {
        return Err(bad(SOF0, "frame header shorter than 6 bytes"));
    }
    let precision = p[0];
    let height = u16::from_be_bytes([p[1], p[2]]);
    let width = u16::from_be_bytes([p[3], p[4]]);
    let n = p[5] as usize;
    if p.len() != 6 + 3 * n {
        return Err(bad(SOF0, format!("{} bytes for {n} components", p.len())));
    }
    let components = (0..n)
        .map(|i| {
            let c = &p[6 + 3 * i..9 + 3 * i];
            FrameComponent { id: c[0], h_sampling: c[1] >> 4, v_sampling: c[1] & 0x0F, quant_table_id: c[2] }
        })
        .collect();
    let frame = FrameHeader { precision, width, height, components };
    if precision != 8 {
        return Err(JpegError::UnsupportedFrame(format!("{precision}-bit samples")));
    }
    if n != 3 {
        return Err(JpegError::UnsupportedFrame(format!("{n} components (need 3)")));
    }
    if !frame.is_420() && !frame.is_444() {
        let s: Vec<_> = frame.components.iter().map(|c| format!("{}x{}", c.h_sampling, c.v_sampling)).collect();
        return Err(JpegError::UnsupportedFrame(format!("sampling {} (need 4:2:0 or 4:4:4)", s.join(","))));
    }
    if width < 8 || height < 8 {
        return Err(JpegError::UnsupportedFrame(format!("image {width}x{height} smaller than 8x8")));
    }
    Ok(frame)
}

fn parse_sos(p: &[u8], frame: &FrameHeader) -> Result<ScanHeader> {
    if p.is_empty() {
        return Err(bad(SOS, "empty scan header"));
    }
    let n = p[0] as usize;
    if p.len() != 1 + 2 * n + 3 {
        return Err(bad(SOS, format!("{} bytes for {n} components", p.len())));
    }
    let components: Vec<_> = (0..n)
        .map(|i| ScanComponent { id: p[1 + 2 * i], dc_table: p[2 + 2 * i] >> 4, ac_table: p[2 + 2 * i] & 0x0F })
        .collect();
    let tail = &p[1 + 2 * n..];
    let scan = ScanHeader {
        components,
        spectral_start: tail[0],
        spectral_end: tail[1],
        approx_high: tail[2] >> 4,
        approx_low: tail[2] & 0x0F,
    };
    let ids_match = scan.components.len() == frame.components.len()
        && scan.components.iter().zip(&frame.components).all(|(s, f)| s.id == f.id);
    if !ids_match {
        return Err(JpegError::UnsupportedFrame("scan does not interleave all frame components".into()));
    }
    if (scan.spectral_start, scan.spectral_end, scan.approx_high, scan.approx_low) != (0, 63, 0, 0) {
        return Err(JpegError::UnsupportedFrame("scan is not a full sequential scan".into()));
    }
    Ok(scan)
}

fn validate(p: &ParsedJpeg) -> Result<()> {
    for c in &p.frame.components {
        if c.quant_table_id > 3 || p.quant_tables[c.quant_table_id as usize].is_none() {
            return Err(JpegError::MissingTable { kind: "quantization", id: c.quant_table_id });
        }
    }
    for s in &p.scan.components {
        if s.dc_table > 3 || p.dc_tables[s.dc_table as usize].is_none() {
            return Err(JpegError::MissingTable { kind: "DC Huffman", id: s.dc_table });
        }
        if s.ac_table > 3 || p.ac_tables[s.ac_table as usize].is_none() {
            return Err(JpegError::MissingTable { kind: "AC Huffman", id: s.ac_table });
        }
    }
    if p.scan_bytes.is_empty() {
        return Err(JpegError::TruncatedFile("empty scan"));
    }
    Ok(())
}
