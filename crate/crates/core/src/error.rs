use thiserror::Error;

/// Errors raised while parsing or entropy decoding a JPEG file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JpegError {
    #[error("UnsupportedMarker: 0xFF{marker:02X} ({what})")]
    UnsupportedMarker { marker: u8, what: &'static str },
    #[error("UnsupportedFrame: {0}")]
    UnsupportedFrame(String),
    #[error("NotJpeg: file does not start with an SOI marker")]
    NotJpeg,
    #[error("TruncatedFile: {0}")]
    TruncatedFile(&'static str),
    #[error("MissingTable: {kind} table {id} referenced but never defined")]
    MissingTable { kind: &'static str, id: u8 },
    #[error("BadMarkerLength: marker 0xFF{marker:02X} segment is malformed ({detail})")]
    BadMarkerLength { marker: u8, detail: String },
    #[error("InvalidCode: Huffman counts oversubscribe code length {length}")]
    InvalidCode { length: usize },
    #[error("StrayMarker: 0xFF{marker:02X} inside entropy-coded data at byte {offset}")]
    StrayMarker { marker: u8, offset: usize },
    #[error("BitstreamExhausted: needed bits past end of scan at bit {bit}")]
    BitstreamExhausted { bit: usize },
    #[error("InvalidHuffmanCode: no code matches at bit {bit}")]
    InvalidHuffmanCode { bit: usize },
    #[error("CoefficientOverrun: zigzag index {index} past 63 at bit {bit}")]
    CoefficientOverrun { index: usize, bit: usize },
    #[error("CoefficientRange: value {value} does not fit 16 bits at bit {bit}")]
    CoefficientRange { value: i32, bit: usize },
    #[error("MissingRestart: expected restart marker before MCU {mcu}")]
    MissingRestart { mcu: usize },
}

impl JpegError {
    /// Short variant name, used for CLI messages and tests.
    pub fn kind(&self) -> &'static str {
        match self {
            JpegError::UnsupportedMarker { .. } => "UnsupportedMarker",
            JpegError::UnsupportedFrame(_) => "UnsupportedFrame",
            JpegError::NotJpeg => "NotJpeg",
            JpegError::TruncatedFile(_) => "TruncatedFile",
            JpegError::MissingTable { .. } => "MissingTable",
            JpegError::BadMarkerLength { .. } => "BadMarkerLength",
            JpegError::InvalidCode { .. } => "InvalidCode",
            JpegError::StrayMarker { .. } => "StrayMarker",
            JpegError::BitstreamExhausted { .. } => "BitstreamExhausted",
            JpegError::InvalidHuffmanCode { .. } => "InvalidHuffmanCode",
            JpegError::CoefficientOverrun { .. } => "CoefficientOverrun",
            JpegError::CoefficientRange { .. } => "CoefficientRange",
            JpegError::MissingRestart { .. } => "MissingRestart",
        }
    }
}

pub type Result<T, E = JpegError> = std::result::Result<T, E>;
