//! Bit-exact KNX TP1 telegram codec.

mod address;
mod control;
mod dpt9;
mod lsdu;
mod telegram;

pub use address::{Destination, GroupAddress, GroupStyle, IndividualAddress, LteTagAddress};
pub use control::{AddressType, ControlField, EffKind, ExtendedControlField, FrameType};
pub use dpt9::{decode_dpt9, decode_dpt9_slice, dpt9_exponent, encode_dpt9, DPT9_INVALID, DPT9_MAX, DPT9_MIN};
pub use lsdu::{GroupData, Lsdu};
pub use telegram::{compute_checksum, HopStep, Telegram, DEFAULT_MULTICAST_HOPS, UNLIMITED_HOPS};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("bad checksum: expected {expected:#04x}, found {found:#04x}")]
    BadChecksum { expected: u8, found: u8 },
    #[error("truncated frame ({len} octets)")]
    TruncatedFrame { len: usize },
    #[error("frame length {actual} does not match declared length {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unknown EFF code {0:#06b}")]
    UnknownEff(u8),
    #[error("unknown APCI {0:#x}")]
    UnknownApci(u16),
    #[error("invalid control field {0:#04x}")]
    InvalidControl(u8),
    #[error("malformed LSDU: {0}")]
    MalformedLsdu(&'static str),
    #[error("inconsistent frame: {0}")]
    InconsistentFrame(&'static str),
    #[error("LSDU of {len} octets exceeds maximum {max}")]
    LsduTooLong { len: usize, max: usize },
    #[error("address out of range: {0}")]
    AddressOutOfRange(String),
    #[error("value {0} outside the DPT9 range")]
    OutOfRange(f64),
    #[error("DPT9 invalid-data code")]
    InvalidDpt9,
    #[error("invalid hex: {0}")]
    InvalidHex(String),
}

/// Lowercase, space-separated octets.
pub fn hex_dump(octets: &[u8]) -> String {
    octets.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

/// Lowercase octets without separators.
pub fn hex_compact(octets: &[u8]) -> String {
    octets.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses hex with optional whitespace between octets.
pub fn parse_hex(s: &str) -> Result<Vec<u8>, CodecError> {
    let digits: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if !digits.len().is_multiple_of(2) {
        return Err(CodecError::InvalidHex(s.to_string()));
    }
    (0..digits.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&digits[i..i + 2], 16).map_err(|_| CodecError::InvalidHex(s.to_string())))
        .collect()
}
