//! Individual, group and LTE tag addresses.
//!
//! All three pack into the 16-bit address fields of a TP1 frame. Individual
//! addresses split as `area(4) | line(4) | device(8)`; group addresses are
//! either three-level `main(5) | middle(3) | sub(8)` or two-level
//! `main(5) | sub(11)`. The split style of a group address is a view over the
//! same 16 bits, so [`GroupAddress`] stores only the raw value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::control::EffKind;
use super::CodecError;

/// Device identity written `area.line.device`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct IndividualAddress(u16);

impl IndividualAddress {
    pub fn new(area: u8, line: u8, device: u8) -> Result<Self, CodecError> {
        if area > 15 || line > 15 {
            return Err(CodecError::AddressOutOfRange(format!("{area}.{line}.{device}")));
        }
        Ok(Self((u16::from(area) << 12) | (u16::from(line) << 8) | u16::from(device)))
    }

    pub const fn from_raw(raw: u16) -> Self {
        Self(raw)
    }

    pub const fn raw(self) -> u16 {
        self.0
    }

    pub const fn area(self) -> u8 {
        (self.0 >> 12) as u8
    }

    pub const fn line(self) -> u8 {
        ((self.0 >> 8) & 0x0F) as u8
    }

    pub const fn device(self) -> u8 {
        (self.0 & 0xFF) as u8
    }

    /// Device number 0 is reserved for the line coupler.
    pub const fn is_line_coupler(self) -> bool {
        self.device() == 0
    }
}

impl fmt::Display for IndividualAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.area(), self.line(), self.device())
    }
}

impl FromStr for IndividualAddress {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::AddressOutOfRange(s.to_string());
        let parts: Vec<&str> = s.split('.').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let area = parts[0].parse::<u8>().map_err(|_| bad())?;
        let line = parts[1].parse::<u8>().map_err(|_| bad())?;
        let device = parts[2].parse::<u8>().map_err(|_| bad())?;
        Self::new(area, line, device)
    }
}

impl From<IndividualAddress> for String {
    fn from(a: IndividualAddress) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for IndividualAddress {
    type Error = CodecError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupStyle {
    TwoLevel,
    ThreeLevel,
}

/// Logical multicast address. Zero is the broadcast address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct GroupAddress(u16);

impl GroupAddress {
    pub const BROADCAST: GroupAddress = GroupAddress(0);

    pub fn three_level(main: u8, middle: u8, sub: u8) -> Result<Self, CodecError> {
        if main > 31 || middle > 7 {
            return Err(CodecError::AddressOutOfRange(format!("{main}/{middle}/{sub}")));
        }
        Ok(Self((u16::from(main) << 11) | (u16::from(middle) << 8) | u16::from(sub)))
    }

    pub fn two_level(main: u8, sub: u16) -> Result<Self, CodecError> {
        if main > 31 || sub > 2047 {
            return Err(CodecError::AddressOutOfRange(format!("{main}/{sub}")));
        }
        Ok(Self((u16::from(main) << 11) | sub))
    }

    pub const fn from_raw(raw: u16) -> Self {
        Self(raw)
    }

    pub const fn raw(self) -> u16 {
        self.0
    }

    pub const fn main(self) -> u8 {
        (self.0 >> 11) as u8
    }

    pub const fn middle(self) -> u8 {
        ((self.0 >> 8) & 0x07) as u8
    }

    pub const fn sub(self) -> u8 {
        (self.0 & 0xFF) as u8
    }

    /// Sub-group of the two-level split (11 bits).
    pub const fn sub_two_level(self) -> u16 {
        self.0 & 0x07FF
    }

    pub const fn is_broadcast(self) -> bool {
        self.0 == 0
    }

    pub fn display(self, style: GroupStyle) -> String {
        match style {
            GroupStyle::ThreeLevel => format!("{}/{}/{}", self.main(), self.middle(), self.sub()),
            GroupStyle::TwoLevel => format!("{}/{}", self.main(), self.sub_two_level()),
        }
    }
}

impl fmt::Display for GroupAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display(GroupStyle::ThreeLevel))
    }
}

impl FromStr for GroupAddress {
    type Err = CodecError;

    /// Accepts `main/middle/sub` or `main/sub`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::AddressOutOfRange(s.to_string());
        let parts: Vec<&str> = s.split('/').collect();
        match parts.as_slice() {
            [main, middle, sub] => Self::three_level(
                main.parse().map_err(|_| bad())?,
                middle.parse().map_err(|_| bad())?,
                sub.parse().map_err(|_| bad())?,
            ),
            [main, sub] => {
                Self::two_level(main.parse().map_err(|_| bad())?, sub.parse().map_err(|_| bad())?)
            }
            _ => Err(bad()),
        }
    }
}

impl From<GroupAddress> for String {
    fn from(a: GroupAddress) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for GroupAddress {
    type Error = CodecError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Logical tag destination of an LTE-mode telegram. The bit layout of the
/// 16-bit value depends on the EFF category and is kept opaque.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LteTagAddress {
    kind: EffKind,
    raw: u16,
}

impl LteTagAddress {
    pub fn new(kind: EffKind, raw: u16) -> Result<Self, CodecError> {
        if !kind.is_lte() {
            return Err(CodecError::InconsistentFrame("tag address requires an LTE EFF kind"));
        }
        Ok(Self { kind, raw })
    }

    pub const fn kind(self) -> EffKind {
        self.kind
    }

    pub const fn raw(self) -> u16 {
        self.raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Destination {
    Individual(IndividualAddress),
    Group(GroupAddress),
    Tag(LteTagAddress),
}

impl Destination {
    pub const fn raw(self) -> u16 {
        match self {
            Destination::Individual(a) => a.raw(),
            Destination::Group(g) => g.raw(),
            Destination::Tag(t) => t.raw(),
        }
    }

    pub const fn is_group(self) -> bool {
        !matches!(self, Destination::Individual(_))
    }

    pub fn as_group(self) -> Option<GroupAddress> {
        match self {
            Destination::Group(g) => Some(g),
            _ => None,
        }
    }
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::Individual(a) => a.fmt(f),
            Destination::Group(g) => g.fmt(f),
            Destination::Tag(t) => write!(f, "tag:{:?}:{:04x}", t.kind(), t.raw()),
        }
    }
}
