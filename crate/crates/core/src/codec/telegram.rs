//! TP1 telegram framing.
//!
//! ```text
//! standard: [control][src hi][src lo][dst hi][dst lo][NPCI: AT|hop|len][LSDU: len+1][checksum]
//! extended: [control][AT|hop|EFF][src hi][src lo][dst hi][dst lo][len][LSDU: len][checksum]
//! ```

use super::address::{Destination, GroupAddress, IndividualAddress, LteTagAddress};
use super::control::{
    decode_npci, encode_npci, AddressType, ControlField, EffKind, ExtendedControlField, FrameType,
};
use super::lsdu::{GroupData, Lsdu};
use super::CodecError;

/// Hop count a sender puts on multicast telegrams.
pub const DEFAULT_MULTICAST_HOPS: u8 = 6;
/// Hop count that couplers never decrement.
pub const UNLIMITED_HOPS: u8 = 7;

const STANDARD_MAX_LSDU: usize = 16;
const EXTENDED_MAX_LSDU: usize = 255;

/// Complement of the XOR of all octets.
pub fn compute_checksum(octets: &[u8]) -> u8 {
    !octets.iter().fold(0u8, |acc, b| acc ^ b)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Telegram {
    pub control: ControlField,
    /// EFF of the extended control field; `None` for standard frames.
    pub eff: Option<EffKind>,
    pub source: IndividualAddress,
    pub destination: Destination,
    pub hop_count: u8,
    pub lsdu: Lsdu,
}

/// Result of a coupler hop step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopStep {
    pub telegram: Telegram,
    pub forwardable: bool,
}

impl Telegram {
    fn standard_group(source: IndividualAddress, group: GroupAddress, lsdu: Lsdu) -> Self {
        Self {
            control: ControlField::standard(),
            eff: None,
            source,
            destination: Destination::Group(group),
            hop_count: DEFAULT_MULTICAST_HOPS,
            lsdu,
        }
    }

    pub fn group_read(source: IndividualAddress, group: GroupAddress) -> Self {
        Self::standard_group(source, group, Lsdu::GroupRead)
    }

    pub fn group_write(source: IndividualAddress, group: GroupAddress, data: GroupData) -> Self {
        Self::standard_group(source, group, Lsdu::GroupWrite(data))
    }

    pub fn group_response(source: IndividualAddress, group: GroupAddress, data: GroupData) -> Self {
        Self::standard_group(source, group, Lsdu::GroupResponse(data))
    }

    pub fn ext_control(&self) -> Option<ExtendedControlField> {
        self.eff.map(|eff| ExtendedControlField {
            address_type: address_type_of(self.destination),
            hop_count: self.hop_count,
            eff,
        })
    }

    pub fn checksum(&self) -> Result<u8, CodecError> {
        let raw = self.encode()?;
        Ok(raw[raw.len() - 1])
    }

    fn validate(&self) -> Result<(), CodecError> {
        if self.hop_count > UNLIMITED_HOPS {
            return Err(CodecError::InconsistentFrame("hop count exceeds 3 bits"));
        }
        if self.control.priority > 3 {
            return Err(CodecError::InconsistentFrame("priority exceeds 2 bits"));
        }
        match (self.control.frame_type, self.eff) {
            (FrameType::Standard, Some(_)) => {
                Err(CodecError::InconsistentFrame("standard frame carries an extended control field"))
            }
            (FrameType::Extended, None) => {
                Err(CodecError::InconsistentFrame("extended frame lacks an extended control field"))
            }
            (FrameType::Standard, None) => {
                if matches!(self.destination, Destination::Tag(_)) {
                    return Err(CodecError::InconsistentFrame("tag destination in a standard frame"));
                }
                if self.lsdu.is_lte() {
                    return Err(CodecError::InconsistentFrame("LTE service in a standard frame"));
                }
                Ok(())
            }
            (FrameType::Extended, Some(eff)) => {
                let consistent = match self.destination {
                    Destination::Tag(tag) => eff.is_lte() && tag.kind() == eff,
                    Destination::Group(_) => !eff.is_lte() && eff.address_type() == AddressType::Group,
                    Destination::Individual(_) => eff.address_type() == AddressType::Individual,
                };
                if consistent {
                    Ok(())
                } else {
                    Err(CodecError::InconsistentFrame("destination does not match EFF"))
                }
            }
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        self.validate()?;
        let lsdu = self.lsdu.encode()?;
        let mut out = Vec::with_capacity(lsdu.len() + 9);
        out.push(self.control.encode());
        match self.control.frame_type {
            FrameType::Standard => {
                if lsdu.len() > STANDARD_MAX_LSDU {
                    return Err(CodecError::LsduTooLong { len: lsdu.len(), max: STANDARD_MAX_LSDU });
                }
                out.extend_from_slice(&self.source.raw().to_be_bytes());
                out.extend_from_slice(&self.destination.raw().to_be_bytes());
                out.push(encode_npci(address_type_of(self.destination), self.hop_count, (lsdu.len() - 1) as u8));
            }
            FrameType::Extended => {
                if lsdu.len() > EXTENDED_MAX_LSDU {
                    return Err(CodecError::LsduTooLong { len: lsdu.len(), max: EXTENDED_MAX_LSDU });
                }
                let ext = self.ext_control().expect("validated");
                out.push(ext.encode());
                out.extend_from_slice(&self.source.raw().to_be_bytes());
                out.extend_from_slice(&self.destination.raw().to_be_bytes());
                out.push(lsdu.len() as u8);
            }
        }
        out.extend_from_slice(&lsdu);
        out.push(compute_checksum(&out));
        Ok(out)
    }

    pub fn decode(raw: &[u8]) -> Result<Self, CodecError> {
        // shortest frame: standard header(6) + one LSDU octet + checksum
        if raw.len() < 8 {
            return Err(CodecError::TruncatedFrame { len: raw.len() });
        }
        let (body, check) = raw.split_at(raw.len() - 1);
        let expected = compute_checksum(body);
        if expected != check[0] {
            return Err(CodecError::BadChecksum { expected, found: check[0] });
        }
        let control = ControlField::decode(raw[0])?;
        let (eff, address_type, hop_count, source, dst_raw, lsdu_start, lsdu_len) = match control.frame_type {
            FrameType::Standard => {
                let (at, hop, len) = decode_npci(raw[5]);
                (None, at, hop, be16(raw, 1), be16(raw, 3), 6, usize::from(len) + 1)
            }
            FrameType::Extended => {
                let ext = ExtendedControlField::decode(raw[1])?;
                if ext.eff.address_type() != ext.address_type {
                    return Err(CodecError::InconsistentFrame("address type does not match EFF"));
                }
                (Some(ext.eff), ext.address_type, ext.hop_count, be16(raw, 2), be16(raw, 4), 7, usize::from(raw[6]))
            }
        };
        let total = lsdu_start + lsdu_len + 1;
        if raw.len() < total {
            return Err(CodecError::TruncatedFrame { len: raw.len() });
        }
        if raw.len() > total {
            return Err(CodecError::LengthMismatch { expected: total, actual: raw.len() });
        }
        let lsdu = Lsdu::decode(&raw[lsdu_start..lsdu_start + lsdu_len])?;
        if lsdu.is_lte() && eff.is_none() {
            return Err(CodecError::UnknownApci(0x3EC));
        }
        let destination = match (address_type, eff) {
            (AddressType::Individual, _) => Destination::Individual(IndividualAddress::from_raw(dst_raw)),
            (AddressType::Group, Some(kind)) if kind.is_lte() => Destination::Tag(LteTagAddress::new(kind, dst_raw)?),
            (AddressType::Group, _) => Destination::Group(GroupAddress::from_raw(dst_raw)),
        };
        Ok(Self {
            control,
            eff,
            source: IndividualAddress::from_raw(source),
            destination,
            hop_count,
            lsdu,
        })
    }

    /// Couplers decrement the hop count by one; hop 7 is never decremented
    /// and hop 0 is no longer forwardable.
    pub fn decrement_hop(&self) -> HopStep {
        let mut telegram = self.clone();
        let forwardable = match self.hop_count {
            0 => false,
            UNLIMITED_HOPS => true,
            n => {
                telegram.hop_count = n - 1;
                true
            }
        };
        HopStep { telegram, forwardable }
    }
}

fn address_type_of(d: Destination) -> AddressType {
    if d.is_group() {
        AddressType::Group
    } else {
        AddressType::Individual
    }
}

fn be16(raw: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([raw[at], raw[at + 1]])
}
