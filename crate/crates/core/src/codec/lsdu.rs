//! Link-layer service data unit: TPCI/APCI plus payload.
//!
//! Group services use the 4-bit APCI spread over the two leading octets.
//! Payloads of at most six bits ride in the low bits of the second octet;
//! longer payloads follow it. LTE property services use a 10-bit APCI
//! followed by `OT(2) | OI(1) | PID(1) | data`.

use super::CodecError;

const APCI_GROUP_READ: u8 = 0b0000;
const APCI_GROUP_RESPONSE: u8 = 0b0001;
const APCI_GROUP_WRITE: u8 = 0b0010;
const APCI_EXTENDED: u8 = 0b1111;

const APCI10_PROP_READ: u16 = 0x3EC;
const APCI10_PROP_WRITE: u16 = 0x3EE;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroupData {
    /// Six-bit value carried inside the APCI octet.
    Short(u8),
    /// One or more octets after the APCI.
    Octets(Vec<u8>),
}

impl GroupData {
    pub fn octets(&self) -> Option<&[u8]> {
        match self {
            GroupData::Octets(d) => Some(d),
            GroupData::Short(_) => None,
        }
    }

    fn validate(&self) -> Result<(), CodecError> {
        match self {
            GroupData::Short(v) if *v > 0x3F => Err(CodecError::MalformedLsdu("short data exceeds 6 bits")),
            GroupData::Octets(d) if d.is_empty() => Err(CodecError::MalformedLsdu("empty long data")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Lsdu {
    GroupRead,
    GroupWrite(GroupData),
    GroupResponse(GroupData),
    LtePropRead { object_type: u16, object_index: u8, property_id: u8 },
    LtePropWrite { object_type: u16, object_index: u8, property_id: u8, data: Vec<u8> },
}

impl Lsdu {
    pub fn is_lte(&self) -> bool {
        matches!(self, Lsdu::LtePropRead { .. } | Lsdu::LtePropWrite { .. })
    }

    /// Payload of a write or response, if any.
    pub fn group_data(&self) -> Option<&GroupData> {
        match self {
            Lsdu::GroupWrite(d) | Lsdu::GroupResponse(d) => Some(d),
            _ => None,
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Lsdu::GroupRead => 2,
            Lsdu::GroupWrite(d) | Lsdu::GroupResponse(d) => 2 + d.octets().map_or(0, <[u8]>::len),
            Lsdu::LtePropRead { .. } => 6,
            Lsdu::LtePropWrite { data, .. } => 6 + data.len(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::with_capacity(self.encoded_len());
        match self {
            Lsdu::GroupRead => out.extend_from_slice(&[0x00, 0x00]),
            Lsdu::GroupWrite(d) | Lsdu::GroupResponse(d) => {
                d.validate()?;
                let apci = if matches!(self, Lsdu::GroupWrite(_)) { APCI_GROUP_WRITE } else { APCI_GROUP_RESPONSE };
                out.push(apci >> 2);
                match d {
                    GroupData::Short(v) => out.push(((apci & 0x03) << 6) | v),
                    GroupData::Octets(bytes) => {
                        out.push((apci & 0x03) << 6);
                        out.extend_from_slice(bytes);
                    }
                }
            }
            Lsdu::LtePropRead { object_type, object_index, property_id } => {
                push_apci10(&mut out, APCI10_PROP_READ);
                out.extend_from_slice(&object_type.to_be_bytes());
                out.extend_from_slice(&[*object_index, *property_id]);
            }
            Lsdu::LtePropWrite { object_type, object_index, property_id, data } => {
                push_apci10(&mut out, APCI10_PROP_WRITE);
                out.extend_from_slice(&object_type.to_be_bytes());
                out.extend_from_slice(&[*object_index, *property_id]);
                out.extend_from_slice(data);
            }
        }
        Ok(out)
    }

    pub fn decode(raw: &[u8]) -> Result<Self, CodecError> {
        if raw.len() < 2 {
            return Err(CodecError::MalformedLsdu("shorter than two octets"));
        }
        if raw[0] & 0xFC != 0 {
            // only unnumbered data (TPCI 000000) is modeled
            return Err(CodecError::UnknownApci(u16::from(raw[0]) << 8 | u16::from(raw[1])));
        }
        let apci4 = ((raw[0] & 0x03) << 2) | (raw[1] >> 6);
        let low6 = raw[1] & 0x3F;
        let rest = &raw[2..];
        match apci4 {
            APCI_GROUP_READ => {
                if low6 != 0 || !rest.is_empty() {
                    return Err(CodecError::MalformedLsdu("group read carries data"));
                }
                Ok(Lsdu::GroupRead)
            }
            APCI_GROUP_WRITE | APCI_GROUP_RESPONSE => {
                let data = if rest.is_empty() {
                    GroupData::Short(low6)
                } else {
                    if low6 != 0 {
                        return Err(CodecError::MalformedLsdu("short and long data both present"));
                    }
                    GroupData::Octets(rest.to_vec())
                };
                Ok(if apci4 == APCI_GROUP_WRITE { Lsdu::GroupWrite(data) } else { Lsdu::GroupResponse(data) })
            }
            APCI_EXTENDED => {
                let apci10 = (u16::from(raw[0] & 0x03) << 8) | u16::from(raw[1]);
                if apci10 != APCI10_PROP_READ && apci10 != APCI10_PROP_WRITE {
                    return Err(CodecError::UnknownApci(apci10));
                }
                if rest.len() < 4 {
                    return Err(CodecError::MalformedLsdu("LTE property header truncated"));
                }
                let object_type = u16::from_be_bytes([rest[0], rest[1]]);
                let object_index = rest[2];
                let property_id = rest[3];
                if apci10 == APCI10_PROP_READ {
                    if rest.len() != 4 {
                        return Err(CodecError::MalformedLsdu("LTE property read carries data"));
                    }
                    Ok(Lsdu::LtePropRead { object_type, object_index, property_id })
                } else {
                    Ok(Lsdu::LtePropWrite { object_type, object_index, property_id, data: rest[4..].to_vec() })
                }
            }
            other => Err(CodecError::UnknownApci(u16::from(other))),
        }
    }
}

fn push_apci10(out: &mut Vec<u8>, apci: u16) {
    out.push((apci >> 8) as u8);
    out.push((apci & 0xFF) as u8);
}
