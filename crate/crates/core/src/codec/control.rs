//! Control field, extended control field and EFF nibble.
//!
//! ```text
//! control:       F 0 R 1 P P 0 0     F = 1 standard, 0 extended; R = 0 on repetitions; PP = priority
//! ext-control:   A H H H E E E E     A = address type (1 group); HHH = hop count; EEEE = EFF
//! NPCI (std):    A H H H L L L L     LLLL = LSDU length - 1
//! ```

use super::CodecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    Standard,
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControlField {
    pub frame_type: FrameType,
    /// Set on retransmissions; encoded as a cleared bit 5.
    pub repeat: bool,
    /// 0 = system, 1 = normal, 2 = urgent, 3 = low.
    pub priority: u8,
}

const CONTROL_FIXED_MASK: u8 = 0b0101_0011;
const CONTROL_FIXED_BITS: u8 = 0b0001_0000;

impl ControlField {
    pub const fn standard() -> Self {
        Self { frame_type: FrameType::Standard, repeat: false, priority: 3 }
    }

    pub const fn extended() -> Self {
        Self { frame_type: FrameType::Extended, repeat: false, priority: 3 }
    }

    pub fn encode(self) -> u8 {
        let mut b = CONTROL_FIXED_BITS | ((self.priority & 0x03) << 2);
        if self.frame_type == FrameType::Standard {
            b |= 0x80;
        }
        if !self.repeat {
            b |= 0x20;
        }
        b
    }

    pub fn decode(b: u8) -> Result<Self, CodecError> {
        if b & CONTROL_FIXED_MASK != CONTROL_FIXED_BITS {
            return Err(CodecError::InvalidControl(b));
        }
        Ok(Self {
            frame_type: if b & 0x80 != 0 { FrameType::Standard } else { FrameType::Extended },
            repeat: b & 0x20 == 0,
            priority: (b >> 2) & 0x03,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AddressType {
    Individual,
    Group,
}

impl AddressType {
    const fn bit(self) -> u8 {
        match self {
            AddressType::Individual => 0,
            AddressType::Group => 0x80,
        }
    }

    const fn from_bit(b: u8) -> Self {
        if b & 0x80 != 0 {
            AddressType::Group
        } else {
            AddressType::Individual
        }
    }
}

/// Extended frame format nibble of the extended control field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EffKind {
    StdGroup,
    StdIndividual,
    ExtGroup,
    ExtIndividual,
    LteGeoLower,
    LteGeoUpper,
    LteAppSpecific,
    LteUnassigned,
}

impl EffKind {
    pub const ALL: [EffKind; 8] = [
        EffKind::StdGroup,
        EffKind::StdIndividual,
        EffKind::ExtGroup,
        EffKind::ExtIndividual,
        EffKind::LteGeoLower,
        EffKind::LteGeoUpper,
        EffKind::LteAppSpecific,
        EffKind::LteUnassigned,
    ];

    pub const fn raw(self) -> u8 {
        match self {
            EffKind::StdGroup => 0b0000,
            EffKind::StdIndividual => 0b0001,
            EffKind::ExtGroup => 0b0010,
            EffKind::ExtIndividual => 0b0011,
            EffKind::LteGeoLower => 0b0100,
            EffKind::LteGeoUpper => 0b0101,
            EffKind::LteAppSpecific => 0b0110,
            EffKind::LteUnassigned => 0b0111,
        }
    }

    pub fn from_raw(raw: u8) -> Result<Self, CodecError> {
        EffKind::ALL
            .into_iter()
            .find(|k| k.raw() == raw)
            .ok_or(CodecError::UnknownEff(raw))
    }

    /// LTE kinds carry `01` in the two high bits of the nibble.
    pub const fn is_lte(self) -> bool {
        self.raw() >> 2 == 0b01
    }

    /// Address type implied by the kind. LTE tags are group-style.
    pub const fn address_type(self) -> AddressType {
        match self {
            EffKind::StdIndividual | EffKind::ExtIndividual => AddressType::Individual,
            _ => AddressType::Group,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExtendedControlField {
    pub address_type: AddressType,
    pub hop_count: u8,
    pub eff: EffKind,
}

impl ExtendedControlField {
    pub fn encode(self) -> u8 {
        self.address_type.bit() | ((self.hop_count & 0x07) << 4) | self.eff.raw()
    }

    pub fn decode(b: u8) -> Result<Self, CodecError> {
        Ok(Self {
            address_type: AddressType::from_bit(b),
            hop_count: (b >> 4) & 0x07,
            eff: EffKind::from_raw(b & 0x0F)?,
        })
    }
}

/// Standard-frame NPCI octet.
pub(crate) fn encode_npci(address_type: AddressType, hop_count: u8, length: u8) -> u8 {
    address_type.bit() | ((hop_count & 0x07) << 4) | (length & 0x0F)
}

pub(crate) fn decode_npci(b: u8) -> (AddressType, u8, u8) {
    (AddressType::from_bit(b), (b >> 4) & 0x07, b & 0x0F)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_octets() {
        assert_eq!(ControlField::standard().encode(), 0xBC);
        assert_eq!(ControlField::extended().encode(), 0x3C);
        let c = ControlField { frame_type: FrameType::Standard, repeat: true, priority: 1 };
        assert_eq!(c.encode(), 0b1001_0100);
        for b in 0..=u8::MAX {
            if let Ok(c) = ControlField::decode(b) {
                assert_eq!(c.encode(), b);
            }
        }
        assert_eq!(ControlField::decode(0xBD), Err(CodecError::InvalidControl(0xBD)));
    }

    #[test]
    fn lte_nibbles_are_a_bijection() {
        let lte: Vec<EffKind> = EffKind::ALL.into_iter().filter(|k| k.is_lte()).collect();
        assert_eq!(
            lte,
            [EffKind::LteGeoLower, EffKind::LteGeoUpper, EffKind::LteAppSpecific, EffKind::LteUnassigned]
        );
        let codes: Vec<u8> = lte.iter().map(|k| k.raw()).collect();
        assert_eq!(codes, [0b0100, 0b0101, 0b0110, 0b0111]);
        for code in 0b0100..=0b0111 {
            assert!(EffKind::from_raw(code).unwrap().is_lte());
        }
        for code in 0b1000..=0b1111 {
            assert_eq!(EffKind::from_raw(code), Err(CodecError::UnknownEff(code)));
        }
    }

    #[test]
    fn ext_control_layout() {
        let x = ExtendedControlField { address_type: AddressType::Group, hop_count: 6, eff: EffKind::LteGeoLower };
        assert_eq!(x.encode(), 0b1110_0100);
        assert_eq!(ExtendedControlField::decode(0b1110_0100).unwrap(), x);
    }
}
