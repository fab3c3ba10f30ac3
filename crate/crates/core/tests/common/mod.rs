#![allow(dead_code)]

use knxlab::codec::{
    ControlField, Destination, EffKind, GroupAddress, GroupData, IndividualAddress, Lsdu, LteTagAddress, Telegram,
};
use proptest::collection::vec;
use proptest::prelude::*;

/// Reference checksum: complement of the XOR of every octet.
pub fn fold_xor_complement(octets: &[u8]) -> u8 {
    let mut acc = 0u8;
    for &b in octets {
        acc ^= b;
    }
    0xFF - acc
}

fn group_data(max_octets: usize) -> impl Strategy<Value = GroupData> {
    prop_oneof![(0u8..=0x3F).prop_map(GroupData::Short), vec(any::<u8>(), 1..=max_octets).prop_map(GroupData::Octets)]
}

fn group_lsdu(max_octets: usize) -> impl Strategy<Value = Lsdu> {
    prop_oneof![
        Just(Lsdu::GroupRead),
        group_data(max_octets).prop_map(Lsdu::GroupWrite),
        group_data(max_octets).prop_map(Lsdu::GroupResponse),
    ]
}

fn lte_lsdu(max_data: usize) -> impl Strategy<Value = Lsdu> {
    prop_oneof![
        (any::<u16>(), any::<u8>(), any::<u8>())
            .prop_map(|(object_type, object_index, property_id)| Lsdu::LtePropRead { object_type, object_index, property_id }),
        (any::<u16>(), any::<u8>(), any::<u8>(), vec(any::<u8>(), 0..=max_data)).prop_map(
            |(object_type, object_index, property_id, data)| Lsdu::LtePropWrite { object_type, object_index, property_id, data }
        ),
    ]
}

fn control(extended: bool) -> impl Strategy<Value = ControlField> {
    (any::<bool>(), 0u8..4).prop_map(move |(repeat, priority)| {
        let base = if extended { ControlField::extended() } else { ControlField::standard() };
        ControlField { repeat, priority, ..base }
    })
}

pub fn standard_telegram() -> impl Strategy<Value = Telegram> {
    let dest = prop_oneof![
        any::<u16>().prop_map(|r| Destination::Individual(IndividualAddress::from_raw(r))),
        any::<u16>().prop_map(|r| Destination::Group(GroupAddress::from_raw(r))),
    ];
    (control(false), any::<u16>(), dest, 0u8..=7, group_lsdu(14)).prop_map(|(control, src, destination, hop_count, lsdu)| Telegram {
        control,
        eff: None,
        source: IndividualAddress::from_raw(src),
        destination,
        hop_count,
        lsdu,
    })
}

pub fn extended_telegram() -> impl Strategy<Value = Telegram> {
    let eff = proptest::sample::select(EffKind::ALL.to_vec());
    (control(true), eff, any::<u16>(), any::<u16>(), 0u8..=7, any::<bool>())
        .prop_flat_map(|(control, eff, src, dst, hop_count, lte_service)| {
            let destination = if eff.is_lte() {
                Destination::Tag(LteTagAddress::new(eff, dst).expect("lte kind"))
            } else if eff.address_type() == knxlab::codec::AddressType::Group {
                Destination::Group(GroupAddress::from_raw(dst))
            } else {
                Destination::Individual(IndividualAddress::from_raw(dst))
            };
            let lsdu = if lte_service { lte_lsdu(249).boxed() } else { group_lsdu(253).boxed() };
            lsdu.prop_map(move |lsdu| Telegram {
                control,
                eff: Some(eff),
                source: IndividualAddress::from_raw(src),
                destination,
                hop_count,
                lsdu,
            })
        })
}

/// Valid telegrams of both frame types, every EFF kind and every LSDU
/// variant.
pub fn any_telegram() -> impl Strategy<Value = Telegram> {
    prop_oneof![standard_telegram(), extended_telegram()]
}
