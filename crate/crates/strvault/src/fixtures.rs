//! Shared unit-test fixtures.

use crate::profile::{parse_profile, StrProfile};

pub const INDIVIDUAL_ONE_CSV: &str = include_str!("../tests/data/individual_one.csv");

/// AES-256-CBC ciphertext of the golden record (metadata
/// `name=Individual One\nid=0001`, blob bytes 0..64) under Individual One's
/// cipher key with IV 000102...0f, cross-checked against an independent
/// implementation.
pub const GOLDEN_CIPHERTEXT_HEX: &str = concat!(
    "f66cd465fac3c894f5dc989adf109e0caee46e33fdecb044ba4f9267195ae51b",
    "4ed563173f8234d9917825b1f145fabe5ab3ce94cecc1cdbd880993f191b6ae9",
    "40da9b4cf05ac356565f6b81e32b0b5d13e1f0211b5a9a6e5e9330f0dc5495eb",
    "c25280c230c4367d3ac5abad11a5b67575021f0a6bcd7f75256f4d3a51bad3c7",
    "9a77c558b32698aa79511658c1b4110d9869b16371690e373520fa499a04d053",
    "8e92b0cab7a40d11b75d13bb14b250abad488fafd9932f1d90fc761cf63daa92",
    "dc44ae31f01e14fb6c02ed45baa087c48c0a9da7fcc11278eed408b045f52518",
    "5dd7641ad027255cee22876c4deca18d6071f2101ff9a81f5da529525480f8ab",
    "66cb5a912c2fe061db1d08797ab279dd0fe57db28bd4e4d2b5038cae20ee2a94",
    "412f1d24e8d21fe555e11bd2fb8dfb5c76ca4cb0718a0e356717b5ac5ef9865b",
    "6e38e62a8cb12d5d83f8f35aebe9b60e34ffca6845bf7ce91403b601203bdfd7",
    "d7c547a5dc6f28d8d07e00c93dad682cc21965eb4cc7ddf21d17d37cb9bad256",
    "b7b6571366b83b297a348f6b98aba8164cf2efbfb64b0944ae667a03009bb606",
    "f2f85064f8a2e073824a216869ca799dec4b797827d48090bb8fed291303e0c4",
    "c8d0e91736f229a96c328374c4e3e866",
);

pub fn individual_one() -> StrProfile {
    parse_profile(INDIVIDUAL_ONE_CSV).expect("fixture profile parses")
}

pub fn unhex(s: &str) -> Vec<u8> {
    assert!(s.len() % 2 == 0);
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).expect("hex fixture"))
        .collect()
}
