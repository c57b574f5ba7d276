//! Deterministic key derivation from STR profiles.
//!
//! Each of the 40 allele slots (20 loci x low/high, loci in roster order)
//! contributes a 2-bit code, giving an 80-bit search key. The search key is
//! stretched to the 256-bit cipher key with HKDF-SHA256 under a fixed
//! published salt and domain label; there is deliberately no per-record
//! salt, since searching works by decrypting every record with the one key
//! a query profile derives to.

use hkdf::Hkdf;
use sha2::Sha256;

use crate::profile::{Allele, LocusName, StrProfile, LOCUS_COUNT};

/// Search keys carry 2 bits per allele slot.
pub const SEARCH_KEY_BITS: usize = LOCUS_COUNT * 2 * 2;
pub const SEARCH_KEY_BYTES: usize = SEARCH_KEY_BITS / 8;

/// HKDF salt, fixed and published as part of the vault format:
/// SHA-256 of the ASCII string `STRVAULT-v1 hkdf salt`.
pub const KDF_SALT: [u8; 32] = [
    0xb2, 0x03, 0x51, 0x69, 0xbd, 0x91, 0x95, 0x24, 0x57, 0x20, 0xa2, 0xc9, 0x26, 0x51, 0x0d,
    0xd8, 0xfc, 0xa2, 0x89, 0xc0, 0x20, 0x8d, 0x2d, 0x5c, 0xea, 0xb2, 0x98, 0x3c, 0x73, 0xc1,
    0x10, 0xa2,
];

/// HKDF domain-separation label, also published in the format.
pub const KDF_LABEL: &[u8] = b"strvault-v1";

/// The 80-bit profile-derived key material. Slot `i` occupies bits
/// `2i..2i+2`, packed MSB-first within each byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SearchKey {
    bytes: [u8; SEARCH_KEY_BYTES],
}

impl SearchKey {
    pub fn from_bytes(bytes: [u8; SEARCH_KEY_BYTES]) -> SearchKey {
        SearchKey { bytes }
    }

    pub fn as_bytes(&self) -> &[u8; SEARCH_KEY_BYTES] {
        &self.bytes
    }

    /// Bit at position `i` (0..80), MSB-first.
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < SEARCH_KEY_BITS);
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }
}

/// 256-bit symmetric key used by the record cipher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CipherKey {
    bytes: [u8; 32],
}

impl CipherKey {
    pub fn from_bytes(bytes: [u8; 32]) -> CipherKey {
        CipherKey { bytes }
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.bytes
    }
}

/// 2-bit allele code: deci-repeat value mod 4. Allele 9.3 (93) encodes
/// to 1, allele 15.0 (150) to 2.
pub fn encode_allele(a: Allele) -> u8 {
    (a.deci() % 4) as u8
}

pub(crate) fn pack_codes(codes: impl Iterator<Item = u8>, slots: usize) -> Vec<u8> {
    let mut out = vec![0u8; slots.div_ceil(4)];
    let mut slot = 0;
    for code in codes {
        debug_assert!(code < 4 && slot < slots);
        out[slot / 4] |= code << (6 - 2 * (slot % 4));
        slot += 1;
    }
    debug_assert_eq!(slot, slots);
    out
}

/// Derive the 80-bit search key: allele codes over the 40 canonical slots.
pub fn derive_search_key(profile: &StrProfile) -> SearchKey {
    let codes = profile
        .entries()
        .flat_map(|(_, g)| [encode_allele(g.low()), encode_allele(g.high())]);
    let packed = pack_codes(codes, LOCUS_COUNT * 2);
    SearchKey {
        bytes: packed.try_into().expect("40 slots pack to 10 bytes"),
    }
}

/// Key material restricted to a locus subset, for the reduced-roster attack
/// demonstrator: 4 bits per locus, packed exactly like the full key. Loci
/// are deduplicated and taken in roster order so the layout is canonical.
pub fn derive_key_material(profile: &StrProfile, loci: &[LocusName]) -> Vec<u8> {
    let mut sorted: Vec<LocusName> = loci.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let codes = sorted.iter().flat_map(|&l| {
        let g = profile.genotype(l);
        [encode_allele(g.low()), encode_allele(g.high())]
    });
    pack_codes(codes, sorted.len() * 2)
}

/// Expand arbitrary key material to a 256-bit cipher key:
/// HKDF-SHA256(salt = [`KDF_SALT`], ikm = material, info = [`KDF_LABEL`]).
pub fn expand_key_material(material: &[u8]) -> CipherKey {
    let hk = Hkdf::<Sha256>::new(Some(&KDF_SALT), material);
    let mut okm = [0u8; 32];
    hk.expand(KDF_LABEL, &mut okm)
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    CipherKey { bytes: okm }
}

/// Expand a full search key to its cipher key.
pub fn expand_cipher_key(key: &SearchKey) -> CipherKey {
    expand_key_material(&key.bytes)
}

/// Number of bit positions (0..=80) at which the two keys agree.
pub fn shared_bits(a: &SearchKey, b: &SearchKey) -> u32 {
    let differing: u32 = a
        .bytes
        .iter()
        .zip(b.bytes.iter())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum();
    SEARCH_KEY_BITS as u32 - differing
}

/// Residual security level once `shared` bits are known to an attacker,
/// the quantity behind the 80-to-76-bit cousin arithmetic.
pub fn effective_bits(shared: u32) -> u32 {
    SEARCH_KEY_BITS as u32 - shared
}
