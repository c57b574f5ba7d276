//! Record framing and the seal / trial-decryption cycle.
//!
//! A record is framed as `preamble(16 zero bytes) | version | profile |
//! metadata | biometric blob` with little-endian length prefixes, then
//! encrypted with AES-256-CBC + PKCS#7 under the cipher key its own profile
//! derives to. Decryption success is decided exactly by: padding valid,
//! preamble all-zero, version recognized, length fields consistent. A wrong
//! key fails padding in the overwhelming majority of trials; the all-zero
//! preamble block pushes the accidental-pass probability below 2^-128.

use aes::cipher::{block_padding::Pkcs7, BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::keygen::CipherKey;
use crate::profile::StrProfile;

type Aes256CbcEnc = cbc::Encryptor<aes::Aes256>;
type Aes256CbcDec = cbc::Decryptor<aes::Aes256>;

pub const PREAMBLE_LEN: usize = 16;
pub const FRAME_VERSION: u8 = 0x01;
pub const IV_LEN: usize = 16;
pub const CIPHER_BLOCK_LEN: usize = 16;

/// Format bounds; length fields beyond these are framing violations.
pub const MAX_METADATA_LEN: usize = 64 * 1024;
pub const MAX_BLOB_LEN: usize = 64 * 1024 * 1024;

/// Decrypted record content: the profile that keys it, free-form identity
/// metadata, and an opaque biometric payload such as an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainRecord {
    pub profile: StrProfile,
    pub metadata: String,
    pub blob: Vec<u8>,
}

/// A sealed record as stored in the vault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedRecord {
    pub record_id: String,
    pub iv: [u8; IV_LEN],
    pub ciphertext: Vec<u8>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SealError {
    #[error("metadata is {0} bytes, format limit is {MAX_METADATA_LEN}")]
    OversizeMetadata(usize),
    #[error("biometric blob is {0} bytes, format limit is {MAX_BLOB_LEN}")]
    OversizeBlob(usize),
}

/// Ciphertext that cannot have come from a well-behaved writer. Distinct
/// from a failed match: this signals a corrupt store.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("ciphertext length {0} is not a positive multiple of {CIPHER_BLOCK_LEN}")]
pub struct MalformedCiphertext(pub usize);

/// Why a trial decryption was rejected. Diagnostic for tests and traces
/// only; callers must treat every `NoMatch` identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoMatchReason {
    BadPadding,
    BadPreamble,
    BadFraming,
}

/// Outcome of trial-decrypting one record with one candidate key.
#[derive(Debug)]
pub enum TrialOutcome {
    Match(PlainRecord),
    NoMatch(NoMatchReason),
}

impl TrialOutcome {
    pub fn is_match(&self) -> bool {
        matches!(self, TrialOutcome::Match(_))
    }
}

/// Serialize the plaintext frame. This layout is a compatibility surface:
/// all integers little-endian, preamble first so it lands in cipher block 0.
pub fn encode_frame(record: &PlainRecord) -> Result<Vec<u8>, SealError> {
    if record.metadata.len() > MAX_METADATA_LEN {
        return Err(SealError::OversizeMetadata(record.metadata.len()));
    }
    if record.blob.len() > MAX_BLOB_LEN {
        return Err(SealError::OversizeBlob(record.blob.len()));
    }
    let canon = record.profile.canonical_string();
    let mut out = Vec::with_capacity(
        PREAMBLE_LEN + 1 + 2 + canon.len() + 4 + record.metadata.len() + 8 + record.blob.len(),
    );
    out.extend_from_slice(&[0u8; PREAMBLE_LEN]);
    out.push(FRAME_VERSION);
    out.extend_from_slice(&(canon.len() as u16).to_le_bytes());
    out.extend_from_slice(canon.as_bytes());
    out.extend_from_slice(&(record.metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(record.metadata.as_bytes());
    out.extend_from_slice(&(record.blob.len() as u64).to_le_bytes());
    out.extend_from_slice(&record.blob);
    Ok(out)
}

/// Parse and validate a decrypted frame. Returns the rejection reason
/// rather than an error type because a garbled frame is the normal outcome
/// of trial decryption with a non-matching key.
pub fn decode_frame(bytes: &[u8]) -> Result<PlainRecord, NoMatchReason> {
    if bytes.len() < PREAMBLE_LEN || bytes[..PREAMBLE_LEN].iter().any(|&b| b != 0) {
        return Err(NoMatchReason::BadPreamble);
    }
    let mut pos = PREAMBLE_LEN;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], NoMatchReason> {
        let end = pos.checked_add(n).ok_or(NoMatchReason::BadFraming)?;
        if end > bytes.len() {
            return Err(NoMatchReason::BadFraming);
        }
        let out = &bytes[*pos..end];
        *pos = end;
        Ok(out)
    };

    if take(&mut pos, 1)?[0] != FRAME_VERSION {
        return Err(NoMatchReason::BadFraming);
    }
    let profile_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
    let profile = StrProfile::parse_canonical(take(&mut pos, profile_len)?)
        .map_err(|_| NoMatchReason::BadFraming)?;
    let metadata_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    if metadata_len > MAX_METADATA_LEN {
        return Err(NoMatchReason::BadFraming);
    }
    let metadata = std::str::from_utf8(take(&mut pos, metadata_len)?)
        .map_err(|_| NoMatchReason::BadFraming)?
        .to_string();
    let blob_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    if blob_len > MAX_BLOB_LEN as u64 {
        return Err(NoMatchReason::BadFraming);
    }
    let blob = take(&mut pos, blob_len as usize)?.to_vec();
    if pos != bytes.len() {
        return Err(NoMatchReason::BadFraming);
    }
    Ok(PlainRecord {
        profile,
        metadata,
        blob,
    })
}

/// Encrypt a record under the given cipher key with a fresh random IV.
///
/// The caller derives `key` from `record.profile` for the self-keyed scheme;
/// taking the key explicitly keeps the reduced-roster demonstrator on the
/// same code path.
pub fn seal_with_key<R: RngCore + CryptoRng + ?Sized>(
    record: &PlainRecord,
    record_id: &str,
    key: &CipherKey,
    rng: &mut R,
) -> Result<EncryptedRecord, SealError> {
    let frame = encode_frame(record)?;
    let mut iv = [0u8; IV_LEN];
    rng.fill_bytes(&mut iv);
    let ciphertext = Aes256CbcEnc::new(key.as_bytes().into(), &iv.into())
        .encrypt_padded_vec_mut::<Pkcs7>(&frame);
    Ok(EncryptedRecord {
        record_id: record_id.to_string(),
        iv,
        ciphertext,
    })
}

/// Seal a record under its own profile's key (the defining property of the
/// scheme: the record is self-keyed).
pub fn seal<R: RngCore + CryptoRng + ?Sized>(
    record: &PlainRecord,
    record_id: &str,
    rng: &mut R,
) -> Result<EncryptedRecord, SealError> {
    let key = crate::keygen::expand_cipher_key(&crate::keygen::derive_search_key(&record.profile));
    seal_with_key(record, record_id, &key, rng)
}

/// Trial-decrypt one record with one candidate key.
pub fn try_unseal(
    record: &EncryptedRecord,
    key: &CipherKey,
) -> Result<TrialOutcome, MalformedCiphertext> {
    let len = record.ciphertext.len();
    if len == 0 || len % CIPHER_BLOCK_LEN != 0 {
        return Err(MalformedCiphertext(len));
    }
    let plaintext = match Aes256CbcDec::new(key.as_bytes().into(), &record.iv.into())
        .decrypt_padded_vec_mut::<Pkcs7>(&record.ciphertext)
    {
        Ok(pt) => pt,
        Err(_) => return Ok(TrialOutcome::NoMatch(NoMatchReason::BadPadding)),
    };
    match decode_frame(&plaintext) {
        Ok(plain) => Ok(TrialOutcome::Match(plain)),
        Err(reason) => Ok(TrialOutcome::NoMatch(reason)),
    }
}

/// Post-decryption defense in depth: the embedded profile must equal the
/// query byte-for-byte in canonical form.
pub fn verify_match(record: &PlainRecord, query: &StrProfile) -> bool {
    record.profile.canonical_string() == query.canonical_string()
}
