//! STR-keyed searchable encryption.
//!
//! A 20-locus STR profile deterministically derives an 80-bit search key,
//! expanded to an AES-256 key that jointly encrypts the profile, identity
//! metadata, and a biometric payload into one record. The encrypted vault
//! carries no index: a query profile derives its key once and trial-decrypts
//! every record, so only a perfectly matching profile reveals anything, and
//! a failed search reveals nothing at all.
//!
//! Modules follow the pipeline:
//!
//! * [`profile`] — parsing, validation, canonical encoding of STR profiles
//! * [`keygen`] — search-key derivation and HKDF expansion to cipher keys
//! * [`record`] — plaintext framing, sealing, trial decryption
//! * [`vault`] — the append-only on-disk store
//! * [`search`] — parallel trial-decryption scans and throughput reporting
//! * [`population`] — entropy, kinship simulation, and the reduced-space
//!   brute-force demonstrator that quantifies the security claims

pub mod keygen;
pub mod population;
pub mod profile;
pub mod record;
pub mod search;
pub mod vault;

#[cfg(test)]
pub(crate) mod fixtures;

pub use keygen::{derive_search_key, expand_cipher_key, shared_bits, CipherKey, SearchKey};
pub use profile::{parse_profile, Allele, Genotype, LocusName, StrProfile};
pub use record::{seal, try_unseal, verify_match, EncryptedRecord, PlainRecord, TrialOutcome};
pub use search::{search, SearchReport};
pub use vault::{Vault, VaultWriter};
