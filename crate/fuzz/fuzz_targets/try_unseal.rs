#![no_main]

use libfuzzer_sys::fuzz_target;
use strvault::keygen::CipherKey;
use strvault::record::{try_unseal, verify_match, EncryptedRecord, TrialOutcome};

fuzz_target!(|data: &[u8]| {
    if data.len() < 48 {
        return;
    }
    let key = CipherKey::from_bytes(data[..32].try_into().unwrap());
    let iv: [u8; 16] = data[32..48].try_into().unwrap();
    let record = EncryptedRecord {
        record_id: "fuzz".into(),
        iv,
        ciphertext: data[48..].to_vec(),
    };
    match try_unseal(&record, &key) {
        Ok(TrialOutcome::Match(plain)) => {
            // reachable from seeded corpora of validly sealed records
            assert!(verify_match(&plain, &plain.profile.clone()));
        }
        Ok(TrialOutcome::NoMatch(_)) => {}
        Err(_) => assert!(record.ciphertext.is_empty() || record.ciphertext.len() % 16 != 0),
    }
});
