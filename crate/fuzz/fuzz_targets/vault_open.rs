#![no_main]

use libfuzzer_sys::fuzz_target;
use strvault::vault::Vault;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = Vault::parse_bytes(data) {
        for record in records {
            // the walker only admits well-formed framing
            assert!(!record.ciphertext.is_empty());
            assert_eq!(record.ciphertext.len() % 16, 0);
            assert!(!record.record_id.is_empty());
        }
    }
});
