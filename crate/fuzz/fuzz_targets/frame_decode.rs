#![no_main]

use libfuzzer_sys::fuzz_target;
use strvault::record::{decode_frame, encode_frame};

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = decode_frame(data) {
        // exact-consumption framing: decode then encode is the identity
        let encoded = encode_frame(&record).expect("decoded frame is within bounds");
        assert_eq!(encoded, data);
    }
});
