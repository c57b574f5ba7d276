#![no_main]

use libfuzzer_sys::fuzz_target;
use strvault::profile::StrProfile;

fuzz_target!(|data: &[u8]| {
    if let Ok(profile) = StrProfile::parse_canonical(data) {
        // strict parser: acceptance implies byte-identical re-emission
        assert_eq!(profile.canonical_string().as_bytes(), data);
    }
});
