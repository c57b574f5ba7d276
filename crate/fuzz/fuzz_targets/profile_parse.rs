#![no_main]

use libfuzzer_sys::fuzz_target;
use strvault::keygen::derive_search_key;
use strvault::profile::{parse_profile, StrProfile};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(profile) = parse_profile(text) {
        // any accepted profile must survive the canonical round trip and
        // derive a key deterministically
        let canon = profile.canonical_string();
        let back = StrProfile::parse_canonical(canon.as_bytes()).expect("canonical reparses");
        assert_eq!(back, profile);
        assert_eq!(derive_search_key(&profile), derive_search_key(&back));
    }
});
