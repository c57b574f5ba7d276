#![no_main]

use libfuzzer_sys::fuzz_target;
use strvault::population::{locus_entropy, total_entropy, AlleleFrequencyTable};
use strvault::profile::LocusName;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = AlleleFrequencyTable::parse(text) {
        let total = total_entropy(&table);
        assert!(total.is_finite() && total >= 0.0);
        for locus in LocusName::all() {
            assert!(!table.alleles(locus).is_empty());
            assert!(locus_entropy(&table, locus) >= 0.0);
        }
    }
});
