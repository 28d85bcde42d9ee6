#![no_main]
//! Ledger JSON decoding. Accepted reports must re-serialize to a fixed point.

use dphase::ledger::LedgerReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(report) = LedgerReport::from_json(text) else { return };
    let once = report.to_json().expect("encode");
    let back = LedgerReport::from_json(&once).expect("re-decode");
    assert_eq!(back.to_json().expect("encode"), once);
});
