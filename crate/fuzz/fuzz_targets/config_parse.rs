#![no_main]
//! Arbitrary bytes through the TOML run-config parser.
//!
//! Parse failures must surface as configuration errors naming a key, never panics.
//! Accepted configs must reach a fixed point under serialize and parse.

use dphase::config::RunConfig;
use dphase::Error;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match RunConfig::from_toml(text) {
        Ok(cfg) => {
            let again = cfg.to_toml().expect("accepted config serializes");
            let back = RunConfig::from_toml(&again).expect("serialized config parses");
            assert_eq!(back.to_toml().expect("re-serialize"), again);
        }
        Err(Error::Config { key, .. }) => assert!(!key.is_empty()),
        Err(e) => assert_eq!(e.exit_code(), 2, "{e}"),
    }
});
