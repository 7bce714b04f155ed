#![no_main]

use libfuzzer_sys::fuzz_target;
use limitlab::SweepConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = SweepConfig::parse(text) {
        let _ = cfg.validate();
        if let Ok(t) = cfg.to_toml() {
            let _ = SweepConfig::parse(&t);
        }
    }
});
