#![no_main]

use libfuzzer_sys::fuzz_target;
use limitlab_core::fields::Snapshot;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Snapshot::from_csv(text) {
        let again = Snapshot::from_csv(&s.to_csv().unwrap()).expect("written snapshot must parse");
        assert_eq!(again.len(), s.len());
    }
});
