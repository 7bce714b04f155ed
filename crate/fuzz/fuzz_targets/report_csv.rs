#![no_main]

use libfuzzer_sys::fuzz_target;
use limitlab::report::{parse_decay_csv, parse_metrics_csv, parse_monitors_csv, Tables};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let metrics = parse_metrics_csv(text).unwrap_or_default();
    let monitors = parse_monitors_csv(text).unwrap_or_default();
    let decay = parse_decay_csv(text).unwrap_or_default();
    let t = Tables { metrics, monitors, decay };
    let _ = t.verdict(&Default::default());
    assert_eq!(parse_metrics_csv(&t.metrics_csv()).unwrap().len(), t.metrics.len());
});
