#![no_main]

use aclab::pipeline::{merge_reports, parse_report, strip_timings};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(mut report) = parse_report(text) else {
        return;
    };
    if report.get("config_hash").and_then(|h| h.as_str()).is_some() {
        merge_reports(&report, &report).expect("a report merges with itself");
    }
    strip_timings(&mut report);
});
