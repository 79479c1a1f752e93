#![no_main]

use aclab::io::{read_field_csv, write_field_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(f) = read_field_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    write_field_csv(&f, &mut out).expect("writing to memory succeeds");
    let back = read_field_csv(out.as_slice()).expect("written fields parse");
    assert_eq!(back.active_count(), f.active_count());
});
