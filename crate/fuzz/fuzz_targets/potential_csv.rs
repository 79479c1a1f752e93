#![no_main]

use aclab::{Order, Potential};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(p) = Potential::from_csv_reader(data) else {
        return;
    };
    let _ = p.validate(64, 1e-12);
    for k in 0..=20 {
        let u = -1.0 + 0.1 * k as f64;
        for order in [Order::Value, Order::First, Order::Second] {
            let _ = p.evaluate(u, order);
        }
    }
});
