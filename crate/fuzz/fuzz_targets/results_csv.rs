#![no_main]

use libfuzzer_sys::fuzz_target;
use tissue_fem::scenario::ResultTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = ResultTable::from_csv(text) else { return };
    if let Ok(csv) = table.to_csv() {
        let back = ResultTable::from_csv(&csv).unwrap();
        assert_eq!(back.columns, table.columns);
        // the sign of a NaN is not written
        let bits = |t: &ResultTable| -> Vec<Vec<u64>> {
            let key = |v: f64| if v.is_nan() { f64::NAN.to_bits() } else { v.to_bits() };
            t.rows.iter().map(|r| r.iter().map(|&v| key(v)).collect()).collect()
        };
        assert_eq!(bits(&back), bits(&table));
    }
});
