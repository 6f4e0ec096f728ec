mod common;

use common::*;
use cpcs_core::output::{read_scan_csv, write_map_csv, write_scan_csv, Header};
use cpcs_core::scan::{run_delay_scan, DelayRange};
use cpcs_core::UnitContext;

#[test]
fn scan_csv_round_trips_at_nine_digits() {
    let cfg = tls_scan(FAST_GAMMA, 5e-3, DelayRange { min: 0.0, max: 60.0, step: 20.0 });
    let scan = run_delay_scan(&cfg).unwrap();
    let mut buf = Vec::new();
    write_scan_csv(&mut buf, &scan, &Header::new("abc123").with("model", "tls"), 9).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# config_hash=abc123\n# model=tls\nT_fs,c_Hz,f_Hz\n"));
    let table = read_scan_csv(buf.as_slice()).unwrap();
    assert_eq!(table.comments, vec!["config_hash=abc123", "model=tls"]);
    for (k, p) in scan.points.iter().enumerate() {
        assert!(rel_diff(table.coincidence[k], p.coincidence) < 1e-8);
        assert!(rel_diff(table.fluorescence[k], p.fluorescence) < 1e-8);
        assert!((table.delays[k] - p.delay).abs() < 1e-7 * p.delay.max(1.0));
    }
}

#[test]
fn map_csv_is_t1_major_with_femtosecond_axes() {
    let cfg = tls_scan(FAST_GAMMA, 5e-3, DelayRange::single(50.0));
    let map = cfg.engine(50.0).unwrap().g2_grid(500, 50.0).unwrap();
    let mut buf = Vec::new();
    write_map_csv(&mut buf, &map, &Header::new("h"), 9).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|s| s.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), map.iter().count());
    assert!(rows.windows(2).all(|w| w[0][0] <= w[1][0]));
    assert!(rows.iter().all(|r| r[1] >= r[0]));
    let u = UnitContext::default();
    let last = rows.last().unwrap();
    assert!((last[1] - u.time_au_to_fs(map.grid.time(map.grid.n_steps))).abs() < 1e-6);
}
