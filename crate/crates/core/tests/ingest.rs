use std::collections::BTreeMap;

use coupled_lob::ingest::*;
use proptest::prelude::*;

fn ts(s: &str) -> Timestamp {
    Timestamp::parse(s).unwrap()
}

fn parse(csv: &str) -> (Vec<TaqRecord>, Vec<Reject>) {
    read_taq(csv.as_bytes()).unwrap()
}

const HEAD: &str = "timestamp,kind,trade_type,price,volume,bid,ask,bid_vol,ask_vol\n";

#[test]
fn session_window_and_opening_minute() {
    let (recs, _) = parse(&format!(
        "{HEAD}\
08:59:59.999,trade,AT,10,1,,,,\n\
09:00:00.000,trade,AT,10,2,,,,\n\
09:00:59.999,quote,,,,9.9,10.1,5,5\n\
09:01:00.000,trade,AT,10,3,,,,\n\
16:49:59.999,trade,AT,10,4,,,,\n\
16:50:00.000,trade,AT,10,5,,,,\n\
17:30:00.000,quote,,,,9.9,10.1,5,5\n"
    ));
    let (out, report) = pipeline(&recs, &CleanConfig::default()).unwrap();
    let vols: Vec<f64> = out
        .iter()
        .map(|r| match &r.event {
            Event::Trade(t) => t.volume,
            Event::Quote(_) => -1.0,
        })
        .collect();
    assert_eq!(vols, vec![3.0, 4.0]);
    assert_eq!(report.outside_session, 3);
    assert_eq!(report.opening_skip, 2);
    assert_eq!(report.output, 2);
}

#[test]
fn unwanted_trade_types_removed_and_counted() {
    let (recs, _) = parse(&format!(
        "{HEAD}\
12:00:00,trade,LT,10,1,,,,\n\
12:00:00,trade,AT,10,2,,,,\n\
12:00:01,trade,LC,10,3,,,,\n\
12:00:02,trade,IP,10,4,,,,\n\
12:00:03,trade,LT,10,5,,,,\n\
12:00:04,quote,,,,9,11,1,1\n"
    ));
    let (out, report) = pipeline(&recs, &CleanConfig::default()).unwrap();
    assert_eq!(
        out,
        vec![
            TaqRecord::trade(ts("12:00:00"), "AT", 10.0, 2.0),
            TaqRecord::quote(ts("12:00:04"), 9.0, 11.0, 1.0, 1.0),
        ]
    );
    let expected: BTreeMap<String, usize> = [("IP", 1), ("LC", 1), ("LT", 2)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    assert_eq!(report.trade_type, expected);
}

#[test]
fn auction_windows_are_half_open() {
    let (recs, _) = parse(&format!(
        "{HEAD}\
11:59:59,trade,AT,10,1,,,,\n\
12:00:00,trade,AT,10,2,,,,\n\
12:01:59,trade,AT,10,3,,,,\n\
12:02:00,trade,AT,10,4,,,,\n"
    ));
    let cfg = CleanConfig {
        auction_windows: vec![("12:00:00".into(), "12:02:00".into())],
        ..CleanConfig::default()
    };
    let (out, report) = pipeline(&recs, &cfg).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(report.auction, 2);
    assert_eq!(out[1], TaqRecord::trade(ts("12:02:00"), "AT", 10.0, 4.0));
}

#[test]
fn last_quote_per_timestamp_is_retained() {
    let t = ts("10:00:00.500");
    let recs = vec![
        TaqRecord::quote(t, 9.0, 11.0, 1.0, 1.0),
        TaqRecord::quote(t, 9.5, 10.5, 2.0, 2.0),
        TaqRecord::quote(t, 9.8, 10.2, 3.0, 4.0),
    ];
    let mut report = IngestReport::default();
    assert_eq!(
        compact_counted(&recs, &mut report),
        vec![TaqRecord::quote(t, 9.8, 10.2, 3.0, 4.0)]
    );
    assert_eq!(report.superseded_quotes, 2);
}

#[test]
fn same_timestamp_trades_merge_at_vwap() {
    let t = ts("10:00:00");
    let recs = vec![
        TaqRecord::trade(t, "AT", 10.0, 100.0),
        TaqRecord::trade(t, "AT", 10.4, 300.0),
    ];
    let out = compact(&recs);
    assert_eq!(out.len(), 1);
    let Event::Trade(m) = &out[0].event else { panic!() };
    assert_eq!(m.volume, 400.0);
    // (100 * 10.0 + 300 * 10.4) / 400
    assert!((m.price - 10.3).abs() < 1e-12);
}

#[test]
fn distinct_types_and_timestamps_are_not_merged() {
    let recs = vec![
        TaqRecord::trade(ts("10:00:00"), "AT", 10.0, 1.0),
        TaqRecord::trade(ts("10:00:00"), "XT", 11.0, 1.0),
        TaqRecord::quote(ts("10:00:00"), 9.0, 12.0, 1.0, 1.0),
        TaqRecord::trade(ts("10:00:00.001"), "AT", 12.0, 1.0),
    ];
    assert_eq!(compact(&recs), recs);
}

#[test]
fn clean_data_passes_through_unchanged() {
    let recs = vec![
        TaqRecord::trade(ts("09:01:00"), "AT", 10.0, 1.0),
        TaqRecord::quote(ts("09:30:00"), 9.0, 11.0, 1.0, 1.0),
        TaqRecord::trade(ts("16:49:00"), "AT", 10.5, 2.0),
    ];
    let (out, report) = pipeline(&recs, &CleanConfig::default()).unwrap();
    assert_eq!(out, recs);
    assert_eq!(report.output, report.input);
}

#[test]
fn bad_rows_are_rejected_not_fatal() {
    let (recs, rejects) = parse(&format!(
        "{HEAD}\
10:00:00,trade,AT,10,1,,,,\n\
ten o'clock,trade,AT,10,1,,,,\n\
10:00:01,trade,AT,-1,1,,,,\n\
10:00:02,quote,,,,11,10,1,1\n\
10:00:03,order,,,,,,,\n\
10:00:04,trade,AT,abc,1,,,,\n\
10:00:05,quote,,,,9,10,1,1\n"
    ));
    assert_eq!(recs.len(), 2);
    let lines: Vec<u64> = rejects.iter().map(|r| r.line).collect();
    assert_eq!(lines, vec![3, 4, 5, 6, 7]);
    assert!(rejects[0].reason.contains("timestamp"));
    assert!(rejects[2].reason.contains("crossed"));
    let mut buf = Vec::new();
    write_rejects(&rejects, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("line,reason,raw\n3,"));
}

#[test]
fn missing_column_is_an_error() {
    assert!(read_taq("timestamp,kind,price\n10:00:00,trade,1\n".as_bytes()).is_err());
}

#[test]
fn csv_round_trip() {
    let recs = vec![
        TaqRecord::trade(ts("2020-01-02 10:00:00.125"), "AT", 10.25, 3.0),
        TaqRecord::quote(ts("2020-01-02 10:00:01"), 10.0, 10.5, 7.0, 2.0),
    ];
    let mut buf = Vec::new();
    write_taq(&recs, &mut buf).unwrap();
    let (back, rejects) = read_taq(buf.as_slice()).unwrap();
    assert!(rejects.is_empty());
    assert_eq!(back, recs);

    let mut commented = b"# master_seed: 1\n".to_vec();
    commented.extend_from_slice(&buf);
    let (back, rejects) = read_taq(commented.as_slice()).unwrap();
    assert!(rejects.is_empty());
    assert_eq!(back, recs);
}

#[test]
fn micro_price_path_uses_log_micro_prices() {
    let recs = vec![
        TaqRecord::quote(ts("2020-01-02 10:00:00"), 10.0, 11.0, 3.0, 1.0),
        TaqRecord::trade(ts("2020-01-02 10:00:01"), "AT", 10.5, 1.0),
        TaqRecord::quote(ts("2020-01-03 10:00:00"), 10.0, 11.0, 1.0, 1.0),
    ];
    let p = micro_price_path(&recs, 0);
    assert_eq!(p.t, vec![36_000.0, 36_000.0 + 86_400.0]);
    assert!((p.p[0] - 10.75f64.ln()).abs() < 1e-15);
    assert!((p.p[1] - 10.5f64.ln()).abs() < 1e-15);
}

#[test]
fn invalid_clean_config() {
    let bad = CleanConfig {
        session_end: "08:00".into(),
        ..CleanConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = CleanConfig {
        auction_windows: vec![("12:00".into(), "11:00".into())],
        ..CleanConfig::default()
    };
    assert!(bad.validate().is_err());
}

fn arb_record() -> impl Strategy<Value = TaqRecord> {
    let time = (8u32..18, 0u32..60, 0u32..3).prop_map(|(h, m, s)| Timestamp {
        date: None,
        time: chrono::NaiveTime::from_hms_opt(h, m, s).unwrap(),
    });
    let trade = (
        time.clone(),
        prop::sample::select(vec!["AT", "LT", "LC", "IP"]),
        1u32..2000,
        1u32..500,
    )
        .prop_map(|(t, ty, p, v)| TaqRecord::trade(t, ty, p as f64 / 100.0, v as f64));
    let quote = (time, 1u32..1000, 0u32..50, 0u32..20, 0u32..20).prop_map(|(t, b, s, bv, av)| {
        TaqRecord::quote(t, b as f64 / 100.0, (b + s) as f64 / 100.0, bv as f64, av as f64)
    });
    prop_oneof![trade, quote]
}

fn trade_volume_by_key(recs: &[TaqRecord]) -> BTreeMap<(Timestamp, String), f64> {
    let mut m = BTreeMap::new();
    for r in recs {
        if let Event::Trade(t) = &r.event {
            *m.entry((r.timestamp, t.trade_type.clone())).or_insert(0.0) += t.volume;
        }
    }
    m
}

proptest! {
    #[test]
    fn pipeline_is_idempotent(recs in prop::collection::vec(arb_record(), 0..80)) {
        let cfg = CleanConfig::default();
        let (once, _) = pipeline(&recs, &cfg).unwrap();
        let (twice, _) = pipeline(&once, &cfg).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn compact_preserves_volume_and_bounds_vwap(mut recs in prop::collection::vec(arb_record(), 0..80)) {
        recs.sort_by_key(|r| r.timestamp);
        let out = compact(&recs);
        let before = trade_volume_by_key(&recs);
        let after = trade_volume_by_key(&out);
        prop_assert_eq!(&before, &after);
        for r in &out {
            if let Event::Trade(m) = &r.event {
                let group: Vec<f64> = recs
                    .iter()
                    .filter(|x| x.timestamp == r.timestamp)
                    .filter_map(|x| match &x.event {
                        Event::Trade(t) if t.trade_type == m.trade_type => Some(t.price),
                        _ => None,
                    })
                    .collect();
                let lo = group.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = group.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(m.price >= lo - 1e-12 && m.price <= hi + 1e-12);
            }
        }
        let mut seen = std::collections::HashSet::new();
        for r in &out {
            if r.kind() == Kind::Quote {
                prop_assert!(seen.insert(r.timestamp));
            }
        }
    }
}
