//! Shared inputs for the criterion benches.

use std::sync::Arc;

use lifectx::context::ContextInstance;
use lifectx::ingest::{window_assign, Assigned, StreamRecord, WindowGroup, WindowSpec};
use lifectx::su;
use lifectx::synth::{random_contexts, RandomSpec};
use lifectx::time::Timestamp;
use lifectx::value::Value;

pub fn origin() -> Timestamp {
    Timestamp::from_ymd_hms(2018, 5, 14, 0, 0, 0)
}

/// `n` GPS rows as headerless CSV, `subjects` interleaved, one every 2 s each.
pub fn gps_csv(n: usize, subjects: usize) -> String {
    let mut out = String::with_capacity(n * 40);
    for i in 0..n {
        let t = origin().0 + (i / subjects) as i64 * 2_000;
        out.push_str(&format!("acc{:02},{t},46.0667,11.1167,5.0\n", i % subjects));
    }
    out
}

pub fn gps_records(n: usize, subjects: usize) -> Vec<StreamRecord> {
    let stream: Arc<str> = Arc::from(su::GPS);
    (0..n)
        .map(|i| StreamRecord {
            stream_id: Arc::clone(&stream),
            subject_id: format!("acc{:02}", i % subjects),
            timestamp: origin().add_millis((i / subjects) as i64 * 2_000),
            payload: vec![Value::Decimal(46.0667), Value::Decimal(11.1167), Value::Decimal(5.0)],
        })
        .collect()
}

/// One subject's half-hour groups: a GPS fix per minute plus the four answers.
pub fn su_groups(windows: u64) -> Vec<WindowGroup> {
    let mut records = Vec::new();
    let answer = |stream: &str, t: Timestamp, v: Value| StreamRecord {
        stream_id: Arc::from(stream),
        subject_id: "acc01".into(),
        timestamp: t,
        payload: vec![v],
    };
    let places = ["Home", "Bus", "University Library", "Canteen"];
    for w in 0..windows {
        let start = origin().add_millis(w as i64 * 1_800_000);
        for m in 0..30 {
            records.push(StreamRecord {
                stream_id: Arc::from(su::GPS),
                subject_id: "acc01".into(),
                timestamp: start.add_millis(m * 60_000),
                payload: vec![Value::Decimal(46.0667), Value::Decimal(11.1167), Value::Decimal(5.0)],
            });
        }
        let place = places[(w % 4) as usize];
        records.push(answer(
            su::WHERE,
            start.add_millis(100_000),
            Value::String(place.into()),
        ));
        records.push(answer(
            su::DOING,
            start.add_millis(200_000),
            Value::String("Studying".into()),
        ));
        records.push(answer(
            su::WITH_WHOM,
            start.add_millis(300_000),
            Value::String("Bob;Carol".into()),
        ));
        records.push(answer(su::MOOD, start.add_millis(400_000), Value::Integer(3)));
    }
    records.sort_by_key(|r| r.timestamp);
    let spec = WindowSpec::new(origin(), 1800).expect("positive duration");
    window_assign(records.into_iter(), spec, 2)
        .filter_map(|a| match a {
            Assigned::Group(g) => Some(g),
            Assigned::Quarantined(_) => None,
        })
        .collect()
}

pub fn contexts(n: u64) -> Vec<ContextInstance> {
    random_contexts(11, "s", n, 0, RandomSpec::default())
}
