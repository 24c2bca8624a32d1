//! Deterministic synthetic data: SU-shaped input files for pipeline runs and
//! random context fixtures for sequence tests.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::context::{ContextInstance, EntityId, EventNode, GenericObjectRef, LocationNode, Role, TimeWindow};
use crate::ingest::Format;
use crate::manifest::{InputFile, RunManifest, WindowConfig};
use crate::schema::{
    Cardinality, DataPropertyDef, EtgSchema, EtypeCategory, EtypeDef, Multiplicity, ObjectPropertyDef,
    ObjectPropertyKind,
};
use crate::su;
use crate::time::{Timestamp, MS_PER_DAY};
use crate::value::Datatype;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuConfig {
    pub subjects: Vec<String>,
    pub days: u32,
    /// Midnight UTC of the first day.
    pub start: Timestamp,
    pub seed: u64,
}

impl Default for SuConfig {
    fn default() -> Self {
        SuConfig {
            subjects: vec!["acc01".into(), "acc02".into()],
            days: 28,
            start: Timestamp::from_ymd_hms(2018, 5, 14, 0, 0, 0),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SuSummary {
    pub gps_rows: u64,
    pub annotation_rows: u64,
    pub windows_per_subject: u64,
}

const WINDOW_MS: i64 = 1_800_000;
const SLOTS: u32 = 48;

struct Place {
    label: &'static str,
    lat: f64,
    lon: f64,
}

const PLACES: [Place; 9] = [
    Place {
        label: "Home",
        lat: 46.0667,
        lon: 11.1167,
    },
    Place {
        label: "Bus",
        lat: 46.0712,
        lon: 11.1190,
    },
    Place {
        label: "University Library",
        lat: 46.0664,
        lon: 11.1497,
    },
    Place {
        label: "Classroom",
        lat: 46.0670,
        lon: 11.1503,
    },
    Place {
        label: "Canteen",
        lat: 46.0659,
        lon: 11.1488,
    },
    Place {
        label: "Gym",
        lat: 46.0611,
        lon: 11.1254,
    },
    Place {
        label: "Central Station",
        lat: 46.0722,
        lon: 11.1195,
    },
    Place {
        label: "Park",
        lat: 46.0701,
        lon: 11.1265,
    },
    Place {
        label: "Friend's House",
        lat: 46.0590,
        lon: 11.1302,
    },
];

fn place(label: &str) -> &'static Place {
    PLACES.iter().find(|p| p.label == label).unwrap_or(&PLACES[0])
}

/// `(where, doing, with whom)` for a half-hour slot.
fn routine(rng: &mut ChaCha8Rng, weekend: bool, slot: u32) -> (&'static str, &'static str, &'static str) {
    if weekend {
        return match slot {
            0..=17 => ("Home", "Sleeping", "Alone"),
            18..=21 => ("Home", "Eating", "Family"),
            22..=29 => *[
                ("Park", "Walking", "Friends"),
                ("Friend's House", "Chatting", "Friends"),
                ("Home", "Reading", "Alone"),
            ]
            .choose(rng)
            .expect("non-empty"),
            30..=39 => ("Home", "Watching TV", "Family"),
            40..=41 => ("Home", "Eating", "Family"),
            _ => ("Home", "Sleeping", "Alone"),
        };
    }
    match slot {
        0..=13 => ("Home", "Sleeping", "Alone"),
        14..=15 => ("Home", "Eating", "Family"),
        16..=17 => ("Bus", "Travelling", "Alone"),
        18..=23 => {
            if rng.gen_bool(0.85) {
                ("University Library", "Studying", "Alone")
            } else {
                ("Classroom", "Lesson", "Classmates")
            }
        }
        24..=25 => ("Canteen", "Eating", "Bob;Carol"),
        26..=31 => ("Classroom", "Lesson", "Classmates"),
        32 => ("Central Station", "Travelling", "Alone"),
        33 => ("Bus", "Travelling", "Alone"),
        34..=37 => *[("Gym", "Sport", "Bob"), ("Home", "Studying", "Alone")]
            .choose(rng)
            .expect("non-empty"),
        38..=41 => ("Home", "Eating", "Family"),
        42..=44 => ("Home", "Watching TV", "Alone"),
        _ => ("Home", "Sleeping", "Alone"),
    }
}

/// Surface variants that must resolve to the same entity.
fn spell(rng: &mut ChaCha8Rng, label: &str) -> String {
    match rng.gen_range(0..20) {
        0 => label.to_lowercase(),
        1 => format!("{label} "),
        2 => format!("  {}", label.to_uppercase()),
        _ => label.to_string(),
    }
}

fn file_paths(dir: &Path) -> [(PathBuf, &'static str, Format, bool); 5] {
    [
        (dir.join("gps.csv"), su::GPS, Format::Csv, true),
        (dir.join("where.jsonl"), su::WHERE, Format::Jsonl, false),
        (dir.join("doing.jsonl"), su::DOING, Format::Jsonl, false),
        (dir.join("withwhom.jsonl"), su::WITH_WHOM, Format::Jsonl, false),
        (dir.join("mood.jsonl"), su::MOOD, Format::Jsonl, false),
    ]
}

/// Writes GPS fixes (one per minute), four answers per half-hour, the
/// bundled schema and a run manifest (`manifest.toml`) into `dir`.
pub fn write_su_fixture(dir: &Path, cfg: &SuConfig) -> io::Result<SuSummary> {
    fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gps = String::from("subject_id,timestamp,lat,lon,accuracy\n");
    let mut answers: [Vec<(Timestamp, String)>; 4] = Default::default();
    let mut summary = SuSummary {
        windows_per_subject: cfg.days as u64 * SLOTS as u64,
        ..SuSummary::default()
    };

    for day in 0..cfg.days {
        let day_start = cfg.start.add_millis(day as i64 * MS_PER_DAY);
        let weekend = matches!(day_start.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun);
        let plans: Vec<Vec<(&str, &str, &str)>> = cfg
            .subjects
            .iter()
            .map(|_| (0..SLOTS).map(|s| routine(&mut rng, weekend, s)).collect())
            .collect();
        for slot in 0..SLOTS {
            let w_start = day_start.add_millis(slot as i64 * WINDOW_MS);
            for (si, subject) in cfg.subjects.iter().enumerate() {
                let (where_, doing, with) = plans[si][slot as usize];
                let mut offsets: Vec<i64> = (0..4).map(|_| rng.gen_range(0..WINDOW_MS)).collect();
                offsets.sort_unstable();
                let mood = rng.gen_range(1..=5);
                let lines = [
                    json!({"subject_id": subject, "timestamp": w_start.add_millis(offsets[0]).to_string(), "answer": spell(&mut rng, where_)}),
                    json!({"subject_id": subject, "timestamp": w_start.add_millis(offsets[1]).to_string(), "answer": doing}),
                    json!({"subject_id": subject, "timestamp": w_start.add_millis(offsets[2]).to_string(), "answer": with}),
                    json!({"subject_id": subject, "timestamp": w_start.add_millis(offsets[3]).to_string(), "answer": mood}),
                ];
                for (q, line) in lines.into_iter().enumerate() {
                    answers[q].push((w_start.add_millis(offsets[q]), line.to_string()));
                }
                summary.annotation_rows += 4;
            }
            for minute in 0..30 {
                let m_start = w_start.add_millis(minute * 60_000);
                for (si, subject) in cfg.subjects.iter().enumerate() {
                    let p = place(plans[si][slot as usize].0);
                    let t = m_start.add_millis(rng.gen_range(0..1000));
                    let _ = writeln!(
                        gps,
                        "{subject},{t},{:.6},{:.6},{:.1}",
                        p.lat + rng.gen_range(-0.0004..0.0004),
                        p.lon + rng.gen_range(-0.0004..0.0004),
                        rng.gen_range(3.0..40.0)
                    );
                    summary.gps_rows += 1;
                }
            }
        }
    }

    let paths = file_paths(dir);
    fs::write(&paths[0].0, gps)?;
    for (q, rows) in answers.iter_mut().enumerate() {
        rows.sort_by_key(|r| r.0);
        let mut text = String::new();
        for (_, line) in rows.iter() {
            text.push_str(line);
            text.push('\n');
        }
        fs::write(&paths[q + 1].0, text)?;
    }
    fs::write(dir.join("schema.toml"), su::SCHEMA_TEXT)?;
    fs::write(dir.join("manifest.toml"), su_manifest(cfg.start).to_toml())?;
    Ok(summary)
}

/// The manifest written next to a synthetic fixture; paths are relative.
pub fn su_manifest(origin: Timestamp) -> RunManifest {
    RunManifest {
        schema: "schema.toml".into(),
        output: "run".into(),
        window: WindowConfig {
            origin: Some(origin),
            duration_s: 1800,
        },
        horizon: crate::ingest::DEFAULT_LATENESS_WINDOWS,
        populate: su::config(),
        streams: su::descriptors(),
        rules: su::rules(),
        inputs: file_paths(Path::new(""))
            .into_iter()
            .map(|(path, stream, format, header)| InputFile {
                path,
                stream_id: stream.to_string(),
                format,
                header,
            })
            .collect(),
    }
}

/// Vocabulary sizes and rates for [`random_contexts`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub locations: usize,
    pub events: usize,
    pub persons: usize,
    pub unknown_rate: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            locations: 4,
            events: 4,
            persons: 3,
            unknown_rate: 0.15,
        }
    }
}

/// `n` contiguous half-hour contexts for `subject` starting at midnight UTC
/// on Monday 2018-05-14 plus `first_index` windows, with labels drawn from
/// small vocabularies.
pub fn random_contexts(seed: u64, subject: &str, n: u64, first_index: u64, spec: RandomSpec) -> Vec<ContextInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = Timestamp::from_ymd_hms(2018, 5, 14, 0, 0, 0);
    let me = GenericObjectRef {
        entity_id: EntityId::new("Human", 1),
        etype: "Human".into(),
        label: format!("@{subject}"),
        role: Role::Me,
    };
    (first_index..first_index + n)
        .map(|index| {
            let window = TimeWindow {
                start: origin.add_millis(index as i64 * WINDOW_MS),
                duration_s: 1800,
                index,
            };
            let mut ctx = ContextInstance::unknown(subject, window, me.clone());
            if rng.gen_bool(spec.unknown_rate) {
                return ctx;
            }
            let mut locs: Vec<usize> = (0..rng.gen_range(0..=2))
                .map(|_| rng.gen_range(0..spec.locations))
                .collect();
            locs.dedup();
            ctx.locations = locs
                .iter()
                .enumerate()
                .map(|(order, &l)| LocationNode {
                    entity_id: EntityId::new("Location", l as u64 + 1),
                    etype: "Location".into(),
                    label: format!("place{l}"),
                    coordinates: None,
                    order: order as u32,
                })
                .collect();
            let n_events = rng.gen_range(0..=2);
            ctx.events = (0..n_events)
                .map(|i| EventNode {
                    event_id: format!("e{i}"),
                    label: format!("activity{}", rng.gen_range(0..spec.events)),
                    start_time: window.start,
                    end_time: window.end(),
                    parent: None,
                })
                .collect();
            let mut people: Vec<usize> = (0..rng.gen_range(0..=2))
                .map(|_| rng.gen_range(0..spec.persons))
                .collect();
            people.sort_unstable();
            people.dedup();
            ctx.persons.extend(people.into_iter().map(|p| GenericObjectRef {
                entity_id: EntityId::new("Human", p as u64 + 2),
                etype: "Human".into(),
                label: format!("person{p}"),
                role: Role::Person,
            }));
            ctx
        })
        .collect()
}

/// A valid schema with up to a dozen etypes arranged as a random forest.
/// Roots carry a category, children inherit it or specialize GenericObject.
pub fn random_schema(seed: u64) -> EtgSchema {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=12);
    let mut etypes: Vec<EtypeDef> = Vec::with_capacity(n);
    let mut cats: Vec<EtypeCategory> = Vec::with_capacity(n);
    for i in 0..n {
        let name = format!("T{i}");
        let (def, cat) = if i == 0 || rng.gen_bool(0.4) {
            let cat = *EtypeCategory::ALL.choose(&mut rng).expect("non-empty");
            (EtypeDef::new(&name, Some(cat), None), cat)
        } else {
            let parent = rng.gen_range(0..i);
            let pcat = cats[parent];
            let own = if pcat == EtypeCategory::GenericObject && rng.gen_bool(0.3) {
                Some(
                    *[EtypeCategory::Human, EtypeCategory::Object]
                        .choose(&mut rng)
                        .expect("non-empty"),
                )
            } else {
                None
            };
            let parent_name = etypes[parent].name.clone();
            (EtypeDef::new(&name, own, Some(&parent_name)), own.unwrap_or(pcat))
        };
        let mut def = def;
        for k in 0..rng.gen_range(0..4) {
            let kind = *cat.allowed_kinds().choose(&mut rng).expect("non-empty");
            let datatype = match rng.gen_range(0..7) {
                0 => Datatype::String,
                1 => Datatype::Integer,
                2 => Datatype::Decimal,
                3 => Datatype::Boolean,
                4 => Datatype::Timestamp,
                5 => Datatype::Coordinates,
                _ => Datatype::Enumeration((0..rng.gen_range(1..4)).map(|v| format!("v{v}")).collect()),
            };
            let multiplicity = if rng.gen_bool(0.5) {
                Multiplicity::Single
            } else {
                Multiplicity::Multi
            };
            def = def.with_property(DataPropertyDef::new(&format!("p{i}x{k}"), kind, datatype, multiplicity));
        }
        etypes.push(def);
        cats.push(cat);
    }
    let object_properties = (0..rng.gen_range(0..4))
        .map(|k| {
            let min = rng.gen_range(0..3);
            ObjectPropertyDef {
                name: format!("r{k}"),
                domain: format!("T{}", rng.gen_range(0..n)),
                range: format!("T{}", rng.gen_range(0..n)),
                kind: ObjectPropertyKind::Structural,
                cardinality: Cardinality {
                    min,
                    max: rng.gen_bool(0.5).then(|| min + rng.gen_range(0..3)),
                },
            }
        })
        .collect();
    EtgSchema::new(etypes, object_properties)
}
