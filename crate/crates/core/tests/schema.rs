use lifectx::report::Code;
use lifectx::schema::{
    parse_schema, parse_schema_unchecked, validate_schema, DataPropertyDef, EtgSchema, EtypeCategory, EtypeDef,
    Multiplicity, PropertyKind,
};
use lifectx::synth::random_schema;
use lifectx::value::Datatype;
use proptest::prelude::*;

/// Kinds each category may carry, written out cell by cell.
fn permitted(cat: EtypeCategory, kind: PropertyKind) -> bool {
    use EtypeCategory as C;
    use PropertyKind as K;
    matches!(
        (cat, kind),
        (C::Location, K::Spatial | K::Function | K::External)
            | (C::Event, K::Temporal | K::External)
            | (
                C::Human,
                K::Spatial | K::Function | K::Action | K::External | K::Internal
            )
            | (C::Object, K::Spatial | K::Function | K::Action | K::External)
            | (C::GenericObject, K::Spatial | K::Function | K::Action | K::External)
    )
}

fn one_cell(cat: EtypeCategory, kind: PropertyKind) -> EtgSchema {
    EtgSchema::new(
        vec![EtypeDef::new("X", Some(cat), None).with_property(DataPropertyDef::new(
            "p",
            kind,
            Datatype::String,
            Multiplicity::Single,
        ))],
        vec![],
    )
}

#[test]
fn kind_matrix_is_exact() {
    let mut allowed = 0;
    for cat in EtypeCategory::ALL {
        for kind in PropertyKind::ALL {
            let report = validate_schema(&one_cell(cat, kind));
            assert_eq!(report.is_clean(), permitted(cat, kind), "{cat} x {kind}: {report}");
            if !permitted(cat, kind) {
                assert_eq!(report.codes(), vec![Code::KindNotAllowed]);
            }
            allowed += report.is_clean() as usize;
        }
    }
    assert_eq!(allowed, 18);
}

#[test]
fn event_with_spatial_property_is_rejected_by_the_checked_parser() {
    let doc = r#"
[[etypes]]
name = "Event"
category = "Event"
properties = ["Where Spatial coordinates single"]
"#;
    assert!(parse_schema_unchecked(doc).is_ok());
    let err = parse_schema(doc).unwrap_err().to_string();
    assert!(err.contains("kind-not-allowed"), "{err}");
}

#[test]
fn bundled_schema_is_valid() {
    let s = parse_schema(lifectx::su::SCHEMA_TEXT).unwrap();
    assert!(validate_schema(&s).is_clean());
    assert!(s.is_subtype("Human", "GenericObject").unwrap());
    assert!(s.is_subtype("Phone", "Object").unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generated_schemas_are_valid_and_round_trip(seed in any::<u64>()) {
        let s = random_schema(seed);
        let report = validate_schema(&s);
        prop_assert!(report.is_clean(), "{}", report);
        let back = parse_schema(&s.to_document()).unwrap();
        prop_assert_eq!(back.etypes(), s.etypes());
        prop_assert_eq!(back.object_properties(), s.object_properties());
        prop_assert_eq!(back.to_document(), s.to_document());
    }

    #[test]
    fn subtype_is_reflexive_transitive_and_single_rooted(seed in any::<u64>()) {
        let s = random_schema(seed);
        let names: Vec<String> = s.etypes().iter().map(|e| e.name.clone()).collect();
        let roots: Vec<&String> = s.etypes().iter().filter(|e| e.parent.is_none()).map(|e| &e.name).collect();
        for a in &names {
            prop_assert!(s.is_subtype(a, a).unwrap());
            prop_assert_eq!(roots.iter().filter(|r| s.is_subtype(a, r).unwrap()).count(), 1);
            prop_assert!(s.category(a).is_some());
            for b in &names {
                for c in &names {
                    if s.is_subtype(a, b).unwrap() && s.is_subtype(b, c).unwrap() {
                        prop_assert!(s.is_subtype(a, c).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn effective_properties_have_unique_names(seed in any::<u64>()) {
        let s = random_schema(seed);
        for e in s.etypes() {
            let props = s.effective_properties(&e.name).unwrap();
            let mut names: Vec<&str> = props.iter().map(|p| p.name.as_str()).collect();
            let n = names.len();
            names.sort_unstable();
            names.dedup();
            prop_assert_eq!(names.len(), n);
            let own_and_inherited: usize = s.lineage(&e.name).iter().map(|l| l.properties.len()).sum();
            prop_assert_eq!(n, own_and_inherited);
        }
    }
}
