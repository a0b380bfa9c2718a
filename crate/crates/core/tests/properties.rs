use std::collections::BTreeMap;

use hidss_core::canonical;
use hidss_core::feedback::{aggregate, AggregationConfig, CriteriaCatalog, Judgment};
use hidss_core::matching::{match_score, recommend, ExpertiseTag, MatchWeights, MentorProfile};
use hidss_core::ontology::{
    decode_choices, diff, encode, validate_model, BusinessModel, BusinessModelVersion, ModelDocument,
    PatternCatalog, RawMetadata,
};
use hidss_core::{Dimension, Timestamp, VersionRef};
use proptest::prelude::*;

fn catalog() -> PatternCatalog {
    PatternCatalog::default_catalog()
}

/// Picks one choice index per element.
fn arb_choices() -> impl Strategy<Value = BTreeMap<String, String>> {
    let cat = catalog();
    let strategies: Vec<_> = cat.elements.iter().map(|e| 0..e.choices.len()).collect();
    strategies.prop_map(move |idx| {
        cat.elements
            .iter()
            .zip(idx)
            .map(|(e, i)| (e.element_id.clone(), e.choices[i].clone()))
            .collect()
    })
}

fn arb_model() -> impl Strategy<Value = BusinessModel> {
    (arb_choices(), 0u32..50, 0u32..120).prop_map(|(choices, team, age)| {
        let doc = ModelDocument {
            catalog_version: None,
            choices,
            metadata: RawMetadata { team_size: team.into(), venture_age_months: age.into(), industry: "energy".into() },
            profile: BTreeMap::new(),
        };
        validate_model(&doc, &catalog()).unwrap()
    })
}

/// Documents that may drop elements, add unknown ones, or use bad choices.
fn arb_document() -> impl Strategy<Value = ModelDocument> {
    let cat = catalog();
    let mut names: Vec<String> = cat.elements.iter().map(|e| e.element_id.clone()).collect();
    names.push("mystery_element".into());
    let mut choices: Vec<String> = cat.elements.iter().flat_map(|e| e.choices.clone()).collect();
    choices.push("not_a_choice".into());
    let edit = (proptest::sample::select(names), proptest::option::of(proptest::sample::select(choices)));
    (arb_choices(), proptest::collection::vec(edit, 0..4)).prop_map(|(mut choices, edits)| {
        for (element, choice) in edits {
            match choice {
                Some(c) => {
                    choices.insert(element, c);
                }
                None => {
                    choices.remove(&element);
                }
            }
        }
        ModelDocument {
            catalog_version: None,
            choices,
            metadata: RawMetadata { team_size: 2, venture_age_months: 2, industry: "energy".into() },
            profile: BTreeMap::new(),
        }
    })
}

fn totality_holds(doc: &ModelDocument, cat: &PatternCatalog) -> bool {
    cat.elements.iter().all(|e| doc.choices.get(&e.element_id).is_some_and(|c| e.choices.contains(c)))
        && doc.choices.keys().all(|k| cat.element(k).is_some())
}

fn version(number: u32, model: BusinessModel) -> BusinessModelVersion {
    BusinessModelVersion { venture_id: "v".into(), version: number, parent: None, created_at: Timestamp(0), model }
}

fn arb_mentor(id: usize) -> impl Strategy<Value = MentorProfile> {
    let industries = catalog().industries;
    (
        proptest::sample::subsequence(ExpertiseTag::ALL.to_vec(), 1..=3),
        proptest::sample::subsequence(industries, 0..=3),
    )
        .prop_map(move |(tags, inds)| MentorProfile {
            mentor_id: format!("m{id:02}").into(),
            display_name: String::new(),
            expertise: tags.into_iter().collect(),
            industries: inds.into_iter().collect(),
        })
}

fn arb_pool(max: usize) -> impl Strategy<Value = Vec<MentorProfile>> {
    (1..=max).prop_flat_map(|n| (0..n).map(arb_mentor).collect::<Vec<_>>())
}

fn judgments_with(ratings: &[Vec<i32>]) -> Vec<Judgment> {
    let criteria = CriteriaCatalog::default_catalog();
    ratings
        .iter()
        .enumerate()
        .map(|(i, r)| Judgment {
            judgment_id: format!("j{i}"),
            version_ref: VersionRef::new("v".into(), 1),
            mentor_id: format!("m{i}").into(),
            ratings: criteria.criteria.iter().zip(r).map(|(c, &x)| (c.criterion_id.clone(), x)).collect(),
            comments: BTreeMap::new(),
            matched_dimension: None,
            submitted_at: Timestamp(0),
        })
        .collect()
}

proptest! {
    #[test]
    fn canonical_floats_round_trip_bit_exactly(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let text = canonical::to_string(&vec![x]).unwrap();
        let back: Vec<f64> = canonical::from_str(&text).unwrap();
        prop_assert_eq!(back[0].to_bits(), x.to_bits());
    }

    #[test]
    fn encoding_round_trips(model in arb_model()) {
        let cat = catalog();
        let fv = encode(&model, &cat).unwrap();
        prop_assert_eq!(fv.values.len(), cat.feature_len());
        prop_assert_eq!(decode_choices(&fv, &cat).unwrap(), model.choices.clone());
        let mut offset = 0;
        for e in &cat.elements {
            let ones = fv.values[offset..offset + e.choices.len()].iter().filter(|&&v| v == 1.0).count();
            prop_assert_eq!(ones, 1);
            offset += e.choices.len();
        }
        prop_assert_eq!(encode(&model, &cat).unwrap(), fv);
    }

    #[test]
    fn validation_accepts_exactly_total_documents(doc in arb_document()) {
        let cat = catalog();
        prop_assert_eq!(validate_model(&doc, &cat).is_ok(), totality_holds(&doc, &cat));
    }

    #[test]
    fn diff_length_is_hamming_distance(a in arb_model(), b in arb_model()) {
        let cat = catalog();
        let hamming = cat.elements.iter().filter(|e| a.choice(&e.element_id) != b.choice(&e.element_id)).count();
        let changes = diff(&version(1, a), &version(2, b), &cat).unwrap();
        prop_assert_eq!(changes.len(), hamming);
        let order: Vec<_> = changes.iter().map(|c| cat.element_index(&c.element_id).unwrap()).collect();
        prop_assert!(order.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn top_match_attains_pool_maximum(pool in arb_pool(50), model in arb_model()) {
        let w = MatchWeights::default();
        let out = recommend(&model, &pool, 3, &w).unwrap();
        for &d in Dimension::ALL {
            let best = pool.iter().map(|m| match_score(m, &model, d, &w)).fold(f64::MIN, f64::max);
            let top = &out.for_dimension(d)[0];
            prop_assert_eq!(top.score, best);
            let smallest_best = pool.iter().filter(|m| match_score(m, &model, d, &w) == best).map(|m| &m.mentor_id).min().unwrap();
            prop_assert_eq!(&top.mentor_id, smallest_best);
        }
    }

    #[test]
    fn recommend_ignores_pool_order(pool in arb_pool(12), model in arb_model()) {
        let w = MatchWeights::default();
        let mut reversed = pool.clone();
        reversed.reverse();
        prop_assert_eq!(recommend(&model, &pool, 4, &w).unwrap(), recommend(&model, &reversed, 4, &w).unwrap());
    }

    #[test]
    fn adding_a_tag_never_lowers_a_score(pool in arb_pool(1), model in arb_model(), tag in proptest::sample::select(ExpertiseTag::ALL.to_vec())) {
        let w = MatchWeights::default();
        let before = &pool[0];
        let mut after = before.clone();
        after.expertise.insert(tag);
        for &d in Dimension::ALL {
            prop_assert!(match_score(&after, &model, d, &w) >= match_score(before, &model, d, &w));
        }
    }

    #[test]
    fn aggregates_are_bounded_and_order_free(
        ratings in proptest::collection::vec(proptest::collection::vec(1i32..=10, 21), 0..12),
        trim in any::<bool>(),
    ) {
        let criteria = CriteriaCatalog::default_catalog();
        let cfg = AggregationConfig { trim, ..Default::default() };
        let vref = VersionRef::new("v".into(), 1);
        let js = judgments_with(&ratings);
        let a = aggregate(&vref, &js, &criteria, &cfg).unwrap();
        for (i, def) in criteria.criteria.iter().enumerate() {
            let column: Vec<i32> = ratings.iter().map(|r| r[i]).collect();
            match a.criteria.get(&def.criterion_id) {
                None => prop_assert!(column.is_empty()),
                Some(agg) => {
                    let lo = f64::from(*column.iter().min().unwrap());
                    let hi = f64::from(*column.iter().max().unwrap());
                    prop_assert!(lo <= agg.aggregate && agg.aggregate <= hi);
                    prop_assert!(agg.dispersion >= 0.0);
                }
            }
        }
        let mut reversed = js.clone();
        reversed.reverse();
        let b = aggregate(&vref, &reversed, &criteria, &cfg).unwrap();
        prop_assert_eq!(canonical::to_string(&a).unwrap(), canonical::to_string(&b).unwrap());
    }

    #[test]
    fn trimmed_mean_matches_sort_and_slice(column in proptest::collection::vec(1i32..=10, 1..30)) {
        let mut sorted = column.clone();
        sorted.sort_unstable();
        let n = sorted.len();
        let t = if n >= 5 { std::cmp::max(1, n / 10) } else { 0 };
        let kept = &sorted[t..n - t];
        let expected = kept.iter().map(|&x| f64::from(x)).sum::<f64>() / kept.len() as f64;
        let values: Vec<f64> = column.iter().map(|&x| f64::from(x)).collect();
        let got = hidss_core::feedback::robust_mean(&values, true).unwrap();
        prop_assert!((got - expected).abs() < 1e-12);
    }
}

#[test]
fn seven_judges_match_independent_recomputation() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let ratings: Vec<Vec<i32>> = (0..7).map(|_| (0..21).map(|_| rng.random_range(1..=10)).collect()).collect();
    let criteria = CriteriaCatalog::default_catalog();
    let a = aggregate(&VersionRef::new("v".into(), 1), &judgments_with(&ratings), &criteria, &AggregationConfig::default())
        .unwrap();
    for (i, def) in criteria.criteria.iter().enumerate() {
        let mut col: Vec<i32> = ratings.iter().map(|r| r[i]).collect();
        col.sort_unstable();
        // n = 7 trims one from each end
        let kept = &col[1..6];
        let mean = kept.iter().sum::<i32>() as f64 / 5.0;
        assert!((a.criteria[&def.criterion_id].aggregate - mean).abs() < 1e-12);
    }
}
