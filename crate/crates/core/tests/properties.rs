mod common;

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use common::{brute_force_assignment, brute_force_ceaf_plus, random_labeling};
use edl_core::codec::{linearize, parse_rendered, parse_symbols, render, repair, Symbol};
use edl_core::corpus::{
    format_submission, parse_gold, Category, Document, EntityType, GoldLink, Language, LinkTarget, Mention, MentionKind,
};
use edl_core::eval::{hungarian, typed_mention_ceaf_plus};
use edl_core::kb::{hot_bin, KbIndex};
use edl_core::link::{candidates_for_queries, word_edit_distance, CandidateSettings, DocumentContext, QueryList};
use edl_core::neural::seeded_rng;
use edl_core::nil::{assign_cluster_ids, cluster_nils};
use edl_core::synth;
use proptest::prelude::*;

fn index() -> &'static KbIndex {
    static INDEX: OnceLock<KbIndex> = OnceLock::new();
    INDEX.get_or_init(|| KbIndex::build(synth::kb(synth::BUNDLE_SEED), synth::aux_tables()).unwrap())
}

/// Every alias, redirect and disambiguation title in the bundled KB.
fn kb_names() -> &'static Vec<String> {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let set: BTreeSet<String> = index().entities().iter().flat_map(|e| e.names().cloned()).collect();
        set.into_iter().collect()
    })
}

const WORDS: [&str; 10] = [
    "george", "bush", "paris", "texas", "united", "states", "new", "york", "city", "river",
];

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 0..5).prop_map(|w| w.join(" "))
}

fn entity_type() -> impl Strategy<Value = EntityType> {
    prop::sample::select(EntityType::ALL)
}

fn kind() -> impl Strategy<Value = MentionKind> {
    prop::sample::select(MentionKind::ALL)
}

fn mention() -> impl Strategy<Value = Mention> {
    (
        prop::sample::select(&["d1", "d2", "d3"][..]),
        0usize..40,
        1usize..6,
        prop::sample::select(&["Smith", "SMITH", "smith", "Jones", "president", "city"][..]),
        entity_type(),
        kind(),
    )
        .prop_map(|(doc, start, len, surface, entity_type, kind)| Mention {
            doc_id: doc.into(),
            char_start: start,
            char_end: start + len,
            surface: surface.into(),
            entity_type,
            kind,
            confidence: 1.0,
        })
}

fn link() -> impl Strategy<Value = GoldLink> {
    let target = prop_oneof![
        (0u32..4).prop_map(|i| format!("m.{i}")),
        (1u32..4).prop_map(|i| format!("NIL{i:04}")),
    ];
    (mention(), target).prop_map(|(mention, t)| GoldLink {
        mention,
        target: LinkTarget::parse(&t),
    })
}

fn sort_key(l: &GoldLink) -> (String, usize, usize, EntityType, MentionKind, LinkTarget, String, u64) {
    let m = &l.mention;
    (
        m.doc_id.clone(),
        m.char_start,
        m.char_end,
        m.entity_type,
        m.kind,
        l.target.clone(),
        m.surface.clone(),
        m.confidence.to_bits(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn linearization_round_trips(n in 1usize..16, seed in any::<u64>()) {
        let labeling = random_labeling(&mut seeded_rng(seed), n);
        let symbols = linearize(n, &labeling).unwrap();
        prop_assert_eq!(parse_symbols(n, &symbols).unwrap(), labeling);
        prop_assert_eq!(parse_rendered(&render(&symbols)).unwrap(), symbols);
    }

    #[test]
    fn repair_is_idempotent_and_parses(ids in prop::collection::vec(0usize..Symbol::ALPHABET, 0..40)) {
        let symbols: Vec<Symbol> = ids.into_iter().map(Symbol::from_id).collect();
        let fixed = repair(&symbols);
        prop_assert_eq!(repair(&fixed), fixed.clone());
        let n = fixed.iter().filter(|s| **s == Symbol::Placeholder).count();
        prop_assert!(parse_symbols(n, &fixed).is_ok());
    }

    #[test]
    fn submission_round_trips(
        links in prop::collection::vec(
            (link(), "[A-Za-z][A-Za-z ]{0,8}", 0.0f64..=1.0).prop_map(|(mut l, s, c)| {
                l.mention.surface = s;
                l.mention.confidence = c;
                l
            }),
            0..12,
        )
    ) {
        let text = format_submission(&links, "sys");
        let parsed = parse_gold(&text).unwrap();
        prop_assert_eq!(format_submission(&parsed, "sys"), text);
        let mut a: Vec<_> = links.iter().map(sort_key).collect();
        let mut b: Vec<_> = parsed.iter().map(sort_key).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn word_edit_distance_is_a_metric(a in phrase(), b in phrase(), c in phrase()) {
        let d = word_edit_distance;
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert_eq!(d(&a, &b) == 0, a == b);
    }

    #[test]
    fn hot_bin_is_monotone(a in 0u64..1_000_000_000, b in 0u64..1_000_000_000) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(hot_bin(lo) <= hot_bin(hi));
        prop_assert!(hot_bin(hi) <= 9);
    }

    #[test]
    fn description_cosine_is_bounded(text in prop::collection::vec(prop::sample::select(&WORDS[..]), 0..30)) {
        for (_, sim) in index().document_similarities(&text.join(" ")) {
            prop_assert!((0.0..=1.0).contains(&sim), "{sim}");
        }
    }

    #[test]
    fn exact_hits_are_fuzzy_hits(i in any::<prop::sample::Index>(), upper in any::<bool>()) {
        let name = i.get(kb_names());
        let query = if upper { name.to_uppercase() } else { name.clone() };
        let exact = index().exact_lookup(&query);
        prop_assert!(!exact.is_empty());
        let fuzzy: BTreeSet<String> = index().fuzzy_search(&query, usize::MAX).into_iter().map(|h| h.kb_id).collect();
        for id in exact {
            prop_assert!(fuzzy.contains(&id), "{query}: {id}");
        }
    }

    #[test]
    fn more_queries_only_displace_top_entries(
        base in prop::collection::vec(any::<prop::sample::Index>(), 1..4),
        extra in prop::collection::vec(any::<prop::sample::Index>(), 1..4),
        text in prop::collection::vec(prop::sample::select(&WORDS[..]), 0..12),
        top_n in 1usize..5,
    ) {
        let names = kb_names();
        let small: Vec<String> = base.iter().map(|i| i.get(names).clone()).collect();
        let large: Vec<String> = small.iter().cloned().chain(extra.iter().map(|i| i.get(names).clone())).collect();
        let doc = Document {
            doc_id: "d".into(),
            text: text.join(" "),
            category: Category::NewsReport,
            language: Language::Eng,
        };
        let settings = CandidateSettings { top_n, ..CandidateSettings::for_language(Language::Eng) };
        let ctx = DocumentContext::new(&doc, &[], index(), &settings);
        let a = candidates_for_queries(QueryList::new(small), &ctx, index(), &settings);
        let b = candidates_for_queries(QueryList::new(large), &ctx, index(), &settings);
        let ids = |v: &[(String, f64)]| v.iter().map(|(id, _)| id.clone()).collect::<BTreeSet<_>>();
        prop_assert!(ids(&a.result1).is_subset(&ids(&b.result1)));
        prop_assert!(a.overlap.iter().all(|id| b.overlap.contains(id)));
        prop_assert!(a.titles.iter().all(|id| b.titles.contains(id)));
        for c in &a.candidates {
            if !b.candidates.contains(c) {
                let id = c.kb_id().unwrap();
                prop_assert!(a.top.iter().any(|t| t == id));
                prop_assert_eq!(b.top.len(), top_n);
            }
        }
    }

    #[test]
    fn nil_clusters_partition_the_nil_mentions(
        all in prop::collection::vec(mention(), 0..16),
        nil_mask in prop::collection::vec(any::<bool>(), 16),
    ) {
        let mut seen = BTreeSet::new();
        let all: Vec<Mention> = all.into_iter().filter(|m| seen.insert(m.key())).collect();
        let nils: Vec<Mention> = all.iter().zip(&nil_mask).filter(|(_, &n)| n).map(|(m, _)| m.clone()).collect();
        let clusters = assign_cluster_ids(cluster_nils(&nils, &all));
        let mut owner = HashMap::new();
        for c in &clusters {
            prop_assert!(!c.members.is_empty());
            prop_assert!(c.cluster_id.len() >= 7 && c.cluster_id.starts_with("NIL"));
            for m in &c.members {
                prop_assert!(owner.insert(m.key(), c.cluster_id.clone()).is_none());
            }
        }
        prop_assert_eq!(owner.len(), nils.len());
        let ids: BTreeSet<_> = clusters.iter().map(|c| &c.cluster_id).collect();
        prop_assert_eq!(ids.len(), clusters.len());
        let named: Vec<&Mention> = nils.iter().filter(|m| m.kind == MentionKind::Nam).collect();
        for a in &named {
            for b in &named {
                let same = a.surface.to_lowercase() == b.surface.to_lowercase();
                prop_assert_eq!(owner[&a.key()] == owner[&b.key()], same);
            }
        }
    }

    #[test]
    fn hungarian_matches_brute_force(
        rows in 1usize..7,
        cols in 1usize..7,
        cells in prop::collection::vec(0u32..20, 36),
    ) {
        let m: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| f64::from(cells[i * 6 + j])).collect()).collect();
        let (pairs, total) = hungarian(&m);
        prop_assert_eq!(pairs.len(), rows.min(cols));
        prop_assert_eq!(total, brute_force_assignment(&m));
        let used: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(used.len(), pairs.len());
    }

    #[test]
    fn ceaf_plus_ignores_nil_labels_and_matches_brute_force(
        gold in prop::collection::vec(link(), 0..10),
        system in prop::collection::vec(link(), 0..10),
        shift in 1u32..50,
    ) {
        let score = typed_mention_ceaf_plus(&system, &gold);
        let (p, r) = brute_force_ceaf_plus(&system, &gold);
        prop_assert!((score.precision - p).abs() < 1e-12 && (score.recall - r).abs() < 1e-12);
        let renamed: Vec<GoldLink> = system
            .iter()
            .map(|l| {
                let mut l = l.clone();
                if let LinkTarget::NilCluster(id) = &l.target {
                    let n: u32 = id[3..].parse().unwrap();
                    l.target = LinkTarget::NilCluster(format!("NIL{:04}", n + shift));
                }
                l
            })
            .collect();
        prop_assert_eq!(typed_mention_ceaf_plus(&renamed, &gold), score);
    }
}
