//! Scoring of mention discovery, linking and clustering.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::corpus::{GoldLink, Language, LinkTarget, Mention, MentionKey};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScore {
    /// Scores from a matched count; empty denominators give 0.
    pub fn from_counts(system_correct: f64, system_total: usize, gold_correct: f64, gold_total: usize) -> Self {
        let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
        let precision = ratio(system_correct, system_total);
        let recall = ratio(gold_correct, gold_total);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrfScore { precision, recall, f1 }
    }
}

/// Exact match on document, span, type and kind.
pub fn discovery_prf(system: &[Mention], gold: &[Mention]) -> PrfScore {
    let s: BTreeSet<MentionKey> = system.iter().map(Mention::key).collect();
    let g: BTreeSet<MentionKey> = gold.iter().map(Mention::key).collect();
    let correct = s.intersection(&g).count() as f64;
    PrfScore::from_counts(correct, s.len(), correct, g.len())
}

fn same_link(a: &LinkTarget, b: &LinkTarget) -> bool {
    match (a, b) {
        (LinkTarget::KbId(x), LinkTarget::KbId(y)) => x == y,
        (LinkTarget::NilCluster(_), LinkTarget::NilCluster(_)) => true,
        _ => false,
    }
}

/// A system link is correct when a gold link has the same document and span
/// and either the same KB id or NIL on both sides.
pub fn strong_all_match(system: &[GoldLink], gold: &[GoldLink]) -> PrfScore {
    let mut gold_by_span: HashMap<(String, usize, usize), &LinkTarget> = HashMap::new();
    for g in gold {
        gold_by_span.entry(g.mention.span_key()).or_insert(&g.target);
    }
    let mut seen = BTreeSet::new();
    let system: Vec<&GoldLink> = system.iter().filter(|s| seen.insert(s.mention.span_key())).collect();
    let correct = system
        .iter()
        .filter(|s| {
            gold_by_span
                .get(&s.mention.span_key())
                .is_some_and(|t| same_link(t, &s.target))
        })
        .count() as f64;
    PrfScore::from_counts(correct, system.len(), correct, gold_by_span.len())
}

/// Maximum-weight one-to-one assignment between the rows and columns of a
/// rectangular matrix. Returns `(row, col)` pairs and the total weight.
pub fn hungarian(weights: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (Vec::new(), 0.0);
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let w = |i: usize, j: usize| if transpose { weights[j][i] } else { weights[i][j] };
    let top = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| w(i, j))
        .fold(f64::NEG_INFINITY, f64::max);
    let cost = |i: usize, j: usize| top - w(i, j);

    // Shortest augmenting paths with potentials; 1-based with 0 as sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| {
            if transpose {
                (j - 1, p[j] - 1)
            } else {
                (p[j] - 1, j - 1)
            }
        })
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| weights[i][j]).sum();
    (pairs, total)
}

struct Cluster {
    target: LinkTarget,
    keys: BTreeSet<MentionKey>,
}

fn clusters(links: &[GoldLink]) -> Vec<Cluster> {
    let mut by_target: BTreeMap<&LinkTarget, BTreeSet<MentionKey>> = BTreeMap::new();
    for l in links {
        by_target.entry(&l.target).or_default().insert(l.mention.key());
    }
    by_target
        .into_iter()
        .map(|(t, keys)| Cluster {
            target: t.clone(),
            keys,
        })
        .collect()
}

/// Overlap of two clusters counted only when they agree on NIL versus KB
/// and, for KB clusters, on the id.
pub fn cluster_similarity(
    a_target: &LinkTarget,
    a: &BTreeSet<MentionKey>,
    b_target: &LinkTarget,
    b: &BTreeSet<MentionKey>,
) -> f64 {
    if same_link(a_target, b_target) {
        a.intersection(b).count() as f64
    } else {
        0.0
    }
}

/// Clusters are the mentions sharing a link target; system and gold
/// clusters are aligned one-to-one to maximize total agreeing overlap.
pub fn typed_mention_ceaf_plus(system: &[GoldLink], gold: &[GoldLink]) -> PrfScore {
    let s = clusters(system);
    let g = clusters(gold);
    let matrix: Vec<Vec<f64>> = g
        .iter()
        .map(|gc| {
            s.iter()
                .map(|sc| cluster_similarity(&gc.target, &gc.keys, &sc.target, &sc.keys))
                .collect()
        })
        .collect();
    let (_, total) = hungarian(&matrix);
    let system_total: usize = s.iter().map(|c| c.keys.len()).sum();
    let gold_total: usize = g.iter().map(|c| c.keys.len()).sum();
    PrfScore::from_counts(total, system_total, total, gold_total)
}

/// Discovery, linking and clustering scores per language and over all
/// languages, as tab-separated rows `metric, language, P, R, F`. Languages
/// without mentions on either side are left out.
pub fn report(system: &[GoldLink], gold: &[GoldLink], language_of: &dyn Fn(&str) -> Option<Language>) -> String {
    let mut out = String::from("metric\tlanguage\tP\tR\tF\n");
    let mut slices: Vec<(String, Vec<GoldLink>, Vec<GoldLink>)> = Vec::new();
    for lang in [Language::Cmn, Language::Eng, Language::Spa] {
        let pick = |links: &[GoldLink]| -> Vec<GoldLink> {
            links
                .iter()
                .filter(|l| language_of(&l.mention.doc_id) == Some(lang))
                .cloned()
                .collect()
        };
        let (s, g) = (pick(system), pick(gold));
        if !s.is_empty() || !g.is_empty() {
            slices.push((lang.to_string(), s, g));
        }
    }
    slices.push(("ALL".into(), system.to_vec(), gold.to_vec()));
    type Metric = fn(&[GoldLink], &[GoldLink]) -> PrfScore;
    let metrics: [(&str, Metric); 3] = [
        ("discovery", |s, g| discovery_prf(&mentions_of(s), &mentions_of(g))),
        ("strong_all_match", strong_all_match),
        ("typed_mention_ceaf_plus", typed_mention_ceaf_plus),
    ];
    for (name, metric) in metrics {
        for (lang, s, g) in &slices {
            let p = metric(s, g);
            let _ = writeln!(out, "{name}\t{lang}\t{:.3}\t{:.3}\t{:.3}", p.precision, p.recall, p.f1);
        }
    }
    out
}

fn mentions_of(links: &[GoldLink]) -> Vec<Mention> {
    links.iter().map(|l| l.mention.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityType, MentionKind};

    fn link(doc: &str, start: usize, target: &str) -> GoldLink {
        GoldLink {
            mention: Mention {
                doc_id: doc.into(),
                char_start: start,
                char_end: start + 3,
                surface: "abc".into(),
                entity_type: EntityType::Per,
                kind: MentionKind::Nam,
                confidence: 1.0,
            },
            target: LinkTarget::parse(target),
        }
    }

    #[test]
    fn prf_arithmetic() {
        let p = PrfScore::from_counts(1.0, 2, 1.0, 4);
        assert_eq!((p.precision, p.recall), (0.5, 0.25));
        assert!((p.f1 - 1.0 / 3.0).abs() < 1e-12);
        let z = PrfScore::from_counts(0.0, 0, 0.0, 3);
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn linking_conventions() {
        let gold = vec![link("d", 0, "m.1"), link("d", 10, "NIL0001")];
        assert_eq!(strong_all_match(&gold, &gold).f1, 1.0);
        let sys = vec![link("d", 0, "m.2"), link("d", 10, "NIL0042")];
        let s = strong_all_match(&sys, &gold);
        assert_eq!((s.precision, s.recall), (0.5, 0.5));
    }

    #[test]
    fn hungarian_small_cases() {
        let (pairs, total) = hungarian(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(total, 2.0);
        assert_eq!(hungarian(&[vec![5.0]]).1, 5.0);
        let (pairs, total) = hungarian(&[vec![1.0], vec![3.0], vec![2.0]]);
        assert_eq!((pairs, total), (vec![(1, 0)], 3.0));
        assert_eq!(hungarian(&[]).1, 0.0);
    }

    #[test]
    fn ceaf_plus_requires_agreeing_links() {
        let gold = vec![link("d", 0, "m.1"), link("d", 5, "m.1"), link("d", 10, "NIL0001")];
        assert_eq!(typed_mention_ceaf_plus(&gold, &gold).f1, 1.0);
        let wrong = vec![link("d", 0, "m.9"), link("d", 5, "m.9"), link("d", 10, "m.8")];
        assert_eq!(typed_mention_ceaf_plus(&wrong, &gold).f1, 0.0);
        let renamed = vec![link("d", 0, "m.1"), link("d", 5, "m.1"), link("d", 10, "NIL0077")];
        assert_eq!(typed_mention_ceaf_plus(&renamed, &gold).f1, 1.0);
    }

    #[test]
    fn report_rows() {
        let gold = vec![link("eng1", 0, "m.1"), link("cmn1", 0, "NIL0001")];
        let lang = |d: &str| {
            Some(if d.starts_with('e') {
                Language::Eng
            } else {
                Language::Cmn
            })
        };
        let r = report(&gold, &gold, &lang);
        let lines: Vec<&str> = r.lines().collect();
        assert_eq!(lines[0], "metric\tlanguage\tP\tR\tF");
        assert_eq!(lines.len(), 1 + 3 * 3);
        assert!(lines[1..].iter().all(|l| l.ends_with("1.000\t1.000\t1.000")));
        assert!(r.contains("discovery\tCMN\t"));
    }
}
