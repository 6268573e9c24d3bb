use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::corpus::{Mention, MentionKey};

/// Fuses two systems' mentions over the same documents.
///
/// Mentions with the same span, type and kind collapse into one carrying the
/// higher confidence. Of two crossing mentions only the higher-confidence one
/// survives; ties go to the longer span, then to `a`.
pub fn merge_systems(a: &[Mention], b: &[Mention]) -> Vec<Mention> {
    // key -> (mention, from_a)
    let mut unique: BTreeMap<MentionKey, (Mention, bool)> = BTreeMap::new();
    for (m, from_a) in a.iter().map(|m| (m, true)).chain(b.iter().map(|m| (m, false))) {
        match unique.get_mut(&m.key()) {
            Some((kept, _)) => {
                if m.confidence > kept.confidence {
                    kept.confidence = m.confidence;
                }
            }
            None => {
                unique.insert(m.key(), (m.clone(), from_a));
            }
        }
    }
    let mut ranked: Vec<(Mention, bool)> = unique.into_values().collect();
    ranked.sort_by(|(x, xa), (y, ya)| {
        y.confidence
            .partial_cmp(&x.confidence)
            .unwrap_or(Ordering::Equal)
            .then_with(|| y.len().cmp(&x.len()))
            .then_with(|| ya.cmp(xa))
            .then_with(|| x.key().cmp(&y.key()))
    });
    let mut kept: Vec<Mention> = Vec::with_capacity(ranked.len());
    for (m, _) in ranked {
        if !kept.iter().any(|k| k.crosses(&m)) {
            kept.push(m);
        }
    }
    kept.sort_by_key(|x| x.key());
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityType, MentionKind};

    fn m(start: usize, end: usize, ty: EntityType, conf: f64) -> Mention {
        Mention {
            doc_id: "d".into(),
            char_start: start,
            char_end: end,
            surface: String::new(),
            entity_type: ty,
            kind: MentionKind::Nam,
            confidence: conf,
        }
    }

    #[test]
    fn disjoint_union_and_idempotence() {
        let a = vec![m(0, 3, EntityType::Per, 0.5)];
        let b = vec![m(5, 8, EntityType::Org, 0.7)];
        assert_eq!(merge_systems(&a, &b).len(), 2);
        let both = merge_systems(&a, &b);
        assert_eq!(merge_systems(&both, &both), both);
    }

    #[test]
    fn duplicates_keep_max_confidence() {
        let a = vec![m(0, 3, EntityType::Per, 0.4)];
        let b = vec![m(0, 3, EntityType::Per, 0.8)];
        let out = merge_systems(&a, &b);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].confidence, 0.8);
    }

    #[test]
    fn crossing_pair_keeps_confident_one() {
        let a = vec![m(0, 5, EntityType::Per, 0.6)];
        let b = vec![m(3, 9, EntityType::Org, 0.9)];
        let out = merge_systems(&a, &b);
        assert_eq!(out, b);
    }

    #[test]
    fn crossing_tie_prefers_longer_then_first_system() {
        let a = vec![m(0, 5, EntityType::Per, 0.5)];
        let b = vec![m(3, 10, EntityType::Org, 0.5)];
        assert_eq!(merge_systems(&a, &b), b);
        let b = vec![m(3, 8, EntityType::Org, 0.5)];
        assert_eq!(merge_systems(&a, &b), a);
    }

    #[test]
    fn nested_mentions_survive() {
        let a = vec![m(0, 10, EntityType::Fac, 0.9)];
        let b = vec![m(0, 4, EntityType::Per, 0.3)];
        assert_eq!(merge_systems(&a, &b).len(), 2);
    }
}
