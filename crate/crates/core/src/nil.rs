//! Grouping of NIL mentions into clusters with corpus-level ids.

use std::collections::{BTreeMap, HashSet};

use crate::corpus::{Mention, MentionKey, MentionKind};

#[derive(Clone, Debug, PartialEq)]
pub struct NilCluster {
    pub cluster_id: String,
    /// Sorted by document and offsets.
    pub members: Vec<Mention>,
}

fn position(m: &Mention) -> (String, usize, usize) {
    (m.doc_id.clone(), m.char_start, m.char_end)
}

/// Named NIL mentions are grouped by lowercased surface over the whole
/// corpus. A nominal NIL mention joins the group of the nearest named
/// mention of its type in the same document when that mention is itself
/// NIL; otherwise it stays alone.
pub fn cluster_nils(nil_mentions: &[Mention], all_mentions: &[Mention]) -> Vec<Vec<Mention>> {
    let nil_keys: HashSet<MentionKey> = nil_mentions.iter().map(Mention::key).collect();
    let mut by_surface: BTreeMap<String, Vec<Mention>> = BTreeMap::new();
    for m in nil_mentions.iter().filter(|m| m.kind == MentionKind::Nam) {
        by_surface.entry(m.surface.to_lowercase()).or_default().push(m.clone());
    }
    let mut singletons = Vec::new();
    for m in nil_mentions.iter().filter(|m| m.kind == MentionKind::Nom) {
        let nearest = all_mentions
            .iter()
            .filter(|n| n.doc_id == m.doc_id && n.kind == MentionKind::Nam && n.entity_type == m.entity_type)
            .min_by_key(|n| (n.midpoint2().abs_diff(m.midpoint2()), n.char_start, n.char_end));
        match nearest {
            Some(n) if nil_keys.contains(&n.key()) => by_surface
                .get_mut(&n.surface.to_lowercase())
                .expect("named NIL mentions are grouped")
                .push(m.clone()),
            _ => singletons.push(vec![m.clone()]),
        }
    }
    let mut clusters: Vec<Vec<Mention>> = by_surface.into_values().chain(singletons).collect();
    for c in &mut clusters {
        c.sort_by_key(position);
        c.dedup_by_key(|m| m.key());
    }
    clusters
}

/// Numbers clusters `NIL0001`, `NIL0002`, … in order of their first member.
pub fn assign_cluster_ids(clusters: Vec<Vec<Mention>>) -> Vec<NilCluster> {
    let mut clusters: Vec<Vec<Mention>> = clusters
        .into_iter()
        .filter(|c| !c.is_empty())
        .map(|mut c| {
            c.sort_by_key(position);
            c
        })
        .collect();
    clusters.sort_by_key(|c| position(&c[0]));
    clusters
        .into_iter()
        .enumerate()
        .map(|(i, members)| NilCluster {
            cluster_id: format!("NIL{:04}", i + 1),
            members,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntityType;

    fn m(doc: &str, start: usize, surface: &str, kind: MentionKind) -> Mention {
        Mention {
            doc_id: doc.into(),
            char_start: start,
            char_end: start + surface.len(),
            surface: surface.into(),
            entity_type: EntityType::Per,
            kind,
            confidence: 1.0,
        }
    }

    #[test]
    fn named_mentions_fold_case_across_documents() {
        let nils = vec![
            m("a", 0, "Smith", MentionKind::Nam),
            m("b", 5, "SMITH", MentionKind::Nam),
        ];
        let clusters = assign_cluster_ids(cluster_nils(&nils, &nils));
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].cluster_id, "NIL0001");
        assert_eq!(clusters[0].members.len(), 2);
    }

    #[test]
    fn nominal_joins_nearest_nil_name() {
        let smith = m("a", 0, "John Smith", MentionKind::Nam);
        let pres = m("a", 15, "president", MentionKind::Nom);
        let clusters = cluster_nils(&[smith.clone(), pres.clone()], &[smith, pres]);
        assert_eq!(clusters.len(), 1);
    }

    #[test]
    fn nominal_near_linked_name_is_alone() {
        let obama = m("a", 0, "Obama", MentionKind::Nam);
        let pres = m("a", 10, "president", MentionKind::Nom);
        let other = m("b", 0, "Jones", MentionKind::Nam);
        let nils = vec![pres.clone(), other.clone()];
        let clusters = assign_cluster_ids(cluster_nils(&nils, &[obama, pres, other]));
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].members[0].surface, "president");
        assert_eq!(clusters[1].cluster_id, "NIL0002");
    }

    #[test]
    fn empty_input() {
        assert!(cluster_nils(&[], &[]).is_empty());
        assert!(assign_cluster_ids(Vec::new()).is_empty());
    }
}
