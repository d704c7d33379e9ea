use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};

use super::ExtractError;
use crate::domain::{LineageEdge, LineageGraph, NodeTimes};
use crate::indexer::{cosine, Index};

/// Documents whose doc-level similarity to `seed` is at least `tau`, linked
/// from earlier to later publication for every pair that is itself at least
/// `tau` apart. Publication ties are ordered by document id.
pub fn trace_lineage(index: &Index, seed: &str, tau: f64) -> Result<LineageGraph, ExtractError> {
    let seed_vec = index
        .document_embedding(seed)
        .ok_or_else(|| ExtractError::SeedNotFound(seed.to_string()))?;

    let mut members: Vec<(DateTime<Utc>, &str, &[f64])> = Vec::new();
    for doc in index.documents() {
        let Some(v) = index.document_embedding(&doc.id) else { continue };
        if doc.id == seed || cosine(seed_vec, v) >= tau {
            members.push((doc.published_at, &doc.id, v));
        }
    }
    members.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let mut edges = Vec::new();
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            let similarity = cosine(a.2, b.2);
            if similarity >= tau {
                edges.push(LineageEdge { from: a.1.to_string(), to: b.1.to_string(), similarity });
            }
        }
    }

    let nodes: BTreeSet<String> = members.iter().map(|m| m.1.to_string()).collect();
    let node_times: BTreeMap<String, NodeTimes> = members
        .iter()
        .filter_map(|m| index.document(m.1))
        .map(|d| (d.id.clone(), NodeTimes { published_at: d.published_at, modified_at: d.modified_at }))
        .collect();
    Ok(LineageGraph {
        nodes,
        edges,
        origin_id: members[0].1.to_string(),
        node_times,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::doc;
    use super::*;
    use crate::indexer::IndexConfig;

    fn index(docs: &[(&str, &str, i64)]) -> Index {
        let mut index = Index::new(IndexConfig::default()).unwrap();
        for (id, body, t) in docs {
            index.add(doc(id, "x.org", body, *t)).unwrap();
        }
        index
    }

    #[test]
    fn single_document() {
        let ix = index(&[("a", "the moon landing was staged", 0), ("z", "unrelated kitchen recipes", 1)]);
        let g = trace_lineage(&ix, "a", 0.8).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.origin_id, "a");
        assert!(g.edges.is_empty());
    }

    #[test]
    fn chain_of_copies() {
        let body = "the moon landing was staged in a film studio by the agency";
        let ix = index(&[("c", body, 3), ("a", body, 1), ("b", body, 2)]);
        let g = trace_lineage(&ix, "c", 0.8).unwrap();
        assert_eq!(g.origin_id, "a");
        assert_eq!(g.edges.len(), 3);
        assert!(g.violations().is_empty());
        assert!(g.edges.iter().any(|e| e.from == "a" && e.to == "c"));
    }

    #[test]
    fn equal_times_break_by_id() {
        let body = "identical text in two places";
        let ix = index(&[("b", body, 0), ("a", body, 0)]);
        let g = trace_lineage(&ix, "b", 0.8).unwrap();
        assert_eq!(g.origin_id, "a");
        assert_eq!(g.edges[0].from, "a");
    }

    #[test]
    fn missing_seed() {
        let ix = index(&[("a", "text", 0)]);
        assert!(matches!(trace_lineage(&ix, "nope", 0.8), Err(ExtractError::SeedNotFound(_))));
    }

    #[test]
    fn seed_is_kept_at_tau_one() {
        let ix = index(&[("a", "some words here", 0), ("b", "some words there", 1)]);
        let g = trace_lineage(&ix, "b", 1.0).unwrap();
        assert!(g.nodes.contains("b"));
    }
}
