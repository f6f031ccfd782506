//! Ranking metrics: hits@1 (overall and per question class), mean average
//! precision, and mean reciprocal rank, plus the per-class breakdown report.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::datagen::QuestionClass;

/// Percent of examples whose rank-1 prediction lies in the gold set.
/// Empty rankings count as misses.
pub fn hits_at_1(rankings: &[Vec<u32>], golds: &[Vec<u32>]) -> f64 {
    assert_eq!(rankings.len(), golds.len());
    if rankings.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    for (ranking, gold) in rankings.iter().zip(golds.iter()) {
        assert!(!gold.is_empty(), "gold set must be nonempty");
        if let Some(top) = ranking.first() {
            if gold.contains(top) {
                hits += 1;
            }
        }
    }
    100.0 * hits as f64 / rankings.len() as f64
}

/// Standard mean average precision and mean reciprocal rank over complete
/// rankings; every gold id is treated as relevant.
pub fn map_mrr(rankings: &[Vec<u32>], golds: &[Vec<u32>]) -> (f64, f64) {
    assert_eq!(rankings.len(), golds.len());
    if rankings.is_empty() {
        return (0.0, 0.0);
    }
    let mut ap_sum = 0.0;
    let mut rr_sum = 0.0;
    for (ranking, gold) in rankings.iter().zip(golds.iter()) {
        assert!(!gold.is_empty(), "gold set must be nonempty");
        let mut found = 0usize;
        let mut ap = 0.0;
        let mut first: Option<usize> = None;
        for (pos, id) in ranking.iter().enumerate() {
            if gold.contains(id) {
                found += 1;
                ap += found as f64 / (pos + 1) as f64;
                if first.is_none() {
                    first = Some(pos + 1);
                }
            }
        }
        ap_sum += ap / gold.len() as f64;
        if let Some(rank) = first {
            rr_sum += 1.0 / rank as f64;
        }
    }
    (ap_sum / rankings.len() as f64, rr_sum / rankings.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TypeBreakdown {
    pub hits1: f64,
    pub n: usize,
}

/// Metrics over one evaluation run, broken down by question class.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub overall_hits1: f64,
    pub per_type: BTreeMap<String, TypeBreakdown>,
    pub map: f64,
    pub mrr: f64,
    pub n: usize,
    /// Examples whose prediction list was empty (counted as misses).
    pub empty_predictions: usize,
    /// Examples whose question-type label was not recognized (bucketed
    /// under "other").
    pub unknown_qtypes: usize,
    /// Corpus manifest hash + checkpoint hash this report derives from.
    pub fingerprint: String,
}

/// Aggregate rankings into an [`EvalReport`]. Unrecognized question-type
/// labels are bucketed under "other".
pub fn breakdown_report(
    rankings: &[Vec<u32>],
    golds: &[Vec<u32>],
    qtypes: &[String],
    fingerprint: String,
) -> EvalReport {
    assert_eq!(rankings.len(), golds.len());
    assert_eq!(rankings.len(), qtypes.len());
    let overall_hits1 = hits_at_1(rankings, golds);
    let (map, mrr) = map_mrr(rankings, golds);
    let empty_predictions = rankings.iter().filter(|r| r.is_empty()).count();
    let mut unknown_qtypes = 0usize;
    let mut buckets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, label) in qtypes.iter().enumerate() {
        let key = if QuestionClass::from_label(label).is_some() {
            label.clone()
        } else {
            unknown_qtypes += 1;
            "other".to_string()
        };
        buckets.entry(key).or_default().push(i);
    }
    let mut per_type = BTreeMap::new();
    for (label, idxs) in buckets {
        let r: Vec<Vec<u32>> = idxs.iter().map(|&i| rankings[i].clone()).collect();
        let g: Vec<Vec<u32>> = idxs.iter().map(|&i| golds[i].clone()).collect();
        per_type.insert(label, TypeBreakdown { hits1: hits_at_1(&r, &g), n: idxs.len() });
    }
    EvalReport {
        overall_hits1,
        per_type,
        map,
        mrr,
        n: rankings.len(),
        empty_predictions,
        unknown_qtypes,
        fingerprint,
    }
}

impl EvalReport {
    /// Aligned text table, one row per question class.
    pub fn render_text(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>8} {:>8}", "question type", "hits@1", "n");
        let _ = writeln!(out, "{}", "-".repeat(42));
        for (label, row) in &self.per_type {
            let _ = writeln!(out, "{:<24} {:>8.1} {:>8}", label, row.hits1, row.n);
        }
        let _ = writeln!(out, "{}", "-".repeat(42));
        let _ = writeln!(out, "{:<24} {:>8.1} {:>8}", "overall", self.overall_hits1, self.n);
        let _ = writeln!(out, "MAP {:.4}  MRR {:.4}", self.map, self.mrr);
        if self.empty_predictions > 0 {
            let _ = writeln!(out, "warning: {} empty prediction lists", self.empty_predictions);
        }
        if self.unknown_qtypes > 0 {
            let _ = writeln!(out, "warning: {} unknown question types", self.unknown_qtypes);
        }
        let _ = writeln!(out, "fingerprint {}", self.fingerprint);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hits_trivials() {
        let rankings = vec![vec![1, 2], vec![3, 0]];
        let golds = vec![vec![1], vec![3]];
        assert_eq!(hits_at_1(&rankings, &golds), 100.0);
        let golds_miss = vec![vec![2], vec![0]];
        assert_eq!(hits_at_1(&rankings, &golds_miss), 0.0);
    }

    #[test]
    fn hits_mixed_batch_matches_direct_count() {
        // 10 examples, 7 hits by construction.
        let mut rankings = Vec::new();
        let mut golds = Vec::new();
        for i in 0..10u32 {
            rankings.push(vec![i, 100 + i]);
            golds.push(if i < 7 { vec![i] } else { vec![100 + i] });
        }
        assert_eq!(hits_at_1(&rankings, &golds), 70.0);
    }

    #[test]
    fn empty_prediction_is_a_miss() {
        let rankings = vec![vec![], vec![5]];
        let golds = vec![vec![1], vec![5]];
        assert_eq!(hits_at_1(&rankings, &golds), 50.0);
    }

    #[test]
    fn map_mrr_trivials() {
        let rankings = vec![vec![1, 2, 3], vec![4, 5, 6]];
        let golds = vec![vec![1], vec![4]];
        assert_eq!(map_mrr(&rankings, &golds), (1.0, 1.0));
        let golds2 = vec![vec![2], vec![5]];
        let (map, mrr) = map_mrr(&rankings, &golds2);
        assert!((map - 0.5).abs() < 1e-15);
        assert!((mrr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn map_mrr_matches_textbook_formulas() {
        use rand::Rng;
        let mut rng = crate::rng::substream(5, "metric-oracle");
        for _ in 0..200 {
            let c = rng.gen_range(2..10u32);
            let mut ranking: Vec<u32> = (0..c).collect();
            // Fisher-Yates with the test RNG.
            for i in (1..ranking.len()).rev() {
                let j = rng.gen_range(0..=i);
                ranking.swap(i, j);
            }
            let gold_n = rng.gen_range(1..=c.min(3)) as usize;
            let mut gold: Vec<u32> = ranking.clone();
            for i in (1..gold.len()).rev() {
                let j = rng.gen_range(0..=i);
                gold.swap(i, j);
            }
            gold.truncate(gold_n);
            gold.sort_unstable();
            let (map, mrr) = map_mrr(&[ranking.clone()], &[gold.clone()]);
            // Independent reimplementation, accumulating in reverse order.
            let positions: Vec<usize> = ranking
                .iter()
                .enumerate()
                .filter(|(_, id)| gold.contains(id))
                .map(|(p, _)| p + 1)
                .collect();
            let mut ap_terms: Vec<f64> = positions
                .iter()
                .enumerate()
                .map(|(k, &p)| (k + 1) as f64 / p as f64)
                .collect();
            ap_terms.reverse();
            let expect_map: f64 = ap_terms.iter().sum::<f64>() / gold.len() as f64;
            let expect_mrr = 1.0 / *positions.first().unwrap() as f64;
            assert!((map - expect_map).abs() < 1e-12);
            assert!((mrr - expect_mrr).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_are_order_invariant() {
        let rankings = vec![vec![1, 2], vec![3, 4], vec![5, 6]];
        let golds = vec![vec![2], vec![3], vec![6]];
        let base = (hits_at_1(&rankings, &golds), map_mrr(&rankings, &golds));
        let perm = [2usize, 0, 1];
        let r2: Vec<Vec<u32>> = perm.iter().map(|&i| rankings[i].clone()).collect();
        let g2: Vec<Vec<u32>> = perm.iter().map(|&i| golds[i].clone()).collect();
        let swapped = (hits_at_1(&r2, &g2), map_mrr(&r2, &g2));
        assert_eq!(base.0, swapped.0);
        assert!((base.1 .0 - swapped.1 .0).abs() < 1e-15);
        assert!((base.1 .1 - swapped.1 .1).abs() < 1e-15);
    }

    #[test]
    fn breakdown_single_type_equals_overall() {
        let rankings = vec![vec![1], vec![2]];
        let golds = vec![vec![1], vec![3]];
        let qtypes = vec!["movie_to_director".to_string(), "movie_to_director".to_string()];
        let report = breakdown_report(&rankings, &golds, &qtypes, "fp".into());
        assert_eq!(report.per_type.len(), 1);
        let row = &report.per_type["movie_to_director"];
        assert_eq!(row.hits1, report.overall_hits1);
        assert_eq!(row.n, 2);
    }

    #[test]
    fn breakdown_rows_recompose_overall() {
        let rankings = vec![vec![1], vec![2], vec![3], vec![9]];
        let golds = vec![vec![1], vec![2], vec![0], vec![9]];
        let qtypes = vec![
            "movie_to_year".to_string(),
            "movie_to_year".to_string(),
            "actor_to_movie".to_string(),
            "mystery_type".to_string(),
        ];
        let report = breakdown_report(&rankings, &golds, &qtypes, "fp".into());
        assert_eq!(report.unknown_qtypes, 1);
        assert!(report.per_type.contains_key("other"));
        let weighted: f64 = report
            .per_type
            .values()
            .map(|row| row.hits1 * row.n as f64)
            .sum::<f64>()
            / report.n as f64;
        assert!((weighted - report.overall_hits1).abs() < 1e-12);
    }

    #[test]
    fn hits_equals_censored_mrr_for_singleton_gold() {
        let rankings = vec![vec![1, 2, 3], vec![4, 5, 6], vec![8, 7, 9]];
        let golds = vec![vec![1], vec![5], vec![9]];
        let h = hits_at_1(&rankings, &golds);
        // MRR censored at rank 1: count 1/1 only when the first item is gold.
        let censored: f64 = rankings
            .iter()
            .zip(golds.iter())
            .map(|(r, g)| if g.contains(&r[0]) { 1.0 } else { 0.0 })
            .sum::<f64>()
            / rankings.len() as f64;
        assert!((h - censored * 100.0).abs() < 1e-12);
    }
}
