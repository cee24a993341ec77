//! Decision support: VIKOR ranking of candidate plans and removal of
//! near-duplicates.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mission::{OperatorProfile, RankingVariable};
use crate::plan::{EvaluationReport, PlanGenome};

pub const DEFAULT_V: f64 = 0.5;
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.1;

/// Class weights of [`genome_distance`]: assignment, order, GCS, sensor,
/// flight profile.
pub const DISTANCE_WEIGHTS: [f64; 5] = [8.0, 4.0, 2.0, 2.0, 1.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DssError {
    #[error("importance missing for {0}")]
    MissingImportance(&'static str),
    #[error("criteria matrix: {0}")]
    Dimension(String),
    #[error("genomes have different structure")]
    Structure,
}

/// Importance scores (1..5) normalised to sum 1, in
/// [`RankingVariable::ALL`] order.
pub fn weights_from_profile(p: &OperatorProfile) -> Result<[f64; 12], DssError> {
    let mut raw = [0.0; 12];
    for (i, v) in RankingVariable::ALL.into_iter().enumerate() {
        raw[i] = p.importance.get(&v).ok_or(DssError::MissingImportance(v.as_str()))?.score();
    }
    let total: f64 = raw.iter().sum();
    Ok(raw.map(|x| x / total))
}

/// Rows are solutions, columns criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaMatrix {
    pub rows: Vec<Vec<f64>>,
    /// Per column: true when larger is better.
    pub maximize: Vec<bool>,
    /// Per row: canonical identity used to break exact ties.
    pub keys: Vec<String>,
}

impl CriteriaMatrix {
    pub fn new(rows: Vec<Vec<f64>>, maximize: Vec<bool>, keys: Vec<String>) -> Result<Self, DssError> {
        if rows.is_empty() {
            return Err(DssError::Dimension("no rows".into()));
        }
        if keys.len() != rows.len() {
            return Err(DssError::Dimension(format!("{} keys for {} rows", keys.len(), rows.len())));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != maximize.len() {
                return Err(DssError::Dimension(format!(
                    "row {i} has {} columns, expected {}",
                    r.len(),
                    maximize.len()
                )));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(DssError::Dimension(format!("row {i} has a non-finite entry")));
            }
        }
        Ok(Self { rows, maximize, keys })
    }

    /// The twelve ranking variables of each report.
    pub fn from_reports(reports: &[&EvaluationReport], keys: Vec<String>) -> Result<Self, DssError> {
        let rows = reports.iter().map(|r| r.criteria_row().to_vec()).collect();
        let maximize = RankingVariable::ALL.iter().map(|v| v.maximized()).collect();
        Self::new(rows, maximize, keys)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.maximize.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedPlan {
    /// Row of the criteria matrix.
    pub index: usize,
    pub s: f64,
    pub r: f64,
    pub q: f64,
    /// 1-based.
    pub rank: usize,
    pub in_compromise_set: bool,
}

/// VIKOR ranking, best first.
pub fn vikor_rank(mat: &CriteriaMatrix, w: &[f64], v: f64) -> Result<Vec<RankedPlan>, DssError> {
    let (n, m) = (mat.n_rows(), mat.n_cols());
    if w.len() != m {
        return Err(DssError::Dimension(format!("{} weights for {m} columns", w.len())));
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(DssError::Dimension(format!("v = {v} outside [0, 1]")));
    }
    let mut best = vec![0.0; m];
    let mut worst = vec![0.0; m];
    for j in 0..m {
        let col = mat.rows.iter().map(|r| r[j]);
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        (best[j], worst[j]) = if mat.maximize[j] { (hi, lo) } else { (lo, hi) };
    }
    let mut s = vec![0.0; n];
    let mut r = vec![0.0; n];
    for (i, row) in mat.rows.iter().enumerate() {
        for j in 0..m {
            let d = if best[j] == worst[j] { 0.0 } else { w[j] * (row[j] - best[j]) / (worst[j] - best[j]) };
            s[i] += d;
            r[i] = f64::max(r[i], d);
        }
    }
    let span = |x: &[f64]| x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let (s_star, s_minus) = span(&s);
    let (r_star, r_minus) = span(&r);
    let q: Vec<f64> = (0..n)
        .map(|i| {
            let a = if s_minus == s_star { 0.0 } else { (s[i] - s_star) / (s_minus - s_star) };
            let b = if r_minus == r_star { 0.0 } else { (r[i] - r_star) / (r_minus - r_star) };
            v * a + (1.0 - v) * b
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        q[a].total_cmp(&q[b])
            .then(s[a].total_cmp(&s[b]))
            .then(r[a].total_cmp(&r[b]))
            .then_with(|| mat.keys[a].cmp(&mat.keys[b]))
            .then(a.cmp(&b))
    });

    let mut compromise = vec![false; n];
    let lead = order[0];
    compromise[lead] = true;
    if n > 1 {
        let dq = 1.0 / (n as f64 - 1.0);
        let advantage = q[order[1]] - q[lead] >= dq;
        let stable = s[lead] == s_star || r[lead] == r_star;
        if !advantage {
            for &i in &order[1..] {
                if q[i] - q[lead] < dq {
                    compromise[i] = true;
                } else {
                    break;
                }
            }
        } else if !stable {
            compromise[order[1]] = true;
        }
    }
    Ok(order
        .iter()
        .enumerate()
        .map(|(k, &i)| RankedPlan {
            index: i,
            s: s[i],
            r: r[i],
            q: q[i],
            rank: k + 1,
            in_compromise_set: compromise[i],
        })
        .collect())
}

/// Position of each task in the sequence of its lowest-numbered UAV.
fn positions(g: &PlanGenome) -> Vec<Option<(usize, usize)>> {
    let mut out = vec![None; g.n_tasks()];
    for u in 0..g.n_uavs() {
        let mut seq: Vec<usize> = (0..g.n_tasks()).filter(|&t| g.assignment[t].uavs().first() == Some(&u)).collect();
        seq.sort_by_key(|&t| g.rank[t]);
        for (k, t) in seq.into_iter().enumerate() {
            out[t] = Some((u, k));
        }
    }
    out
}

fn mismatch<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
}

/// Weighted share of differing genes, in [0, 1]. Order genes compare each
/// task's position within its vehicle's sequence; flight profiles cover task
/// legs and return legs.
pub fn genome_distance(a: &PlanGenome, b: &PlanGenome) -> Result<f64, DssError> {
    if a.n_tasks() != b.n_tasks() || a.n_uavs() != b.n_uavs() {
        return Err(DssError::Structure);
    }
    let legs = |g: &PlanGenome| g.profile.iter().chain(&g.return_profile).copied().collect::<Vec<_>>();
    let parts = [
        mismatch(&a.assignment, &b.assignment),
        mismatch(&positions(a), &positions(b)),
        mismatch(&a.gcs, &b.gcs),
        mismatch(&a.sensor, &b.sensor),
        mismatch(&legs(a), &legs(b)),
    ];
    let total: f64 = DISTANCE_WEIGHTS.iter().sum();
    Ok(parts.iter().zip(DISTANCE_WEIGHTS).map(|(p, w)| p * w).sum::<f64>() / total)
}

/// Keeps plans, in rank order, that are at least `threshold` away from every
/// plan already kept; ranks are renumbered. `genomes` is indexed by
/// [`RankedPlan::index`].
pub fn filter_similar(ranked: &[RankedPlan], genomes: &[PlanGenome], threshold: f64) -> Vec<RankedPlan> {
    let mut kept: Vec<RankedPlan> = Vec::new();
    for p in ranked {
        let far = kept.iter().all(|k| {
            let d = genome_distance(&genomes[k.index], &genomes[p.index]).unwrap_or(1.0);
            d.partial_cmp(&threshold) != Some(Ordering::Less)
        });
        if far {
            kept.push(p.clone());
        }
    }
    for (k, p) in kept.iter_mut().enumerate() {
        p.rank = k + 1;
    }
    kept
}
