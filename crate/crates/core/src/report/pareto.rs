//! Non-dominated subsets under (quality: maximize, cost: minimize).

use serde::{Deserialize, Serialize};

pub const QUALITY_DIRECTION: &str = "maximize";
pub const COST_DIRECTION: &str = "minimize";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub quality: f64,
    pub cost: f64,
}

impl ParetoPoint {
    pub fn new(quality: f64, cost: f64) -> Self {
        ParetoPoint { quality, cost }
    }

    /// True when `self` is at least as good on both axes and strictly better
    /// on one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.quality >= other.quality
            && self.cost <= other.cost
            && (self.quality > other.quality || self.cost < other.cost)
    }
}

/// Indices of the non-dominated points, in input order. Equal points are all
/// kept.
///
/// Runs in O(n log n): after sorting by quality descending (cost ascending
/// on ties), a point survives iff its cost is at or below the best cost seen
/// so far among strictly-higher-quality points, and not above the group
/// minimum of its own quality level.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b]
            .quality
            .total_cmp(&points[a].quality)
            .then(points[a].cost.total_cmp(&points[b].cost))
    });
    let mut keep = vec![false; points.len()];
    let mut best_above = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let q = points[order[i]].quality;
        let mut j = i;
        while j < order.len() && points[order[j]].quality == q {
            j += 1;
        }
        // order[i] holds the cheapest point of this quality level.
        let group_min = points[order[i]].cost;
        for &idx in &order[i..j] {
            let c = points[idx].cost;
            keep[idx] = c == group_min && c < best_above;
        }
        best_above = best_above.min(group_min);
        i = j;
    }
    (0..points.len()).filter(|&k| keep[k]).collect()
}
