use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::EvaluationReport;
use crate::model::Metric;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub id: String,
    pub energy_pct: f64,
    pub improvement: f64,
}

impl ParetoPoint {
    pub fn new(id: impl Into<String>, energy_pct: f64, improvement: f64) -> Self {
        Self { id: id.into(), energy_pct, improvement }
    }

    /// `None` when the report has no improvement for `metric`.
    pub fn from_report(r: &EvaluationReport, metric: Metric) -> Option<Self> {
        r.improvement(metric).map(|imp| Self::new(r.plan.clone(), r.cost.energy_pct, imp))
    }

    /// Lower or equal energy and higher or equal improvement, strictly better in one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.energy_pct <= other.energy_pct
            && self.improvement >= other.improvement
            && (self.energy_pct < other.energy_pct || self.improvement > other.improvement)
    }

    pub fn write_csv<W: Write>(points: &[ParetoPoint], w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["energy_pct", "improvement", "plan_id"])?;
        for p in points {
            out.write_record([p.energy_pct.to_string(), p.improvement.to_string(), p.id.clone()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Non-dominated points, by ascending energy. Points with NaN coordinates are
/// dropped; duplicates of a frontier point are all kept.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted: Vec<&ParetoPoint> =
        points.iter().filter(|p| !p.energy_pct.is_nan() && !p.improvement.is_nan()).collect();
    sorted.sort_by(|a, b| {
        a.energy_pct.total_cmp(&b.energy_pct).then(b.improvement.total_cmp(&a.improvement)).then(a.id.cmp(&b.id))
    });
    let mut front: Vec<ParetoPoint> = Vec::new();
    for p in sorted {
        let keep = match front.last() {
            None => true,
            Some(best) => {
                p.improvement > best.improvement
                    || (p.improvement == best.improvement && p.energy_pct == best.energy_pct)
            }
        };
        if keep {
            front.push(p.clone());
        }
    }
    front
}

/// Staircase through the frontier: minimum energy needed for each improvement
/// level, as (energy_pct, improvement) vertices.
pub fn bound_region(points: &[ParetoPoint]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in pareto_front(points) {
        if let Some(&(_, prev)) = out.last() {
            if prev == p.improvement {
                continue;
            }
            out.push((p.energy_pct, prev));
        }
        out.push((p.energy_pct, p.improvement));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_dominated() {
        let one = vec![ParetoPoint::new("a", 1.0, 2.0)];
        assert_eq!(pareto_front(&one), one);
        let pts =
            vec![ParetoPoint::new("a", 1.0, 5.0), ParetoPoint::new("b", 2.0, 4.0), ParetoPoint::new("c", 3.0, 9.0)];
        let ids: Vec<_> = pareto_front(&pts).into_iter().map(|p| p.id).collect();
        assert_eq!(ids, ["a", "c"]);
    }

    #[test]
    fn equal_energy_keeps_the_better() {
        let pts = vec![
            ParetoPoint::new("lo", 1.0, 2.0),
            ParetoPoint::new("hi", 1.0, 3.0),
            ParetoPoint::new("twin", 1.0, 3.0),
        ];
        let ids: Vec<_> = pareto_front(&pts).into_iter().map(|p| p.id).collect();
        assert_eq!(ids, ["hi", "twin"]);
    }

    #[test]
    fn staircase() {
        let pts =
            vec![ParetoPoint::new("a", 1.0, 2.0), ParetoPoint::new("b", 3.0, 10.0), ParetoPoint::new("c", 5.0, 50.0)];
        assert_eq!(bound_region(&pts), vec![(1.0, 2.0), (3.0, 2.0), (3.0, 10.0), (5.0, 10.0), (5.0, 50.0)]);
    }
}
