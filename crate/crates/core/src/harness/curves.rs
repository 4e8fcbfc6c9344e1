//! Performance-versus-queries curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::policies::PolicyKind;

/// Performance after a personalization step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: u32,
    /// Cumulative prompts sent up to and including this step.
    pub queries_used: u32,
    pub recall: f64,
}

/// One replication of one policy, starting from the baseline at zero queries.
pub type Trajectory = Vec<TrajectoryPoint>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub queries_used: u32,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCurve {
    pub policy: PolicyKind,
    pub points: Vec<CurvePoint>,
}

/// Queries a policy needed to reach one performance level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueriesNeeded {
    pub policy: PolicyKind,
    pub level: f64,
    /// Per replication; `None` where the level was never reached.
    pub per_replication: Vec<Option<u32>>,
    /// Mean and standard deviation over replications that reached the level.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Some replication never reached the level.
    pub saturated: bool,
    /// Mean with unreached replications counted at their final budget, a
    /// lower bound on the true need.
    pub censored_mean: f64,
}

impl QueriesNeeded {
    pub fn reached_all(&self) -> bool {
        !self.saturated
    }
}

/// Value of a step function at `queries`: the last point at or below it.
fn value_at(traj: &Trajectory, queries: u32) -> f64 {
    traj.iter()
        .take_while(|p| p.queries_used <= queries)
        .last()
        .map_or(traj[0].recall, |p| p.recall)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and standard deviation over replications at every query count up
/// to the smallest final budget.
pub fn recall_curve(policy: PolicyKind, trajectories: &[Trajectory]) -> PolicyCurve {
    let max_q = trajectories
        .iter()
        .filter_map(|t| t.last().map(|p| p.queries_used))
        .min()
        .unwrap_or(0);
    let points = (0..=max_q)
        .map(|q| {
            let vals: Vec<f64> = trajectories.iter().map(|t| value_at(t, q)).collect();
            let (mean, std) = mean_std(&vals);
            CurvePoint {
                queries_used: q,
                mean,
                std,
            }
        })
        .collect();
    PolicyCurve { policy, points }
}

/// First query count at which a trajectory reaches `level`.
pub fn queries_to_reach(traj: &Trajectory, level: f64) -> Option<u32> {
    traj.iter().find(|p| p.recall >= level).map(|p| p.queries_used)
}

/// For every policy and level, the queries needed across replications.
pub fn queries_to_performance_curve(
    trajectories: &BTreeMap<PolicyKind, Vec<Trajectory>>,
    levels: &[f64],
) -> Vec<QueriesNeeded> {
    let mut out = Vec::new();
    for (&policy, trajs) in trajectories {
        for &level in levels {
            let per: Vec<Option<u32>> = trajs.iter().map(|t| queries_to_reach(t, level)).collect();
            let reached: Vec<f64> = per.iter().flatten().map(|&q| f64::from(q)).collect();
            let (mean, std) = if reached.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&reached);
                (Some(m), Some(s))
            };
            let censored: Vec<f64> = per
                .iter()
                .zip(trajs)
                .map(|(q, t)| f64::from(q.unwrap_or_else(|| t.last().map_or(0, |p| p.queries_used))))
                .collect();
            out.push(QueriesNeeded {
                policy,
                level,
                saturated: reached.len() < per.len(),
                per_replication: per,
                mean,
                std,
                censored_mean: mean_std(&censored).0,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: &[(u32, f64)]) -> Trajectory {
        points
            .iter()
            .enumerate()
            .map(|(i, &(q, r))| TrajectoryPoint {
                step: i as u32,
                queries_used: q,
                recall: r,
            })
            .collect()
    }

    #[test]
    fn level_below_baseline_needs_nothing() {
        let t = traj(&[(0, 0.4), (5, 0.6)]);
        assert_eq!(queries_to_reach(&t, 0.3), Some(0));
        assert_eq!(queries_to_reach(&t, 0.5), Some(5));
        assert_eq!(queries_to_reach(&t, 0.9), None);
    }

    #[test]
    fn unreachable_level_is_saturated() {
        let mut m = BTreeMap::new();
        m.insert(PolicyKind::Random, vec![traj(&[(0, 0.2), (4, 0.3)]), traj(&[(0, 0.2), (4, 0.5)])]);
        let q = queries_to_performance_curve(&m, &[0.45, 0.9]);
        assert!(q[0].saturated);
        assert_eq!(q[0].mean, Some(4.0));
        assert_eq!(q[0].censored_mean, 4.0);
        assert_eq!(q[1].mean, None);
        assert!(q[1].saturated && !q[1].reached_all());
    }

    #[test]
    fn curve_is_a_step_function_on_a_common_grid() {
        let c = recall_curve(PolicyKind::Random, &[traj(&[(0, 0.0), (2, 1.0)]), traj(&[(0, 0.0), (3, 1.0)])]);
        let q: Vec<u32> = c.points.iter().map(|p| p.queries_used).collect();
        assert_eq!(q, vec![0, 1, 2]);
        assert_eq!(c.points[2].mean, 0.5);
        assert_eq!(c.points[2].std, 0.5);
    }
}
