use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPolicy {
    /// Predicted expected claim count.
    pub score: f64,
    /// Share of the x-axis this policy occupies; must be positive.
    pub weight: f64,
    /// Observed claims.
    pub outcome: f64,
}

/// Points `(cumulative weight share, cumulative outcome share)` from `(0, 0)`
/// to `(1, 1)`, ordered by ascending score. Policies with exactly equal
/// scores form one segment, so the curve does not depend on input order.
pub fn lorenz_curve(policies: &[ScoredPolicy]) -> Result<Vec<(f64, f64)>> {
    if policies.is_empty() {
        return Err(Error::Empty("no scored policies".into()));
    }
    if let Some(p) = policies
        .iter()
        .find(|p| !(p.weight > 0.0 && p.weight.is_finite()))
    {
        return Err(Error::field("weight", format!("nonpositive weight {}", p.weight)));
    }
    if let Some(p) = policies
        .iter()
        .find(|p| !(p.outcome >= 0.0 && p.outcome.is_finite()) || p.score.is_nan())
    {
        return Err(Error::field(
            "outcome",
            format!("invalid policy (score {}, outcome {})", p.score, p.outcome),
        ));
    }
    let mut order: Vec<&ScoredPolicy> = policies.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score));

    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = order[i].score;
        let (mut w, mut o) = (0.0, 0.0);
        while i < order.len() && order[i].score == s {
            w += order[i].weight;
            o += order[i].outcome;
            i += 1;
        }
        groups.push((w, o));
    }
    let mut cum = Vec::with_capacity(groups.len());
    let (mut cw, mut co) = (0.0, 0.0);
    for (w, o) in groups {
        cw += w;
        co += o;
        cum.push((cw, co));
    }
    let (total_w, total_o) = (cw, co);
    if total_o <= 0.0 {
        return Err(Error::UndefinedLorenz);
    }
    let mut points = Vec::with_capacity(cum.len() + 1);
    points.push((0.0, 0.0));
    points.extend(cum.into_iter().map(|(w, o)| (w / total_w, o / total_o)));
    Ok(points)
}

/// `1 − Σ (x_k − x_{k−1})(y_k + y_{k−1})`: twice the area between the
/// diagonal and the curve.
pub fn gini_from_curve(points: &[(f64, f64)]) -> f64 {
    1.0 - points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1))
        .sum::<f64>()
}

pub fn gini(policies: &[ScoredPolicy]) -> Result<f64> {
    lorenz_curve(policies).map(|c| gini_from_curve(&c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(score: f64, weight: f64, outcome: f64) -> ScoredPolicy {
        ScoredPolicy { score, weight, outcome }
    }

    #[test]
    fn perfect_separation() {
        let p = [sp(1.0, 1.0, 0.0), sp(2.0, 1.0, 1.0)];
        assert_eq!(lorenz_curve(&p).unwrap(), vec![(0.0, 0.0), (0.5, 0.0), (1.0, 1.0)]);
        assert_eq!(gini(&p).unwrap(), 0.5);
    }

    #[test]
    fn all_tied_is_diagonal() {
        let p = [sp(3.0, 0.5, 2.0), sp(3.0, 1.0, 0.0), sp(3.0, 0.25, 1.0)];
        assert_eq!(lorenz_curve(&p).unwrap(), vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(gini(&p).unwrap(), 0.0);
    }

    #[test]
    fn four_policy_hand_enumeration() {
        // sorted by score: (w 1, o 0), (w 2, o 1), (w 1, o 0), (w 1, o 3)
        let p = [sp(0.9, 1.0, 3.0), sp(0.1, 1.0, 0.0), sp(0.5, 1.0, 0.0), sp(0.3, 2.0, 1.0)];
        let c = lorenz_curve(&p).unwrap();
        let expected = [(0.0, 0.0), (0.2, 0.0), (0.6, 0.25), (0.8, 0.25), (1.0, 1.0)];
        assert_eq!(c.len(), expected.len());
        for (a, b) in c.iter().zip(expected) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
        // 1 − (0.2·0 + 0.4·0.25 + 0.2·0.5 + 0.2·1.25) = 0.55
        assert!((gini(&p).unwrap() - 0.55).abs() < 1e-12);
    }

    #[test]
    fn reversed_scores_negate() {
        let p = [sp(1.0, 1.0, 0.0), sp(2.0, 2.0, 1.0), sp(4.0, 1.0, 3.0)];
        let r: Vec<_> = p.iter().map(|q| sp(-q.score, q.weight, q.outcome)).collect();
        assert!((gini(&p).unwrap() + gini(&r).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_outcomes_undefined() {
        let p = [sp(1.0, 1.0, 0.0), sp(2.0, 1.0, 0.0)];
        assert!(matches!(gini(&p), Err(Error::UndefinedLorenz)));
        assert!(gini(&[]).is_err());
        assert!(gini(&[sp(1.0, 0.0, 1.0)]).is_err());
    }
}
