//! Set matching between predicted and ground-truth polygons.
//!
//! The coordinate cost is orientation-equivalent: a ground-truth polygon and
//! its reversal (vertex order flipped, top/bottom swapped) describe the same
//! region, so each pair is scored against whichever is closer and the loss
//! later reuses that choice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::TextPolygon;

pub const FOCAL_ALPHA: f64 = 0.25;
pub const FOCAL_GAMMA: f64 = 2.0;
pub const SCORE_CLAMP: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(flatten)]
    pub poly: TextPolygon,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(flatten)]
    pub poly: TextPolygon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Forward,
    Reversed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred: usize,
    pub gt: usize,
    pub orientation: Orientation,
    pub cost: f64,
}

/// Serialized as `[{"pred": i, "gt": j, "orientation": "forward"|"reversed", "cost": c}]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchWeights {
    pub w_class: f64,
    pub w_coord: f64,
    /// Consider the reversed ground truth when scoring coordinates.
    pub oea: bool,
}

impl Default for MatchWeights {
    fn default() -> Self {
        Self { w_class: 2.0, w_coord: 5.0, oea: true }
    }
}

/// Reverses vertex order and swaps top with bottom.
pub fn reverse_polygon(poly: &TextPolygon) -> TextPolygon {
    TextPolygon {
        top: poly.bot.iter().rev().copied().collect(),
        bot: poly.top.iter().rev().copied().collect(),
    }
}

pub fn oriented(poly: &TextPolygon, orientation: Orientation) -> TextPolygon {
    match orientation {
        Orientation::Forward => poly.clone(),
        Orientation::Reversed => reverse_polygon(poly),
    }
}

fn check_same_samples(a: &TextPolygon, b: &TextPolygon) -> Result<()> {
    if a.samples() != b.samples() || a.top.len() != a.bot.len() || b.top.len() != b.bot.len() {
        return Err(Error::ShapeMismatch {
            expected: b.samples(),
            actual: a.samples(),
        });
    }
    Ok(())
}

/// Sum of absolute differences over all `4S` coordinates.
pub fn l1_poly_cost(pred: &TextPolygon, gt: &TextPolygon) -> Result<f64> {
    check_same_samples(pred, gt)?;
    Ok(pred
        .vertices()
        .zip(gt.vertices())
        .map(|(p, g)| (p.x - g.x).abs() + (p.y - g.y).abs())
        .sum())
}

/// `min(l1(pred, gt), l1(pred, reverse(gt)))`; ties go to forward.
pub fn oriented_l1_cost(pred: &TextPolygon, gt: &TextPolygon) -> Result<(f64, Orientation)> {
    let fwd = l1_poly_cost(pred, gt)?;
    let rev = l1_poly_cost(pred, &reverse_polygon(gt))?;
    Ok(if rev < fwd {
        (rev, Orientation::Reversed)
    } else {
        (fwd, Orientation::Forward)
    })
}

fn checked_score(score: f64) -> Result<f64> {
    if !(score > 0.0 && score < 1.0) {
        return Err(Error::domain(format!("score {score} outside (0, 1)")));
    }
    Ok(score.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP))
}

fn focal_positive(p: f64) -> f64 {
    FOCAL_ALPHA * (1.0 - p).powf(FOCAL_GAMMA) * -p.ln()
}

fn focal_negative(p: f64) -> f64 {
    (1.0 - FOCAL_ALPHA) * p.powf(FOCAL_GAMMA) * -(1.0 - p).ln()
}

/// Focal matching cost for the text class; decreases with the score.
pub fn focal_class_cost(score: f64) -> Result<f64> {
    let p = checked_score(score)?;
    Ok(focal_positive(p) - focal_negative(p))
}

/// Costs for every (prediction, ground truth) pair with the orientation that
/// attained each coordinate term.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub cost: Vec<f64>,
    pub orientation: Vec<Orientation>,
}

impl CostMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.cols + j]
    }

    pub fn orientation(&self, i: usize, j: usize) -> Orientation {
        self.orientation[i * self.cols + j]
    }

    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        self.cost.chunks(self.cols.max(1)).map(<[f64]>::to_vec).take(self.rows).collect()
    }
}

pub fn build_cost_matrix(preds: &[Prediction], gts: &[GroundTruth], weights: &MatchWeights) -> Result<CostMatrix> {
    let class: Vec<f64> = preds
        .iter()
        .map(|p| focal_class_cost(p.score))
        .collect::<Result<_>>()?;
    let entries: Vec<(f64, Orientation)> = (0..preds.len() * gts.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / gts.len(), k % gts.len());
            let (l1, o) = if weights.oea {
                oriented_l1_cost(&preds[i].poly, &gts[j].poly)?
            } else {
                (l1_poly_cost(&preds[i].poly, &gts[j].poly)?, Orientation::Forward)
            };
            Ok((weights.w_class * class[i] + weights.w_coord * l1, o))
        })
        .collect::<Result<_>>()?;
    let (cost, orientation) = entries.into_iter().unzip();
    Ok(CostMatrix {
        rows: preds.len(),
        cols: gts.len(),
        cost,
        orientation,
    })
}

/// Minimum-cost assignment on a rectangular matrix (Kuhn–Munkres with
/// potentials, `O(n² m)`).
///
/// Returns `(row, col)` pairs ordered by column when `rows >= cols` (every
/// column is assigned), otherwise by row.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let rows = cost.len();
    if rows == 0 {
        return Ok(Vec::new());
    }
    let cols = cost[0].len();
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::domain("cost matrix rows differ in length"));
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::domain("cost matrix has non-finite entries"));
    }
    if cols == 0 {
        return Ok(Vec::new());
    }
    if cols <= rows {
        let rows_for_col = solve_workers(cols, rows, |w, j| cost[j][w]);
        Ok(rows_for_col.into_iter().enumerate().map(|(c, r)| (r, c)).collect())
    } else {
        let cols_for_row = solve_workers(rows, cols, |w, j| cost[w][j]);
        Ok(cols_for_row.into_iter().enumerate().collect())
    }
}

/// Assigns each of `n` workers to a distinct one of `m >= n` jobs.
fn solve_workers(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based arrays; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for worker in 1..=n {
        owner[0] = worker;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut job_of = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            job_of[owner[j] - 1] = j - 1;
        }
    }
    job_of
}

/// Builds the cost matrix and solves the assignment.
pub fn match_predictions(preds: &[Prediction], gts: &[GroundTruth], weights: &MatchWeights) -> Result<MatchResult> {
    let matrix = build_cost_matrix(preds, gts, weights)?;
    if matrix.rows == 0 || matrix.cols == 0 {
        return Ok(MatchResult::default());
    }
    let pairs = hungarian(&matrix.row_vecs())?
        .into_iter()
        .map(|(i, j)| MatchPair {
            pred: i,
            gt: j,
            orientation: matrix.orientation(i, j),
            cost: matrix.get(i, j),
        })
        .collect();
    Ok(MatchResult { pairs })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetLoss {
    pub class_loss: f64,
    pub coord_loss: f64,
    pub total: f64,
    /// Gradient of the weighted coordinate term, one flat `4S` vector per
    /// prediction in [`TextPolygon::to_flat`] order.
    pub coord_grad: Vec<Vec<f64>>,
}

/// Focal classification loss over all predictions plus weighted L1 over the
/// matched pairs, each against the orientation chosen during matching.
pub fn set_prediction_loss(
    preds: &[Prediction],
    gts: &[GroundTruth],
    matching: &MatchResult,
    weights: &MatchWeights,
) -> Result<SetLoss> {
    let mut positive = vec![false; preds.len()];
    let mut gt_seen = vec![false; gts.len()];
    let mut coord_grad: Vec<Vec<f64>> = preds.iter().map(|p| vec![0.0; p.poly.samples() * 4]).collect();
    let mut coord_loss = 0.0;
    for pair in &matching.pairs {
        if pair.pred >= preds.len() || pair.gt >= gts.len() {
            return Err(Error::domain(format!("match pair {pair:?} out of range")));
        }
        if positive[pair.pred] || gt_seen[pair.gt] {
            return Err(Error::domain(format!("match pair {pair:?} reuses an index")));
        }
        positive[pair.pred] = true;
        gt_seen[pair.gt] = true;
        let target = oriented(&gts[pair.gt].poly, pair.orientation);
        let pred = &preds[pair.pred].poly;
        coord_loss += l1_poly_cost(pred, &target)?;
        for (g, (a, b)) in coord_grad[pair.pred]
            .iter_mut()
            .zip(pred.to_flat().into_iter().zip(target.to_flat()))
        {
            *g = if a > b {
                weights.w_coord
            } else if a < b {
                -weights.w_coord
            } else {
                0.0
            };
        }
    }
    let mut class_loss = 0.0;
    for (p, pos) in preds.iter().zip(&positive) {
        let s = checked_score(p.score)?;
        class_loss += if *pos { focal_positive(s) } else { focal_negative(s) };
    }
    let class_loss = weights.w_class * class_loss;
    let coord_loss = weights.w_coord * coord_loss;
    Ok(SetLoss {
        class_loss,
        coord_loss,
        total: class_loss + coord_loss,
        coord_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use approx::assert_abs_diff_eq;

    fn poly(top: &[(f64, f64)], bot: &[(f64, f64)]) -> TextPolygon {
        let p = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| Point::new(x, y)).collect();
        TextPolygon::new(p(top), p(bot)).unwrap()
    }

    fn strip(s: usize) -> TextPolygon {
        TextPolygon::new(
            (0..s).map(|i| Point::new(i as f64, 1.0)).collect(),
            (0..s).map(|i| Point::new(i as f64, 0.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reverse_example_and_involution() {
        let p = poly(&[(0., 1.), (1., 1.)], &[(0., 0.), (1., 0.)]);
        let r = reverse_polygon(&p);
        assert_eq!(r, poly(&[(1., 0.), (0., 0.)], &[(1., 1.), (0., 1.)]));
        assert_eq!(reverse_polygon(&r), p);
    }

    #[test]
    fn reverse_equals_half_turn_for_point_symmetric_polygon() {
        // centred at the origin and symmetric under (x, y) -> (-x, -y)
        let p = poly(&[(-2., 1.), (0., 1.5), (2., 1.)], &[(-2., -1.), (0., -1.5), (2., -1.)]);
        let rotated = p.map_points(|q| -q);
        assert_eq!(reverse_polygon(&p), rotated);
    }

    #[test]
    fn l1_examples() {
        let g = strip(8);
        assert_eq!(l1_poly_cost(&g, &g).unwrap(), 0.0);
        let off = g.map_points(|q| q + Point::new(0.5, 0.5));
        assert_eq!(l1_poly_cost(&off, &g).unwrap(), 16.0);
        let shifted = g.translate(Point::new(1.0, 0.0));
        assert_eq!(l1_poly_cost(&shifted, &g).unwrap(), 16.0);
        assert!(matches!(l1_poly_cost(&strip(3), &g), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn oriented_examples() {
        let g = poly(&[(0., 1.), (3., 1.)], &[(0., 0.), (3., 0.)]);
        assert_eq!(oriented_l1_cost(&g, &g).unwrap(), (0.0, Orientation::Forward));
        let r = reverse_polygon(&g);
        assert_eq!(oriented_l1_cost(&r, &g).unwrap(), (0.0, Orientation::Reversed));
        // the centerline midpoint collapsed: equidistant from both orientations
        let mid = poly(&[(1.5, 0.5), (1.5, 0.5)], &[(1.5, 0.5), (1.5, 0.5)]);
        let (c, o) = oriented_l1_cost(&mid, &g).unwrap();
        assert_eq!(c, l1_poly_cost(&mid, &r).unwrap());
        assert_eq!(o, Orientation::Forward);
    }

    #[test]
    fn focal_examples() {
        let ln2 = 2f64.ln();
        let expect = 0.25 * 0.25 * ln2 - 0.75 * 0.25 * ln2;
        assert_abs_diff_eq!(focal_class_cost(0.5).unwrap(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(focal_class_cost(0.5).unwrap(), -0.086643, epsilon = 1e-6);
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let p = 1.0 - 10f64.powi(-k);
            let c = focal_class_cost(p).unwrap();
            assert!(c < last);
            last = c;
        }
        // beyond the clamp the cost saturates
        assert_eq!(focal_class_cost(1.0 - 1e-10).unwrap(), focal_class_cost(1.0 - 1e-9).unwrap());
        assert!(focal_class_cost(0.0).is_err());
        assert!(focal_class_cost(1.0).is_err());
        assert!(focal_class_cost(f64::NAN).is_err());
    }

    #[test]
    fn hungarian_examples() {
        let a = hungarian(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(a, vec![(0, 0), (1, 1)]);
        let a = hungarian(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(a, vec![(1, 0), (0, 1)]);
        // more rows than columns: each column gets its cheapest distinct row
        let a = hungarian(&[vec![5.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(a, vec![(1, 0)]);
        let a = hungarian(&[vec![5.0, 1.0, 3.0]]).unwrap();
        assert_eq!(a, vec![(0, 1)]);
        assert!(hungarian(&[vec![1.0, f64::NAN]]).is_err());
        assert!(hungarian(&[]).unwrap().is_empty());
    }

    #[test]
    fn cost_matrix_examples() {
        let gt = GroundTruth { poly: strip(4) };
        let exact = Prediction { poly: strip(4), score: 0.9 };
        let near = Prediction { poly: strip(4).translate(Point::new(0.3, 0.0)), score: 0.9 };
        let far = Prediction { poly: strip(4).translate(Point::new(5.0, 0.0)), score: 0.6 };
        let gt2 = GroundTruth { poly: strip(4).translate(Point::new(0.0, 0.2)) };
        let w = MatchWeights::default();
        let m = build_cost_matrix(&[exact, near, far], &[gt.clone(), gt2], &w).unwrap();
        assert!(m.get(0, 0) < m.get(1, 0) && m.get(0, 0) < m.get(2, 0));
        assert!(m.get(0, 0) < m.get(0, 1));

        let w0 = MatchWeights { w_coord: 0.0, ..w };
        let preds: Vec<_> = [0.2, 0.5, 0.7]
            .iter()
            .map(|&s| Prediction { poly: strip(4).translate(Point::new(s, 0.0)), score: s })
            .collect();
        let gts = vec![gt.clone(), GroundTruth { poly: strip(4).translate(Point::new(9.0, 9.0)) }];
        let m = build_cost_matrix(&preds, &gts, &w0).unwrap();
        for i in 0..3 {
            assert_eq!(m.get(i, 0), m.get(i, 1));
        }
    }

    #[test]
    fn loss_examples() {
        let gt = GroundTruth { poly: strip(3) };
        let mut moved = strip(3);
        moved.top[1].x += 1.0;
        let preds = vec![Prediction { poly: moved, score: 0.7 }];
        let w = MatchWeights::default();
        let m = match_predictions(&preds, std::slice::from_ref(&gt), &w).unwrap();
        assert_eq!(m.pairs.len(), 1);
        let loss = set_prediction_loss(&preds, std::slice::from_ref(&gt), &m, &w).unwrap();
        assert_abs_diff_eq!(loss.coord_loss, w.w_coord, epsilon = 1e-12);
        assert_eq!(loss.coord_grad[0][2], w.w_coord);
        assert_eq!(loss.coord_grad[0].iter().filter(|g| **g != 0.0).count(), 1);

        let preds = vec![Prediction { poly: strip(3), score: 1.0 - SCORE_CLAMP }];
        let m = match_predictions(&preds, std::slice::from_ref(&gt), &w).unwrap();
        let loss = set_prediction_loss(&preds, &[gt], &m, &w).unwrap();
        assert_eq!(loss.coord_loss, 0.0);
    }

    #[test]
    fn match_result_json() {
        let m = MatchResult {
            pairs: vec![MatchPair { pred: 2, gt: 0, orientation: Orientation::Reversed, cost: 1.5 }],
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"[{"pred":2,"gt":0,"orientation":"reversed","cost":1.5}]"#);
        assert_eq!(serde_json::from_str::<MatchResult>(&s).unwrap(), m);
    }
}
