//! Page layout recovery: cluster block bounds into columns, spot
//! page-centered headings, reject strays, and order blocks for reading.
//!
//! Registry listings sit in vertical columns, so the (left, right) bounds of
//! genuine record blocks cluster tightly. k-means over those bounds finds the
//! columns; blocks far outside a cluster (page numbers, scan specks,
//! ornaments) get rejected; wide blocks near the page's horizontal center are
//! city headings that span the whole page.

use crate::contours::BBox;
use crate::error::{Error, Result};

/// Reversion floor for tiny cluster deviations: a perfectly aligned column
/// would otherwise reject everything off by a single pixel.
const SIGMA_FLOOR: f64 = 1.0;

/// A block's horizontal extent, fed to the column model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsPoint {
    pub left: f64,
    pub right: f64,
    /// Index back into the caller's block list.
    pub block_id: usize,
}

impl BoundsPoint {
    pub fn from_bbox(b: &BBox, block_id: usize) -> Self {
        BoundsPoint {
            left: b.left as f64,
            right: b.right as f64,
            block_id,
        }
    }
}

/// Fitted column positions; centroids sorted by left bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnModel {
    pub centroids: Vec<(f64, f64)>,
    /// Per-column population standard deviation of (left, right).
    pub stddevs: Vec<(f64, f64)>,
}

impl ColumnModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn widest_column_width(&self) -> f64 {
        self.centroids
            .iter()
            .map(|(l, r)| r - l)
            .fold(0.0, f64::max)
    }
}

/// Blocks of one page split by role. Every input box lands in exactly one of
/// the three groups.
#[derive(Debug, Clone, Default)]
pub struct PageBlocks {
    /// Per column (left to right), sorted by top within the column.
    pub column_blocks: Vec<Vec<BBox>>,
    pub centered_blocks: Vec<BBox>,
    pub rejected: Vec<BBox>,
}

fn dist2(p: (f64, f64), q: (f64, f64)) -> f64 {
    let (dx, dy) = (p.0 - q.0, p.1 - q.1);
    dx * dx + dy * dy
}

fn assign(points: &[BoundsPoint], centroids: &[(f64, f64)]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, &c) in centroids.iter().enumerate() {
                let d = dist2((p.left, p.right), c);
                if d < best_d {
                    best_d = d;
                    best = i; // strict comparison: ties stay on the lower index
                }
            }
            best
        })
        .collect()
}

fn wcss(points: &[BoundsPoint], centroids: &[(f64, f64)], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| dist2((p.left, p.right), centroids[a]))
        .sum()
}

/// Lloyd's iteration over (left, right) bounds with deterministic seeding:
/// the k quantile midpoints of the distinct sorted bounds. Also returns the
/// within-cluster sum of squares recorded after every assignment step.
pub fn kmeans_fit_traced(
    points: &[BoundsPoint],
    k: usize,
    max_iter: u32,
    tol: f64,
) -> Result<(ColumnModel, Vec<f64>)> {
    let mut distinct: Vec<(f64, f64)> = points.iter().map(|p| (p.left, p.right)).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if k == 0 || distinct.len() < k {
        return Err(Error::TooFewPoints {
            k,
            distinct: distinct.len(),
        });
    }

    let m = distinct.len();
    let mut centroids: Vec<(f64, f64)> =
        (0..k).map(|i| distinct[(2 * i + 1) * m / (2 * k)]).collect();

    let mut assignment = assign(points, &centroids);
    let mut objective = vec![wcss(points, &centroids, &assignment)];
    for _ in 0..max_iter {
        // update step: means of assigned points; empty clusters keep position
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a].0 += p.left;
            sums[a].1 += p.right;
            sums[a].2 += 1;
        }
        let mut moved: f64 = 0.0;
        for (c, s) in centroids.iter_mut().zip(&sums) {
            if s.2 > 0 {
                let next = (s.0 / s.2 as f64, s.1 / s.2 as f64);
                moved = moved.max(dist2(*c, next).sqrt());
                *c = next;
            }
        }
        let next_assignment = assign(points, &centroids);
        objective.push(wcss(points, &centroids, &next_assignment));
        let stable = next_assignment == assignment;
        assignment = next_assignment;
        if stable || moved < tol {
            break;
        }
    }

    // order columns left to right, carrying assignments along
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centroids[a].partial_cmp(&centroids[b]).unwrap());
    let centroids_sorted: Vec<(f64, f64)> = order.iter().map(|&i| centroids[i]).collect();
    let mut rank = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }

    let mut var = vec![(0.0, 0.0, 0usize); k];
    for (p, &a) in points.iter().zip(&assignment) {
        let c = centroids_sorted[rank[a]];
        let slot = &mut var[rank[a]];
        slot.0 += (p.left - c.0).powi(2);
        slot.1 += (p.right - c.1).powi(2);
        slot.2 += 1;
    }
    let stddevs = var
        .iter()
        .map(|&(sl, sr, n)| {
            if n == 0 {
                (0.0, 0.0)
            } else {
                ((sl / n as f64).sqrt(), (sr / n as f64).sqrt())
            }
        })
        .collect();

    Ok((
        ColumnModel {
            centroids: centroids_sorted,
            stddevs,
        },
        objective,
    ))
}

/// [`kmeans_fit_traced`] without the objective trace.
pub fn kmeans_fit(points: &[BoundsPoint], k: usize, max_iter: u32, tol: f64) -> Result<ColumnModel> {
    kmeans_fit_traced(points, k, max_iter, tol).map(|(m, _)| m)
}

/// Sort each block into column / centered-heading / rejected.
///
/// The centered test runs first: a box whose center sits within
/// `center_tol * page_width` of the page's horizontal center *and* which is
/// wider than the widest fitted column is a page-spanning heading, not a
/// column block. Everything else goes to its nearest column if both bounds
/// sit within `sigma_threshold` deviations (floored at 1 px), else to
/// `rejected`.
pub fn classify_blocks(
    boxes: &[BBox],
    model: &ColumnModel,
    sigma_threshold: f64,
    page_width: u32,
    center_tol: f64,
) -> PageBlocks {
    let mut out = PageBlocks {
        column_blocks: vec![Vec::new(); model.k()],
        ..PageBlocks::default()
    };
    let page_center = page_width as f64 / 2.0;
    let widest = model.widest_column_width();

    for b in boxes {
        if (b.center_x() - page_center).abs() <= center_tol * page_width as f64
            && (b.width() as f64) > widest
        {
            out.centered_blocks.push(*b);
            continue;
        }
        let p = (b.left as f64, b.right as f64);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &c) in model.centroids.iter().enumerate() {
            let d = dist2(p, c);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let (cl, cr) = model.centroids[best];
        let (sl, sr) = model.stddevs[best];
        if (p.0 - cl).abs() <= sigma_threshold * sl.max(SIGMA_FLOOR)
            && (p.1 - cr).abs() <= sigma_threshold * sr.max(SIGMA_FLOOR)
        {
            out.column_blocks[best].push(*b);
        } else {
            out.rejected.push(*b);
        }
    }

    for col in &mut out.column_blocks {
        col.sort_by_key(|b| (b.top, b.left));
    }
    out.centered_blocks.sort_by_key(|b| (b.top, b.left));
    out
}

/// Reading order: columns left to right, top to bottom within each column.
pub fn reading_order(blocks: &PageBlocks) -> Vec<BBox> {
    blocks.column_blocks.iter().flatten().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(vals: &[(f64, f64)]) -> Vec<BoundsPoint> {
        vals.iter()
            .enumerate()
            .map(|(i, &(l, r))| BoundsPoint {
                left: l,
                right: r,
                block_id: i,
            })
            .collect()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let model = kmeans_fit(&pts(&[(0.0, 100.0), (2.0, 98.0), (4.0, 102.0)]), 1, 100, 0.5).unwrap();
        assert_eq!(model.centroids, vec![(2.0, 100.0)]);
    }

    #[test]
    fn identical_points_zero_stddev() {
        let model = kmeans_fit(&pts(&[(5.0, 50.0); 4]), 1, 100, 0.5).unwrap();
        assert_eq!(model.centroids, vec![(5.0, 50.0)]);
        assert_eq!(model.stddevs, vec![(0.0, 0.0)]);
    }

    #[test]
    fn k_must_not_exceed_distinct_points() {
        let err = kmeans_fit(&pts(&[(0.0, 1.0), (0.0, 1.0), (2.0, 3.0)]), 3, 100, 0.5).unwrap_err();
        assert!(matches!(err, Error::TooFewPoints { k: 3, distinct: 2 }));
    }

    // brute force: for well-separated 1-D-ish data the optimal 2-partition is
    // contiguous in sorted order, so try every split
    fn best_two_partition(points: &[BoundsPoint]) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&a, &b| {
            (points[a].left + points[a].right)
                .partial_cmp(&(points[b].left + points[b].right))
                .unwrap()
        });
        let cost = |ids: &[usize]| -> f64 {
            let n = ids.len() as f64;
            let (ml, mr) = ids.iter().fold((0.0, 0.0), |acc, &i| {
                (acc.0 + points[i].left / n, acc.1 + points[i].right / n)
            });
            ids.iter()
                .map(|&i| (points[i].left - ml).powi(2) + (points[i].right - mr).powi(2))
                .sum()
        };
        let mut best = (f64::INFINITY, 0);
        for split in 1..points.len() {
            let c = cost(&idx[..split]) + cost(&idx[split..]);
            if c < best.0 {
                best = (c, split);
            }
        }
        let mut lo = idx[..best.1].to_vec();
        let mut hi = idx[best.1..].to_vec();
        lo.sort();
        hi.sort();
        vec![lo, hi]
    }

    #[test]
    fn two_jittered_clusters_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut points = Vec::new();
        for i in 0..40 {
            let (l, r) = if i < 20 { (50.0, 470.0) } else { (530.0, 950.0) };
            points.push(BoundsPoint {
                left: l + rng.random_range(-1.0..=1.0),
                right: r + rng.random_range(-1.0..=1.0),
                block_id: i,
            });
        }
        let (model, _) = kmeans_fit_traced(&points, 2, 100, 0.5).unwrap();
        assert!((model.centroids[0].0 - 50.0).abs() <= 2.0);
        assert!((model.centroids[0].1 - 470.0).abs() <= 2.0);
        assert!((model.centroids[1].0 - 530.0).abs() <= 2.0);
        assert!((model.centroids[1].1 - 950.0).abs() <= 2.0);

        // assignments must be the brute-force optimum: no cross-assignments
        let expected = best_two_partition(&points);
        let assignment = assign(&points, &model.centroids);
        let mut got = vec![Vec::new(), Vec::new()];
        for (i, &a) in assignment.iter().enumerate() {
            got[a].push(i);
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for round in 0..20 {
            let n = rng.random_range(6..40);
            let k = rng.random_range(1..=3.min(n));
            let points: Vec<BoundsPoint> = (0..n)
                .map(|i| BoundsPoint {
                    left: rng.random_range(0.0..800.0),
                    right: rng.random_range(800.0..1600.0),
                    block_id: i,
                })
                .collect();
            let (_, objective) = kmeans_fit_traced(&points, k, 100, 0.0).unwrap();
            for w in objective.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-9,
                    "objective increased in round {round}: {objective:?}"
                );
            }
        }
    }

    fn column_model(cols: &[(f64, f64)], sigma: f64) -> ColumnModel {
        ColumnModel {
            centroids: cols.to_vec(),
            stddevs: vec![(sigma, sigma); cols.len()],
        }
    }

    #[test]
    fn page_number_box_is_rejected() {
        let model = column_model(&[(100.0, 700.0), (900.0, 1500.0)], 5.0);
        let blocks = [
            BBox::new(100, 40, 700, 80),
            BBox::new(1850, 10, 1880, 40), // page number in the corner
        ];
        let out = classify_blocks(&blocks, &model, 2.0, 2000, 0.02);
        assert_eq!(out.column_blocks[0], vec![blocks[0]]);
        assert_eq!(out.rejected, vec![blocks[1]]);
        assert!(out.centered_blocks.is_empty());
    }

    #[test]
    fn wide_central_box_is_a_heading() {
        let model = column_model(&[(50.0, 470.0), (530.0, 950.0)], 2.0);
        let heading = BBox::new(200, 100, 800, 130); // 600 wide, centered at 500
        let out = classify_blocks(&[heading], &model, 2.0, 1000, 0.02);
        assert_eq!(out.centered_blocks, vec![heading]);
    }

    #[test]
    fn narrow_central_box_is_not_a_heading() {
        // centered but narrower than a column: must go through column logic
        let model = column_model(&[(50.0, 470.0), (530.0, 950.0)], 2.0);
        let b = BBox::new(450, 100, 550, 130);
        let out = classify_blocks(&[b], &model, 2.0, 1000, 0.02);
        assert!(out.centered_blocks.is_empty());
        assert_eq!(out.rejected, vec![b]);
    }

    #[test]
    fn every_box_lands_in_exactly_one_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let model = column_model(&[(50.0, 470.0), (530.0, 950.0)], 2.0);
        let boxes: Vec<BBox> = (0..60)
            .map(|_| {
                let l = rng.random_range(0..900);
                let t = rng.random_range(0..1200);
                let w = rng.random_range(1..500);
                let h = rng.random_range(1..60);
                BBox::new(l, t, l + w, t + h)
            })
            .collect();
        let out = classify_blocks(&boxes, &model, 2.0, 1000, 0.02);
        let total = out.column_blocks.iter().map(Vec::len).sum::<usize>()
            + out.centered_blocks.len()
            + out.rejected.len();
        assert_eq!(total, boxes.len());
    }

    #[test]
    fn jittered_three_column_layout_recovers_assignments() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let cols = [(60.0, 560.0), (620.0, 1120.0), (1180.0, 1680.0)];
        let mut boxes = Vec::new();
        let mut truth = Vec::new();
        for (ci, &(l, r)) in cols.iter().enumerate() {
            for row in 0..12 {
                let jl = rng.random_range(-2i64..=2);
                let jr = rng.random_range(-2i64..=2);
                boxes.push(BBox::new(
                    (l as i64 + jl) as u32,
                    80 * row + 40,
                    (r as i64 + jr) as u32,
                    80 * row + 100,
                ));
                truth.push(ci);
            }
        }
        let points: Vec<BoundsPoint> = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| BoundsPoint::from_bbox(b, i))
            .collect();
        let model = kmeans_fit(&points, 3, 100, 0.5).unwrap();
        // wide right margin keeps the middle column off the page's center
        // line, as the centered-heading rule assumes; the sigma threshold
        // clears (n-1)/sqrt(n) ~ 3.2, the farthest any member of a 12-point
        // cluster can sit from its own mean, so nothing here can be rejected
        let out = classify_blocks(&boxes, &model, 4.0, 1900, 0.02);
        assert!(out.rejected.is_empty());
        assert!(out.centered_blocks.is_empty());
        for (ci, col) in out.column_blocks.iter().enumerate() {
            assert_eq!(col.len(), 12, "column {ci}");
            for b in col {
                let idx = boxes.iter().position(|x| x == b).unwrap();
                assert_eq!(truth[idx], ci, "box {idx} in wrong column");
            }
        }
    }

    #[test]
    fn reading_order_is_columns_then_rows() {
        let blocks = PageBlocks {
            column_blocks: vec![
                vec![BBox::new(0, 10, 10, 20), BBox::new(0, 50, 10, 60)],
                vec![BBox::new(20, 5, 30, 15)],
            ],
            ..PageBlocks::default()
        };
        let order = reading_order(&blocks);
        assert_eq!(
            order,
            vec![
                BBox::new(0, 10, 10, 20),
                BBox::new(0, 50, 10, 60),
                BBox::new(20, 5, 30, 15)
            ]
        );
    }
}
