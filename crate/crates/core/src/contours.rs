//! Connected text blobs: outline tracing and indentation splitting.
//!
//! After the morphological merge every printed record — ideally — is one
//! 8-connected foreground component. [`extract_contours`] finds those
//! components and traces their outer boundaries. Where several records merged
//! into a single column-sized blob (registries that mark a new record by
//! indenting its first line), [`split_at_indentations`] cuts the blob back
//! apart by walking the left edge row by row.

use crate::error::{Error, Result};
use crate::raster::BitRaster;

/// Axis-aligned box; `left`/`top` inclusive, `right`/`bottom` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BBox {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl BBox {
    pub fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        assert!(left < right && top < bottom, "degenerate box");
        BBox {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn width(&self) -> u32 {
        self.right - self.left
    }

    pub fn height(&self) -> u32 {
        self.bottom - self.top
    }

    pub fn center_x(&self) -> f64 {
        (self.left + self.right) as f64 / 2.0
    }
}

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    /// Outer boundary pixels in trace order; consecutive entries (and the
    /// wrap-around pair) are 8-adjacent.
    pub boundary: Vec<(u32, u32)>,
    pub bbox: BBox,
    /// Foreground pixels in the component (not just the boundary).
    pub area: usize,
}

// clockwise in image coordinates (y grows downward), starting north
const DIRS: [(i64, i64); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn make(&mut self) -> u32 {
        let id = self.0.len() as u32;
        self.0.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let parent = self.0[x as usize];
            self.0[x as usize] = self.0[parent as usize];
            x = parent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi as usize] = lo;
        }
    }
}

/// Moore-neighbor trace of the outer boundary, starting from the component's
/// topmost-leftmost pixel. Tracing stays inside one component because
/// distinct 8-connected components are never 8-adjacent.
fn trace_boundary(img: &BitRaster, start: (u32, u32)) -> Vec<(u32, u32)> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let fg = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && img.get(x as u32, y as u32) == 1;
    let (sx, sy) = (start.0 as i64, start.1 as i64);

    // The start pixel has no foreground to its west or anywhere above, so the
    // west neighbor is a valid backtrack point; scan clockwise from there.
    let mut first_dir = None;
    for step in 1..=8 {
        let d = (6 + step) % 8;
        if fg(sx + DIRS[d].0, sy + DIRS[d].1) {
            first_dir = Some(d);
            break;
        }
    }
    let Some(first_dir) = first_dir else {
        return vec![start]; // isolated pixel
    };

    let mut boundary = Vec::new();
    let (mut pos, mut dir) = ((sx, sy), first_dir);
    loop {
        boundary.push((pos.0 as u32, pos.1 as u32));
        let next = (pos.0 + DIRS[dir].0, pos.1 + DIRS[dir].1);
        // scan clockwise from just past the backtrack direction
        let back = (dir + 4) % 8;
        let mut next_dir = dir;
        for step in 1..=8 {
            let d = (back + step) % 8;
            if fg(next.0 + DIRS[d].0, next.1 + DIRS[d].1) {
                next_dir = d;
                break;
            }
        }
        if next == (sx, sy) && next_dir == first_dir {
            break; // back at the start about to repeat the first move
        }
        pos = next;
        dir = next_dir;
        debug_assert!(boundary.len() <= 8 * img.as_bits().len() + 8);
    }
    boundary
}

/// All 8-connected foreground components with outer boundaries, ordered by
/// (top, left) of their bounding boxes.
pub fn extract_contours(img: &BitRaster) -> Vec<Contour> {
    let w = img.width() as usize;
    let h = img.height() as usize;
    if w == 0 || h == 0 {
        return Vec::new();
    }

    // pass 1: provisional labels, merging over the four already-seen neighbors
    const NONE: u32 = u32::MAX;
    let mut labels = vec![NONE; w * h];
    let mut uf = UnionFind(Vec::new());
    for y in 0..h {
        for x in 0..w {
            if img.get(x as u32, y as u32) == 0 {
                continue;
            }
            let mut best = NONE;
            let mut neighbors = [NONE; 4];
            let mut n = 0;
            // W, NW, N, NE
            let cands: [(i64, i64); 4] = [(-1, 0), (-1, -1), (0, -1), (1, -1)];
            for (dx, dy) in cands {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let l = labels[ny as usize * w + nx as usize];
                if l != NONE {
                    neighbors[n] = l;
                    n += 1;
                    if l < best || best == NONE {
                        best = l;
                    }
                }
            }
            let label = if best == NONE { uf.make() } else { best };
            for &l in &neighbors[..n] {
                uf.union(label, l);
            }
            labels[y * w + x] = label;
        }
    }

    // pass 2: resolve roots, accumulate bbox/area/start per component
    struct Acc {
        left: u32,
        top: u32,
        right: u32,
        bottom: u32,
        area: usize,
        start: (u32, u32),
    }
    let mut order: Vec<u32> = Vec::new(); // roots in first-seen (row-major) order
    let mut accs: Vec<Option<Acc>> = vec![];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == NONE {
                continue;
            }
            let root = uf.find(l) as usize;
            if accs.len() <= root {
                accs.resize_with(root + 1, || None);
            }
            match &mut accs[root] {
                Some(acc) => {
                    acc.left = acc.left.min(x as u32);
                    acc.right = acc.right.max(x as u32 + 1);
                    acc.bottom = acc.bottom.max(y as u32 + 1);
                    acc.area += 1;
                }
                slot @ None => {
                    *slot = Some(Acc {
                        left: x as u32,
                        top: y as u32,
                        right: x as u32 + 1,
                        bottom: y as u32 + 1,
                        area: 1,
                        start: (x as u32, y as u32),
                    });
                    order.push(root as u32);
                }
            }
        }
    }

    let mut contours: Vec<Contour> = order
        .into_iter()
        .map(|root| {
            let acc = accs[root as usize].take().unwrap();
            Contour {
                boundary: trace_boundary(img, acc.start),
                bbox: BBox::new(acc.left, acc.top, acc.right, acc.bottom),
                area: acc.area,
            }
        })
        .collect();
    contours.sort_by_key(|c| (c.bbox.top, c.bbox.left, c.bbox.right, c.bbox.bottom));
    contours
}

/// Split a merged blob at first-line indentations.
///
/// Walks rows of `c.bbox` top to bottom taking the leftmost foreground pixel
/// per row; a run of at least `min_rows` rows whose left edge sits more than
/// `indent_px` past the blob's left bound, immediately after a non-indented
/// row, starts a new segment. Returns the blob's bbox unchanged when no such
/// run exists. Rows with no foreground count as non-indented.
///
/// Errors when `indent_px` is not below the bbox width (the threshold could
/// never fire and was almost certainly misconfigured).
pub fn split_at_indentations(
    c: &Contour,
    img: &BitRaster,
    indent_px: u32,
    min_rows: u32,
) -> Result<Vec<BBox>> {
    let b = c.bbox;
    if indent_px >= b.width() {
        return Err(Error::IndentTooWide {
            indent_px,
            box_width: b.width(),
        });
    }
    let min_rows = min_rows.max(1) as usize;

    let indented: Vec<bool> = (b.top..b.bottom)
        .map(|y| {
            (b.left..b.right)
                .find(|&x| img.get(x, y) == 1)
                .is_some_and(|x| x > b.left + indent_px)
        })
        .collect();

    let mut splits: Vec<u32> = Vec::new();
    let n = indented.len();
    let mut y = 1;
    while y < n {
        if indented[y] && !indented[y - 1] {
            let run = indented[y..].iter().take_while(|&&v| v).count();
            if run >= min_rows {
                splits.push(b.top + y as u32);
            }
            y += run;
        } else {
            y += 1;
        }
    }

    if splits.is_empty() {
        return Ok(vec![b]);
    }
    let mut boxes = Vec::with_capacity(splits.len() + 1);
    let mut top = b.top;
    for s in splits {
        boxes.push(BBox::new(b.left, top, b.right, s));
        top = s;
    }
    boxes.push(BBox::new(b.left, top, b.right, b.bottom));
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent check: plain BFS flood fill, nothing shared with the
    // union-find + trace implementation above.
    fn flood_components(img: &BitRaster) -> Vec<(BBox, usize)> {
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut seen = vec![false; (w * h) as usize];
        let mut out = Vec::new();
        for sy in 0..h {
            for sx in 0..w {
                if img.get(sx as u32, sy as u32) == 0 || seen[(sy * w + sx) as usize] {
                    continue;
                }
                let (mut l, mut t, mut r, mut b) = (sx, sy, sx + 1, sy + 1);
                let mut area = 0usize;
                let mut queue = std::collections::VecDeque::from([(sx, sy)]);
                seen[(sy * w + sx) as usize] = true;
                while let Some((x, y)) = queue.pop_front() {
                    area += 1;
                    l = l.min(x);
                    t = t.min(y);
                    r = r.max(x + 1);
                    b = b.max(y + 1);
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            let (nx, ny) = (x + dx, y + dy);
                            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                                continue;
                            }
                            let idx = (ny * w + nx) as usize;
                            if !seen[idx] && img.get(nx as u32, ny as u32) == 1 {
                                seen[idx] = true;
                                queue.push_back((nx, ny));
                            }
                        }
                    }
                }
                out.push((
                    BBox::new(l as u32, t as u32, r as u32, b as u32),
                    area,
                ));
            }
        }
        out.sort_by_key(|(b, _)| (b.top, b.left, b.right, b.bottom));
        out
    }

    fn random_raster(rng: &mut ChaCha8Rng, w: u32, h: u32, density: f64) -> BitRaster {
        let data = (0..w as usize * h as usize)
            .map(|_| rng.random_bool(density) as u8)
            .collect();
        BitRaster::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn empty_raster_has_no_contours() {
        assert!(extract_contours(&BitRaster::zeros(8, 8)).is_empty());
    }

    #[test]
    fn single_block_bbox_and_area() {
        let mut img = BitRaster::zeros(10, 10);
        for y in 2..6 {
            for x in 3..8 {
                img.set(x, y, 1);
            }
        }
        let cs = extract_contours(&img);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].bbox, BBox::new(3, 2, 8, 6));
        assert_eq!(cs[0].area, 20);
    }

    #[test]
    fn diagonal_pixels_are_one_component() {
        let mut img = BitRaster::zeros(5, 5);
        img.set(1, 1, 1);
        img.set(2, 2, 1);
        img.set(3, 3, 1);
        let cs = extract_contours(&img);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].area, 3);
    }

    #[test]
    fn boundary_is_closed_and_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let img = random_raster(&mut rng, 24, 24, 0.4);
            for c in extract_contours(&img) {
                for (i, &(x, y)) in c.boundary.iter().enumerate() {
                    assert_eq!(img.get(x, y), 1, "boundary pixel off the component");
                    let (nx, ny) = c.boundary[(i + 1) % c.boundary.len()];
                    let dx = (nx as i64 - x as i64).abs();
                    let dy = (ny as i64 - y as i64).abs();
                    assert!(dx <= 1 && dy <= 1, "boundary sequence not 8-connected");
                }
            }
        }
    }

    #[test]
    fn matches_flood_fill_on_random_rasters() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for round in 0..40 {
            let density = [0.1, 0.35, 0.5, 0.75][round % 4];
            let img = random_raster(&mut rng, 32, 32, density);
            let got: Vec<(BBox, usize)> =
                extract_contours(&img).iter().map(|c| (c.bbox, c.area)).collect();
            assert_eq!(got, flood_components(&img), "round {round}");
        }
    }

    #[test]
    fn areas_sum_to_foreground_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let img = random_raster(&mut rng, 40, 28, 0.45);
            let total: usize = extract_contours(&img).iter().map(|c| c.area).sum();
            assert_eq!(total, img.count_ones());
        }
    }

    #[test]
    fn translation_shifts_bboxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let img = random_raster(&mut rng, 20, 20, 0.4);
        let mut shifted = BitRaster::zeros(26, 25);
        for y in 0..20 {
            for x in 0..20 {
                shifted.set(x + 4, y + 3, img.get(x, y));
            }
        }
        let a = extract_contours(&img);
        let b = extract_contours(&shifted);
        assert_eq!(a.len(), b.len());
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(
                BBox::new(ca.bbox.left + 4, ca.bbox.top + 3, ca.bbox.right + 4, ca.bbox.bottom + 3),
                cb.bbox
            );
            assert_eq!(ca.area, cb.area);
        }
    }

    fn two_step_blob() -> (BitRaster, Contour) {
        // rows 0-9 start at x=0, rows 10-19 at x=15, one connected blob
        let mut img = BitRaster::zeros(30, 20);
        for y in 0..10 {
            for x in 0..25 {
                img.set(x, y, 1);
            }
        }
        for y in 10..20 {
            for x in 15..25 {
                img.set(x, y, 1);
            }
        }
        let cs = extract_contours(&img);
        assert_eq!(cs.len(), 1);
        (img, cs.into_iter().next().unwrap())
    }

    #[test]
    fn splits_at_indented_run() {
        let (img, c) = two_step_blob();
        let boxes = split_at_indentations(&c, &img, 10, 2).unwrap();
        assert_eq!(
            boxes,
            vec![BBox::new(0, 0, 25, 10), BBox::new(0, 10, 25, 20)]
        );
    }

    #[test]
    fn no_split_when_run_too_short() {
        // only one indented row
        let mut img = BitRaster::zeros(30, 6);
        for y in 0..6 {
            let start = if y == 3 { 15 } else { 0 };
            for x in start..25 {
                img.set(x, y, 1);
            }
        }
        let c = extract_contours(&img).remove(0);
        assert_eq!(split_at_indentations(&c, &img, 10, 2).unwrap(), vec![c.bbox]);
        // with min_rows 1 the same row does split: one run start, two boxes
        assert_eq!(
            split_at_indentations(&c, &img, 10, 1).unwrap(),
            vec![BBox::new(0, 0, 25, 3), BBox::new(0, 3, 25, 6)]
        );
    }

    #[test]
    fn unindented_blob_returns_own_bbox() {
        let mut img = BitRaster::zeros(12, 8);
        for y in 1..7 {
            for x in 2..10 {
                img.set(x, y, 1);
            }
        }
        let c = extract_contours(&img).remove(0);
        assert_eq!(split_at_indentations(&c, &img, 3, 2).unwrap(), vec![c.bbox]);
    }

    #[test]
    fn indent_threshold_must_fit_box() {
        let (img, c) = two_step_blob();
        let err = split_at_indentations(&c, &img, 25, 2).unwrap_err();
        assert!(matches!(err, Error::IndentTooWide { indent_px: 25, box_width: 25 }));
    }

    #[test]
    fn split_boxes_partition_vertically() {
        let (img, c) = two_step_blob();
        let boxes = split_at_indentations(&c, &img, 10, 2).unwrap();
        assert_eq!(boxes.first().unwrap().top, c.bbox.top);
        assert_eq!(boxes.last().unwrap().bottom, c.bbox.bottom);
        for pair in boxes.windows(2) {
            assert_eq!(pair[0].bottom, pair[1].top, "boxes must tile with no gap");
            assert!(pair[0].top < pair[1].top, "boxes must be ordered by top");
        }
    }
}
