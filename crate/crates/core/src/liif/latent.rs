use crate::nn::{col2im, im2col, Tensor};
use crate::{Error, Result};

/// Normalized centers `−1 + (2i + 1)/n` of `n` pixels along one axis.
pub fn pixel_center_coords(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::arg("pixel_center_coords: n must be at least 1"));
    }
    let nf = n as f64;
    Ok((0..n).map(|i| -1.0 + (2 * i + 1) as f64 / nf).collect())
}

fn dhw(m: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match m.shape() {
        [d, h, w] if *h > 0 && *w > 0 => Ok((*d, *h, *w)),
        other => Err(Error::arg(format!("{what}: expected [D, H, W] with H, W ≥ 1, got {other:?}"))),
    }
}

/// 3×3 feature unfolding: channel `c·9 + (m+1)·3 + (n+1)` at `(i, j)` holds
/// `M[c, i+m, j+n]`, zero outside the grid.
pub fn unfold3x3(m: &Tensor) -> Result<Tensor> {
    let (d, h, w) = dhw(m, "unfold3x3")?;
    Ok(Tensor::from_parts(vec![9 * d, h, w], im2col(m.data(), d, h, w)))
}

/// Adjoint of [`unfold3x3`].
pub(crate) fn unfold3x3_backward(du: &Tensor) -> Result<Tensor> {
    let (d9, h, w) = dhw(du, "unfold3x3 gradient")?;
    if d9 % 9 != 0 {
        return Err(Error::arg("unfolded depth must be divisible by 9"));
    }
    let d = d9 / 9;
    Ok(Tensor::from_parts(vec![d, h, w], col2im(du.data(), d, h, w)))
}

/// Corner of the 2×2 latent neighbourhood around a query: first digit is the
/// row side (0 = above), second the column side (0 = left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corner {
    C00,
    C01,
    C10,
    C11,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::C00, Corner::C01, Corner::C10, Corner::C11];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn lower_row(self) -> bool {
        matches!(self, Corner::C10 | Corner::C11)
    }

    pub fn right_col(self) -> bool {
        matches!(self, Corner::C01 | Corner::C11)
    }

    pub fn diagonal(self) -> Corner {
        Corner::ALL[3 - self.index()]
    }
}

/// A continuous query: position `x = (row, col)` in `[−1, 1]²` and the
/// normalized output-pixel size `cell = (2/out_h, 2/out_w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryPoint {
    pub x: [f64; 2],
    pub cell: [f64; 2],
}

impl QueryPoint {
    pub fn new(x: [f64; 2], cell: [f64; 2]) -> Result<Self> {
        if x.iter().any(|v| !(v.abs() <= 1.0)) {
            return Err(Error::arg(format!("query {x:?} outside [-1, 1]²")));
        }
        if cell.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::arg(format!("cell {cell:?} must be positive")));
        }
        Ok(Self { x, cell })
    }

    /// Row-major queries at every pixel center of an `out_h × out_w` raster.
    pub fn pixel_grid(out_h: usize, out_w: usize) -> Result<Vec<QueryPoint>> {
        let rows = pixel_center_coords(out_h)?;
        let cols = pixel_center_coords(out_w)?;
        let cell = [2.0 / out_h as f64, 2.0 / out_w as f64];
        Ok(rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| QueryPoint { x: [r, c], cell }))
            .collect())
    }
}

/// Unfolded feature map `[9D, H, W]` with its cell-center coordinates.
#[derive(Debug, Clone)]
pub struct FeatureMapLatent {
    data: Tensor,
    base_depth: usize,
    rows: Vec<f64>,
    cols: Vec<f64>,
    /// Same values as `data`, laid out `[H·W, 9D]`.
    by_position: Vec<f64>,
}

impl FeatureMapLatent {
    /// Unfolds an encoder output `[D, H, W]`.
    pub fn from_features(features: &Tensor) -> Result<Self> {
        Self::from_unfolded(unfold3x3(features)?)
    }

    pub fn from_unfolded(data: Tensor) -> Result<Self> {
        let (d9, h, w) = dhw(&data, "FeatureMapLatent")?;
        if d9 == 0 || d9 % 9 != 0 {
            return Err(Error::arg(format!("latent depth {d9} is not a positive multiple of 9")));
        }
        let hw = h * w;
        let mut by_position = vec![0.0; d9 * hw];
        for (k, plane) in data.data().chunks_exact(hw).enumerate() {
            for (pos, &v) in plane.iter().enumerate() {
                by_position[pos * d9 + k] = v;
            }
        }
        Ok(Self {
            base_depth: d9 / 9,
            rows: pixel_center_coords(h)?,
            cols: pixel_center_coords(w)?,
            data,
            by_position,
        })
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn base_depth(&self) -> usize {
        self.base_depth
    }

    pub fn latent_dim(&self) -> usize {
        9 * self.base_depth
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    pub fn row_coords(&self) -> &[f64] {
        &self.rows
    }

    pub fn col_coords(&self) -> &[f64] {
        &self.cols
    }

    pub fn latent(&self, row: usize, col: usize) -> &[f64] {
        let d9 = self.latent_dim();
        &self.by_position[(row * self.width() + col) * d9..][..d9]
    }

    pub fn center(&self, row: usize, col: usize) -> [f64; 2] {
        [self.rows[row], self.cols[col]]
    }

    /// Grid indices of the four corners around `x`, in [`Corner::ALL`] order.
    pub fn corner_indices(&self, x: [f64; 2]) -> [(usize, usize); 4] {
        let (r0, r1) = axis_pair(&self.rows, x[0]);
        let (c0, c1) = axis_pair(&self.cols, x[1]);
        [(r0, c0), (r0, c1), (r1, c0), (r1, c1)]
    }
}

/// Nearest centers at or below `x` and above it, clamped to the grid.
fn axis_pair(coords: &[f64], x: f64) -> (usize, usize) {
    let n = coords.len();
    if x < coords[0] {
        return (0, 0);
    }
    let est = ((x + 1.0) * n as f64 / 2.0 - 0.5).floor();
    let mut lo = if est > 0.0 { (est as usize).min(n - 1) } else { 0 };
    while lo > 0 && coords[lo] > x {
        lo -= 1;
    }
    while lo + 1 < n && coords[lo + 1] <= x {
        lo += 1;
    }
    (lo, (lo + 1).min(n - 1))
}

/// A latent code and the center of the cell it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub z: Vec<f64>,
    pub p: [f64; 2],
    pub index: (usize, usize),
}

pub fn nearest_latent(fm: &FeatureMapLatent, q: &QueryPoint, corner: Corner) -> LatentSample {
    let (r, c) = fm.corner_indices(q.x)[corner.index()];
    LatentSample {
        z: fm.latent(r, c).to_vec(),
        p: fm.center(r, c),
        index: (r, c),
    }
}

/// Blend weights indexed by [`Corner::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleWeights(pub [f64; 4]);

impl EnsembleWeights {
    pub fn get(&self, corner: Corner) -> f64 {
        self.0[corner.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Splits one axis between the low and high center; `(½, ½)` when both
/// distances vanish.
fn axis_split(x: f64, lo: f64, hi: f64) -> (f64, f64) {
    let (a, b) = ((x - lo).abs(), (hi - x).abs());
    let s = a + b;
    if s > 0.0 {
        (b / s, a / s)
    } else {
        (0.5, 0.5)
    }
}

/// Area weights: corner `t` gets the rectangle between `x` and the center of
/// its diagonal corner, normalized by the total.
///
/// The total factors as a product of per-axis sums, so the weights are a
/// product of per-axis splits. An axis whose two centers coincide with `x`
/// splits evenly, which yields uniform weights on a fully collapsed
/// neighbourhood and keeps the sum at one when only one axis collapses.
pub fn ensemble_weights(x: [f64; 2], centers: &[[f64; 2]; 4]) -> EnsembleWeights {
    let (r_lo, r_hi) = axis_split(x[0], centers[0][0], centers[2][0]);
    let (c_lo, c_hi) = axis_split(x[1], centers[0][1], centers[1][1]);
    EnsembleWeights([r_lo * c_lo, r_lo * c_hi, r_hi * c_lo, r_hi * c_hi])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centers_formula() {
        assert_eq!(pixel_center_coords(2).unwrap(), vec![-0.5, 0.5]);
        assert_eq!(pixel_center_coords(4).unwrap(), vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(pixel_center_coords(1).unwrap(), vec![0.0]);
        assert!(pixel_center_coords(0).is_err());
    }

    #[test]
    fn unfold_hand_example() {
        let m = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let fm = FeatureMapLatent::from_features(&m).unwrap();
        assert_eq!(fm.latent(0, 0), &[0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn unfold_single_pixel_and_zeros() {
        let m = Tensor::new(vec![2, 1, 1], vec![5.0, -1.0]).unwrap();
        let u = unfold3x3(&m).unwrap();
        let mut expected = vec![0.0; 18];
        expected[4] = 5.0;
        expected[13] = -1.0;
        assert_eq!(u.data(), expected.as_slice());
        let z = unfold3x3(&Tensor::zeros(&[3, 4, 2])).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unfold_backward_is_adjoint() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = Tensor::uniform(&[2, 3, 4], 1.0, &mut rng);
        let g = Tensor::uniform(&[18, 3, 4], 1.0, &mut rng);
        let lhs: f64 = unfold3x3(&m).unwrap().data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = unfold3x3_backward(&g).unwrap().data().iter().zip(m.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn corner_diagonals() {
        assert_eq!(Corner::C00.diagonal(), Corner::C11);
        assert_eq!(Corner::C01.diagonal(), Corner::C10);
    }

    #[test]
    fn query_at_center_selects_that_latent() {
        let m = Tensor::new(vec![1, 3, 3], (0..9).map(f64::from).collect()).unwrap();
        let fm = FeatureMapLatent::from_features(&m).unwrap();
        let q = QueryPoint::new(fm.center(1, 2), [0.1, 0.1]).unwrap();
        let s = nearest_latent(&fm, &q, Corner::C00);
        assert_eq!(s.index, (1, 2));
        assert_eq!(s.z, fm.latent(1, 2));
    }

    #[test]
    fn two_by_two_grid_origin_hits_four_latents() {
        let m = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let fm = FeatureMapLatent::from_features(&m).unwrap();
        let q = QueryPoint::new([0.0, 0.0], [1.0, 1.0]).unwrap();
        let idx: Vec<_> = Corner::ALL.iter().map(|&c| nearest_latent(&fm, &q, c).index).collect();
        assert_eq!(idx, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn border_query_clamps_to_edge_latent() {
        let fm = FeatureMapLatent::from_features(&Tensor::zeros(&[1, 2, 2])).unwrap();
        let q = QueryPoint::new([-0.9, -0.95], [0.1, 0.1]).unwrap();
        for c in Corner::ALL {
            assert_eq!(nearest_latent(&fm, &q, c).index, (0, 0));
        }
        let w = ensemble_weights(q.x, &[fm.center(0, 0); 4]);
        assert_eq!(w.0, [0.25; 4]);
    }

    #[test]
    fn weights_hand_examples() {
        let centers = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        assert_eq!(ensemble_weights([0.5, 0.5], &centers).0, [0.25; 4]);
        assert_eq!(ensemble_weights([0.0, 0.0], &centers).0, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            ensemble_weights([0.25, 0.25], &centers).0,
            [9.0 / 16.0, 3.0 / 16.0, 3.0 / 16.0, 1.0 / 16.0]
        );
    }

    #[test]
    fn one_collapsed_axis_keeps_partition() {
        // last row center: rows collapse, columns do not
        let centers = [[0.5, -0.5], [0.5, 0.5], [0.5, -0.5], [0.5, 0.5]];
        let w = ensemble_weights([0.5, 0.0], &centers);
        assert_eq!(w.0, [0.25; 4]);
        let w = ensemble_weights([0.5, -0.5], &centers);
        assert_eq!(w.0, [0.5, 0.0, 0.5, 0.0]);
    }

    /// Direct evaluation of the normalized diagonal-rectangle areas.
    fn area_oracle(x: [f64; 2], centers: &[[f64; 2]; 4]) -> [f64; 4] {
        let mut s = [0.0; 4];
        for t in Corner::ALL {
            let p = centers[t.diagonal().index()];
            s[t.index()] = ((x[0] - p[0]) * (x[1] - p[1])).abs();
        }
        let total: f64 = s.iter().sum();
        s.map(|v| v / total)
    }

    proptest! {
        #[test]
        fn interior_weights_match_area_definition(
            h in 2usize..33, w in 2usize..33, u in 0.0f64..1.0, v in 0.0f64..1.0
        ) {
            let fm = FeatureMapLatent::from_features(&Tensor::zeros(&[1, h, w])).unwrap();
            let rows = fm.row_coords();
            let cols = fm.col_coords();
            let x = [
                rows[0] + u * (rows[h - 1] - rows[0]),
                cols[0] + v * (cols[w - 1] - cols[0]),
            ];
            let idx = fm.corner_indices(x);
            let centers = idx.map(|(r, c)| fm.center(r, c));
            let wts = ensemble_weights(x, &centers);
            prop_assert!(wts.0.iter().all(|&a| a >= 0.0));
            prop_assert!((wts.sum() - 1.0).abs() < 1e-12);
            let total: f64 = Corner::ALL
                .iter()
                .map(|t| {
                    let p = centers[t.diagonal().index()];
                    ((x[0] - p[0]) * (x[1] - p[1])).abs()
                })
                .sum();
            if total > 0.0 {
                let oracle = area_oracle(x, &centers);
                for k in 0..4 {
                    prop_assert!((wts.0[k] - oracle[k]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn corners_bracket_the_query(n in 1usize..40, x in -1.0f64..=1.0) {
            let coords = pixel_center_coords(n).unwrap();
            let (lo, hi) = axis_pair(&coords, x);
            prop_assert!(hi == lo || hi == lo + 1);
            if x >= coords[0] && x <= coords[n - 1] {
                prop_assert!(coords[lo] <= x && x <= coords[hi]);
            }
        }
    }
}
