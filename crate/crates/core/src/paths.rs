/// Dense `(rows × paths × width)` array of per-path vectors, row-major in
/// time. Row `k` is the cross-section of all paths at grid point `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathArray {
    rows: usize,
    paths: usize,
    width: usize,
    data: Vec<f64>,
}

impl PathArray {
    pub fn zeros(rows: usize, paths: usize, width: usize) -> Self {
        PathArray { rows, paths, width, data: vec![0.0; rows * paths * width] }
    }

    pub fn from_vec(rows: usize, paths: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * paths * width, "PathArray shape mismatch");
        PathArray { rows, paths, width, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let s = self.paths * self.width;
        &self.data[k * s..(k + 1) * s]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.paths * self.width;
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn get(&self, k: usize, n: usize) -> &[f64] {
        let off = (k * self.paths + n) * self.width;
        &self.data[off..off + self.width]
    }

    pub fn get_mut(&mut self, k: usize, n: usize) -> &mut [f64] {
        let off = (k * self.paths + n) * self.width;
        &mut self.data[off..off + self.width]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// First row containing a NaN or infinity.
    pub fn first_non_finite_row(&self) -> Option<usize> {
        (0..self.rows).find(|&k| self.row(k).iter().any(|v| !v.is_finite()))
    }

    /// Squared L² norm over all entries, summed deterministically.
    pub fn norm_sq(&self) -> f64 {
        crate::reduce::tree_sum_slice(&self.data, |v| v * v)
    }

    /// Squared L² distance to another array of the same shape.
    pub fn dist_sq(&self, other: &PathArray) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        crate::reduce::tree_sum_indexed(self.data.len(), |i| {
            let d = self.data[i] - other.data[i];
            d * d
        })
    }
}
