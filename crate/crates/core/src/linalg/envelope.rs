use crate::Scalar;

/// Symmetric matrix stored by the envelope (profile) of its lower triangle:
/// row `i` keeps columns `first[i]..=i`. Cholesky factorization happens in
/// place and creates no fill outside the envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeMatrix<T> {
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<T>,
    factored: bool,
}

impl<T: Scalar> EnvelopeMatrix<T> {
    pub fn zeros(first: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "envelope start beyond the diagonal in row {i}");
            offsets.push(total);
            total += i - f + 1;
        }
        offsets.push(total);
        Self { first, offsets, values: vec![T::zero(); total], factored: false }
    }

    pub fn order(&self) -> usize {
        self.first.len()
    }

    pub fn stored_len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    fn row(&self, i: usize) -> &[T] {
        &self.values[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Adds `v` at `(i, j)`; requires `first[max(i,j)] <= min(i,j)`.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let f = self.first[r];
        assert!(c >= f, "entry ({r}, {c}) lies outside the envelope");
        self.values[self.offsets[r] + c - f] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let f = self.first[r];
        if c < f {
            T::zero()
        } else {
            self.values[self.offsets[r] + c - f]
        }
    }

    /// In-place `L·Lᵀ` factorization. Returns the failing row on a
    /// non-positive pivot.
    pub fn cholesky_in_place(&mut self) -> Result<(), usize> {
        let n = self.order();
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offsets[i];
            for j in fi..=i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let oj = self.offsets[j];
                let mut s = self.values[oi + j - fi];
                // Σ_k L_ik L_jk, k in start..j
                let li = &self.values[oi + start - fi..oi + j - fi];
                let lj = &self.values[oj + start - fj..oj + j - fj];
                s -= super::dot(li, lj);
                if j == i {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(i);
                    }
                    self.values[oi + i - fi] = s.sqrt();
                } else {
                    let ljj = self.values[oj + j - fj];
                    self.values[oi + j - fi] = s / ljj;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A·x = b` in place using the stored factor.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert!(self.factored, "solve requires a factored matrix");
        let n = self.order();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.row(i);
            let s = super::dot(&row[..i - fi], &b[fi..i]);
            b[i] = (b[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            b[i] /= row[i - fi];
            let xi = b[i];
            for (bk, &l) in b[fi..i].iter_mut().zip(&row[..i - fi]) {
                *bk -= l * xi;
            }
        }
    }
}
