use crate::scalar::Scalar;

/// Dense matrix over an exact ring, row major.
///
/// Sizes in this crate stay small (cells of a coarse mesh, or critical
/// points), so dense storage is fine; the hot loops still skip zero entries
/// because boundary matrices are extremely sparse.
#[derive(Clone, PartialEq, Eq)]
pub struct Mat<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: std::fmt::Debug> std::fmt::Debug for Mat<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:?}", self.data[i * self.cols + j]))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl<R: Scalar> Mat<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, R::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> R) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Convenience constructor for tests and hand-authored data.
    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| R::from_i64(rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &R {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: R) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn neg(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| -self.at(i, j).clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| {
            self.at(i, j).clone() + other.at(i, j).clone()
        })
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| {
            self.at(i, j).clone() - other.at(i, j).clone()
        })
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in mul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.at(i, j).clone();
                    out.set(i, j, cur + a.clone() * b.clone());
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[R]) -> Vec<R> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![R::zero(); self.rows];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() || v[k].is_zero() {
                    continue;
                }
                out[i] = out[i].clone() + a.clone() * v[k].clone();
            }
        }
        out
    }

    pub fn col(&self, j: usize) -> Vec<R> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn from_cols(rows: usize, cols: &[Vec<R>]) -> Self {
        Self::from_fn(rows, cols.len(), |i, j| cols[j][i].clone())
    }

    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self.at(i, j).clone()
            } else {
                other.at(i, j - self.cols).clone()
            }
        })
    }

    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols);
        Self::from_fn(self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows {
                self.at(i, j).clone()
            } else {
                other.at(i - self.rows, j).clone()
            }
        })
    }

    /// [[a, b], [c, d]] block assembly.
    pub fn block2x2(a: &Self, b: &Self, c: &Self, d: &Self) -> Self {
        a.hstack(b).vstack(&c.hstack(d))
    }

    pub fn submatrix(&self, row_ids: &[usize], col_ids: &[usize]) -> Self {
        Self::from_fn(row_ids.len(), col_ids.len(), |i, j| {
            self.at(row_ids[i], col_ids[j]).clone()
        })
    }

    pub fn scale_col(&mut self, j: usize, s: &R) {
        for i in 0..self.rows {
            let v = self.at(i, j).clone() * s.clone();
            self.set(i, j, v);
        }
    }

    pub fn scale_row(&mut self, i: usize, s: &R) {
        for j in 0..self.cols {
            let v = self.at(i, j).clone() * s.clone();
            self.set(i, j, v);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// col_dst += q * col_src
    pub fn add_mul_col(&mut self, dst: usize, src: usize, q: &R) {
        if q.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let s = self.at(i, src).clone();
            if s.is_zero() {
                continue;
            }
            let v = self.at(i, dst).clone() + q.clone() * s;
            self.set(i, dst, v);
        }
    }

    /// row_dst += q * row_src
    pub fn add_mul_row(&mut self, dst: usize, src: usize, q: &R) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let s = self.at(src, j).clone();
            if s.is_zero() {
                continue;
            }
            let v = self.at(dst, j).clone() + q.clone() * s;
            self.set(dst, j, v);
        }
    }

    /// Canonical basis of the column lattice: column-style Hermite normal
    /// form with positive pivots on strictly increasing pivot rows, entries
    /// left of a pivot reduced into [0, pivot). Zero columns are dropped, so
    /// two matrices span the same column lattice iff their forms are equal.
    pub fn hnf_cols(&self) -> Self {
        let mut m = self.clone();
        let mut cur = 0usize;
        for r in 0..m.rows {
            if cur == m.cols {
                break;
            }
            loop {
                // Pick the column (>= cur) with smallest nonzero |entry| in row r.
                let mut best: Option<usize> = None;
                for j in cur..m.cols {
                    if m.at(r, j).is_zero() {
                        continue;
                    }
                    best = match best {
                        None => Some(j),
                        Some(b) => {
                            if m.at(r, j).abs() < m.at(r, b).abs() {
                                Some(j)
                            } else {
                                Some(b)
                            }
                        }
                    };
                }
                let Some(b) = best else { break };
                m.swap_cols(cur, b);
                let mut done = true;
                let pivot = m.at(r, cur).clone();
                for j in cur + 1..m.cols {
                    if m.at(r, j).is_zero() {
                        continue;
                    }
                    let q = -m.at(r, j).div_floor(&pivot);
                    m.add_mul_col(j, cur, &q);
                    if !m.at(r, j).is_zero() {
                        done = false;
                    }
                }
                if done {
                    break;
                }
            }
            if m.at(r, cur).is_zero() {
                continue;
            }
            if m.at(r, cur).is_negative() {
                let neg_one = -R::one();
                m.scale_col(cur, &neg_one);
            }
            let pivot = m.at(r, cur).clone();
            for j in 0..cur {
                if m.at(r, j).is_zero() {
                    continue;
                }
                let q = -m.at(r, j).div_floor(&pivot);
                m.add_mul_col(j, cur, &q);
            }
            cur += 1;
        }
        Self::from_fn(m.rows, cur, |i, j| m.at(i, j).clone())
    }

    /// Fraction-free determinant (Bareiss). Square matrices only; every
    /// division in the recurrence is exact.
    pub fn det_bareiss(&self) -> R {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return R::one();
        }
        let mut a = self.clone();
        let mut sign = R::one();
        let mut prev = R::one();
        for k in 0..n - 1 {
            if a.at(k, k).is_zero() {
                let swap = (k + 1..n).find(|&i| !a.at(i, k).is_zero());
                match swap {
                    Some(i) => {
                        a.swap_rows(k, i);
                        sign = -sign;
                    }
                    None => return R::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = a.at(k, k).clone() * a.at(i, j).clone()
                        - a.at(i, k).clone() * a.at(k, j).clone();
                    a.set(i, j, num / prev.clone());
                }
            }
            for i in k + 1..n {
                a.set(i, k, R::zero());
            }
            prev = a.at(k, k).clone();
        }
        sign * a.at(n - 1, n - 1).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Mat<i64>;

    #[test]
    fn mul_identity() {
        let a = M::from_i64_rows(&[&[1, 2], &[3, 4], &[5, 6]]);
        assert_eq!(a.mul(&M::identity(2)), a);
        assert_eq!(M::identity(3).mul(&a), a);
    }

    #[test]
    fn hnf_is_lattice_canonical() {
        // Same column lattice, different generating sets.
        let a = M::from_i64_rows(&[&[2, 0], &[0, 3]]);
        let b = M::from_i64_rows(&[&[2, 2, 4], &[3, 0, 6]]);
        // b's columns: (2,3), (2,0), (4,6). Lattice of b contains (0,3) =
        // (2,3)-(2,0) and (2,0), so it equals span{(2,0),(0,3)}.
        assert_eq!(a.hnf_cols(), b.hnf_cols());
    }

    #[test]
    fn hnf_drops_zero_columns() {
        let a = M::from_i64_rows(&[&[0, 1], &[0, 0]]);
        let h = a.hnf_cols();
        assert_eq!((h.rows(), h.cols()), (2, 1));
        assert_eq!(*h.at(0, 0), 1);
    }

    #[test]
    fn bareiss_matches_small_cases() {
        let a = M::from_i64_rows(&[&[2, 4], &[6, 8]]);
        assert_eq!(a.det_bareiss(), -8);
        let b = M::from_i64_rows(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 10]]);
        assert_eq!(b.det_bareiss(), -3);
        let s = M::from_i64_rows(&[&[0, 1], &[1, 0]]);
        assert_eq!(s.det_bareiss(), -1);
    }
}
