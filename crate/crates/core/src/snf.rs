use crate::matrix::Mat;
use crate::scalar::Scalar;

/// Smith normal form u * a * v = d, with d diagonal, d1 | d2 | ..., di >= 0,
/// and u, v unimodular. Inverses are tracked alongside so that solving and
/// generator extraction never need a separate inversion pass.
pub struct Snf<R> {
    pub u: Mat<R>,
    pub u_inv: Mat<R>,
    pub d: Mat<R>,
    pub v: Mat<R>,
    pub v_inv: Mat<R>,
    pub rank: usize,
}

impl<R: Scalar> Snf<R> {
    pub fn diagonal(&self) -> Vec<R> {
        let n = self.d.rows().min(self.d.cols());
        (0..n).map(|i| self.d.at(i, i).clone()).collect()
    }

    /// Nontrivial invariant factors (> 1), in divisor order.
    pub fn torsion_divisors(&self) -> Vec<R> {
        self.diagonal()
            .into_iter()
            .filter(|x| !x.is_zero() && !x.is_one())
            .collect()
    }
}

struct Work<R> {
    a: Mat<R>,
    u: Mat<R>,
    u_inv: Mat<R>,
    v: Mat<R>,
    v_inv: Mat<R>,
}

impl<R: Scalar> Work<R> {
    fn swap_rows(&mut self, i: usize, j: usize) {
        self.a.swap_rows(i, j);
        self.u.swap_rows(i, j);
        self.u_inv.swap_cols(i, j);
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        self.a.swap_cols(i, j);
        self.v.swap_cols(i, j);
        self.v_inv.swap_rows(i, j);
    }

    /// row_dst += q * row_src
    fn add_mul_row(&mut self, dst: usize, src: usize, q: &R) {
        self.a.add_mul_row(dst, src, q);
        self.u.add_mul_row(dst, src, q);
        let neg_q = -q.clone();
        self.u_inv.add_mul_col(src, dst, &neg_q);
    }

    /// col_dst += q * col_src
    fn add_mul_col(&mut self, dst: usize, src: usize, q: &R) {
        self.a.add_mul_col(dst, src, q);
        self.v.add_mul_col(dst, src, q);
        let neg_q = -q.clone();
        self.v_inv.add_mul_row(src, dst, &neg_q);
    }

    fn negate_row(&mut self, i: usize) {
        let m = -R::one();
        self.a.scale_row(i, &m);
        self.u.scale_row(i, &m);
        self.u_inv.scale_col(i, &m);
    }
}

/// Deterministic Smith normal form. Pivot choice prefers units, then small
/// magnitude, then sparse rows/columns (to limit fill-in), then position;
/// identical inputs always produce identical u, d, v.
pub fn smith_normal_form<R: Scalar>(a: &Mat<R>) -> Snf<R> {
    let rows = a.rows();
    let cols = a.cols();
    let mut w = Work {
        a: a.clone(),
        u: Mat::identity(rows),
        u_inv: Mat::identity(rows),
        v: Mat::identity(cols),
        v_inv: Mat::identity(cols),
    };

    let mut t = 0usize;
    while t < rows && t < cols {
        if !select_pivot(&mut w, t) {
            break;
        }
        'outer: loop {
            clear_pivot_col(&mut w, t);
            clear_pivot_row(&mut w, t);
            // A row op while clearing the column can repopulate the row, so
            // repeat until both are clean.
            if (t + 1..cols).any(|j| !w.a.at(t, j).is_zero())
                || (t + 1..rows).any(|i| !w.a.at(i, t).is_zero())
            {
                continue 'outer;
            }
            // Pivot must divide the rest of the submatrix for the divisor
            // chain; fold a bad row in and keep reducing.
            let p = w.a.at(t, t).clone();
            for i in t + 1..rows {
                for j in t + 1..cols {
                    if !w.a.at(i, j).mod_floor(&p).is_zero() {
                        w.add_mul_row(t, i, &R::one());
                        continue 'outer;
                    }
                }
            }
            break 'outer;
        }
        if w.a.at(t, t).is_negative() {
            w.negate_row(t);
        }
        t += 1;
    }

    let rank = (0..rows.min(cols)).filter(|&i| !w.a.at(i, i).is_zero()).count();
    Snf {
        u: w.u,
        u_inv: w.u_inv,
        d: w.a,
        v: w.v,
        v_inv: w.v_inv,
        rank,
    }
}

/// Moves the best pivot of the lower-right submatrix to (t, t).
/// Returns false when the submatrix is zero.
fn select_pivot<R: Scalar>(w: &mut Work<R>, t: usize) -> bool {
    let rows = w.a.rows();
    let cols = w.a.cols();
    let mut row_nnz = vec![0usize; rows];
    let mut col_nnz = vec![0usize; cols];
    for i in t..rows {
        for j in t..cols {
            if !w.a.at(i, j).is_zero() {
                row_nnz[i] += 1;
                col_nnz[j] += 1;
            }
        }
    }
    let mut best: Option<(bool, R, usize, usize, usize)> = None;
    for i in t..rows {
        if row_nnz[i] == 0 {
            continue;
        }
        for j in t..cols {
            let x = w.a.at(i, j);
            if x.is_zero() {
                continue;
            }
            let key = (!x.abs().is_one(), x.abs(), row_nnz[i] + col_nnz[j], i, j);
            let better = match &best {
                None => true,
                Some(b) => key < *b,
            };
            if better {
                best = Some(key);
            }
        }
    }
    match best {
        None => false,
        Some((_, _, _, i, j)) => {
            w.swap_rows(t, i);
            w.swap_cols(t, j);
            true
        }
    }
}

fn clear_pivot_col<R: Scalar>(w: &mut Work<R>, t: usize) {
    let rows = w.a.rows();
    loop {
        if w.a.at(t, t).is_negative() {
            w.negate_row(t);
        }
        let p = w.a.at(t, t).clone();
        let mut leftover: Option<usize> = None;
        for i in t + 1..rows {
            if w.a.at(i, t).is_zero() {
                continue;
            }
            let q = -w.a.at(i, t).div_floor(&p);
            w.add_mul_row(i, t, &q);
            if !w.a.at(i, t).is_zero() {
                leftover = match leftover {
                    None => Some(i),
                    Some(k) => {
                        if w.a.at(i, t).abs() < w.a.at(k, t).abs() {
                            Some(i)
                        } else {
                            Some(k)
                        }
                    }
                };
            }
        }
        match leftover {
            None => return,
            // Remainder is strictly smaller than the pivot, so swapping it up
            // and repeating terminates (Euclid).
            Some(i) => w.swap_rows(t, i),
        }
    }
}

fn clear_pivot_row<R: Scalar>(w: &mut Work<R>, t: usize) {
    let cols = w.a.cols();
    loop {
        if w.a.at(t, t).is_negative() {
            w.negate_row(t);
        }
        let p = w.a.at(t, t).clone();
        let mut leftover: Option<usize> = None;
        for j in t + 1..cols {
            if w.a.at(t, j).is_zero() {
                continue;
            }
            let q = -w.a.at(t, j).div_floor(&p);
            w.add_mul_col(j, t, &q);
            if !w.a.at(t, j).is_zero() {
                leftover = match leftover {
                    None => Some(j),
                    Some(k) => {
                        if w.a.at(t, j).abs() < w.a.at(t, k).abs() {
                            Some(j)
                        } else {
                            Some(k)
                        }
                    }
                };
            }
        }
        match leftover {
            None => return,
            Some(j) => w.swap_cols(t, j),
        }
    }
}

/// Basis of the integer kernel lattice of `a` (saturated: every integer
/// kernel vector is an integer combination of the returned columns).
pub fn kernel_basis<R: Scalar>(a: &Mat<R>) -> Mat<R> {
    let snf = smith_normal_form(a);
    let cols = a.cols();
    let ker: Vec<Vec<R>> = (snf.rank..cols).map(|j| snf.v.col(j)).collect();
    Mat::from_cols(cols, &ker)
}

/// One integer solution x of a x = b for every column of b, or None when any
/// column has no integer solution. Deterministic (derived from the SNF).
pub fn solve<R: Scalar>(a: &Mat<R>, b: &Mat<R>) -> Option<Mat<R>> {
    assert_eq!(a.rows(), b.rows());
    let snf = smith_normal_form(a);
    let c = snf.u.mul(b);
    let mut y = Mat::zeros(a.cols(), b.cols());
    for col in 0..b.cols() {
        for i in 0..a.rows() {
            let ci = c.at(i, col);
            if i < snf.rank {
                let d = snf.d.at(i, i);
                let (q, r) = ci.div_mod_floor(d);
                if !r.is_zero() {
                    return None;
                }
                if i < y.rows() {
                    y.set(i, col, q);
                }
            } else if !ci.is_zero() {
                return None;
            }
        }
    }
    Some(snf.v.mul(&y))
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Mat<i64>;

    fn check(a: &M) -> Snf<i64> {
        let s = smith_normal_form(a);
        assert_eq!(s.u.mul(a).mul(&s.v), s.d, "u*a*v != d");
        assert_eq!(s.u.mul(&s.u_inv), M::identity(a.rows()));
        assert_eq!(s.v.mul(&s.v_inv), M::identity(a.cols()));
        assert_eq!(s.u.det_bareiss().abs(), 1);
        assert_eq!(s.v.det_bareiss().abs(), 1);
        // diagonal, nonnegative, divisor chain
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                if i != j {
                    assert_eq!(*s.d.at(i, j), 0);
                }
            }
        }
        let diag = s.diagonal();
        for k in 1..diag.len() {
            assert!(diag[k] >= 0);
            if diag[k - 1] != 0 {
                assert_eq!(diag[k] % diag[k - 1], 0, "divisor chain broken");
            } else {
                assert_eq!(diag[k], 0);
            }
        }
        s
    }

    #[test]
    fn identity_and_scalar() {
        let s = check(&M::identity(3));
        assert_eq!(s.diagonal(), vec![1, 1, 1]);
        let s = check(&M::from_i64_rows(&[&[2]]));
        assert_eq!(s.diagonal(), vec![2]);
    }

    #[test]
    fn two_by_two() {
        let s = check(&M::from_i64_rows(&[&[2, 4], &[6, 8]]));
        assert_eq!(s.diagonal(), vec![2, 4]);
    }

    #[test]
    fn rectangular_and_zero() {
        let s = check(&M::from_i64_rows(&[&[0, 0, 0], &[0, 0, 0]]));
        assert_eq!(s.rank, 0);
        let s = check(&M::from_i64_rows(&[&[1, 2, 3], &[4, 5, 6]]));
        assert_eq!(s.rank, 2);
        assert_eq!(s.diagonal(), vec![1, 3]);
    }

    #[test]
    fn kernel_and_solve() {
        let a = M::from_i64_rows(&[&[1, 2, 3], &[4, 5, 6]]);
        let k = kernel_basis(&a);
        assert_eq!(k.cols(), 1);
        assert!(a.mul(&k).is_zero());

        let b = M::from_i64_rows(&[&[6], &[15]]);
        let x = solve(&a, &b).expect("solvable");
        assert_eq!(a.mul(&x), b);

        // 2x = 1 has no integer solution
        let a2 = M::from_i64_rows(&[&[2]]);
        let b2 = M::from_i64_rows(&[&[1]]);
        assert!(solve(&a2, &b2).is_none());
        let b3 = M::from_i64_rows(&[&[4]]);
        assert_eq!(a2.mul(&solve(&a2, &b3).unwrap()), b3);
    }
}
