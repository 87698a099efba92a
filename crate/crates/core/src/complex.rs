use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;

/// A bounded chain complex of finitely generated free modules, graded
/// 0..=top. `diffs[k]` maps degree k to degree k-1; `diffs[0]` has zero rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedComplex<R> {
    ranks: Vec<usize>,
    diffs: Vec<Mat<R>>,
    labels: Vec<Vec<String>>,
}

impl<R: Scalar> GradedComplex<R> {
    pub fn new(diffs: Vec<Mat<R>>, labels: Vec<Vec<String>>) -> Result<Self> {
        assert!(!diffs.is_empty());
        let ranks: Vec<usize> = diffs.iter().map(|d| d.cols()).collect();
        assert_eq!(labels.len(), ranks.len());
        for (k, l) in labels.iter().enumerate() {
            assert_eq!(l.len(), ranks[k], "label count mismatch in degree {}", k);
        }
        if diffs[0].rows() != 0 {
            return Err(Error::InvalidComplex { degree: 0 });
        }
        for k in 1..diffs.len() {
            if diffs[k].rows() != ranks[k - 1] {
                return Err(Error::InvalidComplex { degree: k });
            }
        }
        for k in 1..diffs.len() {
            if !diffs[k - 1].mul(&diffs[k]).is_zero() {
                return Err(Error::InvalidComplex { degree: k });
            }
        }
        Ok(GradedComplex { ranks, diffs, labels })
    }

    pub fn with_default_labels(diffs: Vec<Mat<R>>) -> Result<Self> {
        let labels = diffs
            .iter()
            .enumerate()
            .map(|(k, d)| (0..d.cols()).map(|i| format!("c{}_{}", k, i)).collect())
            .collect();
        Self::new(diffs, labels)
    }

    pub fn top_degree(&self) -> usize {
        self.ranks.len() - 1
    }

    pub fn rank(&self, k: usize) -> usize {
        if k < self.ranks.len() {
            self.ranks[k]
        } else {
            0
        }
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn diff(&self, k: usize) -> &Mat<R> {
        &self.diffs[k]
    }

    pub fn labels(&self, k: usize) -> &[String] {
        &self.labels[k]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.ranks
            .iter()
            .enumerate()
            .map(|(k, &r)| if k % 2 == 0 { r as i64 } else { -(r as i64) })
            .sum()
    }

    /// Same complex with basis vector i of degree k rescaled by signs[k][i].
    /// All sign entries must be +1 or -1 (so the change of basis is its own
    /// inverse and incidence matrices conjugate entrywise).
    pub fn conjugate_by_signs(&self, signs: &[Vec<R>]) -> Self {
        assert_eq!(signs.len(), self.ranks.len());
        for (k, s) in signs.iter().enumerate() {
            assert_eq!(s.len(), self.ranks[k]);
            assert!(s.iter().all(|x| x.abs().is_one()));
        }
        let mut diffs = self.diffs.clone();
        for k in 1..diffs.len() {
            let m = &mut diffs[k];
            for (i, s) in signs[k - 1].iter().enumerate() {
                m.scale_row(i, s);
            }
            for (j, s) in signs[k].iter().enumerate() {
                m.scale_col(j, s);
            }
        }
        GradedComplex {
            ranks: self.ranks.clone(),
            diffs,
            labels: self.labels.clone(),
        }
    }

    /// Reflected dual: degree p of the result is the dual of degree n - p,
    /// with plain transposed differentials (no extra signs; the square of a
    /// transpose is still zero).
    pub fn reflected_dual(&self, n: usize) -> Self {
        assert!(n >= self.top_degree());
        let ranks: Vec<usize> = (0..=n).map(|p| self.rank(n - p)).collect();
        let mut diffs = Vec::with_capacity(n + 1);
        diffs.push(Mat::zeros(0, ranks[0]));
        for p in 1..=n {
            let q = n - p + 1;
            if q <= self.top_degree() {
                diffs.push(self.diffs[q].transpose());
            } else {
                diffs.push(Mat::zeros(ranks[p - 1], ranks[p]));
            }
        }
        let labels = (0..=n)
            .map(|p| {
                if n - p < self.labels.len() {
                    self.labels[n - p].iter().map(|l| format!("{}*", l)).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        GradedComplex { ranks, diffs, labels }
    }
}

/// A degreewise map of complexes; `mats[k]` maps src degree k to dst degree k.
/// Degrees beyond either top are implicitly zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainMap<R> {
    pub mats: Vec<Mat<R>>,
}

impl<R: Scalar> ChainMap<R> {
    pub fn mat(&self, k: usize) -> Option<&Mat<R>> {
        self.mats.get(k)
    }

    pub fn compose(&self, inner: &ChainMap<R>) -> ChainMap<R> {
        let n = self.mats.len().min(inner.mats.len());
        ChainMap {
            mats: (0..n).map(|k| self.mats[k].mul(&inner.mats[k])).collect(),
        }
    }
}

/// Checks shapes and the chain-map square d_dst m = m d_src in every degree.
pub fn validate_chain_map<R: Scalar>(
    src: &GradedComplex<R>,
    dst: &GradedComplex<R>,
    m: &ChainMap<R>,
) -> Result<()> {
    for (k, mk) in m.mats.iter().enumerate() {
        if mk.cols() != src.rank(k) || mk.rows() != dst.rank(k) {
            return Err(Error::NotAChainMap { degree: k });
        }
    }
    let top = src.top_degree().max(dst.top_degree());
    let get = |k: usize| -> Mat<R> {
        m.mats
            .get(k)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(dst.rank(k), src.rank(k)))
    };
    for k in 1..=top {
        let lhs = if k <= dst.top_degree() {
            dst.diff(k).mul(&get(k))
        } else {
            Mat::zeros(dst.rank(k - 1), src.rank(k))
        };
        let rhs = if k <= src.top_degree() {
            get(k - 1).mul(src.diff(k))
        } else {
            Mat::zeros(dst.rank(k - 1), src.rank(k))
        };
        if lhs != rhs {
            return Err(Error::NotAChainMap { degree: k });
        }
    }
    Ok(())
}

/// Mapping cone of m: src -> dst. Degree k is dst_k (+) src_{k-1}; the cone
/// is acyclic exactly when m is a quasi-isomorphism.
pub fn cone<R: Scalar>(
    src: &GradedComplex<R>,
    dst: &GradedComplex<R>,
    m: &ChainMap<R>,
) -> Result<GradedComplex<R>> {
    validate_chain_map(src, dst, m)?;
    let top = dst.top_degree().max(src.top_degree() + 1);
    let mat = |k: usize| -> Mat<R> {
        m.mats
            .get(k)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(dst.rank(k), src.rank(k)))
    };
    let dd = |c: &GradedComplex<R>, k: usize| -> Mat<R> {
        if k == 0 {
            Mat::zeros(0, c.rank(0))
        } else if k <= c.top_degree() {
            c.diff(k).clone()
        } else {
            Mat::zeros(c.rank(k - 1), c.rank(k))
        }
    };
    let mut diffs = Vec::with_capacity(top + 1);
    diffs.push(Mat::zeros(0, dst.rank(0)));
    for k in 1..=top {
        let a = dd(dst, k);
        let b = mat(k - 1);
        let d_src = dd(src, k - 1).neg();
        let zero = Mat::zeros(d_src.rows(), dst.rank(k));
        diffs.push(a.hstack(&b).vstack(&zero.hstack(&d_src)));
    }
    let labels = (0..=top)
        .map(|k| {
            let mut l: Vec<String> = if k <= dst.top_degree() {
                dst.labels(k).iter().map(|s| format!("d:{}", s)).collect()
            } else {
                Vec::new()
            };
            if k >= 1 && k - 1 <= src.top_degree() {
                l.extend(src.labels(k - 1).iter().map(|s| format!("s:{}", s)));
            }
            l
        })
        .collect();
    GradedComplex::new(diffs, labels)
}

/// Sum of sub and quot twisted by phi[k]: quot_k -> sub_{k-1}. Requires the
/// compatibility d_sub phi = -phi d_quot; returns the total complex together
/// with the degreewise inclusion of sub and projection onto quot.
pub fn twisted_sum<R: Scalar>(
    sub: &GradedComplex<R>,
    quot: &GradedComplex<R>,
    phi: &[Mat<R>],
) -> Result<(GradedComplex<R>, ChainMap<R>, ChainMap<R>)> {
    let top = sub.top_degree().max(quot.top_degree());
    let get_phi = |k: usize| -> Mat<R> {
        phi.get(k)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(if k == 0 { 0 } else { sub.rank(k - 1) }, quot.rank(k)))
    };
    for k in 0..=top {
        let p = get_phi(k);
        let want_rows = if k == 0 { 0 } else { sub.rank(k - 1) };
        if p.rows() != want_rows || p.cols() != quot.rank(k) {
            return Err(Error::TwistNotCompatible { degree: k });
        }
    }
    let dd = |c: &GradedComplex<R>, k: usize| -> Mat<R> {
        if k == 0 {
            Mat::zeros(0, c.rank(0))
        } else if k <= c.top_degree() {
            c.diff(k).clone()
        } else {
            Mat::zeros(c.rank(k - 1), c.rank(k))
        }
    };
    for k in 1..=top {
        // d_sub[k-1] phi[k] must cancel phi[k-1] d_quot[k]
        let lhs = dd(sub, k - 1).mul(&get_phi(k));
        let rhs = get_phi(k - 1).mul(&dd(quot, k).neg());
        if lhs != rhs {
            return Err(Error::TwistNotCompatible { degree: k });
        }
    }
    let mut diffs = Vec::with_capacity(top + 1);
    for k in 0..=top {
        let a = dd(sub, k);
        let d = dd(quot, k);
        let b = get_phi(k);
        let zero = Mat::zeros(d.rows(), sub.rank(k));
        diffs.push(a.hstack(&b).vstack(&zero.hstack(&d)));
    }
    let labels: Vec<Vec<String>> = (0..=top)
        .map(|k| {
            let mut l: Vec<String> = if k <= sub.top_degree() {
                sub.labels(k).to_vec()
            } else {
                Vec::new()
            };
            if k <= quot.top_degree() {
                l.extend(quot.labels(k).iter().cloned());
            }
            l
        })
        .collect();
    let total = GradedComplex::new(diffs, labels)?;
    let incl = ChainMap {
        mats: (0..=top)
            .map(|k| {
                Mat::from_fn(total.rank(k), sub.rank(k), |i, j| {
                    if i == j {
                        R::one()
                    } else {
                        R::zero()
                    }
                })
            })
            .collect(),
    };
    let proj = ChainMap {
        mats: (0..=top)
            .map(|k| {
                let off = sub.rank(k);
                Mat::from_fn(quot.rank(k), total.rank(k), |i, j| {
                    if j == off + i {
                        R::one()
                    } else {
                        R::zero()
                    }
                })
            })
            .collect(),
    };
    validate_chain_map(sub, &total, &incl)?;
    validate_chain_map(&total, quot, &proj)?;
    Ok((total, incl, proj))
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Mat<i64>;

    fn circle() -> GradedComplex<i64> {
        // one vertex, one loop edge
        GradedComplex::with_default_labels(vec![M::zeros(0, 1), M::zeros(1, 1)]).unwrap()
    }

    fn interval() -> GradedComplex<i64> {
        GradedComplex::with_default_labels(vec![
            M::zeros(0, 2),
            M::from_i64_rows(&[&[-1], &[1]]),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_nonsquaring_differential() {
        let bad = GradedComplex::with_default_labels(vec![
            M::zeros(0, 1),
            M::from_i64_rows(&[&[1]]),
            M::from_i64_rows(&[&[1]]),
        ]);
        assert!(matches!(bad, Err(Error::InvalidComplex { degree: 2 })));
    }

    #[test]
    fn chain_map_validation() {
        let c = interval();
        let id = ChainMap {
            mats: vec![M::identity(2), M::identity(1)],
        };
        validate_chain_map(&c, &c, &id).unwrap();
        let bad = ChainMap {
            mats: vec![M::identity(2), M::from_i64_rows(&[&[2]])],
        };
        assert!(validate_chain_map(&c, &c, &bad).is_err());
    }

    #[test]
    fn cone_of_identity_is_acyclic_shape() {
        let c = circle();
        let id = ChainMap {
            mats: vec![M::identity(1), M::identity(1)],
        };
        let cone = cone(&c, &c, &id).unwrap();
        assert_eq!(cone.ranks(), &[1, 2, 1]);
        // d1 of the cone kills the shifted vertex against the base vertex
        assert_eq!(*cone.diff(1).at(0, 1), 1);
    }

    #[test]
    fn twisted_sum_demands_compatibility() {
        let sub = interval();
        let quot = circle();
        // phi[1]: quot_1 -> sub_0 must satisfy d_sub phi = -phi d_quot = 0,
        // which fails unless phi lands in cycles; sub_0 has no differential so
        // any phi works in this low degree. Check shape errors instead.
        let bad_phi = vec![M::zeros(0, 1), M::zeros(1, 1)];
        assert!(twisted_sum(&sub, &quot, &bad_phi).is_err());
        let phi = vec![M::zeros(0, 1), M::zeros(2, 1)];
        let (total, incl, proj) = twisted_sum(&sub, &quot, &phi).unwrap();
        assert_eq!(total.ranks(), &[3, 2]);
        assert_eq!(incl.mats[0].rows(), 3);
        assert_eq!(proj.mats[0].rows(), 1);
    }

    #[test]
    fn twisted_sum_with_real_twist() {
        // sub = interval (v0, v1; e with de = v1 - v0), quot = point shifted:
        // quot has one generator in degree 1 and none in degree 0.
        let sub = interval();
        let quot =
            GradedComplex::with_default_labels(vec![M::zeros(0, 0), M::zeros(0, 1)]).unwrap();
        let phi = vec![M::zeros(0, 0), M::from_i64_rows(&[&[1], &[0]])];
        let (total, _, _) = twisted_sum(&sub, &quot, &phi).unwrap();
        assert_eq!(total.ranks(), &[2, 2]);
        assert_eq!(*total.diff(1).at(0, 1), 1);
    }

    #[test]
    fn reflected_dual_reverses_grading() {
        let c = interval();
        let d = c.reflected_dual(2);
        assert_eq!(d.ranks(), &[0, 1, 2]);
        assert_eq!(d.diff(2), &c.diff(1).transpose());
    }

    #[test]
    fn sign_conjugation_is_involutive() {
        let c = interval();
        let signs = vec![vec![1, -1], vec![-1]];
        let twice = c.conjugate_by_signs(&signs).conjugate_by_signs(&signs);
        assert_eq!(twice, c);
    }
}
