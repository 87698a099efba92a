use crate::complex::{validate_chain_map, ChainMap, GradedComplex};
use crate::error::{Error, Result};
use crate::homology::{homology, DegreeHomology, InducedMap};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::snf::{kernel_basis, smith_normal_form, solve};

/// A degreewise short exact sequence of free complexes
/// 0 -> sub -> total -> quot -> 0.
#[derive(Clone, Debug)]
pub struct Ses<R> {
    pub sub: GradedComplex<R>,
    pub total: GradedComplex<R>,
    pub quot: GradedComplex<R>,
    pub incl: ChainMap<R>,
    pub proj: ChainMap<R>,
}

/// Chain-level exactness: incl injective, proj surjective (onto the full
/// integer lattice, not just up to finite index), im(incl) = ker(proj), and
/// both maps commute with the differentials.
pub fn check_exactness<R: Scalar>(ses: &Ses<R>) -> Result<()> {
    validate_chain_map(&ses.sub, &ses.total, &ses.incl)
        .map_err(|_| Error::NotExact { degree: 0, reason: "inclusion is not a chain map".into() })?;
    validate_chain_map(&ses.total, &ses.quot, &ses.proj)
        .map_err(|_| Error::NotExact { degree: 0, reason: "projection is not a chain map".into() })?;
    let top = ses.total.top_degree();
    for k in 0..=top {
        let i = &ses.incl.mats[k];
        let p = &ses.proj.mats[k];
        let si = smith_normal_form(i);
        if si.rank != i.cols() {
            return Err(Error::NotExact { degree: k, reason: "inclusion not injective".into() });
        }
        let sp = smith_normal_form(p);
        let onto = sp.rank == p.rows() && sp.diagonal().iter().take(sp.rank).all(|x| x.is_one());
        if !onto {
            return Err(Error::NotExact { degree: k, reason: "projection not surjective".into() });
        }
        if !p.mul(i).is_zero() {
            return Err(Error::NotExact { degree: k, reason: "proj o incl nonzero".into() });
        }
        let image = i.hnf_cols();
        let kernel = kernel_basis(p).hnf_cols();
        if image != kernel {
            return Err(Error::NotExact { degree: k, reason: "im(incl) != ker(proj)".into() });
        }
    }
    Ok(())
}

/// A homomorphism of finitely generated abelian groups, written on the
/// generator coordinates used by `DegreeHomology` (free generators first,
/// then one generator per torsion summand).
#[derive(Clone, Debug)]
pub struct GroupMap<R> {
    pub src_rank: usize,
    pub src_torsion: Vec<R>,
    pub dst_rank: usize,
    pub dst_torsion: Vec<R>,
    /// (dst_rank + dst torsion) x (src_rank + src torsion); torsion rows are
    /// residues mod the summand order.
    pub f: Mat<R>,
}

impl<R: Scalar> GroupMap<R> {
    pub fn src_gens(&self) -> usize {
        self.src_rank + self.src_torsion.len()
    }

    pub fn dst_gens(&self) -> usize {
        self.dst_rank + self.dst_torsion.len()
    }

    fn relations(rank: usize, torsion: &[R]) -> Mat<R> {
        let g = rank + torsion.len();
        Mat::from_fn(g, torsion.len(), |i, j| {
            if i == rank + j {
                torsion[j].clone()
            } else {
                R::zero()
            }
        })
    }

    /// Lattice in dst generator coordinates presenting the image subgroup
    /// (always contains the dst relation lattice).
    pub fn image_lattice(&self) -> Mat<R> {
        let rel = Self::relations(self.dst_rank, &self.dst_torsion);
        self.f.hstack(&rel).hnf_cols()
    }

    /// Lattice in src generator coordinates presenting the kernel subgroup.
    pub fn kernel_lattice(&self) -> Mat<R> {
        let rel = Self::relations(self.dst_rank, &self.dst_torsion);
        let ker = kernel_basis(&self.f.hstack(&rel));
        let g = self.src_gens();
        let cols: Vec<Vec<R>> = (0..ker.cols())
            .map(|j| (0..g).map(|i| ker.at(i, j).clone()).collect())
            .collect();
        let mut all = cols;
        // src relations map into the kernel but the projection of the kernel
        // basis already contains them; keep them anyway so the lattice is
        // manifestly a subgroup presentation.
        let rel_src = Self::relations(self.src_rank, &self.src_torsion);
        for j in 0..rel_src.cols() {
            all.push(rel_src.col(j));
        }
        Mat::from_cols(g, &all).hnf_cols()
    }

    /// Rank of the free-to-free block.
    pub fn free_rank(&self) -> usize {
        let rows: Vec<usize> = (0..self.dst_rank).collect();
        let cols: Vec<usize> = (0..self.src_rank).collect();
        smith_normal_form(&self.f.submatrix(&rows, &cols)).rank
    }

    pub fn from_induced(src: &DegreeHomology<R>, dst: &DegreeHomology<R>, ind: &InducedMap<R>) -> Self {
        let top = ind
            .free_block
            .hstack(&Mat::zeros(dst.rank, src.torsion.len()));
        let bottom = ind.free_to_torsion.hstack(&ind.torsion_block);
        GroupMap {
            src_rank: src.rank,
            src_torsion: src.torsion.clone(),
            dst_rank: dst.rank,
            dst_torsion: dst.torsion.clone(),
            f: top.vstack(&bottom),
        }
    }

    /// Build from explicit images: one dst cycle per src generator (free
    /// generators first, then torsion generators).
    pub fn from_images(
        src: &DegreeHomology<R>,
        dst: &DegreeHomology<R>,
        images: &[Vec<R>],
    ) -> Result<Self> {
        assert_eq!(images.len(), src.rank + src.torsion.len());
        let mut cols: Vec<Vec<R>> = Vec::with_capacity(images.len());
        for (j, img) in images.iter().enumerate() {
            let (free, tors) = dst.classify(img)?;
            if j >= src.rank && free.iter().any(|x| !x.is_zero()) {
                return Err(Error::InvariantViolation {
                    which: "group-map".into(),
                    detail: "torsion generator mapped to an infinite-order class".into(),
                });
            }
            let mut col = free;
            col.extend(tors);
            cols.push(col);
        }
        Ok(GroupMap {
            src_rank: src.rank,
            src_torsion: src.torsion.clone(),
            dst_rank: dst.rank,
            dst_torsion: dst.torsion.clone(),
            f: Mat::from_cols(dst.rank + dst.torsion.len(), &cols),
        })
    }

    pub fn trivial_source(dst_rank: usize, dst_torsion: Vec<R>) -> Self {
        GroupMap {
            src_rank: 0,
            src_torsion: vec![],
            dst_rank,
            dst_torsion,
            f: Mat::zeros(dst_rank, 0),
        }
    }

    pub fn trivial_target(src_rank: usize, src_torsion: Vec<R>) -> Self {
        let g = src_rank + src_torsion.len();
        GroupMap {
            src_rank,
            src_torsion,
            dst_rank: 0,
            dst_torsion: vec![],
            f: Mat::zeros(0, g),
        }
    }
}

/// im(prev) = ker(next) inside the shared middle group.
pub fn exact_at<R: Scalar>(prev: &GroupMap<R>, next: &GroupMap<R>) -> bool {
    prev.dst_rank == next.src_rank
        && prev.dst_torsion == next.src_torsion
        && prev.image_lattice() == next.kernel_lattice()
}

/// One named arrow of the long exact sequence.
#[derive(Clone, Debug)]
pub struct LesArrow<R> {
    /// "i", "p", or "del"
    pub kind: &'static str,
    /// Degree of the source group.
    pub degree: usize,
    pub map: GroupMap<R>,
}

#[derive(Clone, Debug)]
pub struct LesRecord<R> {
    pub h_sub: Vec<DegreeHomology<R>>,
    pub h_total: Vec<DegreeHomology<R>>,
    pub h_quot: Vec<DegreeHomology<R>>,
    /// Arrows in sequence order, top degree first:
    /// 0 -> H_top(sub) -i-> H_top(total) -p-> H_top(quot) -del-> H_{top-1}(sub) -> ...
    pub arrows: Vec<LesArrow<R>>,
}

impl<R: Scalar> LesRecord<R> {
    /// Exactness at every interior group (including injectivity at the very
    /// top of sub and surjectivity onto the very bottom of quot, via the
    /// padded trivial ends).
    pub fn verify(&self) -> Result<()> {
        for w in self.arrows.windows(2) {
            if !exact_at(&w[0].map, &w[1].map) {
                return Err(Error::NotExact {
                    degree: w[1].degree,
                    reason: format!("long sequence fails at {}_{}", w[1].kind, w[1].degree),
                });
            }
        }
        Ok(())
    }

    /// Free rank of each connecting map, keyed by source degree.
    pub fn connecting_free_ranks(&self) -> Vec<(usize, usize)> {
        self.arrows
            .iter()
            .filter(|a| a.kind == "del")
            .map(|a| (a.degree, a.map.free_rank()))
            .collect()
    }
}

/// Homology long exact sequence of a chain-level short exact sequence.
/// The connecting map lifts a quot cycle through proj, differentiates, and
/// pulls back through incl; exactness of the chain level makes every step an
/// integer solve.
pub fn long_exact_sequence<R: Scalar>(ses: &Ses<R>) -> Result<LesRecord<R>> {
    check_exactness(ses)?;
    let h_sub = homology(&ses.sub);
    let h_total = homology(&ses.total);
    let h_quot = homology(&ses.quot);
    let top = ses.total.top_degree();

    let at = |hs: &[DegreeHomology<R>], k: usize| -> DegreeHomology<R> {
        hs.get(k).cloned().unwrap_or_else(DegreeHomology::trivial)
    };

    let mut arrows = Vec::new();
    for k in (0..=top).rev() {
        let hs_k = at(&h_sub, k);
        let ht_k = at(&h_total, k);
        let hq_k = at(&h_quot, k);

        let i_imgs: Vec<Vec<R>> = hs_k
            .free_gens
            .iter()
            .chain(hs_k.torsion_gens.iter())
            .map(|g| ses.incl.mats[k].mul_vec(g))
            .collect();
        arrows.push(LesArrow {
            kind: "i",
            degree: k,
            map: GroupMap::from_images(&hs_k, &ht_k, &i_imgs)?,
        });

        let p_imgs: Vec<Vec<R>> = ht_k
            .free_gens
            .iter()
            .chain(ht_k.torsion_gens.iter())
            .map(|g| ses.proj.mats[k].mul_vec(g))
            .collect();
        arrows.push(LesArrow {
            kind: "p",
            degree: k,
            map: GroupMap::from_images(&ht_k, &hq_k, &p_imgs)?,
        });

        if k > 0 {
            let hs_prev = at(&h_sub, k - 1);
            let del_imgs: Vec<Vec<R>> = hq_k
                .free_gens
                .iter()
                .chain(hq_k.torsion_gens.iter())
                .map(|g| connecting_image(ses, k, g))
                .collect::<Result<_>>()?;
            arrows.push(LesArrow {
                kind: "del",
                degree: k,
                map: GroupMap::from_images(&hq_k, &hs_prev, &del_imgs)?,
            });
        }
    }

    // pad the ends with trivial arrows so verify() covers the boundary groups
    let first_src = &arrows[0].map;
    let head = GroupMap::trivial_source(first_src.src_rank, first_src.src_torsion.clone());
    let last = &arrows[arrows.len() - 1].map;
    let tail = GroupMap::trivial_target(last.dst_rank, last.dst_torsion.clone());
    let mut all = Vec::with_capacity(arrows.len() + 2);
    all.push(LesArrow { kind: "i", degree: top + 1, map: head });
    all.extend(arrows);
    all.push(LesArrow { kind: "p", degree: 0, map: tail });

    Ok(LesRecord {
        h_sub,
        h_total,
        h_quot,
        arrows: all,
    })
}

fn connecting_image<R: Scalar>(ses: &Ses<R>, k: usize, quot_cycle: &[R]) -> Result<Vec<R>> {
    let c = Mat::from_cols(quot_cycle.len(), &[quot_cycle.to_vec()]);
    let x = solve(&ses.proj.mats[k], &c).ok_or_else(|| Error::NotExact {
        degree: k,
        reason: "projection admits no integer lift".into(),
    })?;
    let dx = ses.total.diff(k).mul(&x);
    let a = solve(&ses.incl.mats[k - 1], &dx).ok_or_else(|| Error::NotExact {
        degree: k,
        reason: "boundary of lift is not in the subcomplex".into(),
    })?;
    Ok(a.col(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::twisted_sum;

    type M = Mat<i64>;

    /// interval = cone over two points; sub = one endpoint, quot = rest
    fn interval_ses() -> Ses<i64> {
        let sub =
            GradedComplex::with_default_labels(vec![M::zeros(0, 1), M::zeros(1, 0)]).unwrap();
        let quot = GradedComplex::with_default_labels(vec![
            M::zeros(0, 1),
            M::from_i64_rows(&[&[1]]),
        ])
        .unwrap();
        // total = interval: d(e) = v1 - v0 with v0 in sub
        let phi = vec![M::zeros(0, 1), M::from_i64_rows(&[&[-1]])];
        let (total, incl, proj) = twisted_sum(&sub, &quot, &phi).unwrap();
        Ses { sub, total, quot, incl, proj }
    }

    #[test]
    fn interval_ses_is_exact() {
        let ses = interval_ses();
        check_exactness(&ses).unwrap();
        let les = long_exact_sequence(&ses).unwrap();
        les.verify().unwrap();
    }

    #[test]
    fn connecting_map_sees_the_circle() {
        // sub = point, total = interval, quot = interval/point: the quotient
        // has H_1 = 0 here, so instead glue both ends: d(e) = 0 in quot forces
        // the connecting map to carry the loop class down to degree 0.
        let sub =
            GradedComplex::with_default_labels(vec![M::zeros(0, 2), M::zeros(2, 0)]).unwrap();
        let quot =
            GradedComplex::with_default_labels(vec![M::zeros(0, 0), M::zeros(0, 1)]).unwrap();
        // total: two vertices, one edge from v0 to v1
        let phi = vec![M::zeros(0, 0), M::from_i64_rows(&[&[-1], &[1]])];
        let (total, incl, proj) = twisted_sum(&sub, &quot, &phi).unwrap();
        let ses = Ses { sub, total, quot, incl, proj };
        check_exactness(&ses).unwrap();
        let les = long_exact_sequence(&ses).unwrap();
        les.verify().unwrap();
        let ranks = les.connecting_free_ranks();
        assert_eq!(ranks, vec![(1, 1)]);
    }

    #[test]
    fn broken_projection_is_rejected() {
        let ses = interval_ses();
        let mut bad = ses.clone();
        bad.proj.mats[0] = M::from_i64_rows(&[&[0, 2]]);
        assert!(check_exactness(&bad).is_err());
    }
}
