use crate::complex::{cone, validate_chain_map, ChainMap, GradedComplex};
use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::snf::{kernel_basis, smith_normal_form, solve};

/// Homology of one degree, with explicit generating cycles and enough data to
/// express any cycle in those generators.
///
/// Internally: z is the canonical (column-HNF) basis of the saturated cycle
/// lattice, and u is the row transform of the Smith form of the boundary
/// lattice written in z-coordinates. In u-coordinates the boundary lattice is
/// diagonal, so classification is coordinatewise.
#[derive(Clone, Debug)]
pub struct DegreeHomology<R> {
    pub rank: usize,
    /// Orders of the cyclic torsion summands, in divisor order (each > 1).
    pub torsion: Vec<R>,
    /// Cycles generating the free summands.
    pub free_gens: Vec<Vec<R>>,
    /// Cycles generating the torsion summands; torsion_gens[i] has order torsion[i].
    pub torsion_gens: Vec<Vec<R>>,
    z: Mat<R>,
    u: Mat<R>,
    divisors: Vec<R>,
}

impl<R: Scalar> DegreeHomology<R> {
    /// Coordinates of a cycle in the chosen generators: free coordinates,
    /// then one residue per torsion summand (reduced into [0, order)).
    pub fn classify(&self, cycle: &[R]) -> Result<(Vec<R>, Vec<R>)> {
        let v = Mat::from_cols(cycle.len(), &[cycle.to_vec()]);
        let s = solve(&self.z, &v)
            .ok_or_else(|| Error::BadParameters("vector is not a cycle".into()))?;
        let t = self.u.mul(&s);
        let mut free = Vec::with_capacity(self.rank);
        let mut tors = Vec::with_capacity(self.torsion.len());
        for i in 0..self.z.cols() {
            if i < self.divisors.len() {
                let d = &self.divisors[i];
                if !d.is_one() {
                    tors.push(t.at(i, 0).mod_floor(d));
                }
            } else {
                free.push(t.at(i, 0).clone());
            }
        }
        Ok((free, tors))
    }

    pub fn is_trivial(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }

    /// Homology of the zero complex in this degree.
    pub fn trivial() -> Self {
        DegreeHomology {
            rank: 0,
            torsion: vec![],
            free_gens: vec![],
            torsion_gens: vec![],
            z: Mat::zeros(0, 0),
            u: Mat::zeros(0, 0),
            divisors: vec![],
        }
    }

    pub fn group(&self) -> (usize, Vec<R>) {
        (self.rank, self.torsion.clone())
    }
}

/// Integral homology in every degree 0..=top.
pub fn homology<R: Scalar>(c: &GradedComplex<R>) -> Vec<DegreeHomology<R>> {
    let top = c.top_degree();
    (0..=top)
        .map(|k| {
            let n = c.rank(k);
            let z = kernel_basis(c.diff(k)).hnf_cols();
            let b = if k < top {
                c.diff(k + 1).clone()
            } else {
                Mat::zeros(n, 0)
            };
            let x = solve(&z, &b).expect("boundaries lie in the saturated cycle lattice");
            let sx = smith_normal_form(&x);
            let gens = z.mul(&sx.u_inv);
            let divisors = sx.diagonal().into_iter().take(sx.rank).collect::<Vec<_>>();
            let mut free_gens = Vec::new();
            let mut torsion = Vec::new();
            let mut torsion_gens = Vec::new();
            for i in 0..z.cols() {
                if i < divisors.len() {
                    if !divisors[i].is_one() {
                        torsion.push(divisors[i].clone());
                        torsion_gens.push(gens.col(i));
                    }
                } else {
                    free_gens.push(gens.col(i));
                }
            }
            DegreeHomology {
                rank: free_gens.len(),
                torsion,
                free_gens,
                torsion_gens,
                z,
                u: sx.u,
                divisors,
            }
        })
        .collect()
}

/// "0", "Z", "Z^2 + Z/2", ...
pub fn group_string<R: Scalar>(rank: usize, torsion: &[R]) -> String {
    let mut parts = Vec::new();
    match rank {
        0 => {}
        1 => parts.push("Z".to_string()),
        r => parts.push(format!("Z^{}", r)),
    }
    for d in torsion {
        parts.push(format!("Z/{}", d));
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

/// The map a chain map induces in one degree of homology, written in the
/// generator bases of `DegreeHomology`.
#[derive(Clone, Debug)]
pub struct InducedMap<R> {
    /// dst free coordinates of the images of src free generators.
    pub free_block: Mat<R>,
    /// dst torsion residues of the images of src free generators.
    pub free_to_torsion: Mat<R>,
    /// dst torsion residues of the images of src torsion generators.
    pub torsion_block: Mat<R>,
}

pub fn induced_map_on_homology<R: Scalar>(
    mat: &Mat<R>,
    src: &DegreeHomology<R>,
    dst: &DegreeHomology<R>,
) -> Result<InducedMap<R>> {
    let push = |g: &Vec<R>| -> Result<(Vec<R>, Vec<R>)> {
        let img = mat.mul_vec(g);
        dst.classify(&img)
    };
    let mut free_cols: Vec<(Vec<R>, Vec<R>)> = Vec::new();
    for g in &src.free_gens {
        free_cols.push(push(g)?);
    }
    let mut tors_cols: Vec<Vec<R>> = Vec::new();
    for g in &src.torsion_gens {
        let (f, t) = push(g)?;
        // A torsion class has torsion image; its free coordinates vanish.
        if f.iter().any(|x| !x.is_zero()) {
            return Err(Error::InvariantViolation {
                which: "induced-map".into(),
                detail: "torsion generator mapped to an infinite-order class".into(),
            });
        }
        tors_cols.push(t);
    }
    let free_block = Mat::from_cols(dst.rank, &free_cols.iter().map(|c| c.0.clone()).collect::<Vec<_>>());
    let free_to_torsion = Mat::from_cols(
        dst.torsion.len(),
        &free_cols.iter().map(|c| c.1.clone()).collect::<Vec<_>>(),
    );
    let torsion_block = Mat::from_cols(dst.torsion.len(), &tors_cols);
    Ok(InducedMap {
        free_block,
        free_to_torsion,
        torsion_block,
    })
}

/// Whether m induces isomorphisms on homology in every degree.
///
/// Two independent routes must agree: the mapping cone has trivial homology,
/// and the induced maps are degreewise isomorphisms of the computed groups
/// (equal ranks and torsion, unimodular free block, surjective overall; a
/// surjection between isomorphic finitely generated groups is bijective).
pub fn is_quasi_isomorphism<R: Scalar>(
    src: &GradedComplex<R>,
    dst: &GradedComplex<R>,
    m: &ChainMap<R>,
) -> Result<bool> {
    validate_chain_map(src, dst, m)?;
    let cone_c = cone(src, dst, m)?;
    let via_cone = homology(&cone_c).iter().all(|h| h.is_trivial());

    let hs = homology(src);
    let hd = homology(dst);
    let top = src.top_degree().max(dst.top_degree());
    let mut via_induced = true;
    for k in 0..=top {
        let trivial = DegreeHomology::<R>::trivial();
        let s = hs.get(k).unwrap_or(&trivial);
        let d = hd.get(k).unwrap_or(&trivial);
        if s.rank != d.rank || s.torsion != d.torsion {
            via_induced = false;
            break;
        }
        if s.rank == 0 && s.torsion.is_empty() {
            continue;
        }
        let mk = m
            .mats
            .get(k)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(dst.rank(k), src.rank(k)));
        let ind = induced_map_on_homology(&mk, s, d)?;
        if s.rank > 0 && !ind.free_block.det_bareiss().abs().is_one() {
            via_induced = false;
            break;
        }
        if !d.torsion.is_empty() {
            // Surjectivity onto the full group: cokernel of all generator
            // images together with the dst presentation relations.
            let r = d.rank;
            let t = d.torsion.len();
            let images = ind
                .free_block
                .vstack(&ind.free_to_torsion)
                .hstack(&Mat::zeros(r, s.torsion.len()).vstack(&ind.torsion_block));
            let relations = Mat::zeros(r, t).vstack(&Mat::from_fn(t, t, |i, j| {
                if i == j {
                    d.torsion[i].clone()
                } else {
                    R::zero()
                }
            }));
            let full = images.hstack(&relations);
            let s_full = smith_normal_form(&full);
            let onto = s_full.rank == r + t
                && s_full.diagonal().iter().take(r + t).all(|x| x.is_one());
            if !onto {
                via_induced = false;
                break;
            }
        }
    }

    if via_cone != via_induced {
        return Err(Error::InvariantViolation {
            which: "quasi-iso".into(),
            detail: format!(
                "cone route says {}, induced-map route says {}",
                via_cone, via_induced
            ),
        });
    }
    Ok(via_cone)
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Mat<i64>;

    fn circle() -> GradedComplex<i64> {
        GradedComplex::with_default_labels(vec![M::zeros(0, 1), M::zeros(1, 1)]).unwrap()
    }

    #[test]
    fn circle_homology() {
        let h = homology(&circle());
        assert_eq!(h[0].group(), (1, vec![]));
        assert_eq!(h[1].group(), (1, vec![]));
    }

    #[test]
    fn projective_plane_homology() {
        // minimal model: one cell in each degree, d2 = 2, d1 = 0
        let c = GradedComplex::with_default_labels(vec![
            M::zeros(0, 1),
            M::zeros(1, 1),
            M::from_i64_rows(&[&[2]]),
        ])
        .unwrap();
        let h = homology(&c);
        assert_eq!(h[0].group(), (1, vec![]));
        assert_eq!(h[1].group(), (0, vec![2]));
        assert_eq!(h[2].group(), (0, vec![]));
    }

    #[test]
    fn classify_roundtrip() {
        let c = GradedComplex::with_default_labels(vec![
            M::zeros(0, 1),
            M::zeros(1, 2),
            M::from_i64_rows(&[&[2], &[0]]),
        ])
        .unwrap();
        let h = homology(&c);
        // degree 1: Z (+) Z/2
        assert_eq!(h[1].rank, 1);
        assert_eq!(h[1].torsion, vec![2]);
        let g = &h[1].free_gens[0];
        let (f, t) = h[1].classify(g).unwrap();
        assert_eq!(f, vec![1]);
        assert_eq!(t, vec![0]);
        let tg = &h[1].torsion_gens[0];
        let doubled: Vec<i64> = tg.iter().map(|x| 2 * x).collect();
        let (f2, t2) = h[1].classify(&doubled).unwrap();
        assert_eq!(f2, vec![0]);
        assert_eq!(t2, vec![0]);
    }

    #[test]
    fn identity_is_quasi_iso_and_doubling_is_not() {
        let c = circle();
        let id = ChainMap {
            mats: vec![M::identity(1), M::identity(1)],
        };
        assert!(is_quasi_isomorphism(&c, &c, &id).unwrap());
        let double = ChainMap {
            mats: vec![M::identity(1), M::from_i64_rows(&[&[2]])],
        };
        assert!(!is_quasi_isomorphism(&c, &c, &double).unwrap());
    }

    #[test]
    fn quasi_iso_detects_torsion_mismatch() {
        // src: S^1 model; dst: rp^2-like with torsion in degree 1
        let src = circle();
        let dst = GradedComplex::with_default_labels(vec![
            M::zeros(0, 1),
            M::zeros(1, 1),
            M::from_i64_rows(&[&[2]]),
        ])
        .unwrap();
        let m = ChainMap {
            mats: vec![M::identity(1), M::identity(1), M::zeros(1, 0)],
        };
        assert!(!is_quasi_isomorphism(&src, &dst, &m).unwrap());
    }
}
