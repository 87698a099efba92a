//! Chain-level pairing between the relative and absolute Morse complexes of
//! a field on a compact oriented surface with boundary.
//!
//! The reversed complex carries the relative generators with degree k
//! reindexed to n-k and the transposed differentials; the rising/falling
//! V-path symmetry (`eta_check`) makes that transposition the honest Morse
//! data of the reversed flow rather than a notational trick. A bridge built
//! from front/back face incidences carries the reversed complex into
//! simplicial chains, and the comparison map out of the absolute complex is
//! the unique-up-to-homotopy integral lift that agrees with the simplicial
//! inclusion on homology. Every link in that chain is re-verified at
//! runtime: the bridge and the comparison map must validate as chain maps
//! and quasi isomorphisms, the comparison must be natural over the mesh,
//! and the pairing must satisfy descent before any determinant is read.

use crate::complex::{validate_chain_map, ChainMap, GradedComplex};
use crate::error::{Error, Result};
use crate::extract::MorseData;
use crate::gradient::{eta_check, mesh_universe, CellFilter, Universe};
use crate::homology::{homology, is_quasi_isomorphism, DegreeHomology};
use crate::lower_star::interior_matching;
use crate::matrix::Mat;
use crate::mesh::Mesh;
use crate::scalar::Scalar;
use crate::snf::{kernel_basis, solve};

/// Per-degree signs making the bridge out of the reversed complex a chain
/// map. Forced by the face-incidence identity; the sign search in the tests
/// pins them as the unique normalization with leading +1.
const BRIDGE_SIGNS: [i64; 3] = [1, 1, -1];

/// Per-degree normalization of the pairing, chosen so descent carries the
/// sign (-1)^k. Forced by the chain-map property of the comparison; the
/// descent check re-verifies it on every run.
const PAIRING_SIGNS: [i64; 3] = [-1, -1, 1];

fn bump<R: Scalar>(m: &mut Mat<R>, r: usize, c: usize, v: R) {
    let cur = m.at(r, c).clone();
    m.set(r, c, cur + v);
}

/// Front/back face incidences of the oriented triangles: caps[q] maps
/// degree-q cochains to degree-(2-q) chains. For a sorted triangle
/// [v0,v1,v2] with coherent sign s the entries are s at (t, v0), at
/// ([v1,v2], [v0,v1]), and at (v2, t).
fn cap_matrices<R: Scalar>(mesh: &Mesh) -> [Mat<R>; 3] {
    let or = mesh.orientation().expect("caps need an oriented mesh");
    let n0 = mesh.n_vertices();
    let n1 = mesh.edges().len();
    let n2 = mesh.triangles().len();
    let mut caps = [
        Mat::zeros(n2, n0),
        Mat::zeros(n1, n1),
        Mat::zeros(n0, n2),
    ];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let s = R::from_i64(or[t] as i64);
        let [v0, v1, v2] = *tri;
        let e01 = mesh.edge_id(v0, v1).expect("triangle edge");
        let e12 = mesh.edge_id(v1, v2).expect("triangle edge");
        bump(&mut caps[0], t, v0, s.clone());
        bump(&mut caps[1], e12, e01, s.clone());
        bump(&mut caps[2], v2, t, s);
    }
    caps
}

/// Extension-by-zero of interior q-cochains into all q-cells, as a matrix
/// with one unit column per interior cell.
fn interior_extension<R: Scalar>(u_int: &Universe<R>, u_all: &Universe<R>, q: usize) -> Mat<R> {
    let all = u_all.cells(q);
    let int = u_int.cells(q);
    let mut m = Mat::zeros(all.len(), int.len());
    for (i, c) in int.iter().enumerate() {
        let row = all.binary_search(c).expect("interior cell is a mesh cell");
        m.set(row, i, R::one());
    }
    m
}

fn sign_rows<R: Scalar>(m: &Mat<R>, signs: &[i8]) -> Mat<R> {
    let mut out = m.clone();
    for (i, s) in signs.iter().enumerate() {
        if *s < 0 {
            out.scale_row(i, &R::from_i64(-1));
        }
    }
    out
}

fn sign_cols<R: Scalar>(m: &Mat<R>, signs: &[i8]) -> Mat<R> {
    let mut out = m.clone();
    for (j, s) in signs.iter().enumerate() {
        if *s < 0 {
            out.scale_col(j, &R::from_i64(-1));
        }
    }
    out
}

fn all_plus(c: &GradedComplex<impl Scalar>) -> Vec<Vec<i8>> {
    (0..=c.top_degree()).map(|k| vec![1i8; c.rank(k)]).collect()
}

fn check_signs(name: &str, signs: &[Vec<i8>], c: &GradedComplex<impl Scalar>) -> Result<()> {
    if signs.len() != c.top_degree() + 1 {
        return Err(Error::BadParameters(format!(
            "{} carries {} degrees for a complex with top degree {}",
            name,
            signs.len(),
            c.top_degree()
        )));
    }
    for (k, row) in signs.iter().enumerate() {
        if row.len() != c.rank(k) {
            return Err(Error::BadParameters(format!(
                "{} carries {} signs in degree {} for rank {}",
                name,
                row.len(),
                k,
                c.rank(k)
            )));
        }
        if row.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::BadParameters(format!("{} has a sign not in {{-1,1}}", name)));
        }
    }
    Ok(())
}

/// Bridge from the reversed complex into simplicial chains: in degree k the
/// composite of the dualized relative projection, extension by zero, and the
/// front/back cap, scaled by the frozen degree sign.
fn build_bridge<R: Scalar>(
    data: &MorseData<R>,
    u_int: &Universe<R>,
    u_all: &Universe<R>,
    caps: &[Mat<R>; 3],
) -> ChainMap<R> {
    let mats = (0..=2usize)
        .map(|k| {
            let q = 2 - k;
            let m = caps[q]
                .mul(&interior_extension(u_int, u_all, q))
                .mul(&data.relative.pi[q].transpose());
            if BRIDGE_SIGNS[k] < 0 {
                m.neg()
            } else {
                m
            }
        })
        .collect();
    ChainMap { mats }
}

/// Integral lift of the comparison map: the chain map gamma out of the
/// absolute complex into the reversed one whose composite with the bridge
/// agrees with the simplicial inclusion on every homology generator. The
/// pinning is expressed through the reduced composite of the absolute
/// projection with the bridge, which keeps every unknown critical-sized.
/// The solution lattice is reduced against its kernel so the lift is a
/// deterministic function of the input.
fn lift_comparison<R: Scalar>(
    c_minus: &GradedComplex<R>,
    c_rev: &GradedComplex<R>,
    n_mats: &[Mat<R>],
    minus_h: &[DegreeHomology<R>],
) -> Result<ChainMap<R>> {
    let top = 2usize;
    let a: Vec<usize> = (0..=top).map(|k| c_minus.rank(k)).collect();
    let r: Vec<usize> = (0..=top).map(|k| c_rev.rank(k)).collect();
    let mut gbase = vec![0usize; top + 2];
    for k in 0..=top {
        gbase[k + 1] = gbase[k] + r[k] * a[k];
    }
    let gvar = |k: usize, i: usize, j: usize| gbase[k] + i * a[k] + j;

    struct Pin<R> {
        degree: usize,
        gen: Vec<R>,
        wbase: usize,
        wlen: usize,
    }
    let mut nvars = gbase[top + 1];
    let mut pins: Vec<Pin<R>> = Vec::new();
    for (k, h) in minus_h.iter().enumerate() {
        let wlen = if k < top { a[k + 1] } else { 0 };
        for g in h.free_gens.iter().chain(h.torsion_gens.iter()) {
            pins.push(Pin {
                degree: k,
                gen: g.clone(),
                wbase: nvars,
                wlen,
            });
            nvars += wlen;
        }
    }

    let nrows: usize = (1..=top).map(|k| r[k - 1] * a[k]).sum::<usize>()
        + pins.iter().map(|p| a[p.degree]).sum::<usize>();
    let mut sys = Mat::zeros(nrows, nvars);
    let mut rhs = Mat::zeros(nrows, 1);
    let mut row = 0;
    // commuting squares: d_rev gamma_k - gamma_{k-1} d_minus = 0
    for k in 1..=top {
        let drev = c_rev.diff(k);
        let dm = c_minus.diff(k);
        for i in 0..r[k - 1] {
            for j in 0..a[k] {
                for c in 0..r[k] {
                    let v = drev.at(i, c).clone();
                    if !v.is_zero() {
                        bump(&mut sys, row, gvar(k, c, j), v);
                    }
                }
                for e in 0..a[k - 1] {
                    let v = dm.at(e, j).clone();
                    if !v.is_zero() {
                        bump(&mut sys, row, gvar(k - 1, i, e), -v);
                    }
                }
                row += 1;
            }
        }
    }
    // homology pinning: n gamma g - g is an exact boundary, witness included
    for p in &pins {
        let k = p.degree;
        let nk = &n_mats[k];
        for i in 0..a[k] {
            for c in 0..r[k] {
                let nv = nk.at(i, c);
                if nv.is_zero() {
                    continue;
                }
                for (j, gj) in p.gen.iter().enumerate() {
                    if !gj.is_zero() {
                        bump(&mut sys, row, gvar(k, c, j), nv.clone() * gj.clone());
                    }
                }
            }
            if p.wlen > 0 {
                let dnext = c_minus.diff(k + 1);
                for m in 0..p.wlen {
                    let v = dnext.at(i, m).clone();
                    if !v.is_zero() {
                        bump(&mut sys, row, p.wbase + m, -v);
                    }
                }
            }
            rhs.set(row, 0, p.gen[i].clone());
            row += 1;
        }
    }
    debug_assert_eq!(row, nrows);

    let x0 = solve(&sys, &rhs).ok_or_else(|| Error::InvariantViolation {
        which: "duality".into(),
        detail: "comparison map admits no integral lift".into(),
    })?;
    let mut x: Vec<R> = (0..nvars).map(|i| x0.at(i, 0).clone()).collect();
    let ker = kernel_basis(&sys).hnf_cols();
    for jc in (0..ker.cols()).rev() {
        let col = ker.col(jc);
        let p = col.iter().position(|v| !v.is_zero()).expect("kernel column");
        let q = x[p].div_floor(&col[p]);
        if q.is_zero() {
            continue;
        }
        for (xi, ci) in x.iter_mut().zip(col.iter()) {
            *xi = xi.clone() - q.clone() * ci.clone();
        }
    }
    let mats = (0..=top)
        .map(|k| Mat::from_fn(r[k], a[k], |i, j| x[gvar(k, i, j)].clone()))
        .collect();
    Ok(ChainMap { mats })
}

fn quasi_iso_degree<R: Scalar>(src: &[DegreeHomology<R>], dst: &[DegreeHomology<R>]) -> usize {
    for k in 0..src.len().max(dst.len()) {
        let a = src.get(k).map(|h| h.group()).unwrap_or((0, vec![]));
        let b = dst.get(k).map(|h| h.group()).unwrap_or((0, vec![]));
        if a != b {
            return k;
        }
    }
    0
}

/// Everything needed to pair the relative complex against the absolute one:
/// both complexes with their generator orientations applied, the reversed
/// complex, the simplicial bridge, and the verified comparison map.
pub struct DualityContext<R: Scalar> {
    pub n: usize,
    /// Relative Morse complex, generator orientations applied.
    pub relative: GradedComplex<R>,
    /// Absolute Morse complex, generator orientations applied.
    pub absolute: GradedComplex<R>,
    /// Reversed-flow complex: relative generators, degree k at n-k,
    /// transposed differentials.
    pub reversed: GradedComplex<R>,
    pub or_token: i8,
    pub eps_plus: Vec<Vec<i8>>,
    pub eps_minus: Vec<Vec<i8>>,
    bridge: ChainMap<R>,
    gamma: ChainMap<R>,
    ambient: Vec<DegreeHomology<R>>,
    rel_homology: Vec<DegreeHomology<R>>,
    abs_homology: Vec<DegreeHomology<R>>,
}

/// Pairing matrices: mats[k] pairs relative degree-k generators (rows)
/// against absolute degree-(n-k) generators (columns).
#[derive(Clone, Debug)]
pub struct PairingMatrix<R> {
    pub mats: Vec<Mat<R>>,
}

/// The pairing pushed to homology, free parts only: blocks[k] pairs the
/// free generators of H_k of the relative complex against those of H_{n-k}
/// of the absolute one.
#[derive(Clone, Debug)]
pub struct HomologyPairing<R> {
    pub blocks: Vec<Mat<R>>,
    pub dets: Vec<R>,
    pub unimodular: bool,
}

impl<R: Scalar> DualityContext<R> {
    /// Context with canonical generator orientations.
    pub fn new(mesh: &Mesh, data: &MorseData<R>) -> Result<Self> {
        let eps_plus = all_plus(&data.relative.complex);
        let eps_minus = all_plus(&data.absolute.complex);
        Self::with_signs(mesh, data, 1, eps_plus, eps_minus)
    }

    /// Context with explicit generator orientations and orientation token.
    /// Refuses non-orientable meshes; every structural claim about the
    /// bridge and the comparison map is re-verified before the context is
    /// handed out.
    pub fn with_signs(
        mesh: &Mesh,
        data: &MorseData<R>,
        or_token: i8,
        eps_plus: Vec<Vec<i8>>,
        eps_minus: Vec<Vec<i8>>,
    ) -> Result<Self> {
        if mesh.orientation().is_none() {
            return Err(Error::NotOrientable);
        }
        if or_token != 1 && or_token != -1 {
            return Err(Error::BadParameters("orientation token must be -1 or 1".into()));
        }
        check_signs("eps_plus", &eps_plus, &data.relative.complex)?;
        check_signs("eps_minus", &eps_minus, &data.absolute.complex)?;

        let u_all: Universe<R> = mesh_universe(mesh, CellFilter::All);
        let u_int: Universe<R> = mesh_universe(mesh, CellFilter::Interior);

        // Rising counts transpose falling counts; this is what lets the
        // reversed complex reuse the relative differentials.
        eta_check(&u_int, &interior_matching(&data.tangent, mesh))?;

        let caps = cap_matrices(mesh);
        let bridge = build_bridge(data, &u_int, &u_all, &caps);
        let all_cx = u_all.complex()?;
        let reversed = data.relative.complex.reflected_dual(2);
        validate_chain_map(&reversed, &all_cx, &bridge)?;
        let ambient = homology(&all_cx);
        if !is_quasi_isomorphism(&reversed, &all_cx, &bridge)? {
            return Err(Error::InvariantViolation {
                which: "duality".into(),
                detail: "bridge out of the reversed complex is not a quasi isomorphism".into(),
            });
        }

        let relative = data.relative.complex.conjugate_by_signs(&to_ring::<R>(&eps_plus));
        let absolute = data.absolute.complex.conjugate_by_signs(&to_ring::<R>(&eps_minus));
        let rel_homology = homology(&relative);
        let abs_homology = homology(&absolute);

        let n_mats: Vec<Mat<R>> = (0..=2)
            .map(|k| sign_rows(&data.absolute.pi[k].mul(&bridge.mats[k]), &eps_minus[k]))
            .collect();
        let gamma = lift_comparison(&absolute, &reversed, &n_mats, &abs_homology)?;
        validate_chain_map(&absolute, &reversed, &gamma)?;
        if !is_quasi_isomorphism(&absolute, &reversed, &gamma)? {
            let rev_h = homology(&reversed);
            return Err(Error::NotQuasiIso {
                degree: quasi_iso_degree(&abs_homology, &rev_h),
            });
        }

        // Naturality over the mesh: the comparison followed by the bridge
        // agrees with the simplicial inclusion on every homology class.
        for (k, h) in abs_homology.iter().enumerate() {
            let incl = sign_cols(&data.absolute.iota[k], &eps_minus[k]);
            for g in h.free_gens.iter().chain(h.torsion_gens.iter()) {
                let through = bridge.mats[k].mul_vec(&gamma.mats[k].mul_vec(g));
                let direct = incl.mul_vec(g);
                let diff: Vec<R> = through
                    .iter()
                    .zip(direct.iter())
                    .map(|(x, y)| x.clone() - y.clone())
                    .collect();
                let (free, tors) = ambient[k].classify(&diff)?;
                if free.iter().any(|v| !v.is_zero()) || tors.iter().any(|v| !v.is_zero()) {
                    return Err(Error::InvariantViolation {
                        which: "duality".into(),
                        detail: format!("comparison map is not natural in degree {}", k),
                    });
                }
            }
        }

        Ok(DualityContext {
            n: 2,
            relative,
            absolute,
            reversed,
            or_token,
            eps_plus,
            eps_minus,
            bridge,
            gamma,
            ambient,
            rel_homology,
            abs_homology,
        })
    }

    /// Orientation signs of the reversed generators: the orientation token
    /// times the relative generator orientation, degree by degree.
    pub fn orientation_perp(&self) -> Vec<Vec<i8>> {
        self.eps_plus
            .iter()
            .map(|row| row.iter().map(|s| s * self.or_token).collect())
            .collect()
    }

    /// The degree-reversing identification of relative generators with
    /// reversed ones: diagonal matrices carrying the orientation signs.
    pub fn eta(&self) -> ChainMap<R> {
        let perp = self.orientation_perp();
        let mats = perp
            .iter()
            .map(|row| {
                Mat::from_fn(row.len(), row.len(), |i, j| {
                    if i == j {
                        R::from_i64(row[i] as i64)
                    } else {
                        R::zero()
                    }
                })
            })
            .collect();
        ChainMap { mats }
    }

    /// Comparison map from the absolute complex into the reversed one.
    pub fn comparison(&self) -> &ChainMap<R> {
        &self.gamma
    }

    /// Bridge from the reversed complex into simplicial chains.
    pub fn bridge(&self) -> &ChainMap<R> {
        &self.bridge
    }

    pub fn ambient_homology(&self) -> &[DegreeHomology<R>] {
        &self.ambient
    }

    pub fn relative_homology(&self) -> &[DegreeHomology<R>] {
        &self.rel_homology
    }

    pub fn absolute_homology(&self) -> &[DegreeHomology<R>] {
        &self.abs_homology
    }

    /// The chain-level pairing. Descent is verified before the matrices are
    /// returned: pairing a relative boundary against b must equal (-1)^k
    /// times pairing against the absolute boundary of b.
    pub fn pairing_matrix(&self) -> Result<PairingMatrix<R>> {
        let perp = self.orientation_perp();
        let mats: Vec<Mat<R>> = (0..=self.n)
            .map(|k| {
                let mut m = self.gamma.mats[self.n - k].clone();
                for (i, s) in perp[k].iter().enumerate() {
                    let v = R::from_i64(*s as i64 * PAIRING_SIGNS[k]);
                    if !v.is_one() {
                        m.scale_row(i, &v);
                    }
                }
                m
            })
            .collect();
        let pm = PairingMatrix { mats };
        self.check_descent(&pm)?;
        Ok(pm)
    }

    fn check_descent(&self, pm: &PairingMatrix<R>) -> Result<()> {
        for k in 0..self.n {
            let lhs = self.relative.diff(k + 1).transpose().mul(&pm.mats[k]);
            let mut rhs = pm.mats[k + 1].mul(self.absolute.diff(self.n - k));
            if k % 2 == 1 {
                rhs = rhs.neg();
            }
            for i in 0..lhs.rows() {
                for j in 0..lhs.cols() {
                    if lhs.at(i, j) != rhs.at(i, j) {
                        return Err(Error::DescentViolated {
                            degree: k,
                            row: i,
                            col: j,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The pairing on free homology. Torsion is quotiented away; the
    /// verdict is true exactly when every block is square with determinant
    /// of absolute value one.
    pub fn homology_pairing(&self, pm: &PairingMatrix<R>) -> Result<HomologyPairing<R>> {
        let mut blocks = Vec::with_capacity(self.n + 1);
        let mut dets = Vec::with_capacity(self.n + 1);
        let mut unimodular = true;
        for k in 0..=self.n {
            let hp = &self.rel_homology[k];
            let hm = &self.abs_homology[self.n - k];
            let block = Mat::from_fn(hp.rank, hm.rank, |i, j| {
                let col = pm.mats[k].mul_vec(&hm.free_gens[j]);
                hp.free_gens[i]
                    .iter()
                    .zip(col.iter())
                    .fold(R::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
            });
            if hp.rank != hm.rank {
                unimodular = false;
                dets.push(R::zero());
            } else {
                let d = if hp.rank == 0 { R::one() } else { block.det_bareiss() };
                if !d.abs().is_one() {
                    unimodular = false;
                }
                dets.push(d);
            }
            blocks.push(block);
        }
        Ok(HomologyPairing {
            blocks,
            dets,
            unimodular,
        })
    }
}

fn to_ring<R: Scalar>(signs: &[Vec<i8>]) -> Vec<Vec<R>> {
    signs
        .iter()
        .map(|row| row.iter().map(|s| R::from_i64(*s as i64)).collect())
        .collect()
}

/// One-call verification: context, descent-checked pairing, homology
/// determinants. Fails with the first violated structural claim.
pub struct DualityReport<R> {
    pub sigma: PairingMatrix<R>,
    pub homology: HomologyPairing<R>,
    pub eps_perp: Vec<Vec<i8>>,
}

pub fn verify_duality<R: Scalar>(mesh: &Mesh, data: &MorseData<R>) -> Result<DualityReport<R>> {
    let ctx = DualityContext::new(mesh, data)?;
    let sigma = ctx.pairing_matrix()?;
    let homology = ctx.homology_pairing(&sigma)?;
    Ok(DualityReport {
        sigma,
        homology,
        eps_perp: ctx.orientation_perp(),
    })
}

/// Cross-check of the reversal construction: re-extract from the negated
/// field and compare homology. The reversed complex of each side must carry
/// the groups of the other side's plain complex, degree k against n-k.
pub fn reversed_field_cross_check<R: Scalar>(
    mesh: &Mesh,
    field: &crate::field::Field,
    data: &MorseData<R>,
    seed: u64,
) -> Result<bool> {
    let back: MorseData<R> =
        crate::extract::extract_morse_data_reseeded(mesh, &field.negated(), seed, crate::morse::DEFAULT_RETRIES)?;
    let rev_plus = homology(&data.relative.complex.reflected_dual(2));
    let rev_minus = homology(&data.absolute.complex.reflected_dual(2));
    Ok(crate::oracle::groups_equal(&rev_plus, &homology(&back.absolute.complex))
        && crate::oracle::groups_equal(&rev_minus, &homology(&back.relative.complex)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::fixtures::{disk, fixture, mobius};
    use crate::morse::build_morse_data;
    use crate::Int;
    use crate::Rat;
    use num_traits::{One, Signed, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx_for(name: &str, resolution: usize) -> (Mesh, Field, MorseData<Int>) {
        let (mesh, field) = fixture(name, resolution).unwrap();
        let data = build_morse_data(&mesh, &field, 7).unwrap();
        (mesh, field, data)
    }

    fn random_field(mesh: &Mesh, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = mesh.n_vertices() as i64;
        Field::new(
            (0..mesh.n_vertices())
                .map(|_| Rat::new(Int::from(rng.gen_range(0..100 * n)), Int::from(100 * n)))
                .collect(),
        )
    }

    #[test]
    fn bridge_signs_are_pinned_uniquely() {
        // Fixture fields keep some reversed differentials zero, so the sign
        // search runs over random fields until both squares carry nonzero
        // matrices on each side. The refined disk has enough interior
        // vertices for that to happen often.
        let (coarse, _) = disk(8).unwrap();
        let mesh = coarse.refine();
        let mut constrained = 0;
        for seed in 0..60u64 {
            let field = random_field(&mesh, seed);
            let data: MorseData<Int> = match build_morse_data(&mesh, &field, 3) {
                Ok(d) => d,
                Err(_) => continue,
            };
            let rev = data.relative.complex.reflected_dual(2);
            let u_all: Universe<Int> = mesh_universe(&mesh, CellFilter::All);
            let u_int: Universe<Int> = mesh_universe(&mesh, CellFilter::Interior);
            let caps = cap_matrices(&mesh);
            let all_cx = u_all.complex().unwrap();
            let base: Vec<Mat<Int>> = (0..=2usize)
                .map(|k| {
                    let q = 2 - k;
                    caps[q]
                        .mul(&interior_extension(&u_int, &u_all, q))
                        .mul(&data.relative.pi[q].transpose())
                })
                .collect();
            // both commuting squares must be nonzero for the signs to bite
            if all_cx.diff(1).mul(&base[1]).is_zero() || all_cx.diff(2).mul(&base[2]).is_zero() {
                continue;
            }
            constrained += 1;
            let mut passing = Vec::new();
            for s1 in [1i64, -1] {
                for s2 in [1i64, -1] {
                    let mats: Vec<Mat<Int>> = base
                        .iter()
                        .zip([1, s1, s2])
                        .map(|(m, s)| if s < 0 { m.neg() } else { m.clone() })
                        .collect();
                    if validate_chain_map(&rev, &all_cx, &ChainMap { mats }).is_ok() {
                        passing.push((s1, s2));
                    }
                }
            }
            assert_eq!(
                passing,
                vec![(BRIDGE_SIGNS[1], BRIDGE_SIGNS[2])],
                "seed {}",
                seed
            );
            if constrained >= 5 {
                break;
            }
        }
        assert!(constrained >= 5, "not enough constrained gradients");
    }

    #[test]
    fn disk_pairs_unimodularly() {
        let (mesh, _, data) = ctx_for("disk", 8);
        let rep = verify_duality(&mesh, &data).unwrap();
        assert_eq!(rep.sigma.mats.len(), 3);
        assert_eq!(rep.homology.blocks[2].rows(), 1);
        assert_eq!(rep.homology.blocks[2].cols(), 1);
        assert!(rep.homology.unimodular);
        assert!(rep.homology.dets[2].abs().is_one());
    }

    #[test]
    fn annulus_pairs_unimodularly() {
        let (mesh, _, data) = ctx_for("annulus", 8);
        let rep = verify_duality(&mesh, &data).unwrap();
        for k in [1usize, 2] {
            assert_eq!(rep.homology.blocks[k].rows(), 1, "degree {}", k);
            assert!(rep.homology.dets[k].abs().is_one(), "degree {}", k);
        }
        assert!(rep.homology.unimodular);
    }

    #[test]
    fn genus_two_degree_one_block_is_4x4_unimodular() {
        let (mesh, _, data) = ctx_for("genus2", 8);
        let rep = verify_duality(&mesh, &data).unwrap();
        assert_eq!(rep.homology.blocks[1].rows(), 4);
        assert_eq!(rep.homology.blocks[1].cols(), 4);
        assert!(rep.homology.dets[1].abs().is_one());
        assert!(rep.homology.unimodular);
    }

    #[test]
    fn mobius_context_is_refused() {
        let (mesh, field) = mobius(8).unwrap();
        let data: MorseData<Int> = build_morse_data(&mesh, &field, 7).unwrap();
        match DualityContext::new(&mesh, &data) {
            Err(Error::NotOrientable) => {}
            other => panic!("expected NotOrientable, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn orientation_flip_negates_sigma_globally() {
        let (mesh, _, data) = ctx_for("annulus", 8);
        let base = DualityContext::new(&mesh, &data).unwrap();
        let flipped = DualityContext::with_signs(
            &mesh,
            &data,
            -1,
            base.eps_plus.clone(),
            base.eps_minus.clone(),
        )
        .unwrap();
        let pm0 = base.pairing_matrix().unwrap();
        let pm1 = flipped.pairing_matrix().unwrap();
        for k in 0..=2 {
            assert_eq!(pm0.mats[k].neg(), pm1.mats[k], "degree {}", k);
        }
    }

    #[test]
    fn generator_flip_negates_exactly_one_row() {
        let (mesh, _, data) = ctx_for("annulus", 8);
        let base = DualityContext::new(&mesh, &data).unwrap();
        let k0 = (0..=2)
            .find(|k| data.relative.complex.rank(*k) > 0)
            .unwrap();
        let mut eps = base.eps_plus.clone();
        eps[k0][0] = -1;
        let flipped =
            DualityContext::with_signs(&mesh, &data, 1, eps, base.eps_minus.clone()).unwrap();
        let pm0 = base.pairing_matrix().unwrap();
        let pm1 = flipped.pairing_matrix().unwrap();
        for k in 0..=2 {
            for i in 0..pm0.mats[k].rows() {
                for j in 0..pm0.mats[k].cols() {
                    let a = pm0.mats[k].at(i, j).clone();
                    let b = pm1.mats[k].at(i, j).clone();
                    if k == k0 && i == 0 {
                        assert_eq!(a, -b);
                    } else {
                        assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn pairing_is_well_defined_on_classes() {
        // Resampling a representative by a boundary must not move any
        // pairing value against a cycle on the other side.
        let (mesh, _) = disk(10).unwrap();
        let mut exercised = 0;
        for seed in 0..40u64 {
            let field = random_field(&mesh, seed + 100);
            let data: MorseData<Int> = match build_morse_data(&mesh, &field, 3) {
                Ok(d) => d,
                Err(_) => continue,
            };
            if data.absolute.complex.diff(1).is_zero() {
                continue;
            }
            let ctx = match DualityContext::new(&mesh, &data) {
                Ok(c) => c,
                Err(e) => panic!("context failed on seed {}: {}", seed, e),
            };
            let pm = ctx.pairing_matrix().unwrap();
            let hp2 = &ctx.relative_homology()[2];
            let hm0 = &ctx.absolute_homology()[0];
            if hp2.rank == 0 || hm0.rank == 0 {
                continue;
            }
            exercised += 1;
            let xi = &hp2.free_gens[0];
            let g = &hm0.free_gens[0];
            let d1 = ctx.absolute.diff(1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..4 {
                let w: Vec<Int> = (0..ctx.absolute.rank(1))
                    .map(|_| Int::from(rng.gen_range(-3i64..=3)))
                    .collect();
                let moved: Vec<Int> = d1
                    .mul_vec(&w)
                    .iter()
                    .zip(g.iter())
                    .map(|(b, gi)| gi.clone() + b.clone())
                    .collect();
                let pair = |b: &[Int]| -> Int {
                    let col = pm.mats[2].mul_vec(b);
                    xi.iter()
                        .zip(col.iter())
                        .fold(Int::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
                };
                assert_eq!(pair(g), pair(&moved), "seed {}", seed);
            }
            if exercised >= 5 {
                break;
            }
        }
        assert!(exercised >= 5, "not enough fields with interior saddles");
    }

    #[test]
    fn reversal_matches_negated_field_extraction() {
        for name in ["disk", "annulus"] {
            let (mesh, field, data) = ctx_for(name, 8);
            assert!(
                reversed_field_cross_check(&mesh, &field, &data, 7).unwrap(),
                "{}",
                name
            );
        }
    }

    #[test]
    fn eta_is_a_signed_bijection() {
        let (mesh, _, data) = ctx_for("annulus", 8);
        let ctx = DualityContext::new(&mesh, &data).unwrap();
        let eta = ctx.eta();
        for (k, m) in eta.mats.iter().enumerate() {
            assert_eq!(m.rows(), ctx.relative.rank(k));
            assert_eq!(m.rows(), ctx.reversed.rank(2 - k));
            for i in 0..m.rows() {
                assert!(m.at(i, i).abs().is_one());
            }
        }
    }
}
