//! Geometric cross-check of the duality pairing.
//!
//! The algebraic pairing is re-derived from mesh geometry alone. Each
//! relative class is spread into the descending chain of its critical cells:
//! cross-cuts on the edge skeleton in degree one, signed triangle coverings
//! in degree two. Each absolute class is spread into a cycle under a second,
//! independently seeded gradient, then pushed off the skeleton to its left.
//! The two families meet transversally, and the signed crossing count must
//! reproduce the algebraic homology pairing up to one global sign per degree.
//!
//! Crossings are combinatorial. A pushed cycle runs parallel to the skeleton
//! along edges and only crosses the other family inside vertex fans, where
//! its strands arc from an incoming edge to an outgoing one: the arc crosses
//! every cut strand it sweeps past, with a sign fixed by the surface
//! orientation. At interior vertices the count is independent of how strands
//! are reconnected, because cut strands balance there. At boundary vertices
//! the reconnection is forced inside the fan; when several outgoing edges
//! make it ambiguous next to a cut, that is a `TransversalityFailure`,
//! resolved by re-extracting the pushed side with a fresh tie-break seed.

use std::collections::{BTreeMap, BTreeSet};

use crate::duality::DualityContext;
use crate::error::{Error, Result};
use crate::extract::{extract_morse_data_reseeded, MorseData};
use crate::field::Field;
use crate::gradient::Matching;
use crate::lower_star::{absolute_matching, interior_matching};
use crate::matrix::Mat;
use crate::mesh::{boundary_coeff, Mesh};
use crate::morse::DEFAULT_RETRIES;
use crate::scalar::Scalar;

/// Outcome of the crossing-count comparison. `blocks` holds the geometric
/// homology pairing, `reference` the algebraic one; `signs[k]` is the global
/// sign relating them in degree k (`None` when the degree is vacuous).
#[derive(Debug)]
pub struct GeometricReport<R> {
    pub blocks: Vec<Mat<R>>,
    pub reference: Vec<Mat<R>>,
    pub signs: Vec<Option<i8>>,
    pub matched: bool,
    pub attempts: usize,
    pub witness_seed: u64,
}

fn edge_vertex_coeff<R: Scalar>(e: &[usize; 2], v: usize) -> R {
    if e[1] == v {
        R::one()
    } else {
        -R::one()
    }
}

/// Signed edge occupancy of the descending spread rooted at a critical edge.
/// Flow enters an edge across its matched vertex, arriving from every other
/// admissible edge at that vertex; `interior_only` restricts the spread to
/// interior cells, which is the relative quotient.
fn edge_occupancy<R: Scalar>(
    mesh: &Mesh,
    m: &Matching,
    root: usize,
    interior_only: bool,
) -> BTreeMap<usize, R> {
    fn occ<R: Scalar>(
        mesh: &Mesh,
        m: &Matching,
        root: usize,
        interior_only: bool,
        e: usize,
        memo: &mut BTreeMap<usize, R>,
    ) -> R {
        if let Some(c) = memo.get(&e) {
            return c.clone();
        }
        let mut total = if e == root { R::one() } else { R::zero() };
        if let Some((0, v)) = m.down_of(&(1, e)) {
            let sv: R = edge_vertex_coeff(&mesh.edges()[e], v);
            for &prev in mesh.vertex_edges(v) {
                if prev == e || (interior_only && mesh.is_boundary_edge(prev)) {
                    continue;
                }
                let sp: R = edge_vertex_coeff(&mesh.edges()[prev], v);
                let c = occ(mesh, m, root, interior_only, prev, memo);
                total = total - sv.clone() * sp * c;
            }
        }
        memo.insert(e, total.clone());
        total
    }

    let mut memo = BTreeMap::new();
    let mut edges = BTreeMap::new();
    for e in 0..mesh.edges().len() {
        if interior_only && mesh.is_boundary_edge(e) {
            continue;
        }
        let c = occ::<R>(mesh, m, root, interior_only, e, &mut memo);
        if !c.is_zero() {
            edges.insert(e, c);
        }
    }
    edges
}

/// Descending cross-cut of an interior critical edge: interior edge
/// occupancies plus the chain boundary restricted to boundary vertices,
/// where the cut exits the interior.
fn descend_edges<R: Scalar>(
    mesh: &Mesh,
    a: &Matching,
    root: usize,
) -> (BTreeMap<usize, R>, BTreeMap<usize, R>) {
    let edges = edge_occupancy::<R>(mesh, a, root, true);
    let mut ends: BTreeMap<usize, R> = BTreeMap::new();
    for (&e, c) in &edges {
        for v in mesh.edges()[e] {
            if mesh.is_boundary_vertex(v) {
                let s: R = edge_vertex_coeff(&mesh.edges()[e], v);
                let cur = ends.remove(&v).unwrap_or_else(R::zero) + s * c.clone();
                if !cur.is_zero() {
                    ends.insert(v, cur);
                }
            }
        }
    }
    (edges, ends)
}

/// Signed triangle occupancy of the descending region rooted at a critical
/// triangle.
fn descend_triangles<R: Scalar>(mesh: &Mesh, m: &Matching, root: usize) -> BTreeMap<usize, R> {
    fn occ<R: Scalar>(
        mesh: &Mesh,
        m: &Matching,
        root: usize,
        t: usize,
        memo: &mut BTreeMap<usize, R>,
    ) -> R {
        if let Some(c) = memo.get(&t) {
            return c.clone();
        }
        let mut total = if t == root { R::one() } else { R::zero() };
        let tv = mesh.triangles()[t];
        for e in [
            mesh.edge_id(tv[0], tv[1]).unwrap(),
            mesh.edge_id(tv[0], tv[2]).unwrap(),
            mesh.edge_id(tv[1], tv[2]).unwrap(),
        ] {
            // The region spreads into t across its matched edge e, from the
            // triangle on the other side.
            if m.up_of(&(1, e)) != Some((2, t)) {
                continue;
            }
            let se = R::from_i64(boundary_coeff(&tv, &mesh.edges()[e]) as i64);
            for &prev in mesh.edge_triangles(e) {
                if prev == t {
                    continue;
                }
                let sp =
                    R::from_i64(boundary_coeff(&mesh.triangles()[prev], &mesh.edges()[e]) as i64);
                let c = occ(mesh, m, root, prev, memo);
                total = total - se.clone() * sp * c;
            }
        }
        memo.insert(t, total.clone());
        total
    }

    let mut memo = BTreeMap::new();
    let mut out = BTreeMap::new();
    for t in 0..mesh.triangles().len() {
        let c = occ::<R>(mesh, m, root, t, &mut memo);
        if !c.is_zero() {
            out.insert(t, c);
        }
    }
    out
}

fn perm_sign(a: usize, b: usize, c: usize) -> i8 {
    let mut inv = 0;
    if a > b {
        inv += 1;
    }
    if a > c {
        inv += 1;
    }
    if b > c {
        inv += 1;
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Edges incident to v in counterclockwise fan order with respect to the
/// surface orientation. Boundary fans keep their boundary edges at the ends.
fn oriented_fan(mesh: &Mesh, or: &[i8], v: usize) -> Vec<usize> {
    let mut nbrs = mesh.link(v).vertices().to_vec();
    if nbrs.len() >= 2 {
        let (n0, n1) = (nbrs[0], nbrs[1]);
        let mut tri = [v, n0, n1];
        tri.sort_unstable();
        let t = mesh
            .triangle_id(tri[0], tri[1], tri[2])
            .expect("link neighbors bound a triangle");
        if perm_sign(v, n0, n1) * or[t] < 0 {
            nbrs.reverse();
        }
    }
    nbrs.iter()
        .map(|&n| mesh.edge_id(v.min(n), v.max(n)).expect("link edge exists"))
        .collect()
}

/// Total signed crossing number of the pushed cycle `y` over the cut chain
/// `x`. Arcs sweep clockwise at interior vertices; inside a boundary fan the
/// sweep direction is forced and the sign flips with it.
fn crossing_total<R: Scalar>(
    mesh: &Mesh,
    or: &[i8],
    x: &BTreeMap<usize, R>,
    y: &BTreeMap<usize, R>,
) -> Result<R> {
    let mut verts: BTreeSet<usize> = BTreeSet::new();
    for &e in y.keys() {
        for v in mesh.edges()[e] {
            verts.insert(v);
        }
    }
    let mut total = R::zero();
    for v in verts {
        let fan = oriented_fan(mesh, or, v);
        let len = fan.len();
        let xs: Vec<R> = fan
            .iter()
            .map(|&e| match x.get(&e) {
                Some(c) => edge_vertex_coeff::<R>(&mesh.edges()[e], v) * c.clone(),
                None => R::zero(),
            })
            .collect();
        if xs.iter().all(|c| c.is_zero()) {
            continue;
        }
        let mut ins: Vec<(usize, R)> = Vec::new();
        let mut outs: Vec<(usize, R)> = Vec::new();
        for (pos, &e) in fan.iter().enumerate() {
            if let Some(c) = y.get(&e) {
                let s = edge_vertex_coeff::<R>(&mesh.edges()[e], v) * c.clone();
                if s > R::zero() {
                    ins.push((pos, s));
                } else if s < R::zero() {
                    outs.push((pos, -s));
                }
            }
        }
        if ins.is_empty() && outs.is_empty() {
            continue;
        }
        let boundary = mesh.is_boundary_vertex(v);
        if boundary && outs.len() > 1 {
            return Err(Error::TransversalityFailure(format!(
                "strand reconnection at {} is ambiguous",
                mesh.vertex_label(v)
            )));
        }
        let balance = ins.iter().fold(R::zero(), |s, (_, q)| s + q.clone())
            - outs.iter().fold(R::zero(), |s, (_, q)| s + q.clone());
        if !balance.is_zero() {
            return Err(Error::TransversalityFailure(format!(
                "pushed chain strands fail to balance at {}",
                mesh.vertex_label(v)
            )));
        }
        // FIFO reconnection in fan order; interior totals do not depend on
        // the pairing because cut strands balance at interior vertices.
        let (mut ii, mut oi) = (0, 0);
        let mut qin = R::zero();
        let mut qout = R::zero();
        while ii < ins.len() {
            if qin.is_zero() {
                qin = ins[ii].1.clone();
            }
            if qout.is_zero() {
                qout = outs[oi].1.clone();
            }
            let m = qin.clone().min(qout.clone());
            let (p, q) = (ins[ii].0, outs[oi].0);
            let mut swept = R::zero();
            if boundary {
                if q < p {
                    for w in (q + 1)..p {
                        swept = swept + xs[w].clone();
                    }
                    total = total + m.clone() * swept;
                } else {
                    for w in p..=q {
                        swept = swept + xs[w].clone();
                    }
                    total = total - m.clone() * swept;
                }
            } else {
                let mut w = (p + len - 1) % len;
                while w != q {
                    swept = swept + xs[w].clone();
                    w = (w + len - 1) % len;
                }
                total = total + m.clone() * swept;
            }
            qin = qin - m.clone();
            qout = qout - m;
            if qin.is_zero() {
                ii += 1;
            }
            if qout.is_zero() {
                oi += 1;
            }
        }
    }
    Ok(total)
}

/// Covering multiplicity of a 2-chain measured against the surface
/// orientation; a cycle covers every triangle with the same multiplicity.
fn covering_value<R: Scalar>(mesh: &Mesh, or: &[i8], chain: &BTreeMap<usize, R>) -> Result<R> {
    let weight = |t: usize| -> R {
        chain.get(&t).cloned().unwrap_or_else(R::zero) * R::from_i64(or[t] as i64)
    };
    let value = weight(0);
    for t in 1..mesh.triangles().len() {
        if weight(t) != value {
            return Err(Error::TransversalityFailure(format!(
                "covering multiplicity jumps at {}",
                mesh.triangle_label(t)
            )));
        }
    }
    Ok(value)
}

fn combine<R: Scalar>(parts: &[BTreeMap<usize, R>], coeffs: &[R]) -> BTreeMap<usize, R> {
    let mut out: BTreeMap<usize, R> = BTreeMap::new();
    for (part, c) in parts.iter().zip(coeffs.iter()) {
        if c.is_zero() {
            continue;
        }
        for (&k, w) in part {
            let cur = out.remove(&k).unwrap_or_else(R::zero) + c.clone() * w.clone();
            if !cur.is_zero() {
                out.insert(k, cur);
            }
        }
    }
    out
}

fn block_sign<R: Scalar>(got: &Mat<R>, want: &Mat<R>) -> Option<Option<i8>> {
    if got.rows() != want.rows() || got.cols() != want.cols() {
        return None;
    }
    if got.is_zero() && want.is_zero() {
        return Some(None);
    }
    if got == want {
        return Some(Some(1));
    }
    if got.neg() == *want {
        return Some(Some(-1));
    }
    None
}

/// Recomputes the homology pairing from signed crossings on the mesh and
/// compares it with the algebraic pairing degree by degree. The pushed side
/// is carried through a second gradient extraction and re-seeded until the
/// two families are transverse.
pub fn geometric_pairing_check<R: Scalar>(
    mesh: &Mesh,
    field: &Field,
    data: &MorseData<R>,
    seed: u64,
) -> Result<GeometricReport<R>> {
    if mesh.triangles().is_empty() {
        return Err(Error::BadParameters(
            "geometric check needs a two-dimensional mesh".into(),
        ));
    }
    let ctx = DualityContext::new(mesh, data)?;
    let pm = ctx.pairing_matrix()?;
    let hp = ctx.homology_pairing(&pm)?;
    let or = mesh.orientation().expect("checked by the duality context");

    let a_match = interior_matching(&data.tangent, mesh);
    let d1: Vec<BTreeMap<usize, R>> = data.relative.crit[1]
        .iter()
        .map(|c| descend_edges::<R>(mesh, &a_match, c.1).0)
        .collect();
    let d2: Vec<_> = data.relative.crit[2]
        .iter()
        .map(|c| descend_triangles::<R>(mesh, &a_match, c.1))
        .collect();

    let xi0 = &ctx.relative_homology()[0].free_gens;
    let xi1 = &ctx.relative_homology()[1].free_gens;
    let xi2 = &ctx.relative_homology()[2].free_gens;
    let eta0 = &ctx.absolute_homology()[0].free_gens;
    let eta1 = &ctx.absolute_homology()[1].free_gens;
    let eta2 = &ctx.absolute_homology()[2].free_gens;

    // Degree 2: each relative 2-class covers the surface with constant
    // multiplicity, evaluated at the points carrying the degree-0 classes.
    let mut g2 = Mat::zeros(xi2.len(), eta0.len());
    for (i, xi) in xi2.iter().enumerate() {
        let value = covering_value(mesh, or, &combine(&d2, xi))?;
        for (j, eta) in eta0.iter().enumerate() {
            let points = eta.iter().fold(R::zero(), |s, c| s + c.clone());
            g2.set(i, j, value.clone() * points);
        }
    }

    // Cut chains of the degree-1 relative classes.
    let cuts: Vec<BTreeMap<usize, R>> = xi1.iter().map(|xi| combine(&d1, xi)).collect();

    let mut attempts = 0;
    let mut last_mismatch: Option<(Vec<Mat<R>>, Vec<Option<i8>>, u64)> = None;
    let mut last_err = None;
    'attempt: while attempts < DEFAULT_RETRIES {
        let s_b = seed
            .wrapping_add(0x5bd1_e995)
            .wrapping_add(7919 * attempts as u64);
        attempts += 1;
        let bdata: MorseData<R> = extract_morse_data_reseeded(mesh, field, s_b, DEFAULT_RETRIES)?;
        let b_match = absolute_matching(&bdata.tangent, &bdata.census);

        // Degree 1: absolute classes are transported into the second
        // gradient, spread into cycles there, and pushed off the skeleton.
        let transfer1 = bdata.absolute.pi[1].mul(&data.absolute.iota[1]);
        let spread1: Vec<BTreeMap<usize, R>> = bdata.absolute.crit[1]
            .iter()
            .map(|c| edge_occupancy::<R>(mesh, &b_match, c.1, false))
            .collect();
        let mut g1 = Mat::zeros(xi1.len(), eta1.len());
        for (j, eta) in eta1.iter().enumerate() {
            let cycle = combine(&spread1, &transfer1.mul_vec(eta));
            for (i, cut) in cuts.iter().enumerate() {
                match crossing_total(mesh, or, cut, &cycle) {
                    Ok(c) => g1.set(i, j, c),
                    Err(e @ Error::TransversalityFailure(_)) => {
                        last_err = Some(e);
                        continue 'attempt;
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        // Degree 0: points of the relative classes sit inside the covering
        // spread by the absolute 2-classes; vacuous unless the surface is
        // closed.
        let mut g0 = Mat::zeros(xi0.len(), eta2.len());
        if !xi0.is_empty() && !eta2.is_empty() {
            let transfer2 = bdata.absolute.pi[2].mul(&data.absolute.iota[2]);
            let spread2: Vec<BTreeMap<usize, R>> = bdata.absolute.crit[2]
                .iter()
                .map(|c| descend_triangles::<R>(mesh, &b_match, c.1))
                .collect();
            for (j, eta) in eta2.iter().enumerate() {
                let value = match covering_value(mesh, or, &combine(&spread2, &transfer2.mul_vec(eta))) {
                    Ok(v) => v,
                    Err(e @ Error::TransversalityFailure(_)) => {
                        last_err = Some(e);
                        continue 'attempt;
                    }
                    Err(e) => return Err(e),
                };
                for (i, xi) in xi0.iter().enumerate() {
                    let points = xi.iter().fold(R::zero(), |s, c| s + c.clone());
                    g0.set(i, j, points * value.clone());
                }
            }
        }

        let blocks = vec![g0, g1, g2.clone()];
        let mut signs = Vec::with_capacity(3);
        let mut ok = true;
        for k in 0..3 {
            match block_sign(&blocks[k], &hp.blocks[k]) {
                Some(s) => signs.push(s),
                None => {
                    signs.push(None);
                    ok = false;
                }
            }
        }
        if ok {
            return Ok(GeometricReport {
                blocks,
                reference: hp.blocks,
                signs,
                matched: true,
                attempts,
                witness_seed: s_b,
            });
        }
        last_mismatch = Some((blocks, signs, s_b));
    }
    if let Some((blocks, signs, s_b)) = last_mismatch {
        return Ok(GeometricReport {
            blocks,
            reference: hp.blocks,
            signs,
            matched: false,
            attempts,
            witness_seed: s_b,
        });
    }
    Err(last_err.expect("loop ran at least once"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::extract_morse_data;
    use crate::fixtures::fixture;
    use crate::Int;
    use num_traits::{One, Zero};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(name: &str, res: usize) -> GeometricReport<Int> {
        let (mesh, field) = fixture(name, res).unwrap();
        let data = extract_morse_data(&mesh, &field, 7).unwrap();
        geometric_pairing_check(&mesh, &field, &data, 7).unwrap()
    }

    #[test]
    fn disk_crossings_match_the_algebraic_pairing() {
        let rep = check("disk", 16);
        assert!(rep.matched, "blocks {:?} vs {:?}", rep.blocks, rep.reference);
        assert!(rep.signs[2].is_some());
        assert_eq!(rep.reference[2].rows(), 1);
        let v = rep.blocks[2].at(0, 0).clone();
        assert!(v == Int::one() || v == -Int::one());
    }

    #[test]
    fn annulus_crossings_match_in_degree_one() {
        let rep = check("annulus", 16);
        assert!(rep.matched, "blocks {:?} vs {:?}", rep.blocks, rep.reference);
        assert!(rep.signs[1].is_some(), "degree-1 block must be exercised");
        let v = rep.blocks[1].at(0, 0).clone();
        assert!(v == Int::one() || v == -Int::one());
    }

    #[test]
    fn genus_two_crossings_match_on_the_degree_one_block() {
        let rep = check("genus2", 8);
        assert!(rep.matched, "blocks {:?} vs {:?}", rep.blocks, rep.reference);
        assert_eq!(rep.blocks[1].rows(), 4);
        assert_eq!(rep.blocks[1].cols(), 4);
        assert!(rep.signs[1].is_some(), "degree-1 block must be exercised");
    }

    #[test]
    fn random_fields_on_a_refined_disk_stay_matched() {
        let (coarse, _) = fixture("disk", 8).unwrap();
        let mesh = coarse.refine();
        run_random_fields(&mesh, 12, 8);
    }

    #[test]
    fn random_fields_on_an_annulus_exercise_degree_one() {
        let (mesh, _) = fixture("annulus", 12).unwrap();
        run_random_fields(&mesh, 10, 6);
    }

    fn run_random_fields(mesh: &Mesh, want: usize, need: usize) {
        let mut checked = 0;
        let mut retried = 0;
        for s in 0..3 * want as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let n = mesh.n_vertices();
            let values: Vec<crate::Rat> = (0..n as u64)
                .map(|_| {
                    crate::Rat::new(
                        Int::from(rng.gen_range(0..100 * n as i64)),
                        Int::from(100 * n as i64),
                    )
                })
                .collect();
            let field = Field::new(values);
            let data: MorseData<Int> = match extract_morse_data_reseeded(mesh, &field, s, 8) {
                Ok(d) => d,
                Err(_) => continue,
            };
            match geometric_pairing_check(mesh, &field, &data, s) {
                Ok(rep) => {
                    assert!(
                        rep.matched,
                        "seed {}: {:?} vs {:?}",
                        s, rep.blocks, rep.reference
                    );
                    checked += 1;
                    if rep.attempts > 1 {
                        retried += 1;
                    }
                }
                Err(Error::TransversalityFailure(_)) => {}
                Err(e) => panic!("seed {}: {}", s, e),
            }
            if checked >= want {
                break;
            }
        }
        assert!(checked >= need, "only {} fields checked", checked);
        eprintln!("geometric check: {} runs, {} needed a reseed", checked, retried);
    }

    #[test]
    fn descending_spread_is_a_relative_cycle() {
        let (mesh, field) = fixture("annulus", 12).unwrap();
        let data: MorseData<Int> = extract_morse_data(&mesh, &field, 3).unwrap();
        let a = interior_matching(&data.tangent, &mesh);
        for c in &data.relative.crit[1] {
            let (occ, _) = descend_edges::<Int>(&mesh, &a, c.1);
            // Interior vertices must cancel out of the chain boundary.
            let mut bd: BTreeMap<usize, Int> = BTreeMap::new();
            for (&e, coeff) in &occ {
                for v in mesh.edges()[e] {
                    let s: Int = edge_vertex_coeff(&mesh.edges()[e], v);
                    *bd.entry(v).or_insert_with(Int::zero) += s * coeff;
                }
            }
            for (v, c) in bd {
                if !mesh.is_boundary_vertex(v) {
                    assert!(
                        c.is_zero() || data.relative.crit[0].contains(&(0, v)),
                        "boundary leaks at interior vertex {}",
                        v
                    );
                }
            }
        }
    }

    #[test]
    fn pushed_spread_of_a_transported_class_is_a_cycle() {
        let (mesh, field) = fixture("annulus", 12).unwrap();
        let data: MorseData<Int> = extract_morse_data(&mesh, &field, 3).unwrap();
        let bdata: MorseData<Int> =
            extract_morse_data_reseeded(&mesh, &field, 0x5bd1_e995 + 3, 8).unwrap();
        let b = absolute_matching(&bdata.tangent, &bdata.census);
        let ctx = DualityContext::new(&mesh, &data).unwrap();
        let transfer = bdata.absolute.pi[1].mul(&data.absolute.iota[1]);
        let spread: Vec<BTreeMap<usize, Int>> = bdata.absolute.crit[1]
            .iter()
            .map(|c| edge_occupancy::<Int>(&mesh, &b, c.1, false))
            .collect();
        for eta in &ctx.absolute_homology()[1].free_gens {
            let cycle = combine(&spread, &transfer.mul_vec(eta));
            assert!(!cycle.is_empty(), "transported class spreads to nothing");
            let mut bd: BTreeMap<usize, Int> = BTreeMap::new();
            for (&e, coeff) in &cycle {
                for v in mesh.edges()[e] {
                    let s: Int = edge_vertex_coeff(&mesh.edges()[e], v);
                    *bd.entry(v).or_insert_with(Int::zero) += s * coeff;
                }
            }
            for (v, c) in bd {
                assert!(c.is_zero(), "pushed cycle leaks at vertex {}", v);
            }
        }
    }
}
