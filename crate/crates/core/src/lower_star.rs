use crate::field::VertexOrder;
use crate::gradient::{CellId, Matching};
use crate::mesh::{Link, Mesh};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// Local type of a vertex under a generic order, read off its lower link.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VertexClass {
    InteriorRegular,
    InteriorMin,
    InteriorSaddle { multiplicity: usize },
    InteriorMax,
    BoundaryRegular { extra_saddles: usize },
    /// Local minimum of the boundary restriction. `plus` when the full lower
    /// link is nonempty, so the level set enters the interior.
    BoundaryMin { plus: bool, saddles: usize },
    /// Local maximum of the boundary restriction. `plus` when the full upper
    /// link is empty.
    BoundaryMax { plus: bool, saddles: usize },
}

/// What a critical cell of the tangent matching is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CritKind {
    InteriorMin,
    Saddle,
    InteriorMax,
    /// Critical vertex sitting on the boundary.
    BoundaryMin { plus: bool },
    /// Critical boundary edge at a boundary-restricted maximum.
    BoundaryMax { plus: bool },
    /// Interior edge destined to cancel a plus minimum.
    BirthEdge,
    /// Triangle destined to cancel a plus maximum.
    BirthTriangle,
}

impl CritKind {
    pub fn is_birth(&self) -> bool {
        matches!(self, CritKind::BirthEdge | CritKind::BirthTriangle)
    }

    pub fn is_plus(&self) -> bool {
        matches!(
            self,
            CritKind::BoundaryMin { plus: true } | CritKind::BoundaryMax { plus: true }
        )
    }
}

/// Critical cells of a tangent matching, typed and attributed to the vertex
/// whose lower star produced them.
#[derive(Clone, Debug)]
pub struct Census {
    pub classes: Vec<VertexClass>,
    pub kinds: BTreeMap<CellId, CritKind>,
    pub owner: BTreeMap<CellId, usize>,
    /// (plus critical cell, its birth cell): (v, e*) and (beta, t*).
    pub birth_pairs: Vec<(CellId, CellId)>,
}

impl Census {
    pub fn count(&self, pred: impl Fn(&CritKind) -> bool) -> usize {
        self.kinds.values().filter(|k| pred(k)).count()
    }

    pub fn plus_count(&self) -> usize {
        self.birth_pairs.len()
    }
}

/// Deterministic tie-break: with seed 0 the lowest-ranked candidate, else a
/// keyed-hash shuffle so reseeding reroutes every discretionary choice.
fn choose(cands: &[usize], seed: u64, v: usize, order: &VertexOrder) -> usize {
    assert!(!cands.is_empty());
    if seed == 0 {
        return *cands.iter().min_by_key(|w| order.rank[**w]).unwrap();
    }
    *cands
        .iter()
        .min_by_key(|w| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update((v as u64).to_le_bytes());
            h.update((**w as u64).to_le_bytes());
            let d = h.finalize();
            let mut bytes = [0u8; 16];
            bytes.copy_from_slice(&d[..16]);
            (u128::from_le_bytes(bytes), **w)
        })
        .unwrap()
}

fn path_components(seq: &[usize], lower: &[bool]) -> Vec<(usize, usize)> {
    let mut comps = Vec::new();
    let mut start = None;
    for (k, low) in lower.iter().enumerate() {
        match (low, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                comps.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        comps.push((s, seq.len() - 1));
    }
    comps
}

/// Maximal cyclic runs of lower positions; `None` when the whole cycle is
/// lower.
fn cycle_components(lower: &[bool]) -> Option<Vec<Vec<usize>>> {
    let t = lower.len();
    let r = (0..t).find(|k| !lower[*k])?;
    let mut comps = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    for off in 1..=t {
        let k = (r + off) % t;
        if lower[k] {
            cur.push(k);
        } else if !cur.is_empty() {
            comps.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        comps.push(cur);
    }
    Some(comps)
}

/// Classifies every vertex by its lower link alone, with no matching built.
/// The tangent matching's critical census must reproduce exactly this table;
/// extraction cross-checks the two.
pub fn classify_vertices(mesh: &Mesh, order: &VertexOrder) -> Vec<VertexClass> {
    (0..mesh.n_vertices())
        .map(|v| {
            let below = |w: usize| order.below(w, v);
            match mesh.link(v) {
                Link::Cycle(seq) => {
                    let lower: Vec<bool> = seq.iter().map(|w| below(*w)).collect();
                    match cycle_components(&lower) {
                        None => VertexClass::InteriorMax,
                        Some(comps) if comps.is_empty() => VertexClass::InteriorMin,
                        Some(comps) if comps.len() == 1 => VertexClass::InteriorRegular,
                        Some(comps) => VertexClass::InteriorSaddle {
                            multiplicity: comps.len() - 1,
                        },
                    }
                }
                Link::Path(seq) => {
                    let lower: Vec<bool> = seq.iter().map(|w| below(*w)).collect();
                    let comps = path_components(seq, &lower);
                    let last = seq.len() - 1;
                    let b_low = (lower[0], lower[last]);
                    match b_low {
                        (false, false) => VertexClass::BoundaryMin {
                            plus: !comps.is_empty(),
                            saddles: comps.len().saturating_sub(1),
                        },
                        (true, true) => {
                            let plus = comps.len() == 1;
                            VertexClass::BoundaryMax {
                                plus,
                                saddles: if plus { 0 } else { comps.len() - 2 },
                            }
                        }
                        _ => VertexClass::BoundaryRegular {
                            extra_saddles: comps.len() - 1,
                        },
                    }
                }
            }
        })
        .collect()
}

/// Builds the lower-star matching of the order over the whole mesh. Boundary
/// cells pair only with boundary cells, so the matching restricts cleanly to
/// either side. Each discretionary choice flows through `choose` with the
/// given seed.
pub fn tangent_matching(mesh: &Mesh, order: &VertexOrder, seed: u64) -> (Matching, Census) {
    let mut m = Matching::new();
    let mut kinds: BTreeMap<CellId, CritKind> = BTreeMap::new();
    let mut owner: BTreeMap<CellId, usize> = BTreeMap::new();
    let mut birth: Vec<(CellId, CellId)> = Vec::new();
    let classes = classify_vertices(mesh, order);

    let edge = |a: usize, b: usize| -> CellId { (1, mesh.edge_id(a, b).unwrap()) };
    let tri = |a: usize, b: usize, c: usize| -> CellId { (2, mesh.triangle_id(a, b, c).unwrap()) };

    for v in 0..mesh.n_vertices() {
        let below = |w: usize| order.below(w, v);
        let mut mark = |cell: CellId, kind: CritKind| {
            kinds.insert(cell, kind);
            owner.insert(cell, v);
        };
        match mesh.link(v) {
            Link::Cycle(seq) => {
                let t = seq.len();
                let lower: Vec<bool> = seq.iter().map(|w| below(*w)).collect();
                let lows: Vec<usize> = seq.iter().copied().filter(|w| below(*w)).collect();
                if lows.is_empty() {
                    mark((0, v), CritKind::InteriorMin);
                    continue;
                }
                // interior matches keep the flow off the boundary when possible
                let interior_lows: Vec<usize> = lows
                    .iter()
                    .copied()
                    .filter(|w| !mesh.is_boundary_vertex(*w))
                    .collect();
                let pool = if interior_lows.is_empty() { &lows } else { &interior_lows };
                let mv = choose(pool, seed, v, order);
                m.add_pair((0, v), edge(v, mv));
                match cycle_components(&lower) {
                    None => {
                        let pm = seq.iter().position(|w| *w == mv).unwrap();
                        for off in 1..t {
                            let k = (pm + off) % t;
                            let prev = (pm + off - 1) % t;
                            m.add_pair(edge(v, seq[k]), tri(v, seq[prev], seq[k]));
                        }
                        mark(tri(v, seq[(pm + t - 1) % t], seq[pm]), CritKind::InteriorMax);
                    }
                    Some(comps) => {
                        for comp in comps {
                            let verts: Vec<usize> = comp.iter().map(|k| seq[*k]).collect();
                            let anchor = if verts.contains(&mv) {
                                mv
                            } else {
                                let a = choose(&verts, seed, v, order);
                                mark(edge(v, a), CritKind::Saddle);
                                a
                            };
                            let ap = verts.iter().position(|w| *w == anchor).unwrap();
                            for (i, k) in comp.iter().enumerate() {
                                if i == ap {
                                    continue;
                                }
                                let nb = if i < ap { comp[i + 1] } else { comp[i - 1] };
                                m.add_pair(edge(v, seq[*k]), tri(v, seq[*k], seq[nb]));
                            }
                        }
                    }
                }
            }
            Link::Path(seq) => {
                let last = seq.len() - 1;
                let lower: Vec<bool> = seq.iter().map(|w| below(*w)).collect();
                let comps = path_components(seq, &lower);
                // boundary edges first
                let matched_b = match (lower[0], lower[last]) {
                    (false, false) => {
                        let plus = !comps.is_empty();
                        mark((0, v), CritKind::BoundaryMin { plus });
                        None
                    }
                    (true, false) => {
                        m.add_pair((0, v), edge(v, seq[0]));
                        Some(seq[0])
                    }
                    (false, true) => {
                        m.add_pair((0, v), edge(v, seq[last]));
                        Some(seq[last])
                    }
                    (true, true) => {
                        let mb = choose(&[seq[0], seq[last]], seed, v, order);
                        let other = if mb == seq[0] { seq[last] } else { seq[0] };
                        m.add_pair((0, v), edge(v, mb));
                        let plus = comps.len() == 1;
                        mark(edge(v, other), CritKind::BoundaryMax { plus });
                        Some(mb)
                    }
                };
                // the plus minimum shoots one edge into the interior
                let principal = if matches!(classes[v], VertexClass::BoundaryMin { plus: true, .. })
                {
                    let lows: Vec<usize> = seq.iter().copied().filter(|w| below(*w)).collect();
                    Some(choose(&lows, seed, v, order))
                } else {
                    None
                };
                for (i0, j0) in comps {
                    let hits_start = i0 == 0;
                    let hits_end = j0 == last;
                    let anchor_pos = if hits_start && hits_end {
                        if matched_b == Some(seq[0]) {
                            0
                        } else {
                            last
                        }
                    } else if hits_start {
                        0
                    } else if hits_end {
                        last
                    } else {
                        let verts: Vec<usize> = (i0..=j0).map(|k| seq[k]).collect();
                        let a = match principal {
                            Some(p) if verts.contains(&p) => p,
                            _ => choose(&verts, seed, v, order),
                        };
                        let cell = edge(v, a);
                        if principal == Some(a) {
                            mark(cell, CritKind::BirthEdge);
                            let bp = (0, v);
                            birth.push((bp, cell));
                        } else {
                            mark(cell, CritKind::Saddle);
                        }
                        seq.iter().position(|w| *w == a).unwrap()
                    };
                    let mut tri_used = vec![false; j0.saturating_sub(i0)];
                    for k in i0..=j0 {
                        if k == anchor_pos || k == 0 || k == last {
                            continue;
                        }
                        let nb = if k < anchor_pos { k + 1 } else { k - 1 };
                        m.add_pair(edge(v, seq[k]), tri(v, seq[k], seq[nb]));
                        tri_used[k.min(nb) - i0] = true;
                    }
                    // exactly the plus maximum leaves one triangle unswept
                    for (off, used) in tri_used.iter().enumerate() {
                        if !used {
                            let k = i0 + off;
                            let t_cell = tri(v, seq[k], seq[k + 1]);
                            assert!(
                                hits_start && hits_end,
                                "unswept triangle outside a full lower link at vertex {}",
                                v
                            );
                            mark(t_cell, CritKind::BirthTriangle);
                            let beta = if matched_b == Some(seq[0]) {
                                edge(v, seq[last])
                            } else {
                                edge(v, seq[0])
                            };
                            birth.push((beta, t_cell));
                        }
                    }
                }
            }
        }
    }

    // every cell is matched or critical, never both, never twice
    let n_cells = mesh.n_vertices() + mesh.edges().len() + mesh.triangles().len();
    assert_eq!(2 * m.len() + kinds.len(), n_cells, "lower stars must partition the mesh");
    for cell in kinds.keys() {
        assert!(m.is_critical(cell));
    }

    birth.sort();
    (
        m,
        Census {
            classes,
            kinds,
            owner,
            birth_pairs: birth,
        },
    )
}

fn is_interior_cell(mesh: &Mesh, c: &CellId) -> bool {
    match c.0 {
        0 => !mesh.is_boundary_vertex(c.1),
        1 => !mesh.is_boundary_edge(c.1),
        _ => true,
    }
}

/// Pairs lying in the interior: a matching for the quotient by the boundary.
pub fn interior_matching(t: &Matching, mesh: &Mesh) -> Matching {
    t.restrict(|c| is_interior_cell(mesh, c))
}

/// Pairs lying on the boundary curve.
pub fn boundary_matching(t: &Matching, mesh: &Mesh) -> Matching {
    t.restrict(|c| !is_interior_cell(mesh, c))
}

/// The tangent matching extended by every birth pair: the gradient of the
/// same order with no constraint along the boundary.
pub fn absolute_matching(t: &Matching, census: &Census) -> Matching {
    let mut out = t.clone();
    for (a, b) in &census.birth_pairs {
        out.add_pair(*a, *b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ensure_generic, Field};
    use crate::gradient::{eliminate, mesh_universe, validate_matching, CellFilter};
    use crate::Rat;

    fn field_of(vals: &[i64]) -> Field {
        Field::new(vals.iter().map(|v| Rat::from_integer((*v).into())).collect())
    }

    /// Fan disk: center 0, rim 1..=6.
    fn small_disk() -> Mesh {
        let mut tris = Vec::new();
        for k in 0..6 {
            tris.push([0, 1 + k, 1 + (k + 1) % 6]);
        }
        let coords = (0..7).map(|i| [i as f64, 0.0, 0.0]).collect();
        Mesh::new(coords, tris).unwrap()
    }

    #[test]
    fn disk_census_minimal() {
        let mesh = small_disk();
        // rim rises from vertex 1 both ways to a max at vertex 4; center high
        let f = field_of(&[50, 0, 10, 20, 30, 21, 11]);
        let order = ensure_generic(&f);
        let (t, census) = tangent_matching(&mesh, &order, 0);
        let u = mesh_universe::<i64>(&mesh, CellFilter::All);
        validate_matching(&u, &t).unwrap();
        assert_eq!(census.classes[1], VertexClass::BoundaryMin { plus: false, saddles: 0 });
        assert_eq!(census.classes[4], VertexClass::BoundaryMax { plus: false, saddles: 0 });
        assert_eq!(census.classes[0], VertexClass::InteriorMax);
        // tangent criticals: v1, the edge at v4, and the interior max triangle
        assert_eq!(census.kinds.len(), 3);
        assert_eq!(census.plus_count(), 0);
    }

    #[test]
    fn disk_with_low_center_births_an_edge() {
        let mesh = small_disk();
        // center lowest: rim min at 1 is a plus minimum, rim max at 4 stays minus
        let f = field_of(&[-10, 0, 10, 20, 30, 21, 11]);
        let order = ensure_generic(&f);
        let (t, census) = tangent_matching(&mesh, &order, 0);
        let u = mesh_universe::<i64>(&mesh, CellFilter::All);
        validate_matching(&u, &t).unwrap();
        assert_eq!(census.classes[1], VertexClass::BoundaryMin { plus: true, saddles: 0 });
        // rim max at 4 sees its whole link below, so it births a triangle too
        assert_eq!(census.classes[4], VertexClass::BoundaryMax { plus: true, saddles: 0 });
        assert_eq!(census.plus_count(), 2);
        let kinds: Vec<CritKind> = census.kinds.values().copied().collect();
        assert!(kinds.contains(&CritKind::BirthEdge));
        assert!(kinds.contains(&CritKind::BirthTriangle));
        // absolute matching kills both pairs and leaves one critical vertex
        let a = absolute_matching(&t, &census);
        validate_matching(&u, &a).unwrap();
        let eq = eliminate(&u, &a).unwrap();
        assert_eq!(eq.complex.ranks(), &[1, 0, 0]);
    }

    #[test]
    fn census_matches_classification_on_disk() {
        let mesh = small_disk();
        // center at mid-height with an alternating rim: a two-fold saddle
        let f = field_of(&[15, 0, 30, 10, 40, 12, 35]);
        let order = ensure_generic(&f);
        let (t, census) = tangent_matching(&mesh, &order, 0);
        let u = mesh_universe::<i64>(&mesh, CellFilter::All);
        validate_matching(&u, &t).unwrap();
        assert_eq!(census.classes[0], VertexClass::InteriorSaddle { multiplicity: 2 });
        let n_saddles = census.count(|k| matches!(k, CritKind::Saddle));
        let expected: usize = census
            .classes
            .iter()
            .map(|c| match c {
                VertexClass::InteriorSaddle { multiplicity } => *multiplicity,
                VertexClass::BoundaryRegular { extra_saddles } => *extra_saddles,
                VertexClass::BoundaryMin { saddles, .. } => *saddles,
                VertexClass::BoundaryMax { saddles, .. } => *saddles,
                _ => 0,
            })
            .sum();
        assert_eq!(n_saddles, expected);
    }
}
