use crate::complex::GradedComplex;
use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::mesh::{boundary_coeff, Mesh};
use crate::scalar::Scalar;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// (dimension, index). Dimension-0 indices are vertex ids; dimension 1 and 2
/// index the mesh's sorted edge and triangle lists.
pub type CellId = (usize, usize);

pub type SpVec<R> = BTreeMap<CellId, R>;

pub fn sp_add_scaled<R: Scalar>(dst: &mut SpVec<R>, src: &SpVec<R>, c: &R) {
    if c.is_zero() {
        return;
    }
    for (k, v) in src {
        let e = dst.entry(*k).or_insert_with(R::zero);
        *e = e.clone() + c.clone() * v.clone();
        if e.is_zero() {
            dst.remove(k);
        }
    }
}

fn sp_get<R: Scalar>(v: &SpVec<R>, k: &CellId) -> R {
    v.get(k).cloned().unwrap_or_else(R::zero)
}

/// A finite based chain complex presented cell by cell: the stage on which
/// matchings, V-paths, and eliminations run.
#[derive(Clone, Debug)]
pub struct Universe<R> {
    by_dim: Vec<Vec<CellId>>,
    facets: BTreeMap<CellId, Vec<(CellId, R)>>,
    cofacets: BTreeMap<CellId, Vec<(CellId, R)>>,
    labels: BTreeMap<CellId, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellFilter {
    /// Every cell of the mesh.
    All,
    /// Interior vertices and edges plus all triangles: the quotient of the
    /// mesh by its boundary subcomplex.
    Interior,
    /// Boundary vertices and edges only.
    Boundary,
}

impl<R: Scalar> Universe<R> {
    fn build(
        by_dim: Vec<Vec<CellId>>,
        facets: BTreeMap<CellId, Vec<(CellId, R)>>,
        labels: BTreeMap<CellId, String>,
    ) -> Universe<R> {
        let mut cofacets: BTreeMap<CellId, Vec<(CellId, R)>> = BTreeMap::new();
        for cells in &by_dim {
            for c in cells {
                cofacets.entry(*c).or_default();
            }
        }
        for (cell, fs) in &facets {
            for (f, coeff) in fs {
                cofacets.entry(*f).or_default().push((*cell, coeff.clone()));
            }
        }
        Universe { by_dim, facets, cofacets, labels }
    }

    pub fn top_dim(&self) -> usize {
        self.by_dim.len() - 1
    }

    pub fn cells(&self, dim: usize) -> &[CellId] {
        self.by_dim.get(dim).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn all_cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.by_dim.iter().flatten().copied()
    }

    pub fn contains(&self, c: &CellId) -> bool {
        self.facets.contains_key(c)
    }

    pub fn facets(&self, c: &CellId) -> &[(CellId, R)] {
        &self.facets[c]
    }

    pub fn cofacets(&self, c: &CellId) -> &[(CellId, R)] {
        &self.cofacets[c]
    }

    pub fn label(&self, c: &CellId) -> &str {
        &self.labels[c]
    }

    pub fn boundary_chain(&self, c: &CellId) -> SpVec<R> {
        self.facets[c]
            .iter()
            .map(|(f, coeff)| (*f, coeff.clone()))
            .collect()
    }

    /// The chain complex of this universe, basis ordered as in `cells`.
    pub fn complex(&self) -> Result<GradedComplex<R>> {
        let pos: BTreeMap<CellId, usize> = self
            .by_dim
            .iter()
            .flat_map(|cells| cells.iter().enumerate().map(|(i, c)| (*c, i)))
            .collect();
        let mut diffs = Vec::new();
        for k in 0..self.by_dim.len() {
            let rows = if k == 0 { 0 } else { self.by_dim[k - 1].len() };
            let mut m = Mat::zeros(rows, self.by_dim[k].len());
            for (j, c) in self.by_dim[k].iter().enumerate() {
                for (f, coeff) in &self.facets[c] {
                    m.set(pos[f], j, coeff.clone());
                }
            }
            diffs.push(m);
        }
        let labels = self
            .by_dim
            .iter()
            .map(|cells| cells.iter().map(|c| self.labels[c].clone()).collect())
            .collect();
        GradedComplex::new(diffs, labels)
    }
}

fn cell_in_filter(mesh: &Mesh, filter: CellFilter, c: &CellId) -> bool {
    match (filter, c.0) {
        (CellFilter::All, _) => true,
        (CellFilter::Interior, 0) => !mesh.is_boundary_vertex(c.1),
        (CellFilter::Interior, 1) => !mesh.is_boundary_edge(c.1),
        (CellFilter::Interior, _) => true,
        (CellFilter::Boundary, 0) => mesh.is_boundary_vertex(c.1),
        (CellFilter::Boundary, 1) => mesh.is_boundary_edge(c.1),
        (CellFilter::Boundary, _) => false,
    }
}

pub fn mesh_universe<R: Scalar>(mesh: &Mesh, filter: CellFilter) -> Universe<R> {
    let top = if matches!(filter, CellFilter::Boundary) { 1 } else { 2 };
    let mut by_dim: Vec<Vec<CellId>> = vec![Vec::new(); top + 1];
    let mut facets: BTreeMap<CellId, Vec<(CellId, R)>> = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for v in 0..mesh.n_vertices() {
        let c = (0, v);
        if cell_in_filter(mesh, filter, &c) {
            by_dim[0].push(c);
            facets.insert(c, Vec::new());
            labels.insert(c, mesh.vertex_label(v));
        }
    }
    for (ei, e) in mesh.edges().iter().enumerate() {
        let c = (1, ei);
        if cell_in_filter(mesh, filter, &c) {
            by_dim[1].push(c);
            let mut fs = Vec::new();
            for (v, coeff) in [(e[0], -1i64), (e[1], 1i64)] {
                if cell_in_filter(mesh, filter, &(0, v)) {
                    fs.push(((0, v), R::from_i64(coeff)));
                }
            }
            facets.insert(c, fs);
            labels.insert(c, mesh.edge_label(ei));
        }
    }
    if top == 2 {
        for (ti, t) in mesh.triangles().iter().enumerate() {
            let c = (2, ti);
            by_dim[2].push(c);
            let mut fs = Vec::new();
            for e in [[t[0], t[1]], [t[0], t[2]], [t[1], t[2]]] {
                let ei = mesh.edge_id(e[0], e[1]).unwrap();
                if cell_in_filter(mesh, filter, &(1, ei)) {
                    fs.push(((1, ei), R::from_i64(boundary_coeff(t, &e) as i64)));
                }
            }
            facets.insert(c, fs);
            labels.insert(c, mesh.triangle_label(ti));
        }
    }
    Universe::build(by_dim, facets, labels)
}

/// Universe whose cells are the basis elements of an abstract complex,
/// renamed by caller-supplied cell ids (one list per degree).
pub fn complex_universe<R: Scalar>(c: &GradedComplex<R>, ids: &[Vec<CellId>]) -> Universe<R> {
    assert_eq!(ids.len(), c.top_degree() + 1);
    for (k, row) in ids.iter().enumerate() {
        assert_eq!(row.len(), c.rank(k));
    }
    let by_dim: Vec<Vec<CellId>> = ids.to_vec();
    let mut facets: BTreeMap<CellId, Vec<(CellId, R)>> = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for k in 0..=c.top_degree() {
        for (j, cell) in ids[k].iter().enumerate() {
            let mut fs = Vec::new();
            if k > 0 {
                let d = c.diff(k);
                for i in 0..d.rows() {
                    if !d.at(i, j).is_zero() {
                        fs.push((ids[k - 1][i], d.at(i, j).clone()));
                    }
                }
            }
            facets.insert(*cell, fs);
            labels.insert(*cell, c.labels(k)[j].clone());
        }
    }
    Universe::build(by_dim, facets, labels)
}

/// A partial matching of cells with their cofacets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    up: BTreeMap<CellId, CellId>,
    down: BTreeMap<CellId, CellId>,
}

impl Matching {
    pub fn new() -> Matching {
        Matching::default()
    }

    pub fn add_pair(&mut self, lower: CellId, upper: CellId) {
        assert_eq!(lower.0 + 1, upper.0, "pair must span one dimension");
        let a = self.up.insert(lower, upper);
        let b = self.down.insert(upper, lower);
        assert!(a.is_none() && b.is_none(), "cell matched twice");
    }

    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.up.iter().map(|(a, b)| (*a, *b))
    }

    pub fn up_of(&self, c: &CellId) -> Option<CellId> {
        self.up.get(c).copied()
    }

    pub fn down_of(&self, c: &CellId) -> Option<CellId> {
        self.down.get(c).copied()
    }

    pub fn is_critical(&self, c: &CellId) -> bool {
        !self.up.contains_key(c) && !self.down.contains_key(c)
    }

    pub fn restrict(&self, keep: impl Fn(&CellId) -> bool) -> Matching {
        let mut out = Matching::new();
        for (a, b) in self.pairs() {
            if keep(&a) && keep(&b) {
                out.add_pair(a, b);
            } else {
                // tangency: a pair must live entirely on one side
                assert!(
                    !keep(&a) && !keep(&b),
                    "pair {:?} ~ {:?} straddles the restriction",
                    a,
                    b
                );
            }
        }
        out
    }

    /// Critical cells of the matching within a universe, sorted per dimension.
    pub fn critical_cells<R: Scalar>(&self, u: &Universe<R>) -> Vec<Vec<CellId>> {
        (0..=u.top_dim())
            .map(|k| {
                u.cells(k)
                    .iter()
                    .copied()
                    .filter(|c| self.is_critical(c))
                    .collect()
            })
            .collect()
    }
}

/// Checks that every pair joins a cell to one of its cofacets with a unit
/// incidence, and that the induced V-path digraph is acyclic.
pub fn validate_matching<R: Scalar>(u: &Universe<R>, m: &Matching) -> Result<()> {
    for (a, b) in m.pairs() {
        if !u.contains(&a) || !u.contains(&b) {
            return Err(Error::InvariantViolation {
                which: "matching".into(),
                detail: format!("pair {:?} ~ {:?} leaves the universe", a, b),
            });
        }
        let coeff = u
            .facets(&b)
            .iter()
            .find(|(f, _)| f == &a)
            .map(|(_, c)| c.clone());
        match coeff {
            Some(c) if c.abs().is_one() => {}
            _ => {
                return Err(Error::InvariantViolation {
                    which: "matching".into(),
                    detail: format!("pair {:?} ~ {:?} lacks unit incidence", a, b),
                })
            }
        }
    }
    // V-path digraph per dimension: sigma -> sigma' when sigma' is another
    // facet of up(sigma). Cycles are exactly gradient loops.
    for dim in 0..u.top_dim() {
        let mut color: BTreeMap<CellId, u8> = BTreeMap::new();
        for start in u.cells(dim) {
            if m.up_of(start).is_none() || color.get(start) == Some(&2) {
                continue;
            }
            // iterative DFS with explicit stack
            let mut stack = vec![(*start, 0usize)];
            color.insert(*start, 1);
            while let Some((cur, idx)) = stack.pop() {
                let nexts: Vec<CellId> = match m.up_of(&cur) {
                    None => Vec::new(),
                    Some(up) => u
                        .facets(&up)
                        .iter()
                        .filter(|(f, _)| f != &cur && m.up_of(f).is_some())
                        .map(|(f, _)| *f)
                        .collect(),
                };
                if idx < nexts.len() {
                    stack.push((cur, idx + 1));
                    let nx = nexts[idx];
                    match color.get(&nx) {
                        Some(1) => {
                            return Err(Error::AcyclicityViolation {
                                cell: format!("{:?}", nx),
                            })
                        }
                        Some(2) => {}
                        _ => {
                            color.insert(nx, 1);
                            stack.push((nx, 0));
                        }
                    }
                } else {
                    color.insert(cur, 2);
                }
            }
        }
    }
    Ok(())
}

/// Morse data produced by eliminating every matched pair: the small complex
/// on critical cells plus the chain equivalence (iota, pi) and homotopy h
/// relating it to the universe's complex.
#[derive(Clone, Debug)]
pub struct MorseEquivalence<R> {
    pub complex: GradedComplex<R>,
    pub crit: Vec<Vec<CellId>>,
    /// iota[k]: universe_k x crit_k, includes a critical cell as a chain.
    pub iota: Vec<Mat<R>>,
    /// pi[k]: crit_k x universe_k, projects a chain onto critical cells.
    pub pi: Vec<Mat<R>>,
    /// h[k]: universe_{k+1} x universe_k.
    pub h: Vec<Mat<R>>,
}

pub fn eliminate<R: Scalar>(u: &Universe<R>, m: &Matching) -> Result<MorseEquivalence<R>> {
    validate_matching(u, m)?;
    let mut d: BTreeMap<CellId, SpVec<R>> = BTreeMap::new();
    let mut rev: BTreeMap<CellId, BTreeSet<CellId>> = BTreeMap::new();
    let mut iota: BTreeMap<CellId, SpVec<R>> = BTreeMap::new();
    let mut pi: BTreeMap<CellId, SpVec<R>> = BTreeMap::new();
    let mut pi_rev: BTreeMap<CellId, BTreeSet<CellId>> = BTreeMap::new();
    let mut h: BTreeMap<CellId, SpVec<R>> = BTreeMap::new();
    for c in u.all_cells() {
        d.insert(c, u.boundary_chain(&c));
        rev.entry(c).or_default();
        for (f, _) in u.facets(&c) {
            rev.entry(*f).or_default().insert(c);
        }
        iota.insert(c, SpVec::from([(c, R::one())]));
        pi.insert(c, SpVec::from([(c, R::one())]));
        pi_rev.insert(c, BTreeSet::from([c]));
        h.insert(c, SpVec::new());
    }

    let mut queue: VecDeque<(CellId, CellId)> = m.pairs().collect();
    let mut stall = 0usize;
    while let Some((alpha, beta)) = queue.pop_front() {
        let s = sp_get(&d[&beta], &alpha);
        if !s.abs().is_one() {
            queue.push_back((alpha, beta));
            stall += 1;
            if stall > queue.len() {
                return Err(Error::InvariantViolation {
                    which: "elimination".into(),
                    detail: format!("no unit pivot available at pair {:?} ~ {:?}", alpha, beta),
                });
            }
            continue;
        }
        stall = 0;
        let s_inv = s; // s in {1, -1}

        let d_beta = d[&beta].clone();
        let iota_beta = iota[&beta].clone();

        // dim p+1 cells whose boundary meets alpha reroute through beta
        let carriers: Vec<CellId> = rev[&alpha].iter().copied().filter(|t| *t != beta).collect();
        for tau in &carriers {
            let c = sp_get(&d[tau], &alpha);
            let factor = -(c.clone() * s_inv.clone());
            // iota uses the differential as it stands right now
            let it = iota.get_mut(tau).unwrap();
            sp_add_scaled(it, &iota_beta, &factor);
            let dt = d.get_mut(tau).unwrap();
            sp_add_scaled(dt, &d_beta, &factor);
            dt.remove(&alpha);
            for (f, _) in &d_beta {
                let present = d[tau].contains_key(f);
                let r = rev.get_mut(f).unwrap();
                if present {
                    r.insert(*tau);
                } else {
                    r.remove(tau);
                }
            }
        }
        // cells one dimension higher lose their beta coordinate
        let uppers: Vec<CellId> = rev[&beta].iter().copied().collect();
        for g in &uppers {
            d.get_mut(g).unwrap().remove(&beta);
        }

        // pi: subtract the alpha coordinate through d(beta), drop alpha/beta
        let mut rest_d_beta = d_beta.clone();
        rest_d_beta.remove(&alpha);
        let holders: Vec<CellId> = pi_rev[&alpha].iter().copied().collect();
        for x in &holders {
            let a = sp_get(&pi[x], &alpha);
            let factor = -(a.clone() * s_inv.clone());
            // h picks up the rerouted flow before pi forgets it
            sp_add_scaled(h.get_mut(x).unwrap(), &iota_beta, &factor);
            let px = pi.get_mut(x).unwrap();
            px.remove(&alpha);
            sp_add_scaled(px, &rest_d_beta, &factor);
            for (f, _) in &rest_d_beta {
                let present = pi[x].contains_key(f);
                let r = pi_rev.get_mut(f).unwrap();
                if present {
                    r.insert(*x);
                } else {
                    r.remove(x);
                }
            }
        }
        let beta_holders: Vec<CellId> = pi_rev[&beta].iter().copied().collect();
        for x in &beta_holders {
            pi.get_mut(x).unwrap().remove(&beta);
        }

        for dead in [alpha, beta] {
            d.remove(&dead);
            iota.remove(&dead);
            rev.remove(&dead);
            pi_rev.remove(&dead);
            for (_, r) in rev.iter_mut() {
                r.remove(&dead);
            }
        }
    }

    let crit = m.critical_cells(u);
    let crit_pos: BTreeMap<CellId, usize> = crit
        .iter()
        .flat_map(|cells| cells.iter().enumerate().map(|(i, c)| (*c, i)))
        .collect();
    let uni_pos: BTreeMap<CellId, usize> = (0..=u.top_dim())
        .flat_map(|k| u.cells(k).iter().enumerate().map(|(i, c)| (*c, i)))
        .collect();

    let mut diffs = Vec::new();
    let mut iota_m = Vec::new();
    let mut pi_m = Vec::new();
    for k in 0..=u.top_dim() {
        let rows = if k == 0 { 0 } else { crit[k - 1].len() };
        let mut dk = Mat::zeros(rows, crit[k].len());
        let mut ik = Mat::zeros(u.cells(k).len(), crit[k].len());
        for (j, c) in crit[k].iter().enumerate() {
            for (f, coeff) in &d[c] {
                dk.set(crit_pos[f], j, coeff.clone());
            }
            for (f, coeff) in &iota[c] {
                ik.set(uni_pos[f], j, coeff.clone());
            }
        }
        let mut pk = Mat::zeros(crit[k].len(), u.cells(k).len());
        for (j, c) in u.cells(k).iter().enumerate() {
            for (f, coeff) in &pi[c] {
                pk.set(crit_pos[f], j, coeff.clone());
            }
        }
        diffs.push(dk);
        iota_m.push(ik);
        pi_m.push(pk);
    }
    let mut h_m = Vec::new();
    for k in 0..u.top_dim() {
        let mut hk = Mat::zeros(u.cells(k + 1).len(), u.cells(k).len());
        for (j, c) in u.cells(k).iter().enumerate() {
            for (f, coeff) in &h[c] {
                hk.set(uni_pos[f], j, coeff.clone());
            }
        }
        h_m.push(hk);
    }

    let labels = crit
        .iter()
        .map(|cells| cells.iter().map(|c| u.label(c).to_string()).collect())
        .collect();
    let complex = GradedComplex::new(diffs, labels)?;

    verify_equivalence(u, &complex, &crit, &iota, &pi, &h)?;

    Ok(MorseEquivalence {
        complex,
        crit,
        iota: iota_m,
        pi: pi_m,
        h: h_m,
    })
}

/// pi iota = id, pi d iota = d', and iota pi - id = dh + hd, checked cell by
/// cell in sparse form.
fn verify_equivalence<R: Scalar>(
    u: &Universe<R>,
    morse: &GradedComplex<R>,
    crit: &[Vec<CellId>],
    iota: &BTreeMap<CellId, SpVec<R>>,
    pi: &BTreeMap<CellId, SpVec<R>>,
    h: &BTreeMap<CellId, SpVec<R>>,
) -> Result<()> {
    let fail = |which: &str, cell: &CellId| Error::InvariantViolation {
        which: format!("equivalence-{}", which),
        detail: format!("identity fails at cell {:?}", cell),
    };
    let apply = |table: &BTreeMap<CellId, SpVec<R>>, chain: &SpVec<R>| -> SpVec<R> {
        let mut out = SpVec::new();
        for (c, coeff) in chain {
            if let Some(row) = table.get(c) {
                sp_add_scaled(&mut out, row, coeff);
            }
        }
        out
    };
    let boundary = |chain: &SpVec<R>| -> SpVec<R> {
        let mut out = SpVec::new();
        for (c, coeff) in chain {
            for (f, fc) in u.facets(c) {
                let e = out.entry(*f).or_insert_with(R::zero);
                *e = e.clone() + coeff.clone() * fc.clone();
                if e.is_zero() {
                    out.remove(f);
                }
            }
        }
        out
    };
    // pi iota = id on critical cells
    for cells in crit {
        for c in cells {
            let got = apply(pi, &iota[c]);
            let want = SpVec::from([(*c, R::one())]);
            if got != want {
                return Err(fail("pi-iota", c));
            }
        }
    }
    // pi d iota = morse differential on critical cells
    for (k, cells) in crit.iter().enumerate() {
        for (j, c) in cells.iter().enumerate() {
            let got = apply(pi, &boundary(&iota[c]));
            let mut want = SpVec::new();
            if k > 0 {
                let dk = morse.diff(k);
                for i in 0..dk.rows() {
                    if !dk.at(i, j).is_zero() {
                        want.insert(crit[k - 1][i], dk.at(i, j).clone());
                    }
                }
            }
            if got != want {
                return Err(fail("pi-d-iota", c));
            }
        }
    }
    // iota pi - id = dh + hd on every cell
    for x in u.all_cells() {
        let x_chain = SpVec::from([(x, R::one())]);
        let mut lhs = apply(iota, &apply(pi, &x_chain));
        sp_add_scaled(&mut lhs, &x_chain, &(-R::one()));
        let mut rhs = boundary(&h[&x]);
        let hdx = apply(h, &boundary(&x_chain));
        for (c, v) in hdx {
            let e = rhs.entry(c).or_insert_with(R::zero);
            *e = e.clone() + v;
            if e.is_zero() {
                rhs.remove(&c);
            }
        }
        if lhs != rhs {
            return Err(fail("homotopy", &x));
        }
    }
    Ok(())
}

/// Signed V-path counts, descending: for each critical cell of dimension k,
/// the coefficient of each critical (k-1)-cell summed over gradient paths.
/// Computed independently of `eliminate` so the two can be cross-checked.
pub fn vpath_differential<R: Scalar>(
    u: &Universe<R>,
    m: &Matching,
) -> BTreeMap<CellId, SpVec<R>> {
    // w(sigma): the chain of critical cells a descending flow starting at
    // sigma resolves to. Memoized over the acyclic pushing order.
    fn w<R: Scalar>(
        sigma: CellId,
        u: &Universe<R>,
        m: &Matching,
        memo: &mut BTreeMap<CellId, SpVec<R>>,
    ) -> SpVec<R> {
        if let Some(v) = memo.get(&sigma) {
            return v.clone();
        }
        let out = if m.is_critical(&sigma) {
            SpVec::from([(sigma, R::one())])
        } else if m.down_of(&sigma).is_some() {
            SpVec::new()
        } else {
            let beta = m.up_of(&sigma).unwrap();
            let s = u
                .facets(&beta)
                .iter()
                .find(|(f, _)| f == &sigma)
                .map(|(_, c)| c.clone())
                .unwrap();
            let mut acc = SpVec::new();
            for (f, c) in u.facets(&beta) {
                if f == &sigma {
                    continue;
                }
                let part = w(*f, u, m, memo);
                sp_add_scaled(&mut acc, &part, &(-(c.clone() * s.clone())));
            }
            acc
        };
        memo.insert(sigma, out.clone());
        out
    }
    let mut memo = BTreeMap::new();
    let mut out = BTreeMap::new();
    for k in 1..=u.top_dim() {
        for tau in u.cells(k) {
            if !m.is_critical(tau) {
                continue;
            }
            let mut acc = SpVec::new();
            for (f, c) in u.facets(tau) {
                let part = w(*f, u, m, &mut memo);
                sp_add_scaled(&mut acc, &part, c);
            }
            out.insert(*tau, acc);
        }
    }
    out
}

/// Signed V-path counts, ascending: for each critical cell, the coefficient
/// of each critical cell one dimension up, summed over rising paths. For one
/// matching the rising count from sigma to tau always equals the descending
/// count from tau to sigma; `eta_check` asserts exactly that.
pub fn vpath_differential_ascending<R: Scalar>(
    u: &Universe<R>,
    m: &Matching,
) -> BTreeMap<CellId, SpVec<R>> {
    fn w<R: Scalar>(
        tau: CellId,
        u: &Universe<R>,
        m: &Matching,
        memo: &mut BTreeMap<CellId, SpVec<R>>,
    ) -> SpVec<R> {
        if let Some(v) = memo.get(&tau) {
            return v.clone();
        }
        let out = if m.is_critical(&tau) {
            SpVec::from([(tau, R::one())])
        } else if m.up_of(&tau).is_some() {
            SpVec::new()
        } else {
            let gamma = m.down_of(&tau).unwrap();
            let s = u
                .facets(&tau)
                .iter()
                .find(|(f, _)| f == &gamma)
                .map(|(_, c)| c.clone())
                .unwrap();
            let mut acc = SpVec::new();
            for (t2, c) in u.cofacets(&gamma) {
                if t2 == &tau {
                    continue;
                }
                let part = w(*t2, u, m, memo);
                sp_add_scaled(&mut acc, &part, &(-(c.clone() * s.clone())));
            }
            acc
        };
        memo.insert(tau, out.clone());
        out
    }
    let mut memo = BTreeMap::new();
    let mut out = BTreeMap::new();
    for k in 0..u.top_dim() {
        for sigma in u.cells(k) {
            if !m.is_critical(sigma) {
                continue;
            }
            let mut acc = SpVec::new();
            for (t, c) in u.cofacets(sigma) {
                let part = w(*t, u, m, &mut memo);
                sp_add_scaled(&mut acc, &part, c);
            }
            out.insert(*sigma, acc);
        }
    }
    out
}

/// Rising counts must be the transpose of falling counts, entry by entry.
pub fn eta_check<R: Scalar>(u: &Universe<R>, m: &Matching) -> Result<()> {
    let down = vpath_differential(u, m);
    let up = vpath_differential_ascending(u, m);
    for (sigma, chain) in &up {
        for (tau, c_up) in chain {
            let c_down = down
                .get(tau)
                .map(|ch| sp_get(ch, sigma))
                .unwrap_or_else(R::zero);
            if *c_up != c_down {
                return Err(Error::EtaMismatch {
                    degree: sigma.0,
                    row: sigma.1,
                    col: tau.1,
                    lhs: format!("{}", c_up),
                    rhs: format!("{}", c_down),
                });
            }
        }
    }
    for (tau, chain) in &down {
        for (sigma, c_down) in chain {
            let c_up = up
                .get(sigma)
                .map(|ch| sp_get(ch, tau))
                .unwrap_or_else(R::zero);
            if *c_down != c_up {
                return Err(Error::EtaMismatch {
                    degree: sigma.0,
                    row: sigma.1,
                    col: tau.1,
                    lhs: format!("{}", c_down),
                    rhs: format!("{}", c_up),
                });
            }
        }
    }
    Ok(())
}

/// The V-path differential assembled into matrix form over sorted critical
/// cells, for comparison against an eliminated complex.
pub fn vpath_complex<R: Scalar>(u: &Universe<R>, m: &Matching) -> Result<GradedComplex<R>> {
    let crit = m.critical_cells(u);
    let pos: BTreeMap<CellId, usize> = crit
        .iter()
        .flat_map(|cells| cells.iter().enumerate().map(|(i, c)| (*c, i)))
        .collect();
    let table = vpath_differential(u, m);
    let mut diffs = Vec::new();
    for k in 0..=u.top_dim() {
        let rows = if k == 0 { 0 } else { crit[k - 1].len() };
        let mut dk = Mat::zeros(rows, crit[k].len());
        for (j, c) in crit[k].iter().enumerate() {
            if let Some(chain) = table.get(c) {
                for (f, coeff) in chain {
                    dk.set(pos[f], j, coeff.clone());
                }
            }
        }
        diffs.push(dk);
    }
    let labels = crit
        .iter()
        .map(|cells| cells.iter().map(|c| u.label(c).to_string()).collect())
        .collect();
    GradedComplex::new(diffs, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_mesh() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn universe_complex_squares_to_zero() {
        let m = tri_mesh();
        let u: Universe<i64> = mesh_universe(&m, CellFilter::All);
        let c = u.complex().unwrap();
        assert_eq!(c.ranks(), &[3, 3, 1]);
    }

    #[test]
    fn single_triangle_elimination() {
        let mesh = tri_mesh();
        let u: Universe<i64> = mesh_universe(&mesh, CellFilter::All);
        // pair v1 with (0,1), v2 with (0,2), triangle with edge (1,2)
        let e01 = (1, mesh.edge_id(0, 1).unwrap());
        let e02 = (1, mesh.edge_id(0, 2).unwrap());
        let e12 = (1, mesh.edge_id(1, 2).unwrap());
        let mut m = Matching::new();
        m.add_pair((0, 1), e01);
        m.add_pair((0, 2), e02);
        m.add_pair(e12, (2, 0));
        let eq = eliminate(&u, &m).unwrap();
        assert_eq!(eq.complex.ranks(), &[1, 0, 0]);
        let v = vpath_complex(&u, &m).unwrap();
        assert_eq!(v.ranks(), eq.complex.ranks());
    }

    #[test]
    fn cyclic_matching_is_rejected() {
        let mesh = tri_mesh();
        let u: Universe<i64> = mesh_universe(&mesh, CellFilter::All);
        // v0 -> e01 -> v1 -> e12 -> v2 -> e02 -> v0 is a gradient loop
        let mut m = Matching::new();
        m.add_pair((0, 0), (1, mesh.edge_id(0, 1).unwrap()));
        m.add_pair((0, 1), (1, mesh.edge_id(1, 2).unwrap()));
        m.add_pair((0, 2), (1, mesh.edge_id(0, 2).unwrap()));
        assert!(matches!(
            validate_matching(&u, &m),
            Err(Error::AcyclicityViolation { .. })
        ));
    }

    #[test]
    fn eta_on_triangle() {
        let mesh = tri_mesh();
        let u: Universe<i64> = mesh_universe(&mesh, CellFilter::All);
        let mut m = Matching::new();
        m.add_pair((0, 1), (1, mesh.edge_id(0, 1).unwrap()));
        m.add_pair((1, mesh.edge_id(1, 2).unwrap()), (2, 0));
        eta_check(&u, &m).unwrap();
    }
}
