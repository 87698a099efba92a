use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Neighbors of a vertex in link order. A path means the vertex lies on the
/// boundary; its first and last entries are the two boundary neighbors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Link {
    Cycle(Vec<usize>),
    Path(Vec<usize>),
}

impl Link {
    pub fn vertices(&self) -> &[usize] {
        match self {
            Link::Cycle(v) | Link::Path(v) => v,
        }
    }
}

/// A triangulated compact surface, possibly with boundary. Triangles are
/// stored as sorted triples in lexicographic order; orientation is tracked
/// separately as a sign per triangle relative to its sorted triple.
#[derive(Clone, Debug)]
pub struct Mesh {
    coords: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_ids: BTreeMap<[usize; 2], usize>,
    edge_tris: Vec<Vec<usize>>,
    vertex_edges: Vec<Vec<usize>>,
    vertex_tris: Vec<Vec<usize>>,
    links: Vec<Link>,
    orientation: Option<Vec<i8>>,
    boundary_loops: Vec<Vec<usize>>,
}

impl Mesh {
    pub fn new(coords: Vec<[f64; 3]>, tris: Vec<[usize; 3]>) -> Result<Mesh> {
        let n = coords.len();
        let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(tris.len());
        for t in &tris {
            let mut s = *t;
            s.sort_unstable();
            if s[0] == s[1] || s[1] == s[2] {
                return Err(Error::NotManifold(format!(
                    "degenerate triangle {:?}",
                    t
                )));
            }
            if s[2] >= n {
                return Err(Error::NotManifold(format!(
                    "triangle {:?} references a missing vertex",
                    t
                )));
            }
            triangles.push(s);
        }
        triangles.sort_unstable();
        for w in triangles.windows(2) {
            if w[0] == w[1] {
                return Err(Error::NotManifold(format!("duplicate triangle {:?}", w[0])));
            }
        }

        let mut edge_ids: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for t in &triangles {
            for e in [[t[0], t[1]], [t[0], t[2]], [t[1], t[2]]] {
                let next = edge_ids.len();
                edge_ids.entry(e).or_insert(next);
            }
        }
        // re-number edges in lexicographic order
        let mut edges: Vec<[usize; 2]> = edge_ids.keys().copied().collect();
        edges.sort_unstable();
        edge_ids = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let mut edge_tris = vec![Vec::new(); edges.len()];
        let mut vertex_edges = vec![Vec::new(); n];
        let mut vertex_tris = vec![Vec::new(); n];
        for (ti, t) in triangles.iter().enumerate() {
            for e in [[t[0], t[1]], [t[0], t[2]], [t[1], t[2]]] {
                edge_tris[edge_ids[&e]].push(ti);
            }
            for &v in t {
                vertex_tris[v].push(ti);
            }
        }
        for (ei, e) in edges.iter().enumerate() {
            if edge_tris[ei].is_empty() || edge_tris[ei].len() > 2 {
                return Err(Error::NotManifold(format!(
                    "edge {:?} lies in {} triangles",
                    e,
                    edge_tris[ei].len()
                )));
            }
            vertex_edges[e[0]].push(ei);
            vertex_edges[e[1]].push(ei);
        }
        for v in 0..n {
            if vertex_tris[v].is_empty() {
                return Err(Error::NotManifold(format!("isolated vertex {}", v)));
            }
        }

        let links = (0..n)
            .map(|v| build_link(v, &vertex_tris[v], &triangles, &edge_ids, &edge_tris))
            .collect::<Result<Vec<_>>>()?;

        let orientation = propagate_orientation(&triangles, &edge_ids, &edge_tris);
        let boundary_loops = walk_boundary_loops(&edges, &edge_tris, &links)?;

        Ok(Mesh {
            coords,
            triangles,
            edges,
            edge_ids,
            edge_tris,
            vertex_edges,
            vertex_tris,
            links,
            orientation,
            boundary_loops,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        let e = if a < b { [a, b] } else { [b, a] };
        self.edge_ids.get(&e).copied()
    }

    pub fn triangle_id(&self, a: usize, b: usize, c: usize) -> Option<usize> {
        let mut t = [a, b, c];
        t.sort_unstable();
        self.triangles.binary_search(&t).ok()
    }

    pub fn edge_triangles(&self, e: usize) -> &[usize] {
        &self.edge_tris[e]
    }

    pub fn vertex_edges(&self, v: usize) -> &[usize] {
        &self.vertex_edges[v]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn link(&self, v: usize) -> &Link {
        &self.links[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        matches!(self.links[v], Link::Path(_))
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e].len() == 1
    }

    /// The two boundary neighbors of a boundary vertex.
    pub fn boundary_neighbors(&self, v: usize) -> Option<(usize, usize)> {
        match &self.links[v] {
            Link::Path(p) => Some((p[0], p[p.len() - 1])),
            Link::Cycle(_) => None,
        }
    }

    pub fn is_orientable(&self) -> bool {
        self.orientation.is_some()
    }

    /// Per-triangle sign relative to the sorted triple, for the canonical
    /// propagated orientation (lowest triangle of each component positive).
    pub fn orientation(&self) -> Option<&[i8]> {
        self.orientation.as_deref()
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.coords.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn boundary_euler_characteristic(&self) -> i64 {
        let bv = (0..self.n_vertices())
            .filter(|&v| self.is_boundary_vertex(v))
            .count() as i64;
        let be = (0..self.edges.len())
            .filter(|&e| self.is_boundary_edge(e))
            .count() as i64;
        bv - be
    }

    pub fn vertex_label(&self, v: usize) -> String {
        format!("v{}", v)
    }

    pub fn edge_label(&self, e: usize) -> String {
        let [a, b] = self.edges[e];
        format!("e{}-{}", a, b)
    }

    pub fn triangle_label(&self, t: usize) -> String {
        let [a, b, c] = self.triangles[t];
        format!("t{}-{}-{}", a, b, c)
    }

    /// Global 1-to-4 refinement: one new vertex per edge, every triangle
    /// replaced by four. Homeomorphic to the original surface.
    pub fn refine(&self) -> Mesh {
        let n = self.coords.len();
        let mut coords = self.coords.clone();
        for e in &self.edges {
            let a = self.coords[e[0]];
            let b = self.coords[e[1]];
            coords.push([
                (a[0] + b[0]) / 2.0,
                (a[1] + b[1]) / 2.0,
                (a[2] + b[2]) / 2.0,
            ]);
        }
        let mid = |a: usize, b: usize| n + self.edge_id(a, b).unwrap();
        let mut tris = Vec::with_capacity(self.triangles.len() * 4);
        for t in &self.triangles {
            let [a, b, c] = *t;
            let (mab, mac, mbc) = (mid(a, b), mid(a, c), mid(b, c));
            tris.push([a, mab, mac]);
            tris.push([b, mab, mbc]);
            tris.push([c, mac, mbc]);
            tris.push([mab, mac, mbc]);
        }
        Mesh::new(coords, tris).expect("refinement of a valid mesh is valid")
    }

    /// Replaces the diagonal of the quadrilateral around an interior edge.
    /// Fails when the edge is on the boundary, the opposite diagonal already
    /// exists, or the result stops being a valid surface.
    pub fn flip_edge(&self, e: usize) -> Result<Mesh> {
        if self.is_boundary_edge(e) {
            return Err(Error::BadParameters("cannot flip a boundary edge".into()));
        }
        let [a, b] = self.edges[e];
        let (t1, t2) = (self.edge_tris[e][0], self.edge_tris[e][1]);
        let c = opposite_vertex(&self.triangles[t1], a, b);
        let d = opposite_vertex(&self.triangles[t2], a, b);
        if self.edge_id(c, d).is_some() {
            return Err(Error::BadParameters("flip target edge already present".into()));
        }
        let mut tris: Vec<[usize; 3]> = Vec::with_capacity(self.triangles.len());
        for (ti, t) in self.triangles.iter().enumerate() {
            if ti == t1 {
                tris.push(sorted3(a, c, d));
            } else if ti == t2 {
                tris.push(sorted3(b, c, d));
            } else {
                tris.push(*t);
            }
        }
        Mesh::new(self.coords.clone(), tris)
    }
}

fn sorted3(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut t = [a, b, c];
    t.sort_unstable();
    t
}

fn opposite_vertex(t: &[usize; 3], a: usize, b: usize) -> usize {
    *t.iter().find(|&&v| v != a && v != b).unwrap()
}

fn build_link(
    v: usize,
    vtris: &[usize],
    triangles: &[[usize; 3]],
    edge_ids: &BTreeMap<[usize; 2], usize>,
    edge_tris: &[Vec<usize>],
) -> Result<Link> {
    // adjacency between neighbors of v through triangles at v
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &ti in vtris {
        let t = &triangles[ti];
        let others: Vec<usize> = t.iter().copied().filter(|&x| x != v).collect();
        adj.entry(others[0]).or_default().push(others[1]);
        adj.entry(others[1]).or_default().push(others[0]);
    }
    let bad = || Error::NotManifold(format!("link of vertex {} is not a path or cycle", v));
    for nbrs in adj.values() {
        if nbrs.len() > 2 {
            return Err(bad());
        }
    }
    let degree_one: Vec<usize> = adj
        .iter()
        .filter(|(_, nbrs)| nbrs.len() == 1)
        .map(|(&w, _)| w)
        .collect();
    // endpoints must be exactly the neighbors across boundary edges
    let boundary_nbrs: Vec<usize> = adj
        .keys()
        .copied()
        .filter(|&w| {
            let e = if v < w { [v, w] } else { [w, v] };
            edge_ids.get(&e).map(|&ei| edge_tris[ei].len() == 1).unwrap_or(false)
        })
        .collect();
    if degree_one.len() != boundary_nbrs.len()
        || !degree_one.iter().all(|w| boundary_nbrs.contains(w))
    {
        return Err(bad());
    }
    match degree_one.len() {
        0 => {
            // single cycle covering all neighbors; canonical start and turn
            let start = *adj.keys().next().unwrap();
            let second = *adj[&start].iter().min().unwrap();
            let cyc = walk_from(start, second, &adj);
            if cyc.len() != adj.len() {
                return Err(bad());
            }
            Ok(Link::Cycle(cyc))
        }
        2 => {
            let (mut a, mut b) = (degree_one[0], degree_one[1]);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let path = walk_from(a, adj[&a][0], &adj);
            if path.len() != adj.len() || *path.last().unwrap() != b {
                return Err(bad());
            }
            Ok(Link::Path(path))
        }
        _ => Err(bad()),
    }
}

fn walk_from(start: usize, second: usize, adj: &BTreeMap<usize, Vec<usize>>) -> Vec<usize> {
    let mut out = vec![start];
    let (mut prev, mut cur) = (start, second);
    loop {
        out.push(cur);
        let next = adj[&cur].iter().copied().find(|&x| x != prev);
        match next {
            None => return out, // path endpoint
            Some(nx) => {
                if nx == start {
                    return out; // cycle closed
                }
                prev = cur;
                cur = nx;
            }
        }
    }
}

/// Breadth-first consistent orientation, seeded positively at the lowest
/// triangle of each component. None when some loop forces a conflict.
fn propagate_orientation(
    triangles: &[[usize; 3]],
    edge_ids: &BTreeMap<[usize; 2], usize>,
    edge_tris: &[Vec<usize>],
) -> Option<Vec<i8>> {
    let mut sign = vec![0i8; triangles.len()];
    for seed in 0..triangles.len() {
        if sign[seed] != 0 {
            continue;
        }
        sign[seed] = 1;
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some(ti) = queue.pop_front() {
            let t = &triangles[ti];
            for e in [[t[0], t[1]], [t[0], t[2]], [t[1], t[2]]] {
                let ei = edge_ids[&e];
                for &tj in &edge_tris[ei] {
                    if tj == ti {
                        continue;
                    }
                    // consistent when the shared edge is traversed in opposite
                    // directions: sign_i * coeff_i = -sign_j * coeff_j
                    let want = -sign[ti] * boundary_coeff(&triangles[ti], &e)
                        / boundary_coeff(&triangles[tj], &e);
                    if sign[tj] == 0 {
                        sign[tj] = want;
                        queue.push_back(tj);
                    } else if sign[tj] != want {
                        return None;
                    }
                }
            }
        }
    }
    Some(sign)
}

/// Coefficient of sorted edge e in the simplicial boundary of sorted triangle
/// t: the middle face enters negatively.
pub fn boundary_coeff(t: &[usize; 3], e: &[usize; 2]) -> i8 {
    if *e == [t[0], t[1]] {
        1
    } else if *e == [t[0], t[2]] {
        -1
    } else if *e == [t[1], t[2]] {
        1
    } else {
        panic!("edge {:?} is not a face of triangle {:?}", e, t)
    }
}

fn walk_boundary_loops(
    edges: &[[usize; 2]],
    edge_tris: &[Vec<usize>],
    links: &[Link],
) -> Result<Vec<Vec<usize>>> {
    let mut bnbrs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (ei, e) in edges.iter().enumerate() {
        if edge_tris[ei].len() == 1 {
            bnbrs.entry(e[0]).or_default().push(e[1]);
            bnbrs.entry(e[1]).or_default().push(e[0]);
        }
    }
    for (&v, nbrs) in &bnbrs {
        if nbrs.len() != 2 || !matches!(links[v], Link::Path(_)) {
            return Err(Error::NotManifold(format!(
                "boundary around vertex {} is not locally an arc",
                v
            )));
        }
    }
    let mut seen: std::collections::BTreeSet<usize> = Default::default();
    let mut loops = Vec::new();
    for &v in bnbrs.keys() {
        if seen.contains(&v) {
            continue;
        }
        let first = *bnbrs[&v].iter().min().unwrap();
        let mut cycle = vec![v];
        let (mut prev, mut cur) = (v, first);
        while cur != v {
            cycle.push(cur);
            let next = bnbrs[&cur].iter().copied().find(|&x| x != prev).unwrap();
            prev = cur;
            cur = next;
        }
        for &w in &cycle {
            seen.insert(w);
        }
        loops.push(cycle);
    }
    Ok(loops)
}

/// ASCII OFF reader. Face lines must be triangles.
pub fn parse_off(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty OFF file".into()))?;
    if header != "OFF" {
        return Err(Error::Parse(format!("expected OFF header, found {:?}", header)));
    }
    let counts = lines.next().ok_or_else(|| Error::Parse("missing counts line".into()))?;
    let cs: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad count {:?}", t))))
        .collect::<Result<_>>()?;
    if cs.len() < 2 {
        return Err(Error::Parse("counts line needs vertex and face counts".into()));
    }
    let (nv, nf) = (cs[0], cs[1]);
    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        let l = lines.next().ok_or_else(|| Error::Parse("missing vertex line".into()))?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad coordinate {:?}", t))))
            .collect::<Result<_>>()?;
        if xs.len() != 3 {
            return Err(Error::Parse(format!("vertex line {:?} needs 3 coordinates", l)));
        }
        coords.push([xs[0], xs[1], xs[2]]);
    }
    let mut tris = Vec::with_capacity(nf);
    for _ in 0..nf {
        let l = lines.next().ok_or_else(|| Error::Parse("missing face line".into()))?;
        let xs: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad face index {:?}", t))))
            .collect::<Result<_>>()?;
        if xs.len() != 4 || xs[0] != 3 {
            return Err(Error::Parse(format!("face line {:?} is not a triangle", l)));
        }
        tris.push([xs[1], xs[2], xs[3]]);
    }
    Mesh::new(coords, tris)
}

pub fn to_off(mesh: &Mesh) -> String {
    let mut out = String::from("OFF\n");
    out.push_str(&format!(
        "{} {} {}\n",
        mesh.n_vertices(),
        mesh.triangles().len(),
        mesh.edges().len()
    ));
    for c in mesh.coords() {
        out.push_str(&format!("{} {} {}\n", c[0], c[1], c[2]));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Mesh {
        // two triangles sharing a diagonal
        Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn square_structure() {
        let m = square();
        assert_eq!(m.edges().len(), 5);
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.boundary_loops()[0].len(), 4);
        assert!(m.is_orientable());
        assert!(m.is_boundary_vertex(0));
        assert_eq!(m.euler_characteristic(), 1);
        let diag = m.edge_id(0, 2).unwrap();
        assert!(!m.is_boundary_edge(diag));
    }

    #[test]
    fn edge_in_three_triangles_is_rejected() {
        let r = Mesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]],
            vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]],
        );
        assert!(matches!(r, Err(Error::NotManifold(_))));
    }

    #[test]
    fn pinched_vertex_is_rejected() {
        // two triangles meeting only at vertex 0: link is two disjoint arcs
        let r = Mesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]],
            vec![[0, 1, 2], [0, 3, 4]],
        );
        assert!(matches!(r, Err(Error::NotManifold(_))));
    }

    #[test]
    fn flip_square_diagonal() {
        let m = square();
        let diag = m.edge_id(0, 2).unwrap();
        let f = m.flip_edge(diag).unwrap();
        assert!(f.edge_id(1, 3).is_some());
        assert!(f.edge_id(0, 2).is_none());
        assert_eq!(f.euler_characteristic(), 1);
        // flipping the new diagonal back is blocked only by nothing: it works
        let back = f.flip_edge(f.edge_id(1, 3).unwrap()).unwrap();
        assert!(back.edge_id(0, 2).is_some());
    }

    #[test]
    fn refinement_preserves_shape() {
        let m = square();
        let r = m.refine();
        assert_eq!(r.triangles().len(), 8);
        assert_eq!(r.euler_characteristic(), 1);
        assert_eq!(r.boundary_loops().len(), 1);
        assert!(r.is_orientable());
    }

    #[test]
    fn off_roundtrip() {
        let m = square();
        let s = to_off(&m);
        let p = parse_off(&s).unwrap();
        assert_eq!(p.triangles(), m.triangles());
        assert_eq!(p.edges(), m.edges());
    }

    #[test]
    fn boundary_coefficients() {
        let t = [2usize, 5, 9];
        assert_eq!(boundary_coeff(&t, &[2, 5]), 1);
        assert_eq!(boundary_coeff(&t, &[2, 9]), -1);
        assert_eq!(boundary_coeff(&t, &[5, 9]), 1);
    }
}
