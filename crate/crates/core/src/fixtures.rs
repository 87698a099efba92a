use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::Mesh;
use crate::Rat;
use num_bigint::BigInt;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

fn need(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::BadParameters(msg.into()))
    }
}

/// Fan disk: rim 0..r-1, center r. The rim field rises from vertex 0 both
/// ways toward a single top at r/2, the center sits just above the rim
/// bottom, so the census is one minus minimum and one plus maximum.
pub fn disk(r: usize) -> Result<(Mesh, Field)> {
    need(r >= 3, "disk needs a rim of at least 3")?;
    let mut coords = Vec::new();
    for k in 0..r {
        let a = TAU * k as f64 / r as f64;
        coords.push([a.cos(), a.sin(), 0.0]);
    }
    coords.push([0.0, 0.0, 0.0]);
    let tris = (0..r).map(|k| [k, (k + 1) % r, r]).collect();
    let mesh = Mesh::new(coords, tris)?;
    let mut vals: Vec<Rat> = (0..r)
        .map(|k| {
            let m = k.min(r - k) as i64;
            rat(m * 10 * r as i64 + k as i64, 10 * r as i64)
        })
        .collect();
    vals.push(rat(1, 2));
    Ok((mesh, Field::new(vals)))
}

/// Annulus: outer rim 0..r-1, inner rim r..2r-1, both fields rising from
/// k = 0 to a top at k = r/2, the outer rim twice as fast. Census: minus
/// minimum and plus maximum outside, plus minimum and minus maximum inside.
pub fn annulus(r: usize) -> Result<(Mesh, Field)> {
    need(r >= 3, "annulus needs rims of at least 3")?;
    let mut coords = Vec::new();
    for (radius, z) in [(2.0, 0.0), (1.0, 0.0)] {
        for k in 0..r {
            let a = TAU * k as f64 / r as f64;
            coords.push([radius * a.cos(), radius * a.sin(), z]);
        }
    }
    let mut tris = Vec::new();
    for k in 0..r {
        let k1 = (k + 1) % r;
        tris.push([k, k1, r + k]);
        tris.push([r + k, r + k1, k1]);
    }
    let mesh = Mesh::new(coords, tris)?;
    let mut vals = Vec::new();
    for k in 0..r {
        let m = k.min(r - k) as i64;
        vals.push(rat(20 * m * 100 * r as i64 + k as i64, 100 * r as i64));
    }
    for k in 0..r {
        let m = k.min(r - k) as i64;
        vals.push(rat((10 * m + 5) * 100 * r as i64 + k as i64, 100 * r as i64));
    }
    Ok((mesh, Field::new(vals)))
}

/// Mobius band: rows b (0..r-1), m (r..2r-1), t (2r..3r-1) with the seam
/// b_r = t_0, m_r = m_0, t_r = b_0. One boundary circle of length 2r. The
/// middle row sits far above the boundary, so the band has a minus minimum
/// and minus maximum on the rim plus an interior saddle and maximum.
pub fn mobius(r: usize) -> Result<(Mesh, Field)> {
    need(r >= 4, "mobius needs at least 4 columns")?;
    let v = |row: usize, k: usize| -> usize {
        if k == r {
            // half twist
            match row {
                0 => 2 * r,
                1 => r,
                _ => 0,
            }
        } else {
            row * r + k
        }
    };
    let mut coords = vec![[0.0; 3]; 3 * r];
    for k in 0..r {
        let u = TAU * k as f64 / r as f64;
        for (row, w) in [(0usize, -0.5f64), (1, 0.0), (2, 0.5)] {
            let p = 1.0 + w * (u / 2.0).cos();
            coords[row * r + k] = [p * u.cos(), p * u.sin(), w * (u / 2.0).sin()];
        }
    }
    let mut tris = Vec::new();
    for k in 0..r {
        tris.push([v(0, k), v(0, k + 1), v(1, k + 1)]);
        tris.push([v(0, k), v(1, k + 1), v(1, k)]);
        tris.push([v(1, k), v(1, k + 1), v(2, k + 1)]);
        tris.push([v(1, k), v(2, k + 1), v(2, k)]);
    }
    let mesh = Mesh::new(coords, tris)?;
    // boundary positions: b_k at p = k, t_k at p = r + k
    let n = 2 * r as i64;
    let mut vals = vec![rat(0, 1); 3 * r];
    for k in 0..r {
        for (row, p) in [(0usize, k as i64), (2, (r + k) as i64)] {
            let m = p.min(n - p);
            vals[row * r + k] = rat(10 * m * 100 * r as i64 + p, 100 * r as i64);
        }
        let m = k.min(r - k) as i64;
        vals[r + k] = rat((1000 + 10 * m) * 100 * r as i64 + k as i64, 100 * r as i64);
    }
    Ok((mesh, Field::new(vals)))
}

/// Two m x m grid tori, one triangle removed from each, glued vertexwise
/// along the resulting 3-cycles, then one more triangle removed from the
/// second torus to open the boundary. A genus-2 surface with one boundary
/// circle. The three boundary vertices sit below everything else, so no
/// plus critical points occur.
pub fn genus_two(m: usize) -> Result<(Mesh, Field)> {
    need(m >= 4, "glued tori need m >= 4")?;
    let seam = [(0usize, 0usize), (1, 0), (1, 1)];
    let key = |t: usize, x: usize, y: usize| -> usize {
        let (x, y) = (x % m, y % m);
        if t == 1 && seam.contains(&(x, y)) {
            x * m + y
        } else {
            t * m * m + x * m + y
        }
    };
    let mut tris_raw: Vec<[usize; 3]> = Vec::new();
    for t in 0..2 {
        for x in 0..m {
            for y in 0..m {
                // (0,0) is the gluing hole in both tori; (1,2,2) opens the
                // boundary
                let skip_a = (x, y) == (0, 0) || (t, x, y) == (1, 2, 2);
                if !skip_a {
                    tris_raw.push([key(t, x, y), key(t, x + 1, y), key(t, x + 1, y + 1)]);
                }
                tris_raw.push([key(t, x, y), key(t, x + 1, y + 1), key(t, x, y + 1)]);
            }
        }
    }
    // compress keys to contiguous ids in key order
    let keys: std::collections::BTreeSet<usize> =
        tris_raw.iter().flatten().copied().collect();
    let remap: BTreeMap<usize, usize> =
        keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
    let tris: Vec<[usize; 3]> = tris_raw
        .iter()
        .map(|t| [remap[&t[0]], remap[&t[1]], remap[&t[2]]])
        .collect();
    let unkey = |k: usize| -> (usize, usize, usize) { (k / (m * m), (k % (m * m)) / m, k % m) };
    let mut coords = vec![[0.0; 3]; remap.len()];
    let mut vals = vec![rat(0, 1); remap.len()];
    for (k, id) in &remap {
        let (t, x, y) = unkey(*k);
        let (u, w) = (TAU * x as f64 / m as f64, TAU * y as f64 / m as f64);
        let p = 2.0 + w.cos();
        let dx = if t == 0 { -3.5 } else { 3.5 };
        coords[*id] = [p * u.cos() + dx, p * u.sin(), w.sin()];
        let base = (t as i64) * 1_000_000 + (x as i64) * 1000 + y as i64;
        vals[*id] = Rat::from_integer(BigInt::from(base));
    }
    for (i, (x, y)) in [(2usize, 2usize), (3, 2), (3, 3)].iter().enumerate() {
        vals[remap[&key(1, *x, *y)]] = Rat::from_integer(BigInt::from(-1000 + i as i64));
    }
    let mesh = Mesh::new(coords, tris)?;
    Ok((mesh, Field::new(vals)))
}

/// One m x m grid torus with a triangle removed: genus 1, one boundary
/// circle. Used by the random generator; carries no field of its own.
pub fn torus_with_hole(m: usize) -> Result<Mesh> {
    need(m >= 4, "torus grid needs m >= 4")?;
    let v = |x: usize, y: usize| -> usize { (x % m) * m + y % m };
    let mut tris = Vec::new();
    for x in 0..m {
        for y in 0..m {
            if (x, y) != (0, 0) {
                tris.push([v(x, y), v(x + 1, y), v(x + 1, y + 1)]);
            }
            tris.push([v(x, y), v(x + 1, y + 1), v(x, y + 1)]);
        }
    }
    let mut coords = vec![[0.0; 3]; m * m];
    for x in 0..m {
        for y in 0..m {
            let (u, w) = (TAU * x as f64 / m as f64, TAU * y as f64 / m as f64);
            let p = 2.0 + w.cos();
            coords[v(x, y)] = [p * u.cos(), p * u.sin(), w.sin()];
        }
    }
    Mesh::new(coords, tris)
}

/// Named fixture lookup used by the command line and the test suites.
pub fn fixture(name: &str, resolution: usize) -> Result<(Mesh, Field)> {
    match name {
        "disk" => disk(resolution),
        "annulus" => annulus(resolution),
        "mobius" => mobius(resolution),
        "genus2" => genus_two(4.max(resolution / 8)),
        other => Err(Error::BadParameters(format!(
            "unknown fixture `{}` (expected disk, annulus, mobius, or genus2)",
            other
        ))),
    }
}

pub const FIXTURE_NAMES: [&str; 4] = ["disk", "annulus", "mobius", "genus2"];

/// Deterministic byte stream: sha256 in counter mode. Quality far beyond
/// what shuffles and size draws need, and it keeps the crate free of an RNG
/// dependency in the library proper.
pub struct Stream {
    seed: u64,
    counter: u64,
    buf: Vec<u8>,
}

impl Stream {
    pub fn new(seed: u64) -> Stream {
        Stream { seed, counter: 0, buf: Vec::new() }
    }

    pub fn next_u64(&mut self) -> u64 {
        if self.buf.len() < 8 {
            let mut h = Sha256::new();
            h.update(b"stream");
            h.update(self.seed.to_le_bytes());
            h.update(self.counter.to_le_bytes());
            self.counter += 1;
            self.buf.extend_from_slice(&h.finalize());
        }
        let tail: Vec<u8> = self.buf.drain(..8).collect();
        u64::from_le_bytes(tail.try_into().unwrap())
    }

    /// Uniform draw from 0..n by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}

pub struct RandomMesh {
    pub mesh: Mesh,
    pub field: Field,
    pub shape: &'static str,
}

/// A random surface: one of the four families at a small resolution, kneaded
/// by edge flips, carrying a random injective integer field.
pub fn random_mesh(seed: u64) -> RandomMesh {
    let mut s = Stream::new(seed);
    let (mut mesh, shape) = match s.below(4) {
        0 => (disk(3 + s.below(10) as usize).unwrap().0, "disk"),
        1 => (annulus(3 + s.below(7) as usize).unwrap().0, "annulus"),
        2 => (mobius(4 + s.below(5) as usize).unwrap().0, "mobius"),
        _ => (
            torus_with_hole(4 + s.below(2) as usize).unwrap(),
            "torus-with-hole",
        ),
    };
    let flips = s.below(9);
    for _ in 0..flips {
        let e = s.below(mesh.edges().len() as u64) as usize;
        if let Ok(next) = mesh.flip_edge(e) {
            mesh = next;
        }
    }
    let mut ranks: Vec<i64> = (0..mesh.n_vertices() as i64).collect();
    s.shuffle(&mut ranks);
    let field = Field::new(
        ranks
            .into_iter()
            .map(|v| Rat::from_integer(BigInt::from(v)))
            .collect(),
    );
    RandomMesh { mesh, field, shape }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::extract_morse_data;
    use crate::field::ensure_generic;
    use crate::homology::homology;
    use crate::lower_star::CritKind;
    use crate::Int;
    use num_traits::{Signed, Zero};

    #[test]
    fn disk_sixteen_census() {
        let (mesh, field) = disk(16).unwrap();
        assert!(!ensure_generic(&field).perturbed);
        assert_eq!(mesh.euler_characteristic(), 1);
        let data = extract_morse_data::<Int>(&mesh, &field, 0).unwrap();
        // exactly: minus minimum at rim 0, plus maximum edge, its triangle
        assert_eq!(data.census.kinds.len(), 3);
        assert_eq!(data.census.plus_count(), 1);
        let kinds: Vec<CritKind> = data.census.kinds.values().copied().collect();
        assert!(kinds.contains(&CritKind::BoundaryMin { plus: false }));
        assert!(kinds.contains(&CritKind::BoundaryMax { plus: true }));
        assert!(kinds.contains(&CritKind::BirthTriangle));
        // the hat complex is one generator per degree with d(t*) = +-beta
        assert_eq!(data.hat.complex.ranks(), &[1, 1, 1]);
        let d1 = data.hat.complex.diff(1);
        let d2 = data.hat.complex.diff(2);
        assert!(d1.at(0, 0).is_zero());
        assert_eq!(d2.at(0, 0).clone().abs(), Int::from(1));
        assert_eq!(data.absolute.complex.ranks(), &[1, 0, 0]);
    }

    #[test]
    fn annulus_sixteen_structure() {
        let (mesh, field) = annulus(16).unwrap();
        assert!(!ensure_generic(&field).perturbed);
        assert_eq!(mesh.euler_characteristic(), 0);
        assert!(mesh.is_orientable());
        assert_eq!(mesh.boundary_loops().len(), 2);
        let data = extract_morse_data::<Int>(&mesh, &field, 0).unwrap();
        assert_eq!(data.census.plus_count(), 2);
        // absolute: one vertex, one edge, no differential
        assert_eq!(data.absolute.complex.ranks(), &[1, 1, 0]);
        assert!(data.absolute.complex.diff(1).is_zero());
        // relative: the spoke edge and the outer triangle, no differential
        assert_eq!(data.relative.complex.ranks(), &[0, 1, 1]);
        assert!(data.relative.complex.diff(2).is_zero());
        let h_rel = homology(&data.relative.complex);
        assert_eq!((h_rel[1].rank, h_rel[2].rank), (1, 1));
    }

    #[test]
    fn mobius_sixteen_torsion() {
        let (mesh, field) = mobius(16).unwrap();
        assert!(!ensure_generic(&field).perturbed);
        assert_eq!(mesh.euler_characteristic(), 0);
        assert!(!mesh.is_orientable());
        assert_eq!(mesh.boundary_loops().len(), 1);
        assert_eq!(mesh.boundary_loops()[0].len(), 32);
        let data = extract_morse_data::<Int>(&mesh, &field, 0).unwrap();
        assert_eq!(data.census.plus_count(), 0);
        assert_eq!(data.census.kinds.len(), 4);
        // tangent = absolute here, 4 generators
        assert_eq!(data.hat.complex, data.absolute.complex);
        // relative: saddle and maximum with d(tau) = +-2 s
        assert_eq!(data.relative.complex.ranks(), &[0, 1, 1]);
        assert_eq!(data.relative.complex.diff(2).at(0, 0).clone().abs(), Int::from(2));
        let h_rel = homology(&data.relative.complex);
        assert_eq!(h_rel[1].rank, 0);
        assert_eq!(h_rel[1].torsion, vec![Int::from(2)]);
        let h_abs = homology(&data.absolute.complex);
        assert_eq!((h_abs[0].rank, h_abs[1].rank, h_abs[2].rank), (1, 1, 0));
    }

    #[test]
    fn genus_two_structure() {
        let (mesh, field) = genus_two(8).unwrap();
        assert!(!ensure_generic(&field).perturbed);
        assert_eq!(mesh.euler_characteristic(), -3);
        assert!(mesh.is_orientable());
        assert_eq!(mesh.boundary_loops().len(), 1);
        let data = extract_morse_data::<Int>(&mesh, &field, 0).unwrap();
        assert_eq!(data.census.plus_count(), 0);
        let h = homology(&data.absolute.complex);
        assert_eq!((h[0].rank, h[1].rank, h[2].rank), (1, 4, 0));
        assert!(h[1].torsion.is_empty());
    }

    #[test]
    fn random_meshes_are_valid() {
        for seed in 0..12 {
            let rm = random_mesh(seed);
            assert!(rm.mesh.n_vertices() > 0, "{}", rm.shape);
            assert!(!ensure_generic(&rm.field).perturbed);
        }
        // determinism
        let a = random_mesh(5);
        let b = random_mesh(5);
        assert_eq!(a.mesh.triangles(), b.mesh.triangles());
        assert_eq!(a.shape, b.shape);
    }
}
