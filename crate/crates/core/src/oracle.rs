use crate::complex::ChainMap;
use crate::error::Result;
use crate::gradient::{mesh_universe, CellFilter, CellId, Universe};
use crate::homology::{homology, DegreeHomology};
use crate::matrix::Mat;
use crate::mesh::Mesh;
use crate::scalar::Scalar;
use crate::ses::{check_exactness, long_exact_sequence, LesRecord, Ses};

/// Reference homology computed straight from the simplicial chain complexes,
/// with no discrete gradient anywhere in the path. Everything Morse-side is
/// judged against these.
pub fn simplicial_homology<R: Scalar>(mesh: &Mesh) -> Result<Vec<DegreeHomology<R>>> {
    let u: Universe<R> = mesh_universe(mesh, CellFilter::All);
    Ok(homology(&u.complex()?))
}

/// Homology of the quotient by the boundary subcomplex.
pub fn relative_homology<R: Scalar>(mesh: &Mesh) -> Result<Vec<DegreeHomology<R>>> {
    let u: Universe<R> = mesh_universe(mesh, CellFilter::Interior);
    Ok(homology(&u.complex()?))
}

/// Homology of the boundary curve.
pub fn boundary_homology<R: Scalar>(mesh: &Mesh) -> Result<Vec<DegreeHomology<R>>> {
    let u: Universe<R> = mesh_universe(mesh, CellFilter::Boundary);
    Ok(homology(&u.complex()?))
}

/// The short exact sequence of simplicial chain complexes for the pair
/// (mesh, boundary): inclusion of boundary chains, projection onto interior
/// cells.
pub fn pair_ses<R: Scalar>(mesh: &Mesh) -> Result<Ses<R>> {
    let u_bd: Universe<R> = mesh_universe(mesh, CellFilter::Boundary);
    let u_all: Universe<R> = mesh_universe(mesh, CellFilter::All);
    let u_int: Universe<R> = mesh_universe(mesh, CellFilter::Interior);
    let sub = u_bd.complex()?;
    let total = u_all.complex()?;
    let quot = u_int.complex()?;
    let place = |cells: &[CellId], within: &[CellId]| -> Vec<usize> {
        cells
            .iter()
            .map(|c| within.binary_search(c).expect("cell listed in both universes"))
            .collect()
    };
    let mut incl_mats = Vec::new();
    let mut proj_mats = Vec::new();
    for k in 0..=u_all.top_dim() {
        let all = u_all.cells(k);
        let bd = u_bd.cells(k);
        let int = u_int.cells(k);
        let mut inc = Mat::zeros(all.len(), bd.len());
        for (j, i) in place(bd, all).into_iter().enumerate() {
            inc.set(i, j, R::one());
        }
        incl_mats.push(inc);
        let mut prj = Mat::zeros(int.len(), all.len());
        for (i, j) in place(int, all).into_iter().enumerate() {
            prj.set(i, j, R::one());
        }
        proj_mats.push(prj);
    }
    let ses = Ses {
        sub,
        total,
        quot,
        incl: ChainMap { mats: incl_mats },
        proj: ChainMap { mats: proj_mats },
    };
    check_exactness(&ses)?;
    Ok(ses)
}

/// The long exact homology sequence of the pair, slot-checked.
pub fn les_of_pair<R: Scalar>(mesh: &Mesh) -> Result<LesRecord<R>> {
    long_exact_sequence(&pair_ses(mesh)?)
}

/// Ranks and torsion must agree degree by degree.
pub fn groups_equal<R: Scalar>(a: &[DegreeHomology<R>], b: &[DegreeHomology<R>]) -> bool {
    let top = a.len().max(b.len());
    (0..top).all(|k| {
        let (ra, ta) = a.get(k).map(|h| (h.rank, h.torsion.clone())).unwrap_or((0, vec![]));
        let (rb, tb) = b.get(k).map(|h| (h.rank, h.torsion.clone())).unwrap_or((0, vec![]));
        ra == rb && ta == tb
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{annulus, disk, genus_two, mobius};
    use crate::Int;

    #[test]
    fn disk_reference_groups() {
        let (mesh, _) = disk(8).unwrap();
        let h = simplicial_homology::<Int>(&mesh).unwrap();
        assert_eq!((h[0].rank, h[1].rank, h[2].rank), (1, 0, 0));
        let hb = boundary_homology::<Int>(&mesh).unwrap();
        assert_eq!((hb[0].rank, hb[1].rank), (1, 1));
        let hr = relative_homology::<Int>(&mesh).unwrap();
        assert_eq!((hr[0].rank, hr[1].rank, hr[2].rank), (0, 0, 1));
    }

    #[test]
    fn mobius_relative_torsion_from_oracle() {
        let (mesh, _) = mobius(8).unwrap();
        let hr = relative_homology::<Int>(&mesh).unwrap();
        assert_eq!(hr[1].rank, 0);
        assert_eq!(hr[1].torsion, vec![Int::from(2)]);
        assert_eq!(hr[2].rank, 0);
    }

    #[test]
    fn les_connecting_ranks_on_annulus() {
        let (mesh, _) = annulus(8).unwrap();
        let les = les_of_pair::<Int>(&mesh).unwrap();
        // del_2: H2(M, dM) = Z hits the two rim circles' difference;
        // del_1: H1(M, dM) = Z maps onto the component difference
        assert_eq!(les.connecting_free_ranks(), vec![(2, 1), (1, 1)]);
    }

    #[test]
    fn genus_two_reference_groups() {
        let (mesh, _) = genus_two(4).unwrap();
        let h = simplicial_homology::<Int>(&mesh).unwrap();
        assert_eq!((h[0].rank, h[1].rank, h[2].rank), (1, 4, 0));
        assert!(h[1].torsion.is_empty());
    }
}
