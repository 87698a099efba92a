//! Machine-readable verification reports. One analysis run extracts the
//! Morse data, compares all three homology tables against the simplicial
//! oracle, runs the extension and duality checks plus the geometric
//! cross-check, and serializes every verdict.
//!
//! Reports are byte-identical across runs of the same input and seed, so
//! nothing time- or host-dependent may enter them; timing belongs on stderr.
//!
//! Also here: the hand-authoring path. Morse data exports to a JSON file of
//! generator labels and sparse triplets, and such a file (possibly written
//! or edited by hand) re-imports into raw complexes plus twist pins that
//! `check_hand_data` verifies without reference to any mesh.

use std::fmt::Write as _;

use num_traits::Zero;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::complex::{twisted_sum, GradedComplex};
use crate::duality::{reversed_field_cross_check, verify_duality};
use crate::error::{Error, Result};
use crate::extract::{extract_morse_data_reseeded, MorseData};
use crate::field::{field_to_csv, parse_rat, Field};
use crate::geom::geometric_pairing_check;
use crate::homology::{group_string, homology, DegreeHomology};
use crate::lower_star::CritKind;
use crate::matrix::Mat;
use crate::mesh::{to_off, Mesh};
use crate::morse::{complete_twist, hat_extension, verify_extension, TwistEntry, DEFAULT_RETRIES};
use crate::oracle::{
    boundary_homology, groups_equal, les_of_pair, relative_homology, simplicial_homology,
};
use crate::ses::{check_exactness, long_exact_sequence, Ses};
use crate::Int;

pub const SCHEMA_VERSION: u32 = 1;

/// Tri-state verdict: `NotApplicable` never counts against a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    fn of(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn ok(self) -> bool {
        self != Verdict::Fail
    }

    fn word(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "not-applicable",
        }
    }
}

/// One nonzero matrix entry, `degree` naming the matrix in its family.
#[derive(Clone, Debug, Serialize)]
pub struct SparseEntry {
    pub degree: usize,
    pub row: usize,
    pub col: usize,
    pub value: String,
}

fn sparse_entries(mats: &[Mat<Int>], first_degree: usize) -> Vec<SparseEntry> {
    let mut out = Vec::new();
    for (k, m) in mats.iter().enumerate() {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if !m.at(i, j).is_zero() {
                    out.push(SparseEntry {
                        degree: first_degree + k,
                        row: i,
                        col: j,
                        value: m.at(i, j).to_string(),
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct InputBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    pub seed: u64,
    pub mesh_sha256: String,
    pub field_sha256: String,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_loops: usize,
    pub orientable: bool,
    pub euler: i64,
    pub euler_boundary: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusBlock {
    pub interior_min: usize,
    pub saddle: usize,
    pub interior_max: usize,
    pub boundary_min_plus: usize,
    pub boundary_min_minus: usize,
    pub boundary_max_plus: usize,
    pub boundary_max_minus: usize,
    pub birth_edges: usize,
    pub birth_triangles: usize,
    /// Seed the extraction actually used after genericity reseeding.
    pub extraction_seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomologyRow {
    pub degree: usize,
    pub morse: String,
    pub oracle: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpaceTable {
    pub rows: Vec<HomologyRow>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomologyBlock {
    pub absolute: SpaceTable,
    pub relative: SpaceTable,
    pub boundary: SpaceTable,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConnectingRank {
    pub degree: usize,
    pub rank: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionBlock {
    pub gens_boundary: usize,
    pub gens_relative: usize,
    pub gens_hat: usize,
    pub gens_absolute: usize,
    pub plus_count: usize,
    pub counts: Verdict,
    pub ses_exact: Verdict,
    pub hat_matches_absolute: Verdict,
    pub witness: String,
    pub les_exact: Verdict,
    pub connecting_ranks: Vec<ConnectingRank>,
    pub oracle_les: Verdict,
    /// The chosen twist, recorded entry by entry.
    pub twist: Vec<SparseEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityBlock {
    pub applicable: bool,
    pub eta: Verdict,
    pub comparison: Verdict,
    pub descent: Verdict,
    pub unimodular: Verdict,
    pub dets: Vec<String>,
    /// Chain-level pairing matrices, sparse; degree names the relative side.
    pub sigma: Vec<SparseEntry>,
    /// Chosen generator orientation signs after normalization, per degree.
    pub orientation_signs: Vec<Vec<i8>>,
    pub geometric: Verdict,
    pub geometric_signs: Vec<Option<i8>>,
    pub geometric_attempts: usize,
    pub geometric_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reversed_cross_check: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DualityBlock {
    fn inapplicable(note: &str) -> DualityBlock {
        DualityBlock {
            applicable: false,
            eta: Verdict::NotApplicable,
            comparison: Verdict::NotApplicable,
            descent: Verdict::NotApplicable,
            unimodular: Verdict::NotApplicable,
            dets: Vec::new(),
            sigma: Vec::new(),
            orientation_signs: Vec::new(),
            geometric: Verdict::NotApplicable,
            geometric_signs: Vec::new(),
            geometric_attempts: 0,
            geometric_seed: 0,
            reversed_cross_check: None,
            note: Some(note.to_string()),
        }
    }

    fn failed_at(eta: Verdict, comparison: Verdict, descent: Verdict, note: String) -> DualityBlock {
        DualityBlock {
            applicable: true,
            eta,
            comparison,
            descent,
            unimodular: Verdict::NotApplicable,
            dets: Vec::new(),
            sigma: Vec::new(),
            orientation_signs: Vec::new(),
            geometric: Verdict::NotApplicable,
            geometric_signs: Vec::new(),
            geometric_attempts: 0,
            geometric_seed: 0,
            reversed_cross_check: None,
            note: Some(note),
        }
    }

    fn verdicts(&self) -> Vec<Verdict> {
        let mut v = vec![
            self.eta,
            self.comparison,
            self.descent,
            self.unimodular,
            self.geometric,
        ];
        if let Some(r) = self.reversed_cross_check {
            v.push(r);
        }
        v
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub input: InputBlock,
    pub census: CensusBlock,
    pub homology: HomologyBlock,
    pub extension: ExtensionBlock,
    pub duality: DualityBlock,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub name: Option<String>,
    pub resolution: Option<usize>,
    pub seed: u64,
    /// Run the duality and geometric checks (refused on nonorientable input).
    pub pairing: bool,
    /// Also re-extract from the negated field and compare reversed homology.
    pub cross_check: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            name: None,
            resolution: None,
            seed: 0,
            pairing: true,
            cross_check: false,
        }
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{:02x}", b);
    }
    s
}

fn fmt_group(h: Option<&DegreeHomology<Int>>) -> String {
    match h {
        Some(h) => group_string::<Int>(h.rank, &h.torsion),
        None => "0".to_string(),
    }
}

fn space_table(morse: &GradedComplex<Int>, oracle: &[DegreeHomology<Int>]) -> SpaceTable {
    let mh = homology(morse);
    let verdict = Verdict::of(groups_equal(&mh, oracle));
    let top = mh.len().max(oracle.len());
    let rows = (0..top)
        .map(|k| HomologyRow {
            degree: k,
            morse: fmt_group(mh.get(k)),
            oracle: fmt_group(oracle.get(k)),
        })
        .collect();
    SpaceTable { rows, verdict }
}

fn census_block(data: &MorseData<Int>) -> CensusBlock {
    let c = &data.census;
    CensusBlock {
        interior_min: c.count(|k| matches!(k, CritKind::InteriorMin)),
        saddle: c.count(|k| matches!(k, CritKind::Saddle)),
        interior_max: c.count(|k| matches!(k, CritKind::InteriorMax)),
        boundary_min_plus: c.count(|k| matches!(k, CritKind::BoundaryMin { plus: true })),
        boundary_min_minus: c.count(|k| matches!(k, CritKind::BoundaryMin { plus: false })),
        boundary_max_plus: c.count(|k| matches!(k, CritKind::BoundaryMax { plus: true })),
        boundary_max_minus: c.count(|k| matches!(k, CritKind::BoundaryMax { plus: false })),
        birth_edges: c.count(|k| matches!(k, CritKind::BirthEdge)),
        birth_triangles: c.count(|k| matches!(k, CritKind::BirthTriangle)),
        extraction_seed: data.seed,
    }
}

fn gens(side: &crate::gradient::MorseEquivalence<Int>) -> usize {
    side.crit.iter().map(Vec::len).sum()
}

fn extension_block(mesh: &Mesh, data: &MorseData<Int>) -> Result<ExtensionBlock> {
    let gens_boundary = gens(&data.boundary);
    let gens_relative = gens(&data.relative);
    let gens_hat = gens(&data.hat);
    let gens_absolute = gens(&data.absolute);
    let plus_count = data.census.plus_count();
    let counts = Verdict::of(gens_hat == gens_absolute + 2 * plus_count);

    let twist = match hat_extension(mesh, data) {
        Ok(ext) => sparse_entries(&ext.phi[1..], 1),
        Err(_) => Vec::new(),
    };
    let oracle = les_of_pair::<Int>(mesh)?;
    match verify_extension(mesh, data, Some(&oracle)) {
        Ok(r) => Ok(ExtensionBlock {
            gens_boundary,
            gens_relative,
            gens_hat,
            gens_absolute,
            plus_count,
            counts: Verdict::of(r.counts_consistent),
            ses_exact: Verdict::of(r.ses_exact),
            hat_matches_absolute: Verdict::of(r.hat_matches_absolute),
            witness: r.witness.to_string(),
            les_exact: Verdict::of(r.les_exact),
            connecting_ranks: r
                .connecting_ranks
                .iter()
                .map(|&(degree, rank)| ConnectingRank { degree, rank })
                .collect(),
            oracle_les: match r.oracle_match {
                Some(ok) => Verdict::of(ok),
                None => Verdict::NotApplicable,
            },
            twist,
            error: None,
        }),
        Err(e) => Ok(ExtensionBlock {
            gens_boundary,
            gens_relative,
            gens_hat,
            gens_absolute,
            plus_count,
            counts,
            ses_exact: Verdict::Fail,
            hat_matches_absolute: Verdict::Fail,
            witness: "none".to_string(),
            les_exact: Verdict::Fail,
            connecting_ranks: Vec::new(),
            oracle_les: Verdict::Fail,
            twist,
            error: Some(e.to_string()),
        }),
    }
}

fn duality_block(
    mesh: &Mesh,
    field: &Field,
    data: &MorseData<Int>,
    opts: &AnalyzeOptions,
) -> Result<DualityBlock> {
    if !opts.pairing {
        return Ok(DualityBlock::inapplicable("pairing disabled"));
    }
    let rep = match verify_duality::<Int>(mesh, data) {
        Ok(rep) => rep,
        Err(Error::NotOrientable) => {
            return Ok(DualityBlock::inapplicable("surface is not orientable"));
        }
        Err(e @ Error::EtaMismatch { .. }) => {
            return Ok(DualityBlock::failed_at(
                Verdict::Fail,
                Verdict::NotApplicable,
                Verdict::NotApplicable,
                e.to_string(),
            ));
        }
        Err(e @ Error::NotQuasiIso { .. }) | Err(e @ Error::InvariantViolation { .. }) => {
            return Ok(DualityBlock::failed_at(
                Verdict::Pass,
                Verdict::Fail,
                Verdict::NotApplicable,
                e.to_string(),
            ));
        }
        Err(e @ Error::DescentViolated { .. }) => {
            return Ok(DualityBlock::failed_at(
                Verdict::Pass,
                Verdict::Pass,
                Verdict::Fail,
                e.to_string(),
            ));
        }
        Err(e) => return Err(e),
    };

    let mut note = None;
    let (geometric, geometric_signs, geometric_attempts, geometric_seed) =
        match geometric_pairing_check::<Int>(mesh, field, data, opts.seed) {
            Ok(g) => (Verdict::of(g.matched), g.signs, g.attempts, g.witness_seed),
            Err(e @ Error::TransversalityFailure(_)) => {
                note = Some(e.to_string());
                (Verdict::Fail, Vec::new(), DEFAULT_RETRIES, opts.seed)
            }
            Err(e) => return Err(e),
        };

    let reversed_cross_check = if opts.cross_check {
        Some(match reversed_field_cross_check::<Int>(mesh, field, data, opts.seed) {
            Ok(ok) => Verdict::of(ok),
            Err(e) => {
                if note.is_none() {
                    note = Some(e.to_string());
                }
                Verdict::Fail
            }
        })
    } else {
        None
    };

    Ok(DualityBlock {
        applicable: true,
        eta: Verdict::Pass,
        comparison: Verdict::Pass,
        descent: Verdict::Pass,
        unimodular: Verdict::of(rep.homology.unimodular),
        dets: rep.homology.dets.iter().map(|d| d.to_string()).collect(),
        sigma: sparse_entries(&rep.sigma.mats, 0),
        orientation_signs: rep.eps_perp,
        geometric,
        geometric_signs,
        geometric_attempts,
        geometric_seed,
        reversed_cross_check,
        note,
    })
}

/// Full pipeline on one mesh and field: extraction, homology tables against
/// the oracle, extension checks, duality checks, geometric cross-check.
pub fn analyze(mesh: &Mesh, field: &Field, opts: &AnalyzeOptions) -> Result<Report> {
    let input = InputBlock {
        name: opts.name.clone(),
        resolution: opts.resolution,
        seed: opts.seed,
        mesh_sha256: sha_hex(to_off(mesh).as_bytes()),
        field_sha256: sha_hex(field_to_csv(field).as_bytes()),
        vertices: mesh.n_vertices(),
        edges: mesh.edges().len(),
        triangles: mesh.triangles().len(),
        boundary_loops: mesh.boundary_loops().len(),
        orientable: mesh.is_orientable(),
        euler: mesh.euler_characteristic(),
        euler_boundary: mesh.boundary_euler_characteristic(),
    };

    let data: MorseData<Int> = extract_morse_data_reseeded(mesh, field, opts.seed, DEFAULT_RETRIES)?;
    let census = census_block(&data);

    let homology_block = HomologyBlock {
        absolute: space_table(&data.absolute.complex, &simplicial_homology(mesh)?),
        relative: space_table(&data.relative.complex, &relative_homology(mesh)?),
        boundary: space_table(&data.boundary.complex, &boundary_homology(mesh)?),
    };

    let extension = extension_block(mesh, &data)?;
    let duality = duality_block(mesh, field, &data, opts)?;

    let mut verdicts = vec![
        homology_block.absolute.verdict,
        homology_block.relative.verdict,
        homology_block.boundary.verdict,
        extension.counts,
        extension.ses_exact,
        extension.hat_matches_absolute,
        extension.les_exact,
        extension.oracle_les,
    ];
    verdicts.extend(duality.verdicts());
    let pass = verdicts.iter().all(|v| v.ok());

    Ok(Report {
        schema_version: SCHEMA_VERSION,
        input,
        census,
        homology: homology_block,
        extension,
        duality,
        pass,
    })
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.pass
    }

    /// Pretty JSON with a trailing newline; byte-stable for fixed input.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema {}", self.schema_version);
        s.push_str(&input_text(&self.input));
        let c = &self.census;
        let _ = writeln!(
            s,
            "census (seed {}): interior {}/{}/{}, boundary min +{}/-{}, boundary max +{}/-{}, births {}+{}",
            c.extraction_seed,
            c.interior_min,
            c.saddle,
            c.interior_max,
            c.boundary_min_plus,
            c.boundary_min_minus,
            c.boundary_max_plus,
            c.boundary_max_minus,
            c.birth_edges,
            c.birth_triangles
        );
        for (label, table) in [
            ("surface", &self.homology.absolute),
            ("pair", &self.homology.relative),
            ("boundary", &self.homology.boundary),
        ] {
            let cells: Vec<String> = table
                .rows
                .iter()
                .map(|r| format!("H{} {} | {}", r.degree, r.morse, r.oracle))
                .collect();
            let _ = writeln!(s, "homology {}: {} [{}]", label, table.verdict.word(), cells.join("; "));
        }
        let e = &self.extension;
        let _ = writeln!(
            s,
            "extension: counts={} ses={} homology={} ({}) les={} oracle={} gens {}+2*{}={}",
            e.counts.word(),
            e.ses_exact.word(),
            e.hat_matches_absolute.word(),
            e.witness,
            e.les_exact.word(),
            e.oracle_les.word(),
            e.gens_absolute,
            e.plus_count,
            e.gens_hat
        );
        s.push_str(&duality_text(&self.duality));
        let _ = writeln!(s, "overall: {}", if self.pass { "pass" } else { "fail" });
        s
    }

    /// The pairing-only projection of this report.
    pub fn pairing_view(&self) -> PairingView<'_> {
        PairingView {
            schema_version: self.schema_version,
            input: &self.input,
            duality: &self.duality,
            pass: self.duality.verdicts().iter().all(|v| v.ok()),
        }
    }
}

fn input_text(i: &InputBlock) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "input: name={} resolution={} seed={}",
        i.name.as_deref().unwrap_or("-"),
        i.resolution.map_or("-".to_string(), |r| r.to_string()),
        i.seed
    );
    let _ = writeln!(
        s,
        "mesh: {} vertices, {} edges, {} triangles, {} boundary loop(s), orientable={}, chi={}, boundary chi={}",
        i.vertices, i.edges, i.triangles, i.boundary_loops, i.orientable, i.euler, i.euler_boundary
    );
    s
}

fn duality_text(d: &DualityBlock) -> String {
    let mut s = String::new();
    if d.applicable {
        let _ = writeln!(
            s,
            "duality: eta={} comparison={} descent={} unimodular={} dets=[{}] geometric={} (attempts {}, seed {})",
            d.eta.word(),
            d.comparison.word(),
            d.descent.word(),
            d.unimodular.word(),
            d.dets.join(", "),
            d.geometric.word(),
            d.geometric_attempts,
            d.geometric_seed
        );
        if let Some(r) = d.reversed_cross_check {
            let _ = writeln!(s, "reversed cross-check: {}", r.word());
        }
        if let Some(n) = &d.note {
            let _ = writeln!(s, "note: {}", n);
        }
    } else {
        let _ = writeln!(s, "duality: not applicable ({})", d.note.as_deref().unwrap_or(""));
    }
    s
}

/// Pairing-only slice of a report, serialized on its own.
#[derive(Clone, Debug, Serialize)]
pub struct PairingView<'a> {
    pub schema_version: u32,
    pub input: &'a InputBlock,
    pub duality: &'a DualityBlock,
    pub pass: bool,
}

impl PairingView<'_> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("pairing view serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema {}", self.schema_version);
        s.push_str(&input_text(self.input));
        s.push_str(&duality_text(self.duality));
        let _ = writeln!(s, "overall: {}", if self.pass { "pass" } else { "fail" });
        s
    }
}

/// One row of a verification suite: a fixture's full report, or the checks
/// of one hand-authored data file, or the error that kept either from
/// running. Failures here are data, not process errors.
#[derive(Clone, Debug, Serialize)]
pub struct AggregateEntry {
    pub name: String,
    pub kind: &'static str,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<DataChecks>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AggregateEntry {
    pub fn fixture(name: String, report: Report) -> AggregateEntry {
        AggregateEntry {
            name,
            kind: "fixture",
            pass: report.pass,
            report: Some(report),
            checks: None,
            error: None,
        }
    }

    pub fn data(name: String, checks: DataChecks) -> AggregateEntry {
        AggregateEntry {
            name,
            kind: "data",
            pass: checks.pass,
            report: None,
            checks: Some(checks),
            error: None,
        }
    }

    pub fn failed(name: String, kind: &'static str, error: String) -> AggregateEntry {
        AggregateEntry { name, kind, pass: false, report: None, checks: None, error: Some(error) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Aggregate {
    pub schema_version: u32,
    pub entries: Vec<AggregateEntry>,
    pub failures: usize,
    pub pass: bool,
}

impl Aggregate {
    pub fn new(entries: Vec<AggregateEntry>) -> Aggregate {
        let failures = entries.iter().filter(|e| !e.pass).count();
        Aggregate { schema_version: SCHEMA_VERSION, entries, failures, pass: failures == 0 }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("aggregate serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "schema {}", self.schema_version);
        for e in &self.entries {
            match &e.error {
                Some(err) => {
                    let _ = writeln!(s, "{} ({}): fail ({})", e.name, e.kind, err);
                }
                None => {
                    let _ = writeln!(
                        s,
                        "{} ({}): {}",
                        e.name,
                        e.kind,
                        if e.pass { "pass" } else { "fail" }
                    );
                }
            }
        }
        let _ = writeln!(s, "failures: {}", self.failures);
        let _ = writeln!(s, "overall: {}", if self.pass { "pass" } else { "fail" });
        s
    }
}

fn jget<'a>(v: &'a Value, key: &str, what: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::Parse(format!("{}: missing field `{}`", what, key)))
}

fn jarray<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::Parse(format!("{}: expected an array", what)))
}

fn jusize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| Error::Parse(format!("{}: expected a nonnegative integer", what)))
}

fn jint(v: &Value, what: &str) -> Result<Int> {
    if let Some(s) = v.as_str() {
        s.parse::<Int>()
            .map_err(|_| Error::Parse(format!("{}: bad integer `{}`", what, s)))
    } else if let Some(i) = v.as_i64() {
        Ok(Int::from(i))
    } else {
        Err(Error::Parse(format!("{}: expected an integer", what)))
    }
}

/// Parses the single-file input form: a JSON object with `mesh.vertices`
/// (coordinate pairs or triples), `mesh.triangles` (index triples),
/// `field.values` (exact decimal or rational strings, one per vertex), and
/// an optional `orientation` assertion (`"orientable"`, `"nonorientable"`,
/// or a boolean) checked against the mesh.
pub fn parse_bundle(text: &str) -> Result<(Mesh, Field)> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("bundle: {}", e)))?;
    let mesh_v = jget(&v, "mesh", "bundle")?;
    let mut coords = Vec::new();
    for (i, row) in jarray(jget(mesh_v, "vertices", "bundle.mesh")?, "bundle.mesh.vertices")?
        .iter()
        .enumerate()
    {
        let what = format!("bundle.mesh.vertices[{}]", i);
        let row = jarray(row, &what)?;
        if row.len() != 2 && row.len() != 3 {
            return Err(Error::Parse(format!("{}: expected 2 or 3 coordinates", what)));
        }
        let mut c = [0.0f64; 3];
        for (k, x) in row.iter().enumerate() {
            c[k] = x
                .as_f64()
                .ok_or_else(|| Error::Parse(format!("{}: expected a number", what)))?;
        }
        coords.push(c);
    }
    let mut tris = Vec::new();
    for (i, row) in jarray(jget(mesh_v, "triangles", "bundle.mesh")?, "bundle.mesh.triangles")?
        .iter()
        .enumerate()
    {
        let what = format!("bundle.mesh.triangles[{}]", i);
        let row = jarray(row, &what)?;
        if row.len() != 3 {
            return Err(Error::Parse(format!("{}: expected 3 vertex ids", what)));
        }
        tris.push([
            jusize(&row[0], &what)?,
            jusize(&row[1], &what)?,
            jusize(&row[2], &what)?,
        ]);
    }
    let mesh = Mesh::new(coords, tris)?;

    let field_v = jget(&v, "field", "bundle")?;
    let mut values = Vec::new();
    for (i, val) in jarray(jget(field_v, "values", "bundle.field")?, "bundle.field.values")?
        .iter()
        .enumerate()
    {
        let what = format!("bundle.field.values[{}]", i);
        let tok = match val {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => return Err(Error::Parse(format!("{}: expected a value", what))),
        };
        values.push(parse_rat(&tok)?);
    }
    if values.len() != mesh.n_vertices() {
        return Err(Error::Parse(format!(
            "bundle.field: {} values for {} vertices",
            values.len(),
            mesh.n_vertices()
        )));
    }
    let field = Field::new(values);

    if let Some(want) = v.get("orientation") {
        let want_orientable = match want {
            Value::Bool(b) => *b,
            Value::String(s) if s == "orientable" => true,
            Value::String(s) if s == "nonorientable" => false,
            _ => {
                return Err(Error::Parse(
                    "bundle.orientation: expected a boolean, \"orientable\", or \"nonorientable\""
                        .to_string(),
                ))
            }
        };
        if want_orientable != mesh.is_orientable() {
            return Err(Error::Parse(format!(
                "bundle.orientation: asserted {} but the mesh is {}",
                if want_orientable { "orientable" } else { "nonorientable" },
                if mesh.is_orientable() { "orientable" } else { "nonorientable" },
            )));
        }
    }
    Ok((mesh, field))
}

/// A complex as written in a data file: labels per degree plus differential
/// matrices, not yet validated.
#[derive(Clone, Debug)]
pub struct RawComplex {
    pub labels: Vec<Vec<String>>,
    pub diffs: Vec<Mat<Int>>,
}

impl RawComplex {
    pub fn build(&self) -> Result<GradedComplex<Int>> {
        GradedComplex::new(self.diffs.clone(), self.labels.clone())
    }
}

/// Contents of a Morse-data file: the three complexes and the twist pins.
#[derive(Clone, Debug)]
pub struct HandData {
    pub absolute: RawComplex,
    pub relative: RawComplex,
    pub boundary: RawComplex,
    pub pins: Vec<TwistEntry<Int>>,
}

#[derive(Serialize)]
struct ComplexFile {
    generators: Vec<Vec<String>>,
    differential: Vec<SparseEntry>,
}

fn complex_file(c: &GradedComplex<Int>) -> ComplexFile {
    let top = c.top_degree();
    let generators = (0..=top).map(|k| c.labels(k).to_vec()).collect();
    let mats: Vec<Mat<Int>> = (1..=top).map(|k| c.diff(k).clone()).collect();
    ComplexFile {
        generators,
        differential: sparse_entries(&mats, 1),
    }
}

/// Serializes extracted Morse data in the hand-authoring schema: generator
/// labels and sparse differential triplets for the absolute, relative, and
/// boundary complexes, plus the twist as sparse triplets.
pub fn morse_data_to_json(mesh: &Mesh, data: &MorseData<Int>) -> Result<String> {
    #[derive(Serialize)]
    struct DataFile {
        schema_version: u32,
        absolute: ComplexFile,
        relative: ComplexFile,
        boundary: ComplexFile,
        twist: Vec<SparseEntry>,
    }
    let ext = hat_extension(mesh, data)?;
    let file = DataFile {
        schema_version: SCHEMA_VERSION,
        absolute: complex_file(&data.absolute.complex),
        relative: complex_file(&data.relative.complex),
        boundary: complex_file(&data.boundary.complex),
        twist: sparse_entries(&ext.phi[1..], 1),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("data file serializes");
    s.push('\n');
    Ok(s)
}

fn raw_complex(v: &Value, what: &str) -> Result<RawComplex> {
    let mut labels: Vec<Vec<String>> = Vec::new();
    for (k, row) in jarray(jget(v, "generators", what)?, &format!("{}.generators", what))?
        .iter()
        .enumerate()
    {
        let what_row = format!("{}.generators[{}]", what, k);
        let mut names = Vec::new();
        for name in jarray(row, &what_row)? {
            names.push(
                name.as_str()
                    .ok_or_else(|| Error::Parse(format!("{}: expected a string", what_row)))?
                    .to_string(),
            );
        }
        labels.push(names);
    }
    if labels.is_empty() {
        return Err(Error::Parse(format!("{}: no generator degrees", what)));
    }
    let ranks: Vec<usize> = labels.iter().map(Vec::len).collect();
    let mut diffs: Vec<Mat<Int>> = (0..ranks.len())
        .map(|k| {
            let rows = if k == 0 { 0 } else { ranks[k - 1] };
            Mat::zeros(rows, ranks[k])
        })
        .collect();
    for (i, entry) in jarray(jget(v, "differential", what)?, &format!("{}.differential", what))?
        .iter()
        .enumerate()
    {
        let what_e = format!("{}.differential[{}]", what, i);
        let degree = jusize(jget(entry, "degree", &what_e)?, &what_e)?;
        let row = jusize(jget(entry, "row", &what_e)?, &what_e)?;
        let col = jusize(jget(entry, "col", &what_e)?, &what_e)?;
        let value = jint(jget(entry, "value", &what_e)?, &what_e)?;
        if degree == 0 || degree >= ranks.len() || row >= ranks[degree - 1] || col >= ranks[degree]
        {
            return Err(Error::Parse(format!("{}: entry out of range", what_e)));
        }
        diffs[degree].set(row, col, value);
    }
    Ok(RawComplex { labels, diffs })
}

/// Parses the hand-authoring schema back into raw complexes and twist pins.
pub fn morse_data_from_json(text: &str) -> Result<HandData> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("data file: {}", e)))?;
    let absolute = raw_complex(jget(&v, "absolute", "data file")?, "absolute")?;
    let relative = raw_complex(jget(&v, "relative", "data file")?, "relative")?;
    let boundary = raw_complex(jget(&v, "boundary", "data file")?, "boundary")?;
    let mut pins = Vec::new();
    for (i, entry) in jarray(jget(&v, "twist", "data file")?, "twist")?.iter().enumerate() {
        let what = format!("twist[{}]", i);
        pins.push(TwistEntry {
            degree: jusize(jget(entry, "degree", &what)?, &what)?,
            row: jusize(jget(entry, "row", &what)?, &what)?,
            col: jusize(jget(entry, "col", &what)?, &what)?,
            value: jint(jget(entry, "value", &what)?, &what)?,
        });
    }
    Ok(HandData { absolute, relative, boundary, pins })
}

/// Verification verdicts for one hand-authored data file.
#[derive(Clone, Debug, Serialize)]
pub struct DataChecks {
    pub complexes_valid: Verdict,
    pub twist_compatible: Verdict,
    pub ses_exact: Verdict,
    pub les_exact: Verdict,
    pub hat_matches_absolute: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

impl DataChecks {
    fn finish(mut self) -> DataChecks {
        self.pass = [
            self.complexes_valid,
            self.twist_compatible,
            self.ses_exact,
            self.les_exact,
            self.hat_matches_absolute,
        ]
        .iter()
        .all(|v| v.ok());
        self
    }

    fn stopped(valid: Verdict, twist: Verdict, error: String) -> DataChecks {
        DataChecks {
            complexes_valid: valid,
            twist_compatible: twist,
            ses_exact: Verdict::NotApplicable,
            les_exact: Verdict::NotApplicable,
            hat_matches_absolute: Verdict::NotApplicable,
            error: Some(error),
            pass: false,
        }
    }
}

/// Re-verifies hand-authored Morse data with no mesh in sight: complexes
/// valid, pins completable to a compatible twist, the extension sequence
/// exact with an exact long sequence, and the extension carrying the
/// homology of the absolute complex.
pub fn check_hand_data(hd: &HandData) -> DataChecks {
    let (absolute, relative, boundary) =
        match (hd.absolute.build(), hd.relative.build(), hd.boundary.build()) {
            (Ok(a), Ok(r), Ok(b)) => (a, r, b),
            (a, r, b) => {
                let e = [a.err(), r.err(), b.err()].into_iter().flatten().next().unwrap();
                return DataChecks::stopped(
                    Verdict::Fail,
                    Verdict::NotApplicable,
                    e.to_string(),
                );
            }
        };
    for pin in &hd.pins {
        let bad = pin.degree == 0
            || pin.degree > relative.top_degree()
            || pin.row >= boundary.rank(pin.degree - 1)
            || pin.col >= relative.rank(pin.degree);
        if bad {
            return DataChecks::stopped(
                Verdict::Pass,
                Verdict::Fail,
                format!(
                    "twist pin out of range: degree {} entry ({},{})",
                    pin.degree, pin.row, pin.col
                ),
            );
        }
    }
    let phi = match complete_twist(&boundary, &relative, &hd.pins) {
        Ok(phi) => phi,
        Err(e) => return DataChecks::stopped(Verdict::Pass, Verdict::Fail, e.to_string()),
    };
    let (total, incl, proj) = match twisted_sum(&boundary, &relative, &phi) {
        Ok(t) => t,
        Err(e) => return DataChecks::stopped(Verdict::Pass, Verdict::Fail, e.to_string()),
    };
    let ses = Ses {
        sub: boundary,
        total: total.clone(),
        quot: relative,
        incl,
        proj,
    };
    let ses_exact = Verdict::of(check_exactness(&ses).is_ok());
    let les_exact = Verdict::of(
        long_exact_sequence(&ses)
            .and_then(|les| les.verify())
            .is_ok(),
    );
    let hat_matches_absolute =
        Verdict::of(groups_equal(&homology(&total), &homology(&absolute)));
    DataChecks {
        complexes_valid: Verdict::Pass,
        twist_compatible: Verdict::Pass,
        ses_exact,
        les_exact,
        hat_matches_absolute,
        error: None,
        pass: false,
    }
    .finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture;

    fn analyzed(name: &str, res: usize) -> Report {
        let (mesh, field) = fixture(name, res).unwrap();
        let opts = AnalyzeOptions {
            name: Some(name.to_string()),
            resolution: Some(res),
            seed: 7,
            ..AnalyzeOptions::default()
        };
        analyze(&mesh, &field, &opts).unwrap()
    }

    #[test]
    fn disk_report_passes_and_is_deterministic() {
        let a = analyzed("disk", 8);
        assert!(a.pass, "{}", a.to_text());
        assert!(a.duality.applicable);
        assert_eq!(a.extension.witness, "chain-map");
        let b = analyzed("disk", 8);
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.to_json().contains("\"schema_version\": 1"));
    }

    #[test]
    fn mobius_report_passes_with_pairing_not_applicable() {
        let r = analyzed("mobius", 8);
        assert!(r.pass, "{}", r.to_text());
        assert!(!r.duality.applicable);
        assert_eq!(r.duality.unimodular, Verdict::NotApplicable);
        assert_eq!(r.duality.note.as_deref(), Some("surface is not orientable"));
        assert!(r
            .homology
            .relative
            .rows
            .iter()
            .any(|row| row.degree == 1 && row.morse == "Z/2" && row.oracle == "Z/2"));
    }

    #[test]
    fn no_pairing_flag_marks_duality_not_applicable() {
        let (mesh, field) = fixture("annulus", 8).unwrap();
        let opts = AnalyzeOptions { pairing: false, seed: 3, ..AnalyzeOptions::default() };
        let r = analyze(&mesh, &field, &opts).unwrap();
        assert!(r.pass);
        assert!(!r.duality.applicable);
    }

    #[test]
    fn bundle_round_trip_carries_mesh_and_field() {
        let text = r#"{
            "mesh": {
                "vertices": [[0,0],[1,0],[0,1],[1,1]],
                "triangles": [[0,1,2],[1,3,2]]
            },
            "field": {"values": ["0", "0.25", "1/2", "3"]},
            "orientation": "orientable"
        }"#;
        let (mesh, field) = parse_bundle(text).unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.triangles().len(), 2);
        assert_eq!(field.len(), 4);
        let wrong = text.replace("\"orientable\"", "\"nonorientable\"");
        assert!(matches!(parse_bundle(&wrong), Err(Error::Parse(_))));
        let short = text.replace(", \"3\"", "");
        assert!(matches!(parse_bundle(&short), Err(Error::Parse(_))));
    }

    #[test]
    fn hand_data_round_trip_verifies() {
        let (mesh, field) = fixture("disk", 8).unwrap();
        let data = crate::extract::extract_morse_data::<Int>(&mesh, &field, 0).unwrap();
        let text = morse_data_to_json(&mesh, &data).unwrap();
        let hd = morse_data_from_json(&text).unwrap();
        let checks = check_hand_data(&hd);
        assert!(checks.pass, "{:?}", checks);
    }

    #[test]
    fn zeroed_twist_pin_fails_exactly_the_homology_check() {
        let (mesh, field) = fixture("disk", 8).unwrap();
        let data = crate::extract::extract_morse_data::<Int>(&mesh, &field, 0).unwrap();
        let text = morse_data_to_json(&mesh, &data).unwrap();
        let mut hd = morse_data_from_json(&text).unwrap();
        assert!(!hd.pins.is_empty());
        for pin in &mut hd.pins {
            pin.value = Int::from(0);
        }
        let checks = check_hand_data(&hd);
        assert!(!checks.pass);
        assert_eq!(checks.ses_exact, Verdict::Pass);
        assert_eq!(checks.les_exact, Verdict::Pass);
        assert_eq!(checks.hat_matches_absolute, Verdict::Fail, "{:?}", checks);
    }
}
