//! Ensemble data model, JSON file format and validation.
//!
//! An ensemble is given by node counts per VN and CN type. The edge-perspective
//! fractions `λ_{γ,l} = N_γ q_{γ,l} / E_l` and `ρ_{δ,l} = N_δ s_{δ,l} / E_l` are
//! derived from those counts as exact rationals, so the per-edge-type simplex
//! constraints hold by construction once socket balance has been checked.

use std::collections::HashSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gf2::{self, Gf2Matrix, K_MAX, S_MAX};

pub type Rational = Ratio<i64>;

/// On-disk VN type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnTypeFile {
    pub name: String,
    pub generator: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub puncture: Option<Vec<u8>>,
    pub socket_types: Vec<usize>,
    pub count: u64,
}

/// On-disk CN type. Exactly one of `generator` / `parity_check` is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnTypeFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity_check: Option<Vec<Vec<u8>>>,
    pub socket_types: Vec<usize>,
    pub count: u64,
}

/// The ensemble file: edge types are numbered `1..=edge_types`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub edge_types: usize,
    pub vn_types: Vec<VnTypeFile>,
    pub cn_types: Vec<CnTypeFile>,
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation(format!("schema: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec file serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec file serializes")
    }
}

#[derive(Debug, Clone)]
pub struct VnType {
    pub name: String,
    pub generator: Gf2Matrix,
    /// `true` = transmitted, `false` = punctured; one flag per information bit.
    pub puncture: Vec<bool>,
    /// 0-based edge type of every socket.
    pub socket_types: Vec<usize>,
    pub count: u64,
    pub min_distance: Option<usize>,
}

impl VnType {
    pub fn k(&self) -> usize {
        self.generator.rows()
    }

    pub fn q(&self) -> usize {
        self.generator.cols()
    }

    /// Hamming weight of the puncturing vector.
    pub fn transmitted(&self) -> usize {
        self.puncture.iter().filter(|&&b| b).count()
    }

    pub fn is_unpunctured(&self) -> bool {
        self.puncture.iter().all(|&b| b)
    }

    /// `q_{γ,l}` for every edge type.
    pub fn sockets_per_type(&self, n_e: usize) -> Vec<usize> {
        count_types(&self.socket_types, n_e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CodeForm {
    Generator,
    ParityCheck(Gf2Matrix),
}

#[derive(Debug, Clone)]
pub struct CnType {
    pub name: String,
    /// Full-row-rank generator, derived from the parity-check matrix if that
    /// was the given form.
    pub generator: Gf2Matrix,
    pub form: CodeForm,
    pub socket_types: Vec<usize>,
    pub count: u64,
    pub min_distance: Option<usize>,
}

impl CnType {
    pub fn h(&self) -> usize {
        self.generator.rows()
    }

    pub fn s(&self) -> usize {
        self.generator.cols()
    }

    /// `s_{δ,l}` for every edge type.
    pub fn sockets_per_type(&self, n_e: usize) -> Vec<usize> {
        count_types(&self.socket_types, n_e)
    }
}

fn count_types(types: &[usize], n_e: usize) -> Vec<usize> {
    let mut out = vec![0; n_e];
    for &t in types {
        out[t] += 1;
    }
    out
}

/// Partition of node types by local minimum distance, plus the preconditions
/// of the local stability analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Classification {
    /// Indices of VN types with minimum distance exactly 2.
    pub vn_distance2: Vec<usize>,
    /// Indices of CN types with minimum distance exactly 2.
    pub cn_distance2: Vec<usize>,
    pub all_distance_at_least_2: bool,
    pub unpunctured: bool,
}

impl Classification {
    pub fn stability_eligible(&self) -> bool {
        self.all_distance_at_least_2 && self.unpunctured
    }
}

/// A validated MET D-GLDPC ensemble. Immutable after construction.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    n_e: usize,
    vn_types: Vec<VnType>,
    cn_types: Vec<CnType>,
    edges: Vec<u64>,
    lambda: Vec<Vec<Rational>>,
    rho: Vec<Vec<Rational>>,
    canonical: SpecFile,
}

/// Parses and validates a JSON ensemble description.
pub fn parse_spec(document: &str) -> Result<EnsembleSpec> {
    EnsembleSpec::from_file(SpecFile::from_json(document)?)
}

impl EnsembleSpec {
    pub fn from_file(file: SpecFile) -> Result<Self> {
        let n_e = file.edge_types;
        if n_e == 0 {
            return Err(Error::validation("edge_types must be at least 1"));
        }
        if file.vn_types.is_empty() || file.cn_types.is_empty() {
            return Err(Error::validation(
                "at least one VN type and one CN type are required",
            ));
        }
        let mut names = HashSet::new();
        for name in file
            .vn_types
            .iter()
            .map(|v| &v.name)
            .chain(file.cn_types.iter().map(|c| &c.name))
        {
            if !names.insert(name.as_str()) {
                return Err(Error::validation(format!("duplicate type name {name:?}")));
            }
        }

        let vn_types = file
            .vn_types
            .iter()
            .map(|v| build_vn(v, n_e))
            .collect::<Result<Vec<_>>>()?;
        let cn_types = file
            .cn_types
            .iter()
            .map(|c| build_cn(c, n_e))
            .collect::<Result<Vec<_>>>()?;

        let mut vn_edges = vec![0u64; n_e];
        for v in &vn_types {
            accumulate_edges(&mut vn_edges, v.count, &v.sockets_per_type(n_e), &v.name)?;
        }
        let mut cn_edges = vec![0u64; n_e];
        for c in &cn_types {
            accumulate_edges(&mut cn_edges, c.count, &c.sockets_per_type(n_e), &c.name)?;
        }
        if vn_edges != cn_edges {
            let detail: Vec<String> = (0..n_e)
                .map(|l| format!("type {}: VN {} / CN {}", l + 1, vn_edges[l], cn_edges[l]))
                .collect();
            return Err(Error::validation(format!(
                "socket imbalance ({})",
                detail.join(", ")
            )));
        }
        let edges = vn_edges;
        if edges.iter().any(|&e| e > i64::MAX as u64) {
            return Err(Error::validation("edge count overflows"));
        }

        let fraction = |count: u64, per_type: &[usize], l: usize| -> Rational {
            if edges[l] == 0 {
                Rational::from_integer(0)
            } else {
                Rational::new((count * per_type[l] as u64) as i64, edges[l] as i64)
            }
        };
        let lambda = vn_types
            .iter()
            .map(|v| {
                let q = v.sockets_per_type(n_e);
                (0..n_e).map(|l| fraction(v.count, &q, l)).collect()
            })
            .collect();
        let rho = cn_types
            .iter()
            .map(|c| {
                let s = c.sockets_per_type(n_e);
                (0..n_e).map(|l| fraction(c.count, &s, l)).collect()
            })
            .collect();

        let mut canonical = file;
        for (vf, v) in canonical.vn_types.iter_mut().zip(&vn_types) {
            vf.puncture = Some(v.puncture.iter().map(|&b| b as u8).collect());
        }

        let spec = EnsembleSpec {
            n_e,
            vn_types,
            cn_types,
            edges,
            lambda,
            rho,
            canonical,
        };
        if spec.length() == 0 {
            return Err(Error::validation("every encoded bit is punctured"));
        }
        Ok(spec)
    }

    pub fn num_edge_types(&self) -> usize {
        self.n_e
    }

    pub fn vn_types(&self) -> &[VnType] {
        &self.vn_types
    }

    pub fn cn_types(&self) -> &[CnType] {
        &self.cn_types
    }

    /// `E_l` for every edge type.
    pub fn edges_per_type(&self) -> &[u64] {
        &self.edges
    }

    /// `λ_{γ,l}` indexed `[γ][l]`.
    pub fn lambda(&self) -> &[Vec<Rational>] {
        &self.lambda
    }

    /// `ρ_{δ,l}` indexed `[δ][l]`.
    pub fn rho(&self) -> &[Vec<Rational>] {
        &self.rho
    }

    pub fn lambda_f64(&self, vn: usize, l: usize) -> f64 {
        to_f64(self.lambda[vn][l])
    }

    pub fn rho_f64(&self, cn: usize, l: usize) -> f64 {
        to_f64(self.rho[cn][l])
    }

    /// Number of transmitted bits `N`.
    pub fn length(&self) -> u64 {
        self.vn_types
            .iter()
            .map(|v| v.count * v.transmitted() as u64)
            .sum()
    }

    /// Number of information bits including punctured ones.
    pub fn information_bits(&self) -> u64 {
        self.vn_types.iter().map(|v| v.count * v.k() as u64).sum()
    }

    /// Design dimension `K`: VN information bits minus CN parity equations.
    pub fn dimension(&self) -> i64 {
        let checks: u64 = self
            .cn_types
            .iter()
            .map(|c| c.count * (c.s() - c.h()) as u64)
            .sum();
        self.information_bits() as i64 - checks as i64
    }

    /// Design rate `K / N`.
    pub fn rate(&self) -> Rational {
        Rational::new(self.dimension(), self.length() as i64)
    }

    pub fn canonical(&self) -> &SpecFile {
        &self.canonical
    }

    /// Lowercase hex SHA-256 of the canonical compact JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical.to_json().as_bytes()))
    }

    pub fn find_vn(&self, name: &str) -> Option<usize> {
        self.vn_types.iter().position(|v| v.name == name)
    }

    pub fn find_cn(&self, name: &str) -> Option<usize> {
        self.cn_types.iter().position(|c| c.name == name)
    }

    pub fn classify(&self) -> Classification {
        classify_types(self)
    }

    /// Refuses with the violated assumption named unless every component code
    /// has distance at least 2 and no encoded bit is punctured.
    pub fn check_stability_hypotheses(&self) -> Result<()> {
        if let Some(v) = self.vn_types.iter().find(|v| !v.is_unpunctured()) {
            return Err(Error::Hypothesis(format!(
                "VN type {:?} has punctured bits; the stability analysis requires that no encoded bit is punctured",
                v.name
            )));
        }
        let bad = self
            .vn_types
            .iter()
            .map(|v| (&v.name, v.min_distance))
            .chain(self.cn_types.iter().map(|c| (&c.name, c.min_distance)))
            .find(|(_, d)| d.is_none_or(|d| d < 2));
        if let Some((name, d)) = bad {
            return Err(Error::Hypothesis(format!(
                "type {name:?} has local minimum distance {}; the stability analysis requires distance at least 2",
                d.unwrap_or(0)
            )));
        }
        Ok(())
    }

    /// Same ensemble with every node count multiplied by `scale`.
    pub fn scaled_counts(&self, scale: u64) -> (Vec<u64>, Vec<u64>) {
        (
            self.vn_types.iter().map(|v| v.count * scale).collect(),
            self.cn_types.iter().map(|c| c.count * scale).collect(),
        )
    }
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact minimum distance of the code generated by `code_generator`.
pub fn min_distance(code_generator: &Gf2Matrix) -> Result<Option<usize>> {
    gf2::min_distance(code_generator)
}

pub fn classify_types(spec: &EnsembleSpec) -> Classification {
    let vn_distance2 = (0..spec.vn_types.len())
        .filter(|&i| spec.vn_types[i].min_distance == Some(2))
        .collect();
    let cn_distance2 = (0..spec.cn_types.len())
        .filter(|&i| spec.cn_types[i].min_distance == Some(2))
        .collect();
    let all_distance_at_least_2 = spec
        .vn_types
        .iter()
        .map(|v| v.min_distance)
        .chain(spec.cn_types.iter().map(|c| c.min_distance))
        .all(|d| d.is_some_and(|d| d >= 2));
    Classification {
        vn_distance2,
        cn_distance2,
        all_distance_at_least_2,
        unpunctured: spec.vn_types.iter().all(VnType::is_unpunctured),
    }
}

fn accumulate_edges(acc: &mut [u64], count: u64, per_type: &[usize], name: &str) -> Result<()> {
    for (a, &q) in acc.iter_mut().zip(per_type) {
        *a = count
            .checked_mul(q as u64)
            .and_then(|e| a.checked_add(e))
            .ok_or_else(|| Error::validation(format!("edge count overflows at type {name:?}")))?;
    }
    Ok(())
}

fn check_sockets(name: &str, types: &[usize], len: usize, n_e: usize) -> Result<Vec<usize>> {
    if types.len() != len {
        return Err(Error::validation(format!(
            "type {name:?}: {} socket types for a code of length {len}",
            types.len()
        )));
    }
    types
        .iter()
        .map(|&t| {
            if (1..=n_e).contains(&t) {
                Ok(t - 1)
            } else {
                Err(Error::validation(format!(
                    "type {name:?}: socket type {t} outside 1..={n_e}"
                )))
            }
        })
        .collect()
}

fn check_size(name: &str, k: usize, n: usize) -> Result<()> {
    if k > K_MAX {
        return Err(Error::capacity(
            format!("dimension of {name:?} (K_MAX)"),
            k,
            K_MAX,
        ));
    }
    if n > S_MAX {
        return Err(Error::capacity(
            format!("socket count of {name:?} (S_MAX)"),
            n,
            S_MAX,
        ));
    }
    Ok(())
}

fn check_generator(name: &str, g: &Gf2Matrix) -> Result<()> {
    if g.rows() == 0 || g.cols() == 0 {
        return Err(Error::validation(format!("type {name:?}: empty generator")));
    }
    if g.rank() != g.rows() {
        return Err(Error::validation(format!(
            "type {name:?}: generator has rank {} < {} rows",
            g.rank(),
            g.rows()
        )));
    }
    if let Some(&c) = g.zero_columns().first() {
        return Err(Error::validation(format!(
            "type {name:?}: idle bit at socket {c} (all-zero generator column)"
        )));
    }
    Ok(())
}

fn build_vn(v: &VnTypeFile, n_e: usize) -> Result<VnType> {
    if v.count == 0 {
        return Err(Error::validation(format!(
            "VN type {:?}: count must be positive",
            v.name
        )));
    }
    let generator = Gf2Matrix::from_rows(&v.generator)
        .map_err(|e| Error::validation(format!("VN type {:?}: {e}", v.name)))?;
    check_size(&v.name, generator.rows(), generator.cols())?;
    check_generator(&v.name, &generator)?;
    let socket_types = check_sockets(&v.name, &v.socket_types, generator.cols(), n_e)?;
    let puncture = match &v.puncture {
        None => vec![true; generator.rows()],
        Some(p) => {
            if p.len() != generator.rows() {
                return Err(Error::validation(format!(
                    "VN type {:?}: puncture vector has length {}, expected {}",
                    v.name,
                    p.len(),
                    generator.rows()
                )));
            }
            p.iter()
                .map(|&b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(Error::validation(format!(
                        "VN type {:?}: puncture entry {other} is not 0/1",
                        v.name
                    ))),
                })
                .collect::<Result<_>>()?
        }
    };
    let min_distance = gf2::min_distance(&generator)?;
    Ok(VnType {
        name: v.name.clone(),
        generator,
        puncture,
        socket_types,
        count: v.count,
        min_distance,
    })
}

fn build_cn(c: &CnTypeFile, n_e: usize) -> Result<CnType> {
    if c.count == 0 {
        return Err(Error::validation(format!(
            "CN type {:?}: count must be positive",
            c.name
        )));
    }
    let (generator, form) = match (&c.generator, &c.parity_check) {
        (Some(g), None) => (Gf2Matrix::from_rows(g), None),
        (None, Some(h)) => (Gf2Matrix::from_rows(h), Some(())),
        _ => {
            return Err(Error::validation(format!(
                "CN type {:?}: give exactly one of generator / parity_check",
                c.name
            )))
        }
    };
    let given = generator.map_err(|e| Error::validation(format!("CN type {:?}: {e}", c.name)))?;
    let (generator, form) = match form {
        None => (given, CodeForm::Generator),
        Some(()) => {
            if given.cols() > S_MAX {
                return Err(Error::capacity(
                    format!("socket count of {:?} (S_MAX)", c.name),
                    given.cols(),
                    S_MAX,
                ));
            }
            (given.generator_from_parity(), CodeForm::ParityCheck(given))
        }
    };
    if generator.rows() == 0 {
        return Err(Error::validation(format!(
            "CN type {:?}: the local code is the zero code",
            c.name
        )));
    }
    check_size(&c.name, generator.rows(), generator.cols())?;
    check_generator(&c.name, &generator)?;
    let socket_types = check_sockets(&c.name, &c.socket_types, generator.cols(), n_e)?;
    let min_distance = gf2::min_distance(&generator)?;
    Ok(CnType {
        name: c.name.clone(),
        generator,
        form,
        socket_types,
        count: c.count,
        min_distance,
    })
}

/// Human/machine readable summary printed by `validate`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub edge_types: usize,
    pub length: u64,
    pub dimension: i64,
    pub rate: ExactValue,
    pub edges_per_type: Vec<u64>,
    pub lambda: Vec<TypeFractions>,
    pub rho: Vec<TypeFractions>,
    pub classification: Classification,
    pub min_distance: Vec<NamedDistance>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactValue {
    pub value: f64,
    pub exact: String,
}

impl From<Rational> for ExactValue {
    fn from(r: Rational) -> Self {
        ExactValue {
            value: to_f64(r),
            exact: format!("{}/{}", r.numer(), r.denom()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeFractions {
    pub name: String,
    pub fractions: Vec<ExactValue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedDistance {
    pub name: String,
    pub min_distance: Option<usize>,
}

impl EnsembleSpec {
    pub fn summary(&self) -> Summary {
        let table = |names: Vec<&String>, rows: &[Vec<Rational>]| {
            names
                .into_iter()
                .zip(rows)
                .map(|(n, r)| TypeFractions {
                    name: n.clone(),
                    fractions: r.iter().map(|&x| x.into()).collect(),
                })
                .collect()
        };
        Summary {
            edge_types: self.n_e,
            length: self.length(),
            dimension: self.dimension(),
            rate: self.rate().into(),
            edges_per_type: self.edges.clone(),
            lambda: table(
                self.vn_types.iter().map(|v| &v.name).collect(),
                &self.lambda,
            ),
            rho: table(self.cn_types.iter().map(|c| &c.name).collect(), &self.rho),
            classification: self.classify(),
            min_distance: self
                .vn_types
                .iter()
                .map(|v| (&v.name, v.min_distance))
                .chain(self.cn_types.iter().map(|c| (&c.name, c.min_distance)))
                .map(|(n, d)| NamedDistance {
                    name: n.clone(),
                    min_distance: d,
                })
                .collect(),
        }
    }
}
