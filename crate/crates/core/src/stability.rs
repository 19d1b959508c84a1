//! Local stability of the erasure-free fixed point.
//!
//! `C^{l,m} = Σ_{δ∈F_C2} (ρ_{δ,l}/s_{δ,l}) ξ₂^{(δ)}(l,m)` and
//! `P^{l,m}(x) = Σ_{γ∈F_V2} (λ_{γ,l}/q_{γ,l}) Σ_u χ₂,u^{(γ)}(l,m) x^u`, with
//! `ξ₂`, `χ₂,u` the ordered weight-2 socket-pair counts of the component codes.
//! The fixed point `I_EV = 1` is a local attractor iff `σ(P(ε)·C) < 1`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ensemble::{to_f64, Classification, EnsembleSpec, Rational};
use crate::error::{Error, Result};
use crate::gf2::enumerate_weight2_pairs;

/// Distance from 1 within which σ is reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-12;
/// Relative width of the bracket on `σ + 1` at which power iteration stops.
pub const DEFAULT_SIGMA_TOL: f64 = 1e-14;
pub const DEFAULT_BOUND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMatrices {
    n_e: usize,
    c: Vec<Vec<Rational>>,
    /// `p[l][m][u]` is the coefficient of `x^u` in `P^{l,m}`.
    p: Vec<Vec<Vec<Rational>>>,
}

impl StabilityMatrices {
    pub fn num_edge_types(&self) -> usize {
        self.n_e
    }

    pub fn c_exact(&self) -> &[Vec<Rational>] {
        &self.c
    }

    pub fn p_exact(&self) -> &[Vec<Vec<Rational>>] {
        &self.p
    }

    pub fn c(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_e, self.n_e, |l, m| to_f64(self.c[l][m]))
    }

    /// `P(ε)` by Horner on the coefficients of each entry.
    pub fn p_at(&self, epsilon: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_e, self.n_e, |l, m| {
            self.p[l][m]
                .iter()
                .rev()
                .fold(0.0, |acc, &coef| acc * epsilon + to_f64(coef))
        })
    }

    /// `P(ε)·C`.
    pub fn product(&self, epsilon: f64) -> DMatrix<f64> {
        self.p_at(epsilon) * self.c()
    }

    /// `σ(P(ε)·C)`, cross-checked against `σ(C·P(ε))`.
    pub fn sigma(&self, epsilon: f64) -> Result<f64> {
        let p = self.p_at(epsilon);
        let c = self.c();
        let forward = spectral_radius(&(&p * &c), DEFAULT_SIGMA_TOL)?;
        let reverse = spectral_radius(&(&c * &p), DEFAULT_SIGMA_TOL)?;
        if (forward - reverse).abs() > 1e-9 * forward.max(1.0) {
            return Err(Error::Internal(format!(
                "σ(PC) = {forward} but σ(CP) = {reverse}"
            )));
        }
        Ok(forward)
    }

    pub fn verdict(&self, epsilon: f64) -> Result<StabilityVerdict> {
        let sigma = self.sigma(epsilon)?;
        let status = if sigma < 1.0 - MARGINAL_BAND {
            Stability::Stable
        } else if sigma > 1.0 + MARGINAL_BAND {
            Stability::Unstable
        } else {
            Stability::Marginal
        };
        Ok(StabilityVerdict {
            epsilon,
            sigma,
            status,
        })
    }

    /// Supremum of ε with `σ(P(ε)C) < 1`, by bisection. σ is nondecreasing in
    /// ε because every entry of `P(ε)C` is.
    pub fn bound(&self, tol_eps: f64) -> Result<StabilityBound> {
        if tol_eps <= 0.0 {
            return Err(Error::validation("bound tolerance must be positive"));
        }
        if self.sigma(1.0)? <= 1.0 + MARGINAL_BAND {
            return Ok(StabilityBound::Unbounded);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while (hi - lo) / 2.0 > tol_eps {
            let mid = 0.5 * (lo + hi);
            if self.sigma(mid)? < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(StabilityBound::Bounded(0.5 * (lo + hi)))
    }

    /// True iff `P(ε)C` has no nonzero entry for any ε.
    pub fn product_vanishes(&self) -> bool {
        // coefficients are nonnegative, so P(1)C = 0 forces every term to vanish
        self.product(1.0).iter().all(|&x| x == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub epsilon: f64,
    pub sigma: f64,
    pub status: Stability,
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        self.status == Stability::Stable
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityBound {
    Bounded(f64),
    /// Locally stable for every ε in (0,1).
    Unbounded,
}

impl StabilityBound {
    pub fn value(&self) -> Option<f64> {
        match *self {
            StabilityBound::Bounded(x) => Some(x),
            StabilityBound::Unbounded => None,
        }
    }
}

pub fn build_matrices(spec: &EnsembleSpec) -> Result<StabilityMatrices> {
    spec.check_stability_hypotheses()?;
    let class = spec.classify();
    let n_e = spec.num_edge_types();
    let edges = spec.edges_per_type();
    let zero = Rational::from_integer(0);
    let mut c = vec![vec![zero; n_e]; n_e];
    let max_k = spec.vn_types().iter().map(|v| v.k()).max().unwrap_or(0);
    let mut p = vec![vec![vec![zero; max_k + 1]; n_e]; n_e];

    for &d in &class.cn_distance2 {
        let cn = &spec.cn_types()[d];
        for (key, count) in enumerate_weight2_pairs(&cn.generator, &cn.socket_types, false)? {
            // ρ_{δ,l}/s_{δ,l} = N_δ / E_l
            let w = Rational::new(cn.count as i64, edges[key.first] as i64);
            c[key.first][key.second] += w * Rational::from_integer(count as i64);
        }
    }
    for &g in &class.vn_distance2 {
        let vn = &spec.vn_types()[g];
        for (key, count) in enumerate_weight2_pairs(&vn.generator, &vn.socket_types, true)? {
            let u = key.input_weight.expect("counted with input weight");
            let w = Rational::new(vn.count as i64, edges[key.first] as i64);
            p[key.first][key.second][u] += w * Rational::from_integer(count as i64);
        }
    }
    Ok(StabilityMatrices { n_e, c, p })
}

/// Spectral radius of a square matrix.
///
/// Nonnegative input is split into strongly connected blocks. Each block's
/// Perron root comes from power iteration on `B + I` until the
/// Collatz–Wielandt bracket is narrower than `tol`, and σ is the largest of
/// them. The general QR spectrum is used as a cross-check, and as the answer
/// when entries are negative. On its own it loses about half the digits when
/// the dominant eigenvalue is repeated.
pub fn spectral_radius(m: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::validation("spectral radius of a non-square matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let qr = m
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if m.iter().any(|&x| x < 0.0) {
        return Ok(qr);
    }
    let mut sigma: f64 = 0.0;
    for block in strong_components(m) {
        let sub = DMatrix::from_fn(block.len(), block.len(), |i, j| m[(block[i], block[j])]);
        let (lo, hi) = perron_bounds(&sub, tol.max(1e-15));
        sigma = sigma.max(0.5 * (lo + hi));
    }
    let slack = 1e-6 * sigma.max(1.0);
    if (sigma - qr).abs() > slack {
        return Err(Error::Internal(format!(
            "Perron root {sigma} disagrees with QR spectrum {qr}"
        )));
    }
    Ok(sigma)
}

/// Strongly connected components of the support graph, each sorted.
fn strong_components(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
        for j in 0..n {
            if m[(i, j)] > 0.0 {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                let row_k = reach[k].clone();
                for (r, &via) in reach[i].iter_mut().zip(&row_k) {
                    *r |= via;
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let block: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        block.iter().for_each(|&j| seen[j] = true);
        out.push(block);
    }
    out
}

/// Collatz–Wielandt bracket `[min (Bx)_i/x_i, max (Bx)_i/x_i]` of the Perron
/// root of an irreducible nonnegative `A`, with `B = A + sI`, shifted back.
fn perron_bounds(a: &DMatrix<f64>, tol: f64) -> (f64, f64) {
    let n = a.nrows();
    if n == 1 {
        return (a[(0, 0)], a[(0, 0)]);
    }
    // shifting by the row-sum norm removes periodicity without the shift
    // dwarfing a tiny block, which would stall convergence
    let shift = a.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let shifted = a + DMatrix::<f64>::identity(n, n) * shift;
    let mut x = nalgebra::DVector::from_element(n, 1.0);
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for _ in 0..1_000_000 {
        let y = &shifted * &x;
        let ratios = y.iter().zip(x.iter()).map(|(a, b)| a / b);
        lo = ratios.clone().fold(f64::INFINITY, f64::min);
        hi = ratios.fold(0.0, f64::max);
        x = &y / y.max();
        let width = hi - lo;
        if width <= tol * hi {
            break;
        }
        // rounding noise can keep the bracket from shrinking further
        if width < best {
            best = width;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 1000 {
                break;
            }
        }
    }
    (lo - shift, hi - shift)
}

/// Result of an `is_stable` query on an ensemble.
pub fn is_stable(spec: &EnsembleSpec, epsilon: f64) -> Result<StabilityVerdict> {
    build_matrices(spec)?.verdict(epsilon)
}

pub fn stability_bound(spec: &EnsembleSpec, tol_eps: f64) -> Result<StabilityBound> {
    build_matrices(spec)?.bound(tol_eps)
}

/// Edge types touched by weight-2 supports on each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Weight2Support {
    pub vn_types: Vec<usize>,
    pub cn_types: Vec<usize>,
}

pub fn weight2_support(spec: &EnsembleSpec, class: &Classification) -> Result<Weight2Support> {
    let n_e = spec.num_edge_types();
    let mut vn = vec![false; n_e];
    let mut cn = vec![false; n_e];
    for &g in &class.vn_distance2 {
        let t = &spec.vn_types()[g];
        for key in enumerate_weight2_pairs(&t.generator, &t.socket_types, true)?.keys() {
            vn[key.first] = true;
        }
    }
    for &d in &class.cn_distance2 {
        let t = &spec.cn_types()[d];
        for key in enumerate_weight2_pairs(&t.generator, &t.socket_types, false)?.keys() {
            cn[key.first] = true;
        }
    }
    let pick = |v: Vec<bool>| (0..n_e).filter(|&l| v[l]).collect();
    Ok(Weight2Support {
        vn_types: pick(vn),
        cn_types: pick(cn),
    })
}

/// Sufficient condition for stability at every ε: no edge type carries
/// weight-2 supports on both the VN side and the CN side.
pub fn weight2_supports_disjoint(spec: &EnsembleSpec) -> Result<bool> {
    let matrices = build_matrices(spec)?;
    let support = weight2_support(spec, &spec.classify())?;
    let disjoint = support
        .vn_types
        .iter()
        .all(|l| !support.cn_types.contains(l));
    if disjoint && !matrices.product_vanishes() {
        return Err(Error::Internal(
            "disjoint weight-2 supports but P(ε)·C is not identically zero".into(),
        ));
    }
    Ok(disjoint)
}
