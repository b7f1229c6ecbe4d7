//! Symmetric eigensolvers over `2^N`-dimensional state spaces, spectral gaps,
//! and polynomial-versus-exponential gap-scaling fits.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{least_squares, FlipDynamics, FlipRule};
use crate::error::{Error, Result};
use crate::format::sci;
use crate::mapping::{classical_to_quantum, QuantumHamiltonian};
use crate::model::ClassicalHamiltonian;
use crate::sparse::SparseMatrix;

/// Largest spin count for dense eigensolves.
pub const MAX_DENSE_SPINS: usize = 13;
/// Largest spin count for iterative eigensolves.
pub const MAX_ITERATIVE_SPINS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Dense,
    Iterative,
}

impl SolverMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMethod::Dense => "dense",
            SolverMethod::Iterative => "iterative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// One vector per eigenvalue, when requested.
    #[serde(skip)]
    pub eigenvectors: Option<Vec<Vec<f64>>>,
    pub method: SolverMethod,
    /// `‖H v - λ v‖` per pair; empty when vectors were not formed.
    pub residual_norms: Vec<f64>,
}

impl SpectrumResult {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            eigenvalues,
            eigenvectors: None,
            method: SolverMethod::Dense,
            residual_norms: Vec::new(),
        }
    }

    /// `λ₁ - λ₀`.
    pub fn gap(&self) -> Option<f64> {
        match self.eigenvalues.as_slice() {
            [a, b, ..] => Some(b - a),
            _ => None,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_norms.iter().copied().fold(0.0, f64::max)
    }
}

/// A real symmetric linear map applied without forming the matrix.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymmetricOperator for SparseMatrix {
    fn dim(&self) -> usize {
        SparseMatrix::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        SparseMatrix::apply(self, x, y)
    }
}

/// Symmetrized flip generator `-e^{βE/2} W e^{-βE/2}` applied column by column.
pub struct MappedFlipOperator<'a> {
    pub dynamics: &'a FlipDynamics,
    pub beta: f64,
}

impl SymmetricOperator for MappedFlipOperator<'_> {
    fn dim(&self) -> usize {
        1 << self.dynamics.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.dynamics.apply_symmetrized(self.beta, x, y)
    }
}

/// Flips eigenvector signs so the largest-magnitude component is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn residual_norm(op: &dyn SymmetricOperator, lambda: f64, v: &[f64], scratch: &mut [f64]) -> f64 {
    op.apply(v, scratch);
    scratch
        .iter()
        .zip(v)
        .map(|(hv, x)| (hv - lambda * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Full symmetric eigendecomposition of a dense matrix, ascending.
pub fn dense_symmetric(m: DMatrix<f64>, want_vectors: bool) -> SpectrumResult {
    let op = SparseMatrix::from_dense(&m);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut scratch = vec![0.0; eigenvalues.len()];
    let mut vectors = Vec::with_capacity(order.len());
    let mut residual_norms = Vec::with_capacity(order.len());
    for (k, &i) in order.iter().enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_sign(&mut v);
        residual_norms.push(residual_norm(&op, eigenvalues[k], &v, &mut scratch));
        vectors.push(v);
    }
    SpectrumResult {
        eigenvalues,
        eigenvectors: want_vectors.then_some(vectors),
        method: SolverMethod::Dense,
        residual_norms,
    }
}

/// Full spectrum of `H` by dense diagonalization (`n ≤ 13`).
pub fn dense_spectrum(h: &QuantumHamiltonian, want_vectors: bool) -> Result<SpectrumResult> {
    if h.n() > MAX_DENSE_SPINS {
        return Err(Error::Resource(format!(
            "dense eigensolve capped at {MAX_DENSE_SPINS} spins, got {}",
            h.n()
        )));
    }
    Ok(dense_symmetric(h.matrix().to_dense(), want_vectors))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Eigenpairs wanted, lowest first.
    pub k: usize,
    /// Budget of operator applications.
    pub max_iter: usize,
    /// Accept a pair once `‖Hv - λv‖ <= tol · width`.
    pub tol: f64,
    /// Krylov basis size before an explicit restart; `None` picks one from the dimension.
    pub krylov_dim: Option<usize>,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            k: 2,
            max_iter: 20_000,
            tol: 1e-8,
            krylov_dim: None,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes keep the basis orthogonal to working precision
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            w.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
    }
}

/// Deterministic, symmetry-free start vector.
fn start_vector(dim: usize, seed: usize) -> Vec<f64> {
    let phase = 0.618_033_988_749_894_9 * (seed as f64 + 1.0);
    (0..dim)
        .map(|i| ((i as f64 + 1.0) * 0.754_877_666_246_692_7 + phase).fract() - 0.5)
        .collect()
}

struct RitzPair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

/// Lanczos with full reorthogonalization and locking.
///
/// Pairs are found one at a time: each run works in the orthogonal
/// complement of the pairs already locked, restarting from its best Ritz
/// vector when the Krylov basis is full. A final Rayleigh–Ritz step over the
/// locked vectors removes cross-contamination between them.
pub fn lanczos_lowest(op: &dyn SymmetricOperator, opts: &LanczosOptions) -> Result<SpectrumResult> {
    let dim = op.dim();
    if opts.k == 0 || opts.k > dim {
        return Err(Error::validation(format!(
            "cannot extract {} eigenpairs from dimension {dim}",
            opts.k
        )));
    }
    let krylov_dim = opts
        .krylov_dim
        .unwrap_or_else(|| (1usize << 28).checked_div(dim).unwrap_or(1).clamp(20, 200))
        .min(dim)
        .max(2);

    let mut locked: Vec<RitzPair> = Vec::new();
    let mut matvecs = 0usize;
    let mut ritz_lo = f64::INFINITY;
    let mut ritz_hi = f64::NEG_INFINITY;
    let mut w = vec![0.0; dim];

    for target in 0..opts.k {
        let locked_vecs: Vec<Vec<f64>> = locked.iter().map(|p| p.vector.clone()).collect();
        let mut start = start_vector(dim, target);
        orthogonalize(&mut start, &locked_vecs);
        let mut best_residual = f64::INFINITY;
        let pair = 'restart: loop {
            let nrm = norm(&start);
            if nrm == 0.0 {
                return Err(Error::Numerical(
                    "Lanczos start vector vanished after deflation".into(),
                ));
            }
            let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / nrm).collect()];
            let mut alpha: Vec<f64> = Vec::new();
            let mut beta: Vec<f64> = Vec::new();
            let max_m = krylov_dim.min(dim - locked.len());
            loop {
                let j = alpha.len();
                op.apply(&basis[j], &mut w);
                matvecs += 1;
                let a = dot(&basis[j], &w);
                alpha.push(a);
                orthogonalize(&mut w, &locked_vecs);
                orthogonalize(&mut w, &basis);
                let b = norm(&w);
                let m = alpha.len();
                let exhausted = b <= 1e-14 * a.abs().max(1.0) || m >= max_m;
                if m.is_multiple_of(5) || exhausted || matvecs >= opts.max_iter {
                    let (theta, y, lo, hi) = lowest_ritz(&alpha, &beta);
                    ritz_lo = ritz_lo.min(lo);
                    ritz_hi = ritz_hi.max(hi);
                    let width = (ritz_hi - ritz_lo).max(f64::MIN_POSITIVE);
                    let estimate = b * y[m - 1].abs();
                    let accept = 0.1 * opts.tol * width;
                    if estimate <= accept || exhausted || matvecs >= opts.max_iter {
                        let mut x = vec![0.0; dim];
                        for (q, &c) in basis.iter().zip(&y) {
                            x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += c * qi);
                        }
                        orthogonalize(&mut x, &locked_vecs);
                        let nx = norm(&x);
                        x.iter_mut().for_each(|v| *v /= nx);
                        let residual = residual_norm(op, theta, &x, &mut w);
                        best_residual = best_residual.min(residual);
                        if residual <= accept
                            || (b <= 1e-14 * a.abs().max(1.0) && residual <= opts.tol * width)
                        {
                            break 'restart RitzPair {
                                value: theta,
                                vector: x,
                                residual,
                            };
                        }
                        if matvecs >= opts.max_iter {
                            return Err(Error::NoConvergence {
                                iterations: matvecs,
                                residual: best_residual,
                            });
                        }
                        start = x;
                        continue 'restart;
                    }
                }
                beta.push(b);
                basis.push(w.iter().map(|x| x / b).collect());
            }
        };
        locked.push(pair);
    }

    let pairs = rayleigh_ritz(op, locked, &mut w);
    let width = (ritz_hi - ritz_lo).max(f64::MIN_POSITIVE);
    let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    if worst > opts.tol * width {
        return Err(Error::NoConvergence {
            iterations: matvecs,
            residual: worst,
        });
    }
    Ok(SpectrumResult {
        eigenvalues: pairs.iter().map(|p| p.value).collect(),
        residual_norms: pairs.iter().map(|p| p.residual).collect(),
        eigenvectors: Some(pairs.into_iter().map(|p| p.vector).collect()),
        method: SolverMethod::Iterative,
    })
}

/// Lowest Ritz value and its coefficient vector, plus the Ritz extremes.
fn lowest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>, f64, f64) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (mut imin, mut imax) = (0, 0);
    for i in 0..m {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let y = eig.eigenvectors.column(imin).iter().copied().collect();
    (
        eig.eigenvalues[imin],
        y,
        eig.eigenvalues[imin],
        eig.eigenvalues[imax],
    )
}

fn rayleigh_ritz(
    op: &dyn SymmetricOperator,
    pairs: Vec<RitzPair>,
    scratch: &mut [f64],
) -> Vec<RitzPair> {
    let k = pairs.len();
    let vecs: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.vector).collect();
    let images: Vec<Vec<f64>> = vecs
        .iter()
        .map(|v| {
            let mut hv = vec![0.0; v.len()];
            op.apply(v, &mut hv);
            hv
        })
        .collect();
    let mut small = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            small[(i, j)] = 0.5 * (dot(&vecs[i], &images[j]) + dot(&vecs[j], &images[i]));
        }
    }
    let eig = SymmetricEigen::new(small);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .map(|i| {
            let mut x = vec![0.0; vecs[0].len()];
            for (v, &c) in vecs.iter().zip(eig.eigenvectors.column(i).iter()) {
                x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += c * vi);
            }
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            fix_sign(&mut x);
            let value = eig.eigenvalues[i];
            let residual = residual_norm(op, value, &x, scratch);
            RitzPair {
                value,
                vector: x,
                residual,
            }
        })
        .collect()
}

/// `k` lowest eigenpairs of `H` by restarted Lanczos (`n ≤ 24`).
pub fn extreme_eigenpairs(
    h: &QuantumHamiltonian,
    k: usize,
    max_iter: usize,
    tol: f64,
) -> Result<SpectrumResult> {
    if h.n() > MAX_ITERATIVE_SPINS {
        return Err(Error::Resource(format!(
            "iterative eigensolve capped at {MAX_ITERATIVE_SPINS} spins, got {}",
            h.n()
        )));
    }
    lanczos_lowest(
        h.matrix(),
        &LanczosOptions {
            k,
            max_iter,
            tol,
            krylov_dim: None,
        },
    )
}

/// Lattice family whose member of linear size `L` is built per sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFamily {
    /// `L` spins on a chain.
    Chain {
        coupling: f64,
        field: f64,
        periodic: bool,
    },
    /// `L × L` square lattice.
    Grid {
        coupling: f64,
        field: f64,
        periodic: bool,
    },
}

impl ModelFamily {
    pub fn build(&self, size: usize) -> Result<ClassicalHamiltonian> {
        match *self {
            ModelFamily::Chain {
                coupling,
                field,
                periodic,
            } => ClassicalHamiltonian::chain(size, coupling, field, periodic),
            ModelFamily::Grid {
                coupling,
                field,
                periodic,
            } => ClassicalHamiltonian::grid(size, size, coupling, field, periodic),
        }
    }
}

/// Sizes up to this many spins use the dense solver in sweeps.
pub const SWEEP_DENSE_SPINS: usize = 10;
/// Above this many spins sweeps apply the mapped generator without storing it.
pub const SWEEP_EXPLICIT_SPINS: usize = 18;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Linear size handed to the family.
    pub size: usize,
    /// Spin count `N`.
    pub spins: usize,
    pub gap: f64,
    pub tau: f64,
    pub method: Option<SolverMethod>,
    pub residual: f64,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn sweep_row(family: &ModelFamily, size: usize, beta: f64, rule: FlipRule) -> Result<SweepRow> {
    let h0 = family.build(size)?;
    let n = h0.n();
    let dynamics = FlipDynamics::new(&h0, rule)?;
    let spectrum = if n <= SWEEP_DENSE_SPINS {
        let w = dynamics.generator(beta)?;
        dense_spectrum(&classical_to_quantum(&h0, beta, &w)?, false)?
    } else if n <= SWEEP_EXPLICIT_SPINS {
        let w = dynamics.generator(beta)?;
        let h = classical_to_quantum(&h0, beta, &w)?;
        extreme_eigenpairs(&h, 2, LanczosOptions::default().max_iter, 1e-8)?
    } else {
        let op = MappedFlipOperator {
            dynamics: &dynamics,
            beta,
        };
        lanczos_lowest(&op, &LanczosOptions::default())?
    };
    let gap = spectrum
        .gap()
        .ok_or_else(|| Error::Numerical("spectrum has one level".into()))?;
    let residual = spectrum
        .residual_norms
        .iter()
        .take(2)
        .copied()
        .fold(0.0, f64::max);
    Ok(SweepRow {
        size,
        spins: n,
        gap,
        tau: 1.0 / gap,
        method: Some(spectrum.method),
        residual,
        error: None,
    })
}

/// Gap and relaxation time of the mapped generator for each size. Failing
/// sizes produce a row carrying the error instead of aborting the sweep.
pub fn gap_scaling_sweep(
    family: &ModelFamily,
    sizes: &[usize],
    beta: f64,
    rule: FlipRule,
) -> Vec<SweepRow> {
    sizes
        .par_iter()
        .map(|&size| {
            sweep_row(family, size, beta, rule).unwrap_or_else(|e| SweepRow {
                size,
                spins: 0,
                gap: f64::NAN,
                tau: f64::NAN,
                method: None,
                residual: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

/// Writes `size,gap,tau,method,residual`, where `size` is the spin count.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "size,gap,tau,method,residual")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            if r.is_ok() { r.spins } else { r.size },
            sci(r.gap),
            sci(r.tau),
            r.method.map_or("failed", SolverMethod::as_str),
            sci(r.residual)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingClass {
    Polynomial,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub sizes: Vec<f64>,
    pub taus: Vec<f64>,
    /// Exponent of `τ ∝ N^a`.
    pub a: f64,
    /// Rate of `τ ∝ e^{bN}`.
    pub b: f64,
    pub preferred: ScalingClass,
    pub residual_poly: f64,
    pub residual_exp: f64,
}

/// Least-squares fits of `log τ` against `log N` and against `N`. The model
/// with the smaller residual is preferred; ties go to polynomial.
pub fn fit_scaling(rows: &[(f64, f64)]) -> Result<ScalingFit> {
    if rows.len() < 3 {
        return Err(Error::validation(format!(
            "scaling fit needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    if let Some(&(n, t)) = rows
        .iter()
        .find(|&&(n, t)| !(n > 0.0 && t > 0.0 && n.is_finite() && t.is_finite()))
    {
        return Err(Error::validation(format!(
            "row ({n}, {t}) needs positive finite size and tau"
        )));
    }
    let distinct = rows.iter().any(|r| r.0 != rows[0].0);
    if !distinct {
        return Err(Error::validation(
            "scaling fit needs at least two distinct sizes",
        ));
    }
    let poly: Vec<(f64, f64)> = rows.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
    let expo: Vec<(f64, f64)> = rows.iter().map(|&(n, t)| (n, t.ln())).collect();
    let (a, _, residual_poly) = least_squares(&poly);
    let (b, _, residual_exp) = least_squares(&expo);
    Ok(ScalingFit {
        sizes: rows.iter().map(|r| r.0).collect(),
        taus: rows.iter().map(|r| r.1).collect(),
        a,
        b,
        preferred: if residual_exp < residual_poly {
            ScalingClass::Exponential
        } else {
            ScalingClass::Polynomial
        },
        residual_poly,
        residual_exp,
    })
}
