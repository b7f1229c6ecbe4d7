//! Similarity map between detailed-balance generators and stoquastic
//! Hamiltonians, in both directions.
//!
//! Classical to quantum: `H_σσ' = -e^{βE(σ)/2} W_σσ' e^{-βE(σ')/2}`.
//! Quantum to classical: with `φ` the positive ground state of `H - λ₀`,
//! `E'(σ) = -2 log φ_σ` and `W'_σσ' = -(φ_σ / φ_σ') (H - λ₀)_σσ'`.

use serde::Serialize;

use crate::dynamics::{verify_dynamics, DynamicsReport, FlipDynamics, FlipRule, GeneratorMatrix};
use crate::error::{Error, Result};
use crate::model::{
    check_spin_count, energy_table, interaction_profile, spin, ClassicalHamiltonian, EnergyTable,
    InteractionProfile, ProbabilityVector,
};
use crate::sparse::SparseMatrix;
use crate::spectral::{
    dense_symmetric, extreme_eigenpairs, fix_sign, LanczosOptions, SpectrumResult,
};

/// Allowed asymmetry of a quantum Hamiltonian, relative to its largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Detailed-balance residual tolerated by the classical-to-quantum map.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;
/// Relative spectral-width threshold below which the ground state is degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-10;
/// Smallest ground-state component ratio accepted before taking logarithms.
pub const MIN_POSITIVITY_MARGIN: f64 = 1e-12;
/// Smallest ground-state component accepted before taking logarithms.
pub const MIN_COMPONENT: f64 = 1e-300;
/// Ground states up to this many spins come from the dense solver.
pub const GROUND_DENSE_SPINS: usize = 10;

/// Real symmetric matrix in the `σ^z` product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumHamiltonian {
    n: usize,
    matrix: SparseMatrix,
    /// Energy offset already applied (`H_stored = H_original + shift`).
    shift: f64,
}

impl QuantumHamiltonian {
    pub fn new(n: usize, matrix: SparseMatrix) -> Result<Self> {
        check_spin_count(n)?;
        if matrix.dim() != 1 << n {
            return Err(Error::validation(format!(
                "matrix dimension {} is not 2^{n}",
                matrix.dim()
            )));
        }
        let scale = matrix.iter().fold(1.0f64, |m, (_, _, v)| m.max(v.abs()));
        let asym = matrix.max_asymmetry();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::validation(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self {
            n,
            matrix,
            shift: 0.0,
        })
    }

    /// Infers `n` from a power-of-two dimension.
    pub fn from_matrix(matrix: SparseMatrix) -> Result<Self> {
        let dim = matrix.dim();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::validation(format!(
                "dimension {dim} is not 2^n with n >= 1"
            )));
        }
        Self::new(dim.trailing_zeros() as usize, matrix)
    }

    /// `H = E(σ^z) - Γ Σ_j σ^x_j`.
    pub fn transverse_field(h0: &ClassicalHamiltonian, gamma: f64) -> Result<Self> {
        let n = h0.n();
        let table = energy_table(h0)?;
        let rows = (0..table.values.len())
            .map(|r| {
                let mut row: Vec<(usize, f64)> = (0..n).map(|j| (r ^ (1 << j), -gamma)).collect();
                row.push((r, table.values[r]));
                row.sort_by_key(|&(c, _)| c);
                row.retain(|&(c, v)| c == r || v != 0.0);
                row
            })
            .collect();
        Self::new(n, SparseMatrix::from_rows(rows))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Same operator plus `delta · I`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            n: self.n,
            matrix: self
                .matrix
                .map(|r, c, v| if r == c { v + delta } else { v }),
            shift: self.shift + delta,
        }
    }

    /// Largest off-diagonal entry, if any.
    pub fn max_off_diagonal(&self) -> Option<(usize, usize, f64)> {
        self.matrix.max_off_diagonal()
    }

    pub fn is_stoquastic(&self, tol: f64) -> bool {
        self.max_off_diagonal().is_none_or(|(_, _, v)| v <= tol)
    }

    /// Number of connected components of the off-diagonal adjacency graph.
    pub fn sector_count(&self) -> usize {
        let mut uf = UnionFind::new(self.matrix.dim());
        for (r, c, v) in self.matrix.iter() {
            if r != c && v != 0.0 {
                uf.union(r, c);
            }
        }
        uf.components()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }

    fn components(&mut self) -> usize {
        (0..self.parent.len())
            .filter(|&i| self.find(i) == i)
            .count()
    }
}

/// Maps a detailed-balance generator of `h0` at `beta` to its symmetric partner.
pub fn classical_to_quantum(
    h0: &ClassicalHamiltonian,
    beta: f64,
    w: &GeneratorMatrix,
) -> Result<QuantumHamiltonian> {
    if w.n() != h0.n() {
        return Err(Error::validation(format!(
            "generator acts on {} spins, model has {}",
            w.n(),
            h0.n()
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::validation(format!(
            "inverse temperature {beta} must be finite and >= 0"
        )));
    }
    let e = energy_table(h0)?.values;
    let h = w
        .matrix()
        .map(|r, c, v| -(0.5 * beta * (e[r] - e[c])).exp() * v);
    let mut residual = 0.0f64;
    for (r, c, v) in h.iter().filter(|&(r, c, _)| r != c) {
        residual = residual.max((v - h.get(c, r)).abs());
    }
    if residual > DETAILED_BALANCE_TOL {
        return Err(Error::DetailedBalance {
            residual,
            tol: DETAILED_BALANCE_TOL,
        });
    }
    QuantumHamiltonian::new(h0.n(), h)
}

fn check_chain_length(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::validation(format!(
            "closed-form chain needs n >= 3 distinct neighbours, got {n}"
        )));
    }
    check_spin_count(n)
}

/// Transverse coefficient multiplying `σ^x_j` for outer-neighbour product `s = σ_{j-1}σ_{j+1}`.
pub fn heat_bath_chain_flip_coefficient(beta: f64, outer_product: f64) -> f64 {
    let (c, s) = (beta.cosh(), beta.sinh());
    -(c * c - s * s * outer_product) / (2.0 * (2.0 * beta).cosh())
}

/// Closed-form heat-bath ring Hamiltonian
/// `-(1/2) Σ σ^z_j σ^z_{j+1} - (2cosh 2β)^{-1} Σ (cosh²β - sinh²β σ^z_{j-1}σ^z_{j+1}) σ^x_j`
/// as a matrix.
///
/// Its off-diagonal part coincides with the mapped unit-rate heat-bath
/// generator of the ferromagnetic ring. Its diagonal does not: the mapped
/// diagonal is [`heat_bath_chain_mapped_diagonal`].
pub fn heat_bath_chain_closed_form(n: usize, beta: f64) -> Result<QuantumHamiltonian> {
    check_chain_length(n)?;
    let bonds = |i: usize| -> f64 {
        (0..n)
            .map(|j| f64::from(spin(i, j) * spin(i, (j + 1) % n)))
            .sum()
    };
    let rows = (0..1usize << n)
        .map(|r| {
            let mut row: Vec<(usize, f64)> = (0..n)
                .map(|j| {
                    let outer = f64::from(spin(r, (j + n - 1) % n) * spin(r, (j + 1) % n));
                    (r ^ (1 << j), heat_bath_chain_flip_coefficient(beta, outer))
                })
                .collect();
            row.push((r, -0.5 * bonds(r)));
            row.sort_by_key(|&(c, _)| c);
            row
        })
        .collect();
    QuantumHamiltonian::new(n, SparseMatrix::from_rows(rows))
}

/// Diagonal of the mapped unit-rate heat-bath ring:
/// `N/2 - (tanh 2β / 2) Σ_j σ_j σ_{j+1}`.
pub fn heat_bath_chain_mapped_diagonal(n: usize, beta: f64) -> Result<Vec<f64>> {
    check_chain_length(n)?;
    let t = (2.0 * beta).tanh();
    Ok((0..1usize << n)
        .map(|i| {
            let bonds: f64 = (0..n)
                .map(|j| f64::from(spin(i, j) * spin(i, (j + 1) % n)))
                .sum();
            0.5 * n as f64 - 0.5 * t * bonds
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub value: f64,
    /// Unit norm, largest-magnitude component positive.
    pub vector: Vec<f64>,
    /// `min component / max component`.
    pub positivity_margin: f64,
    /// `λ₁ - λ₀`.
    pub gap: f64,
}

fn lowest_two(h: &QuantumHamiltonian) -> Result<(SpectrumResult, f64)> {
    if h.n() <= GROUND_DENSE_SPINS {
        let s = dense_symmetric(h.matrix().to_dense(), true);
        let width = s.eigenvalues.last().unwrap() - s.eigenvalues[0];
        Ok((s, width))
    } else {
        let (lo, hi) = h.matrix().gershgorin();
        let s = extreme_eigenpairs(h, 2, LanczosOptions::default().max_iter, 1e-10)?;
        Ok((s, hi - lo))
    }
}

/// Lowest eigenpair of a symmetric `H`, rejecting degenerate ground states.
pub fn ground_state(h: &QuantumHamiltonian) -> Result<GroundState> {
    if h.matrix().dim() == 1 {
        return Err(Error::validation("ground state needs at least two levels"));
    }
    let (spectrum, width) = lowest_two(h)?;
    let gap = spectrum.eigenvalues[1] - spectrum.eigenvalues[0];
    let threshold = DEGENERACY_RTOL * width.max(f64::MIN_POSITIVE);
    if gap <= threshold {
        return Err(Error::DegenerateGroundState { gap, threshold });
    }
    let mut vector = spectrum
        .eigenvectors
        .and_then(|v| v.into_iter().next())
        .ok_or_else(|| Error::Numerical("eigensolver returned no vector".into()))?;
    fix_sign(&mut vector);
    let max = vector.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vector.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GroundState {
        value: spectrum.eigenvalues[0],
        vector,
        positivity_margin: min / max,
        gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorResiduals {
    pub column_sum: f64,
    pub min_off_diagonal: f64,
    pub stationarity: f64,
    pub detailed_balance: f64,
}

impl From<DynamicsReport> for GeneratorResiduals {
    fn from(r: DynamicsReport) -> Self {
        Self {
            column_sum: r.column_sum,
            min_off_diagonal: r.min_off_diagonal,
            stationarity: r.stationarity,
            detailed_balance: r.detailed_balance,
        }
    }
}

/// Everything produced by the quantum-to-classical map.
#[derive(Debug, Clone)]
pub struct QuantumToClassical {
    /// `E'(σ) = -2 log φ_σ` as a full Walsh expansion.
    pub hamiltonian: ClassicalHamiltonian,
    /// Generator at unit inverse temperature whose stationary state is `φ²`.
    pub generator: GeneratorMatrix,
    pub ground: GroundState,
    /// Offset `-λ₀` added to `H`.
    pub shift: f64,
    /// `φ²`, normalized.
    pub stationary: ProbabilityVector,
    pub residuals: GeneratorResiduals,
}

/// Machine-readable summary of a quantum-to-classical run.
#[derive(Debug, Clone, Serialize)]
pub struct Q2cReport {
    pub shift: f64,
    pub lambda0: f64,
    pub positivity_margin: f64,
    pub coefficient_histogram: InteractionProfile,
    pub residuals: GeneratorResiduals,
}

impl QuantumToClassical {
    pub fn report(&self) -> Result<Q2cReport> {
        Ok(Q2cReport {
            shift: self.shift,
            lambda0: self.ground.value,
            positivity_margin: self.ground.positivity_margin,
            coefficient_histogram: interaction_profile(self.hamiltonian.coeffs(), None, None)?,
            residuals: self.residuals,
        })
    }
}

/// Reads a classical energy and generator off the Perron–Frobenius ground
/// state of a stoquastic `H`. Off-diagonals above `tol` are rejected.
pub fn quantum_to_classical(h: &QuantumHamiltonian, tol: f64) -> Result<QuantumToClassical> {
    if let Some((row, col, value)) = h.max_off_diagonal() {
        if value > tol {
            return Err(Error::NonStoquastic {
                row,
                col,
                value,
                tol,
            });
        }
    }
    let components = h.sector_count();
    if components > 1 {
        return Err(Error::Reducible { components });
    }
    let ground = ground_state(h)?;
    if ground.positivity_margin < MIN_POSITIVITY_MARGIN
        || ground.vector.iter().any(|&x| x <= MIN_COMPONENT)
    {
        return Err(Error::IllConditionedLog {
            margin: ground.positivity_margin,
        });
    }
    let shift = -ground.value;
    let shifted = h.shifted(shift);
    let phi = &ground.vector;

    let n = h.n();
    let energies = EnergyTable::new(n, phi.iter().map(|x| -2.0 * x.ln()).collect())?;
    let hamiltonian = ClassicalHamiltonian::from_energy_table(&energies)?;

    let w = shifted.matrix().map(|r, c, v| -(phi[r] / phi[c]) * v);
    let generator = GeneratorMatrix::from_matrix(n, 1.0, None, w)?;

    let norm2: f64 = phi.iter().map(|x| x * x).sum();
    let stationary = ProbabilityVector::new(n, phi.iter().map(|x| x * x / norm2).collect())
        .unwrap_or_else(|_| {
            ProbabilityVector::from_raw(n, phi.iter().map(|x| x * x / norm2).collect())
        });
    let residuals = verify_dynamics(&generator, &stationary, 0.0)?.into();

    Ok(QuantumToClassical {
        hamiltonian,
        generator,
        ground,
        shift,
        stationary,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTripReport {
    /// `max_{S≠∅} |c'_S - β c_S|`.
    pub coefficient_residual: f64,
    /// `max |W'_σσ' - W_σσ'|`.
    pub generator_residual: f64,
    pub positivity_margin: f64,
}

/// Largest spin count accepted by [`roundtrip_check`].
pub const MAX_ROUNDTRIP_SPINS: usize = 10;

/// Maps `h0` to a quantum Hamiltonian and back, measuring how far the
/// recovered energy and generator are from `β h0` and the original `W`.
pub fn roundtrip_check(
    h0: &ClassicalHamiltonian,
    beta: f64,
    rule: FlipRule,
) -> Result<RoundTripReport> {
    if h0.n() > MAX_ROUNDTRIP_SPINS {
        return Err(Error::validation(format!(
            "round trip limited to {MAX_ROUNDTRIP_SPINS} spins, got {}",
            h0.n()
        )));
    }
    let w = FlipDynamics::new(h0, rule)?.generator(beta)?;
    let h = classical_to_quantum(h0, beta, &w)?;
    let back = quantum_to_classical(&h, 1e-12)?;

    let expected = h0.scaled(beta);
    let masks = expected
        .coeffs()
        .keys()
        .chain(back.hamiltonian.coeffs().keys())
        .filter(|&&s| s != 0);
    let coefficient_residual = masks
        .map(|&s| (back.hamiltonian.coeff(s) - expected.coeff(s)).abs())
        .fold(0.0, f64::max);
    let generator_residual = back.generator.matrix().max_abs_diff(w.matrix());
    Ok(RoundTripReport {
        coefficient_residual,
        generator_residual,
        positivity_margin: back.ground.positivity_margin,
    })
}
