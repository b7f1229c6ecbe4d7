//! Continuous-time single-spin-flip Markov generators and master-equation
//! integration.
//!
//! Rates use unit attempt frequency per spin: flipping spin `j` out of `σ`
//! happens at rate `w(β ΔE)` with `ΔE = E(σ^j) - E(σ)`. Column `σ` of `W`
//! holds the outgoing rates, so `dP/dt = W P` conserves probability.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sci;
use crate::model::{
    energy_table, gibbs_from_table, ClassicalHamiltonian, EnergyTable, ProbabilityVector,
};
use crate::sparse::SparseMatrix;
use crate::spectral::SpectrumResult;

/// Largest spin count for explicit generators.
pub const MAX_GENERATOR_SPINS: usize = 24;

/// Lowest probability entry tolerated during integration.
pub const NEGATIVITY_TOL: f64 = -1e-8;

/// Allowed drift of `Σ p` per unit time.
pub const NORM_DRIFT_PER_TIME: f64 = 1e-9;

/// Energies closer than this to the minimum count as ground states.
pub const GROUND_ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipRule {
    HeatBath,
    Metropolis,
}

impl FlipRule {
    /// Rate of a move that changes the energy by `delta_e`.
    #[inline]
    pub fn rate(self, beta: f64, delta_e: f64) -> f64 {
        let x = beta * delta_e;
        match self {
            FlipRule::HeatBath => 1.0 / (1.0 + x.exp()),
            FlipRule::Metropolis => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x).exp()
                }
            }
        }
    }
}

impl FromStr for FlipRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heat-bath" | "heatbath" | "heat_bath" | "glauber" => Ok(FlipRule::HeatBath),
            "metropolis" => Ok(FlipRule::Metropolis),
            other => Err(Error::validation(format!("unknown flip rule {other:?}"))),
        }
    }
}

impl fmt::Display for FlipRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlipRule::HeatBath => "heat-bath",
            FlipRule::Metropolis => "metropolis",
        })
    }
}

fn check_generator_size(n: usize) -> Result<()> {
    if n > MAX_GENERATOR_SPINS {
        return Err(Error::Resource(format!(
            "{n} spins exceeds the generator cap of {MAX_GENERATOR_SPINS}"
        )));
    }
    Ok(())
}

/// Flip dynamics of one model under one rule, at any inverse temperature.
///
/// Energy differences are read from the cached energy table, so changing
/// `β` only re-evaluates the rate function.
#[derive(Debug, Clone)]
pub struct FlipDynamics {
    energies: EnergyTable,
    rule: FlipRule,
}

impl FlipDynamics {
    pub fn new(h0: &ClassicalHamiltonian, rule: FlipRule) -> Result<Self> {
        check_generator_size(h0.n())?;
        Ok(Self {
            energies: energy_table(h0)?,
            rule,
        })
    }

    pub fn from_table(energies: EnergyTable, rule: FlipRule) -> Result<Self> {
        check_generator_size(energies.n)?;
        Ok(Self { energies, rule })
    }

    pub fn n(&self) -> usize {
        self.energies.n
    }

    pub fn rule(&self) -> FlipRule {
        self.rule
    }

    pub fn energies(&self) -> &EnergyTable {
        &self.energies
    }

    /// `out = W(β) p` without materializing `W`.
    pub fn apply(&self, beta: f64, p: &[f64], out: &mut [f64]) {
        let e = &self.energies.values;
        let n = self.n();
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                let c = r ^ (1 << j);
                let de = e[r] - e[c];
                acc += self.rule.rate(beta, de) * p[c] - self.rule.rate(beta, -de) * p[r];
            }
            *o = acc;
        }
    }

    /// `out = H(β) x` for the symmetrized generator
    /// `H_rc = -sqrt(W_rc W_cr)`, `H_rr = -W_rr`.
    pub fn apply_symmetrized(&self, beta: f64, x: &[f64], out: &mut [f64]) {
        let e = &self.energies.values;
        let n = self.n();
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                let c = r ^ (1 << j);
                let de = e[c] - e[r];
                let out_rate = self.rule.rate(beta, de);
                acc += out_rate * x[r] - (out_rate * self.rule.rate(beta, -de)).sqrt() * x[c];
            }
            *o = acc;
        }
    }

    /// Largest total escape rate `max_σ |W_σσ|`.
    pub fn escape_bound(&self, beta: f64) -> f64 {
        let e = &self.energies.values;
        (0..e.len())
            .map(|r| {
                (0..self.n())
                    .map(|j| self.rule.rate(beta, e[r ^ (1 << j)] - e[r]))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn generator(&self, beta: f64) -> Result<GeneratorMatrix> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::validation(format!(
                "inverse temperature {beta} must be finite and >= 0"
            )));
        }
        let n = self.n();
        let e = &self.energies.values;
        let rows = (0..e.len())
            .map(|r| {
                let mut row = Vec::with_capacity(n + 1);
                let mut diag = 0.0;
                for j in 0..n {
                    let c = r ^ (1 << j);
                    row.push((c, self.rule.rate(beta, e[r] - e[c])));
                    diag -= self.rule.rate(beta, e[c] - e[r]);
                }
                row.push((r, diag));
                row.sort_by_key(|&(c, _)| c);
                row
            })
            .collect();
        Ok(GeneratorMatrix {
            n,
            beta,
            rule: Some(self.rule),
            matrix: SparseMatrix::from_rows(rows),
        })
    }
}

/// Sparse `2^N × 2^N` transition-rate matrix acting on column probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    n: usize,
    beta: f64,
    /// `None` for generators reconstructed from a quantum Hamiltonian.
    rule: Option<FlipRule>,
    matrix: SparseMatrix,
}

impl GeneratorMatrix {
    pub fn from_matrix(
        n: usize,
        beta: f64,
        rule: Option<FlipRule>,
        matrix: SparseMatrix,
    ) -> Result<Self> {
        if matrix.dim() != 1 << n {
            return Err(Error::validation(format!(
                "generator dimension {} is not 2^{n}",
                matrix.dim()
            )));
        }
        Ok(Self {
            n,
            beta,
            rule,
            matrix,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rule(&self) -> Option<FlipRule> {
        self.rule
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SparseMatrix {
        self.matrix
    }
}

/// Builds the single-spin-flip generator of `h0` at inverse temperature `beta`.
pub fn build_generator(
    h0: &ClassicalHamiltonian,
    beta: f64,
    rule: FlipRule,
) -> Result<GeneratorMatrix> {
    FlipDynamics::new(h0, rule)?.generator(beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsReport {
    /// `max_c |Σ_r W_rc|`.
    pub column_sum: f64,
    /// `max |W_rc p_c - W_cr p_r| / sqrt(p_r p_c)`, in rate units.
    pub detailed_balance: f64,
    /// `max_r |(W p)_r|`.
    pub stationarity: f64,
    /// Smallest off-diagonal rate.
    pub min_off_diagonal: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks probability conservation, detailed balance and stationarity of `peq`.
pub fn verify_dynamics(
    w: &GeneratorMatrix,
    peq: &ProbabilityVector,
    tol: f64,
) -> Result<DynamicsReport> {
    let m = w.matrix();
    let p = peq.as_slice();
    if p.len() != m.dim() {
        return Err(Error::validation(format!(
            "probability vector length {} does not match generator dimension {}",
            p.len(),
            m.dim()
        )));
    }
    let column_sum = m.column_sums().iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let stationarity = m.mul_vec(p).iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let mut detailed_balance = 0.0f64;
    let mut min_off_diagonal = f64::INFINITY;
    for (r, c, v) in m.iter().filter(|&(r, c, _)| r != c) {
        min_off_diagonal = min_off_diagonal.min(v);
        let scale = (p[r] * p[c]).sqrt();
        let flux = v * p[c] - m.get(c, r) * p[r];
        let res = if scale > 0.0 {
            flux.abs() / scale
        } else {
            flux.abs()
        };
        detailed_balance = detailed_balance.max(res);
    }
    if min_off_diagonal == f64::INFINITY {
        min_off_diagonal = 0.0;
    }
    let passed = column_sum <= tol
        && detailed_balance <= tol
        && stationarity <= tol
        && min_off_diagonal >= -tol;
    Ok(DynamicsReport {
        column_sum,
        detailed_balance,
        stationarity,
        min_off_diagonal,
        tol,
        passed,
    })
}

/// Supplies `W(t)` to the master-equation integrator.
pub trait GeneratorProvider {
    fn dim(&self) -> usize;
    /// `out = W(t) p`.
    fn apply(&self, t: f64, p: &[f64], out: &mut [f64]);
    /// Upper bound on `max_σ |W_σσ(s)|` for `s` in `[t0, t1]`.
    fn escape_bound(&self, t0: f64, t1: f64) -> f64;
    /// Inverse temperature used for the distance-to-equilibrium observable.
    fn beta(&self, t: f64) -> f64;
}

impl GeneratorProvider for GeneratorMatrix {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, _t: f64, p: &[f64], out: &mut [f64]) {
        self.matrix.apply(p, out);
    }

    fn escape_bound(&self, _t0: f64, _t1: f64) -> f64 {
        self.matrix
            .diagonal()
            .iter()
            .fold(0.0, |a, d| a.max(d.abs()))
    }

    fn beta(&self, _t: f64) -> f64 {
        self.beta
    }
}

/// Flip dynamics with a time-dependent inverse temperature.
pub struct ScheduledDynamics<'a, F> {
    pub dynamics: &'a FlipDynamics,
    pub beta_of_t: F,
}

impl<F: Fn(f64) -> f64> GeneratorProvider for ScheduledDynamics<'_, F> {
    fn dim(&self) -> usize {
        1 << self.dynamics.n()
    }

    fn apply(&self, t: f64, p: &[f64], out: &mut [f64]) {
        self.dynamics.apply((self.beta_of_t)(t), p, out);
    }

    fn escape_bound(&self, _t0: f64, _t1: f64) -> f64 {
        // every single-flip rate is at most one
        self.dynamics.n() as f64
    }

    fn beta(&self, t: f64) -> f64 {
        (self.beta_of_t)(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub time: f64,
    pub mean_energy: f64,
    pub p_ground: f64,
    pub l1_distance_to_gibbs: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ProbabilityVector>,
    pub observables: Vec<Observables>,
    /// Largest `|Σ p - 1|` seen at any internal step.
    pub max_norm_drift: f64,
    /// Most negative probability seen at any internal step.
    pub min_probability: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &ProbabilityVector {
        self.states
            .last()
            .expect("trajectory has at least one point")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,mean_energy,p_ground,l1_distance_to_gibbs")?;
        for o in &self.observables {
            writeln!(
                w,
                "{},{},{},{}",
                sci(o.time),
                sci(o.mean_energy),
                sci(o.p_ground),
                sci(o.l1_distance_to_gibbs)
            )?;
        }
        Ok(())
    }

    /// Decay rate of the distance to equilibrium from a least-squares fit of
    /// `log d(t)` over grid points with `t_from <= t <= t_to`.
    pub fn decay_rate(&self, t_from: f64, t_to: f64) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .observables
            .iter()
            .filter(|o| o.time >= t_from && o.time <= t_to && o.l1_distance_to_gibbs > 0.0)
            .map(|o| (o.time, o.l1_distance_to_gibbs.ln()))
            .collect();
        if pts.len() < 2 {
            return Err(Error::validation(
                "decay-rate window holds fewer than two points",
            ));
        }
        let (slope, _, _) = least_squares(&pts);
        Ok(-slope)
    }
}

/// Straight-line fit `y = slope x + intercept`, returning the residual sum of squares too.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    (slope, intercept, rss)
}

/// Default step size as a fraction of `1 / ‖W‖`.
pub const STEP_FRACTION: f64 = 0.05;

/// Integrates `dP/dt = W(t) P` with classical fourth-order Runge–Kutta,
/// recording observables at every point of `t_grid`.
///
/// Each grid interval is split into equal substeps no longer than
/// `0.05 / (2 max|W_σσ|)`.
pub fn integrate_master(
    provider: &dyn GeneratorProvider,
    energies: &EnergyTable,
    p0: &ProbabilityVector,
    t_grid: &[f64],
) -> Result<Trajectory> {
    integrate_master_with_step(provider, energies, p0, t_grid, STEP_FRACTION)
}

/// [`integrate_master`] with substeps no longer than `step_fraction / (2 max|W_σσ|)`.
pub fn integrate_master_with_step(
    provider: &dyn GeneratorProvider,
    energies: &EnergyTable,
    p0: &ProbabilityVector,
    t_grid: &[f64],
    step_fraction: f64,
) -> Result<Trajectory> {
    if !(step_fraction > 0.0) {
        return Err(Error::validation("step fraction must be positive"));
    }
    let dim = provider.dim();
    if p0.as_slice().len() != dim || energies.values.len() != dim {
        return Err(Error::validation(
            "initial state, energies and generator disagree in size",
        ));
    }
    if t_grid.is_empty() {
        return Err(Error::validation("empty time grid"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation(
            "time grid must be finite and strictly increasing",
        ));
    }
    let total: f64 = p0.as_slice().iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::validation(format!("initial state sums to {total}")));
    }

    let ground = energies.ground_indices(GROUND_ENERGY_TOL);
    let observe = |t: f64, p: &[f64]| -> Result<Observables> {
        let gibbs = gibbs_from_table(energies, provider.beta(t))?;
        Ok(Observables {
            time: t,
            mean_energy: energies.mean(p),
            p_ground: ground.iter().map(|&g| p[g]).sum(),
            l1_distance_to_gibbs: gibbs.l1_distance(p),
        })
    };

    let n = p0.n();
    let t_start = t_grid[0];
    let mut p = p0.as_slice().to_vec();
    let mut traj = Trajectory {
        times: vec![t_start],
        states: vec![p0.clone()],
        observables: vec![observe(t_start, &p)?],
        max_norm_drift: (total - 1.0).abs(),
        min_probability: p.iter().copied().fold(f64::INFINITY, f64::min),
    };

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    for w in t_grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let bound = provider.escape_bound(ta, tb).max(f64::MIN_POSITIVE);
        let h_max = step_fraction / (2.0 * bound);
        let substeps = ((tb - ta) / h_max).ceil().max(1.0) as usize;
        let h = (tb - ta) / substeps as f64;
        for s in 0..substeps {
            let t = ta + s as f64 * h;
            provider.apply(t, &p, &mut k1);
            axpy_into(&mut tmp, &p, 0.5 * h, &k1);
            provider.apply(t + 0.5 * h, &tmp, &mut k2);
            axpy_into(&mut tmp, &p, 0.5 * h, &k2);
            provider.apply(t + 0.5 * h, &tmp, &mut k3);
            axpy_into(&mut tmp, &p, h, &k3);
            provider.apply(t + h, &tmp, &mut k4);
            for i in 0..dim {
                p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }

            let now = t + h;
            let min = p.iter().copied().fold(f64::INFINITY, f64::min);
            traj.min_probability = traj.min_probability.min(min);
            if min < NEGATIVITY_TOL {
                return Err(Error::Numerical(format!(
                    "probability {min:e} at t = {now}: step too large"
                )));
            }
            let drift = (p.iter().sum::<f64>() - 1.0).abs();
            traj.max_norm_drift = traj.max_norm_drift.max(drift);
            if drift > NORM_DRIFT_PER_TIME * (now - t_start).max(1.0) {
                return Err(Error::Numerical(format!(
                    "normalization drift {drift:e} at t = {now}"
                )));
            }
        }
        traj.times.push(tb);
        traj.observables.push(observe(tb, &p)?);
        traj.states.push(ProbabilityVector::from_raw(n, p.clone()));
    }
    Ok(traj)
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// Smallest nonzero relaxation rate accepted by [`relaxation_time`].
pub const MIN_RELAXATION_RATE: f64 = 1e-14;

/// `τ = 1 / λ₁` from the spectrum of the symmetrized generator.
pub fn relaxation_time(spectrum: &SpectrumResult) -> Result<f64> {
    let ev = &spectrum.eigenvalues;
    if ev.len() < 2 {
        return Err(Error::validation(
            "relaxation time needs at least two eigenvalues",
        ));
    }
    if ev[0].abs() > 1e-10 {
        return Err(Error::validation(format!(
            "lowest eigenvalue {:e} is not a stationary mode",
            ev[0]
        )));
    }
    if ev[1] <= MIN_RELAXATION_RATE {
        return Err(Error::DegenerateStationary { lambda1: ev[1] });
    }
    Ok(1.0 / ev[1])
}
