//! Simulated annealing as a master equation with a rising inverse
//! temperature, and quantum annealing as Schrödinger evolution under a
//! decreasing transverse field, both on full `2^N` state vectors.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{
    integrate_master_with_step, FlipDynamics, FlipRule, ScheduledDynamics, GROUND_ENERGY_TOL,
    STEP_FRACTION,
};
use crate::error::{Error, Result};
use crate::format::sci;
use crate::model::{energy_table, ClassicalHamiltonian, EnergyTable, ProbabilityVector};

/// Largest spin count for annealing runs.
pub const MAX_ANNEAL_SPINS: usize = 12;
/// Norm drift above which a Schrödinger run is rejected.
pub const MAX_NORM_DRIFT: f64 = 1e-6;
/// Norm drift the Schrödinger step size is chosen for.
pub const TARGET_NORM_DRIFT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `c(t) = start + (end - start) t / T`.
    Linear { start: f64, end: f64 },
    /// `c(t) = start (1 - t/T)^exponent`.
    Power { start: f64, exponent: f64 },
    /// Temperature `c(t) = scale / log(2 + rate t)`.
    Logarithmic { scale: f64, rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    pub horizon: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::validation(format!(
                "horizon {horizon} must be positive and finite"
            )));
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match kind {
            ScheduleKind::Linear { start, end } if !finite(&[start, end]) => {
                return Err(Error::validation(
                    "linear schedule endpoints must be finite",
                ))
            }
            ScheduleKind::Power { start, exponent } if !finite(&[start]) || !(exponent > 0.0) => {
                return Err(Error::validation(
                    "power schedule needs finite start and exponent > 0",
                ))
            }
            ScheduleKind::Logarithmic { scale, rate }
                if !(scale > 0.0 && rate > 0.0) || !finite(&[scale, rate]) =>
            {
                return Err(Error::validation(
                    "logarithmic schedule needs scale > 0 and rate > 0",
                ))
            }
            _ => {}
        }
        Ok(Self { kind, horizon })
    }

    pub fn linear(start: f64, end: f64, horizon: f64) -> Result<Self> {
        Self::new(ScheduleKind::Linear { start, end }, horizon)
    }

    pub fn power(start: f64, exponent: f64, horizon: f64) -> Result<Self> {
        Self::new(ScheduleKind::Power { start, exponent }, horizon)
    }

    pub fn logarithmic(scale: f64, rate: f64, horizon: f64) -> Result<Self> {
        Self::new(ScheduleKind::Logarithmic { scale, rate }, horizon)
    }

    /// Control value at time `t`, clamped to `[0, T]`.
    pub fn value(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        let s = t / self.horizon;
        match self.kind {
            ScheduleKind::Linear { start, end } => start + (end - start) * s,
            ScheduleKind::Power { start, exponent } => start * (1.0 - s).powf(exponent),
            ScheduleKind::Logarithmic { scale, rate } => scale / (2.0 + rate * t).ln(),
        }
    }

    /// Inverse temperature for simulated annealing. Linear and power
    /// schedules give `β` directly; the logarithmic one gives a temperature.
    pub fn beta(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Logarithmic { .. } => 1.0 / self.value(t),
            _ => self.value(t),
        }
    }
}

/// Builds a schedule from a kind name and its parameters:
/// `linear [start, end]`, `power [start, exponent]`, `logarithmic [scale, rate]`.
pub fn make_schedule(kind: &str, params: &[f64], horizon: f64) -> Result<Schedule> {
    let two = |name: &str| -> Result<(f64, f64)> {
        match *params {
            [a, b] => Ok((a, b)),
            _ => Err(Error::validation(format!(
                "{name} schedule takes 2 parameters, got {}",
                params.len()
            ))),
        }
    };
    match kind {
        "linear" => {
            let (start, end) = two(kind)?;
            Schedule::linear(start, end, horizon)
        }
        "power" => {
            let (start, exponent) = two(kind)?;
            Schedule::power(start, exponent, horizon)
        }
        "logarithmic" | "log" => {
            let (scale, rate) = two(kind)?;
            Schedule::logarithmic(scale, rate, horizon)
        }
        other => Err(Error::validation(format!(
            "unknown schedule kind {other:?}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AnnealMethod {
    #[serde(rename = "SA")]
    Simulated,
    #[serde(rename = "QA")]
    Quantum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealResult {
    pub method: AnnealMethod,
    pub n: usize,
    pub ground_energy: f64,
    pub schedule: Schedule,
    pub times: Vec<f64>,
    /// `β(t)` for SA, `Γ(t)` for QA.
    pub control: Vec<f64>,
    pub p_ground: Vec<f64>,
    /// `⟨E⟩ - E_gs`.
    pub residual_energy: Vec<f64>,
    pub final_success: f64,
    /// Largest deviation of `Σp` (SA) or `‖ψ‖²` (QA) from one.
    pub norm_drift: f64,
}

impl AnnealResult {
    pub fn final_residual_energy(&self) -> f64 {
        *self.residual_energy.last().expect("non-empty run")
    }

    /// Writes `time,control_value,p_ground,residual_energy`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,control_value,p_ground,residual_energy")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{}",
                sci(self.times[i]),
                sci(self.control[i]),
                sci(self.p_ground[i]),
                sci(self.residual_energy[i])
            )?;
        }
        Ok(())
    }
}

fn check_anneal_size(h0: &ClassicalHamiltonian) -> Result<()> {
    if h0.n() > MAX_ANNEAL_SPINS {
        return Err(Error::Resource(format!(
            "annealing limited to {MAX_ANNEAL_SPINS} spins, got {}",
            h0.n()
        )));
    }
    Ok(())
}

fn output_grid(horizon: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::validation(
            "annealing needs at least one output step",
        ));
    }
    Ok((0..=steps)
        .map(|i| horizon * i as f64 / steps as f64)
        .collect())
}

/// Integrates the master equation from the uniform distribution while
/// `β(t)` follows `sched`.
pub fn run_sa(
    h0: &ClassicalHamiltonian,
    sched: &Schedule,
    rule: FlipRule,
    steps: usize,
) -> Result<AnnealResult> {
    run_sa_scaled(h0, sched, rule, steps, 1.0)
}

/// [`run_sa`] with the internal step multiplied by `step_scale`.
pub fn run_sa_scaled(
    h0: &ClassicalHamiltonian,
    sched: &Schedule,
    rule: FlipRule,
    steps: usize,
    step_scale: f64,
) -> Result<AnnealResult> {
    check_anneal_size(h0)?;
    let grid = output_grid(sched.horizon, steps)?;
    let betas: Vec<f64> = grid.iter().map(|&t| sched.beta(t)).collect();
    if betas.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
        return Err(Error::validation(
            "inverse temperature must stay finite and >= 0",
        ));
    }
    if betas.windows(2).any(|w| w[1] < w[0] - 1e-12 * w[0].abs()) {
        return Err(Error::validation(
            "simulated annealing needs a nondecreasing inverse temperature",
        ));
    }
    let dynamics = FlipDynamics::new(h0, rule)?;
    let energies = dynamics.energies().clone();
    let provider = ScheduledDynamics {
        dynamics: &dynamics,
        beta_of_t: |t: f64| sched.beta(t),
    };
    let p0 = ProbabilityVector::uniform(h0.n())?;
    let traj =
        integrate_master_with_step(&provider, &energies, &p0, &grid, STEP_FRACTION * step_scale)?;
    let ground_energy = energies.min();
    Ok(AnnealResult {
        method: AnnealMethod::Simulated,
        n: h0.n(),
        ground_energy,
        schedule: *sched,
        control: betas,
        p_ground: traj.observables.iter().map(|o| o.p_ground).collect(),
        residual_energy: traj
            .observables
            .iter()
            .map(|o| o.mean_energy - ground_energy)
            .collect(),
        final_success: traj.observables.last().map_or(0.0, |o| o.p_ground),
        times: traj.times,
        norm_drift: traj.max_norm_drift,
    })
}

/// `out = -i (E - Γ Σ_j σ^x_j) ψ`, with `E` already centred.
fn schrodinger_rhs(
    energies: &[f64],
    n: usize,
    gamma: f64,
    psi: &[Complex64],
    out: &mut [Complex64],
) {
    let minus_i = Complex64::new(0.0, -1.0);
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = psi[r] * energies[r];
        let mut flips = Complex64::new(0.0, 0.0);
        for j in 0..n {
            flips += psi[r ^ (1 << j)];
        }
        acc -= flips * gamma;
        *o = minus_i * acc;
    }
}

/// Step size keeping the accumulated RK4 norm defect `T ω⁶ h⁵ / 72` below
/// a thousandth of the target drift, and `hω <= 0.2`.
fn schrodinger_step(omega: f64, horizon: f64) -> f64 {
    let omega = omega.max(1e-12);
    let drift_limit = (72.0 * 1e-3 * TARGET_NORM_DRIFT / (horizon * omega.powi(6))).powf(0.2);
    drift_limit.min(0.2 / omega)
}

fn ground_overlap(ground: &[usize], psi: &[Complex64]) -> f64 {
    ground.iter().map(|&g| psi[g].norm_sqr()).sum()
}

/// Evolves the uniform superposition under `E(σ^z) - Γ(t) Σ σ^x` with
/// classical fourth-order Runge–Kutta.
pub fn run_qa(h0: &ClassicalHamiltonian, sched: &Schedule, steps: usize) -> Result<AnnealResult> {
    run_qa_scaled(h0, sched, steps, 1.0)
}

/// [`run_qa`] with the internal step multiplied by `step_scale`.
pub fn run_qa_scaled(
    h0: &ClassicalHamiltonian,
    sched: &Schedule,
    steps: usize,
    step_scale: f64,
) -> Result<AnnealResult> {
    if !(step_scale > 0.0) {
        return Err(Error::validation("step scale must be positive"));
    }
    check_anneal_size(h0)?;
    let grid = output_grid(sched.horizon, steps)?;
    let gammas: Vec<f64> = grid.iter().map(|&t| sched.value(t)).collect();
    if gammas.iter().any(|g| !g.is_finite()) {
        return Err(Error::validation("transverse field must stay finite"));
    }
    let final_gamma = sched.value(sched.horizon);
    if final_gamma.abs() > 1e-12 {
        return Err(Error::validation(format!(
            "transverse field must vanish at the horizon, got {final_gamma}"
        )));
    }
    let n = h0.n();
    let table: EnergyTable = energy_table(h0)?;
    let ground_energy = table.min();
    let ground = table.ground_indices(GROUND_ENERGY_TOL);
    let emax = table
        .values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let centre = 0.5 * (emax + ground_energy);
    let centred: Vec<f64> = table.values.iter().map(|e| e - centre).collect();
    let gamma_max = gammas.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let omega = 0.5 * (emax - ground_energy) + n as f64 * gamma_max;
    let h_max = step_scale * schrodinger_step(omega, sched.horizon);

    let dim = table.values.len();
    let amp = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
    let mut psi = vec![amp; dim];
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![zero; dim],
        vec![zero; dim],
        vec![zero; dim],
        vec![zero; dim],
        vec![zero; dim],
    );

    let observe = |psi: &[Complex64]| -> (f64, f64, f64) {
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let mean: f64 = psi
            .iter()
            .zip(&table.values)
            .map(|(a, e)| a.norm_sqr() * e)
            .sum();
        (ground_overlap(&ground, psi), mean - ground_energy, norm)
    };

    let (p, res, norm) = observe(&psi);
    let mut p_ground = vec![p];
    let mut residual_energy = vec![res];
    let mut norm_drift = (norm - 1.0).abs();

    for w in grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let substeps = ((tb - ta) / h_max).ceil().max(1.0) as usize;
        let h = (tb - ta) / substeps as f64;
        for s in 0..substeps {
            let t = ta + s as f64 * h;
            let (g0, gm, g1) = (sched.value(t), sched.value(t + 0.5 * h), sched.value(t + h));
            schrodinger_rhs(&centred, n, g0, &psi, &mut k1);
            combine(&mut tmp, &psi, 0.5 * h, &k1);
            schrodinger_rhs(&centred, n, gm, &tmp, &mut k2);
            combine(&mut tmp, &psi, 0.5 * h, &k2);
            schrodinger_rhs(&centred, n, gm, &tmp, &mut k3);
            combine(&mut tmp, &psi, h, &k3);
            schrodinger_rhs(&centred, n, g1, &tmp, &mut k4);
            for i in 0..dim {
                psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        let (p, res, norm) = observe(&psi);
        norm_drift = norm_drift.max((norm - 1.0).abs());
        if norm_drift > MAX_NORM_DRIFT {
            return Err(Error::Numerical(format!(
                "Schrödinger norm drift {norm_drift:e} at t = {tb}"
            )));
        }
        p_ground.push(p);
        residual_energy.push(res);
    }

    Ok(AnnealResult {
        method: AnnealMethod::Quantum,
        n,
        ground_energy,
        schedule: *sched,
        times: grid,
        control: gammas,
        final_success: *p_ground.last().unwrap(),
        p_ground,
        residual_energy,
        norm_drift,
    })
}

fn combine(out: &mut [Complex64], x: &[Complex64], a: f64, y: &[Complex64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + yi * a;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub method: AnnealMethod,
    pub final_success: f64,
    pub final_residual_energy: f64,
    pub horizon: f64,
    pub schedule: Schedule,
}

impl From<&AnnealResult> for RunSummary {
    fn from(r: &AnnealResult) -> Self {
        Self {
            method: r.method,
            final_success: r.final_success,
            final_residual_energy: r.final_residual_energy(),
            horizon: r.schedule.horizon,
            schedule: r.schedule,
        }
    }
}

/// Side-by-side numbers for an SA and a QA run; deltas are `qa - sa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub n: usize,
    pub ground_energy: f64,
    pub sa: RunSummary,
    pub qa: RunSummary,
    pub delta_success: f64,
    pub delta_residual_energy: f64,
}

pub fn compare_runs(sa: &AnnealResult, qa: &AnnealResult) -> Result<ComparisonReport> {
    if sa.n != qa.n {
        return Err(Error::validation(format!(
            "runs are on different models ({} vs {} spins)",
            sa.n, qa.n
        )));
    }
    if (sa.ground_energy - qa.ground_energy).abs() > 1e-12 * sa.ground_energy.abs().max(1.0) {
        return Err(Error::validation(
            "runs are on models with different ground energies",
        ));
    }
    let (s, q) = (RunSummary::from(sa), RunSummary::from(qa));
    Ok(ComparisonReport {
        n: sa.n,
        ground_energy: sa.ground_energy,
        delta_success: q.final_success - s.final_success,
        delta_residual_energy: q.final_residual_energy - s.final_residual_energy,
        sa: s,
        qa: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn schedule_values() {
        let lin = Schedule::linear(1.0, 0.0, 10.0).unwrap();
        assert_eq!(lin.value(5.0), 0.5);
        let pow = Schedule::power(1.0, 1.0, 10.0).unwrap();
        for t in [0.0, 2.5, 7.0, 10.0] {
            assert_abs_diff_eq!(pow.value(t), lin.value(t), epsilon = 1e-15);
        }
        let log = Schedule::logarithmic(1.0, 1.0, 10.0).unwrap();
        assert_abs_diff_eq!(log.value(0.0), 1.0 / 2f64.ln(), epsilon = 1e-15);
        assert!(log.value(5.0) < log.value(1.0));
        assert_abs_diff_eq!(log.beta(0.0), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::linear(1.0, 0.0, 0.0).is_err());
        assert!(Schedule::linear(1.0, 0.0, -3.0).is_err());
        assert!(Schedule::power(1.0, 0.0, 1.0).is_err());
        assert!(Schedule::logarithmic(1.0, 0.0, 1.0).is_err());
        assert!(make_schedule("linear", &[1.0], 1.0).is_err());
        assert!(make_schedule("cosine", &[1.0, 2.0], 1.0).is_err());
        assert_eq!(
            make_schedule("power", &[2.0, 3.0], 4.0).unwrap(),
            Schedule::power(2.0, 3.0, 4.0).unwrap()
        );
    }

    #[test]
    fn qa_requires_vanishing_field() {
        let h0 = ClassicalHamiltonian::chain(3, 1.0, 0.0, true).unwrap();
        let s = Schedule::linear(5.0, 1.0, 1.0).unwrap();
        assert!(run_qa(&h0, &s, 10).is_err());
    }

    #[test]
    fn sa_rejects_cooling_backwards() {
        let h0 = ClassicalHamiltonian::chain(3, 1.0, 0.0, true).unwrap();
        let s = Schedule::linear(3.0, 0.1, 1.0).unwrap();
        assert!(run_sa(&h0, &s, FlipRule::HeatBath, 10).is_err());
    }

    #[test]
    fn frozen_field_keeps_populations() {
        let h0 = ClassicalHamiltonian::from_coeffs(3, [(0b011, -1.0), (0b100, 0.4)]).unwrap();
        let s = Schedule::linear(0.0, 0.0, 5.0).unwrap();
        let r = run_qa(&h0, &s, 5).unwrap();
        for p in &r.p_ground {
            assert_abs_diff_eq!(*p, r.p_ground[0], epsilon = 1e-10);
        }
    }

    #[test]
    fn comparison_of_identical_runs() {
        let h0 = ClassicalHamiltonian::chain(3, 1.0, 0.0, true).unwrap();
        let s = Schedule::linear(0.1, 1.0, 2.0).unwrap();
        let sa = run_sa(&h0, &s, FlipRule::HeatBath, 4).unwrap();
        let rep = compare_runs(&sa, &sa).unwrap();
        assert_eq!(rep.delta_success, 0.0);
        assert_eq!(rep.delta_residual_energy, 0.0);
        let other = run_sa(
            &ClassicalHamiltonian::chain(4, 1.0, 0.0, true).unwrap(),
            &s,
            FlipRule::HeatBath,
            4,
        )
        .unwrap();
        assert!(compare_runs(&sa, &other).is_err());
    }
}
