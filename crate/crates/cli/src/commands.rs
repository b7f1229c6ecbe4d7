use std::path::Path;

use cqmap_core::anneal::{compare_runs, make_schedule, run_qa, run_sa, AnnealResult};
use cqmap_core::dynamics::{
    build_generator, integrate_master, relaxation_time, verify_dynamics, GeneratorMatrix,
};
use cqmap_core::format::sci;
use cqmap_core::mapping::{
    classical_to_quantum, heat_bath_chain_closed_form, heat_bath_chain_mapped_diagonal,
    quantum_to_classical, roundtrip_check, QuantumHamiltonian,
};
use cqmap_core::model::{
    build_model, energy_table, ClassicalHamiltonian, ModelSpec, ProbabilityVector,
};
use cqmap_core::sparse::SparseMatrix;
use cqmap_core::spectral::{
    dense_spectrum, extreme_eigenpairs, fit_scaling, gap_scaling_sweep, write_sweep_csv,
    ModelFamily, ScalingClass, SpectrumResult,
};
use cqmap_core::{Error, Result};
use serde::Serialize;

use crate::args::*;
use crate::output::{emit, json, read_text, write_atomic};

/// Runs one subcommand and returns its one-line summary.
pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Model(c) => model(c),
        Command::Dynamics(c) => dynamics(c),
        Command::Map(c) => map(c),
        Command::Spectrum(c) => spectrum(c),
        Command::Anneal(c) => anneal(c),
        Command::Fit(a) => fit(a),
    }
}

/// Name of the failing operation, used to prefix diagnostics.
pub fn operation(command: &Command) -> &'static str {
    match command {
        Command::Model(ModelCommand::Validate { .. }) => "model validate",
        Command::Model(ModelCommand::Coeffs { .. }) => "model coeffs",
        Command::Dynamics(DynamicsCommand::Generator { .. }) => "dynamics generator",
        Command::Dynamics(DynamicsCommand::Evolve { .. }) => "dynamics evolve",
        Command::Dynamics(DynamicsCommand::Verify { .. }) => "dynamics verify",
        Command::Map(MapCommand::C2q { .. }) => "map c2q",
        Command::Map(MapCommand::Q2c { .. }) => "map q2c",
        Command::Map(MapCommand::Roundtrip { .. }) => "map roundtrip",
        Command::Map(MapCommand::ChainOracle { .. }) => "map chain-oracle",
        Command::Spectrum(SpectrumCommand::Dense { .. }) => "spectrum dense",
        Command::Spectrum(SpectrumCommand::Iterative { .. }) => "spectrum iterative",
        Command::Spectrum(SpectrumCommand::Sweep { .. }) => "spectrum sweep",
        Command::Spectrum(SpectrumCommand::Fit(_)) | Command::Fit(_) => "spectrum fit",
        Command::Anneal(AnnealCommand::Sa { .. }) => "anneal sa",
        Command::Anneal(AnnealCommand::Qa { .. }) => "anneal qa",
        Command::Anneal(AnnealCommand::Compare { .. }) => "anneal compare",
    }
}

fn load_model(path: &Path) -> Result<ClassicalHamiltonian> {
    build_model(&ModelSpec::from_json(&read_text(path)?)?)
}

fn load_matrix(path: &Path) -> Result<SparseMatrix> {
    SparseMatrix::read_coordinate(&read_text(path)?)
}

fn coordinate_bytes(m: &SparseMatrix) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    m.write_coordinate(&mut buf)?;
    Ok(buf)
}

fn model(c: ModelCommand) -> Result<String> {
    match c {
        ModelCommand::Validate { model } => {
            let h0 = load_model(&model.model)?;
            let table = energy_table(&h0)?;
            Ok(format!(
                "ok: n={} terms={} ground_energy={} ground_states={}",
                h0.n(),
                h0.coeffs().len(),
                sci(table.min()),
                table.ground_indices(1e-9).len()
            ))
        }
        ModelCommand::Coeffs { model, out } => {
            let h0 = load_model(&model.model)?;
            let mut buf = Vec::new();
            h0.write_csv(&mut buf)?;
            let dest = emit(out.out.as_deref(), &buf)?;
            Ok(format!("wrote {} coefficients{dest}", h0.coeffs().len()))
        }
    }
}

fn parse_init(init: &str, n: usize) -> Result<ProbabilityVector> {
    if init == "uniform" {
        return ProbabilityVector::uniform(n);
    }
    let index: usize = init.parse().map_err(|_| {
        Error::Validation(format!(
            "initial state {init:?} is neither `uniform` nor an index"
        ))
    })?;
    ProbabilityVector::point(n, index)
}

#[derive(Serialize)]
struct VerifyOut {
    beta: f64,
    column_sum: f64,
    detailed_balance: f64,
    stationarity: f64,
    min_off_diagonal: f64,
    tol: f64,
    passed: bool,
}

fn dynamics(c: DynamicsCommand) -> Result<String> {
    match c {
        DynamicsCommand::Generator {
            model,
            thermal,
            out,
        } => {
            let h0 = load_model(&model.model)?;
            let w = build_generator(&h0, thermal.beta, thermal.rule)?;
            let dest = emit(out.out.as_deref(), &coordinate_bytes(w.matrix())?)?;
            Ok(format!(
                "generator dim={} nnz={}{dest}",
                w.matrix().dim(),
                w.matrix().nnz()
            ))
        }
        DynamicsCommand::Evolve {
            model,
            thermal,
            t_max,
            steps,
            init,
            out,
        } => {
            if !(t_max > 0.0) || steps == 0 {
                return Err(Error::Validation("need --t-max > 0 and --steps > 0".into()));
            }
            let h0 = load_model(&model.model)?;
            let w = build_generator(&h0, thermal.beta, thermal.rule)?;
            let p0 = parse_init(&init, h0.n())?;
            let grid: Vec<f64> = (0..=steps)
                .map(|i| t_max * i as f64 / steps as f64)
                .collect();
            let traj = integrate_master(&w, &energy_table(&h0)?, &p0, &grid)?;
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            let dest = emit(out.out.as_deref(), &buf)?;
            let last = traj.observables.last().expect("grid is nonempty");
            Ok(format!(
                "evolved to t={} p_ground={} l1_to_gibbs={}{dest}",
                sci(last.time),
                sci(last.p_ground),
                sci(last.l1_distance_to_gibbs)
            ))
        }
        DynamicsCommand::Verify {
            model,
            generator,
            beta,
            tol,
            out,
        } => {
            let h0 = load_model(&model.model)?;
            let matrix = load_matrix(&generator)?;
            if matrix.dim() != 1 << h0.n() {
                return Err(Error::Validation(format!(
                    "generator dimension {} does not match 2^{}",
                    matrix.dim(),
                    h0.n()
                )));
            }
            let w = GeneratorMatrix::from_matrix(h0.n(), beta, None, matrix)?;
            let peq = cqmap_core::model::gibbs_distribution(&h0, beta)?;
            let r = verify_dynamics(&w, &peq, tol)?;
            let report = VerifyOut {
                beta,
                column_sum: r.column_sum,
                detailed_balance: r.detailed_balance,
                stationarity: r.stationarity,
                min_off_diagonal: r.min_off_diagonal,
                tol: r.tol,
                passed: r.passed,
            };
            let dest = emit(out.out.as_deref(), &json(&report)?)?;
            if !r.passed {
                return Err(Error::Numerical(format!(
                    "generator check failed: column_sum={} detailed_balance={} stationarity={}",
                    sci(r.column_sum),
                    sci(r.detailed_balance),
                    sci(r.stationarity)
                )));
            }
            Ok(format!("generator verified{dest}"))
        }
    }
}

#[derive(Serialize)]
struct ChainOracleOut {
    n: usize,
    beta: f64,
    off_diagonal_residual: f64,
    derived_diagonal_residual: f64,
    closed_form_diagonal_residual: f64,
}

#[derive(Serialize)]
struct RoundTripOut {
    beta: f64,
    rule: String,
    coefficient_residual: f64,
    generator_residual: f64,
    positivity_margin: f64,
}

fn map(c: MapCommand) -> Result<String> {
    match c {
        MapCommand::C2q {
            model,
            thermal,
            out,
        } => {
            let h0 = load_model(&model.model)?;
            let w = build_generator(&h0, thermal.beta, thermal.rule)?;
            let h = classical_to_quantum(&h0, thermal.beta, &w)?;
            let dest = emit(out.out.as_deref(), &coordinate_bytes(h.matrix())?)?;
            Ok(format!(
                "hamiltonian dim={} nnz={}{dest}",
                h.matrix().dim(),
                h.matrix().nnz()
            ))
        }
        MapCommand::Q2c {
            hamiltonian,
            tol,
            coeffs_out,
            generator_out,
            out,
        } => {
            let h = QuantumHamiltonian::from_matrix(load_matrix(&hamiltonian)?)?;
            let result = quantum_to_classical(&h, tol)?;
            if let Some(path) = coeffs_out {
                let mut buf = Vec::new();
                result.hamiltonian.write_csv(&mut buf)?;
                write_atomic(&path, &buf)?;
            }
            if let Some(path) = generator_out {
                write_atomic(&path, &coordinate_bytes(result.generator.matrix())?)?;
            }
            let dest = emit(out.out.as_deref(), &json(&result.report()?)?)?;
            Ok(format!(
                "q2c lambda0={} positivity_margin={}{dest}",
                sci(result.ground.value),
                sci(result.ground.positivity_margin)
            ))
        }
        MapCommand::Roundtrip {
            model,
            thermal,
            tol,
            out,
        } => {
            let h0 = load_model(&model.model)?;
            let r = roundtrip_check(&h0, thermal.beta, thermal.rule)?;
            let report = RoundTripOut {
                beta: thermal.beta,
                rule: thermal.rule.to_string(),
                coefficient_residual: r.coefficient_residual,
                generator_residual: r.generator_residual,
                positivity_margin: r.positivity_margin,
            };
            let dest = emit(out.out.as_deref(), &json(&report)?)?;
            let worst = r.coefficient_residual.max(r.generator_residual);
            if !(worst <= tol) {
                return Err(Error::Numerical(format!(
                    "round-trip residual {} exceeds {}",
                    sci(worst),
                    sci(tol)
                )));
            }
            Ok(format!("round trip residual={}{dest}", sci(worst)))
        }
        MapCommand::ChainOracle { n, beta, tol, out } => {
            let h0 = ClassicalHamiltonian::chain(n, 1.0, 0.0, true)?;
            let w = build_generator(&h0, beta, cqmap_core::dynamics::FlipRule::HeatBath)?;
            let mapped = classical_to_quantum(&h0, beta, &w)?;
            let closed = heat_bath_chain_closed_form(n, beta)?;
            let derived = heat_bath_chain_mapped_diagonal(n, beta)?;
            let off = mapped
                .matrix()
                .iter()
                .filter(|&(r, c, _)| r != c)
                .chain(closed.matrix().iter().filter(|&(r, c, _)| r != c))
                .map(|(r, c, _)| (mapped.matrix().get(r, c) - closed.matrix().get(r, c)).abs())
                .fold(0.0, f64::max);
            let diag = mapped.matrix().diagonal();
            let derived_res = diag
                .iter()
                .zip(&derived)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let closed_res = diag
                .iter()
                .zip(closed.matrix().diagonal())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let report = ChainOracleOut {
                n,
                beta,
                off_diagonal_residual: off,
                derived_diagonal_residual: derived_res,
                closed_form_diagonal_residual: closed_res,
            };
            let dest = emit(out.out.as_deref(), &json(&report)?)?;
            if !(off <= tol && derived_res <= tol) {
                return Err(Error::Numerical(format!(
                    "closed form mismatch: off_diagonal={} diagonal={}",
                    sci(off),
                    sci(derived_res)
                )));
            }
            Ok(format!(
                "closed form matches off_diagonal={} diagonal={}{dest}",
                sci(off),
                sci(derived_res)
            ))
        }
    }
}

fn spectrum_input(input: &SpectrumInput) -> Result<QuantumHamiltonian> {
    match (&input.hamiltonian, &input.model) {
        (Some(path), None) => QuantumHamiltonian::from_matrix(load_matrix(path)?),
        (None, Some(path)) => {
            let beta = input
                .beta
                .ok_or_else(|| Error::Validation("--model needs --beta".into()))?;
            let h0 = load_model(path)?;
            let w = build_generator(&h0, beta, input.rule)?;
            classical_to_quantum(&h0, beta, &w)
        }
        _ => Err(Error::Validation(
            "give exactly one of --hamiltonian or --model".into(),
        )),
    }
}

#[derive(Serialize)]
struct SpectrumOut<'a> {
    method: &'static str,
    eigenvalues: &'a [f64],
    residual_norms: &'a [f64],
    gap: Option<f64>,
    tau: Option<f64>,
}

fn spectrum_report(s: &SpectrumResult, out: Option<&Path>) -> Result<String> {
    let tau = relaxation_time(s).ok();
    let report = SpectrumOut {
        method: s.method.as_str(),
        eigenvalues: &s.eigenvalues,
        residual_norms: &s.residual_norms,
        gap: s.gap(),
        tau,
    };
    let dest = emit(out, &json(&report)?)?;
    Ok(format!(
        "{} eigenvalues lambda0={} gap={}{dest}",
        s.eigenvalues.len(),
        sci(s.eigenvalues[0]),
        s.gap().map_or_else(|| "n/a".to_string(), sci)
    ))
}

fn spectrum(c: SpectrumCommand) -> Result<String> {
    match c {
        SpectrumCommand::Dense { input, k, out } => {
            let h = spectrum_input(&input)?;
            let mut s = dense_spectrum(&h, false)?;
            if let Some(k) = k {
                if k == 0 {
                    return Err(Error::Validation("--k must be positive".into()));
                }
                s.eigenvalues.truncate(k);
                s.residual_norms.truncate(k);
            }
            spectrum_report(&s, out.out.as_deref())
        }
        SpectrumCommand::Iterative {
            input,
            k,
            max_iter,
            tol,
            out,
        } => {
            let h = spectrum_input(&input)?;
            let s = extreme_eigenpairs(&h, k, max_iter, tol)?;
            spectrum_report(&s, out.out.as_deref())
        }
        SpectrumCommand::Sweep {
            family,
            sizes,
            thermal,
            coupling,
            field,
            open,
            out,
        } => {
            let periodic = !open;
            let family = match family.as_str() {
                "chain" => ModelFamily::Chain {
                    coupling,
                    field,
                    periodic,
                },
                "grid" => ModelFamily::Grid {
                    coupling,
                    field,
                    periodic,
                },
                other => return Err(Error::Validation(format!("unknown family {other:?}"))),
            };
            let rows = gap_scaling_sweep(&family, &sizes, thermal.beta, thermal.rule);
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf)?;
            let dest = emit(out.out.as_deref(), &buf)?;
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            Ok(format!("sweep rows={} failed={failed}{dest}", rows.len()))
        }
        SpectrumCommand::Fit(a) => fit(a),
    }
}

/// Reads `(size, tau)` pairs from a CSV with a header naming both columns.
/// Rows marked `failed` are skipped.
fn read_fit_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Validation("empty table".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Validation(format!("table has no {name:?} column")))
    };
    let (size_col, tau_col) = (col("size")?, col("tau")?);
    let method_col = header.iter().position(|h| *h == "method");
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if method_col.and_then(|m| fields.get(m)) == Some(&"failed") {
            continue;
        }
        let num = |c: usize| -> Result<f64> {
            fields
                .get(c)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::Validation(format!("row {}: cannot parse column {c}", k + 2)))
        };
        rows.push((num(size_col)?, num(tau_col)?));
    }
    Ok(rows)
}

#[derive(Serialize)]
struct FitOut {
    a: f64,
    b: f64,
    preferred: ScalingClass,
    residual_poly: f64,
    residual_exp: f64,
}

fn fit(args: FitArgs) -> Result<String> {
    let rows = read_fit_table(&read_text(&args.table)?)?;
    let f = fit_scaling(&rows)?;
    let report = FitOut {
        a: f.a,
        b: f.b,
        preferred: f.preferred,
        residual_poly: f.residual_poly,
        residual_exp: f.residual_exp,
    };
    let dest = emit(args.out.out.as_deref(), &json(&report)?)?;
    Ok(format!(
        "fit rows={} a={} b={} preferred={:?}{dest}",
        rows.len(),
        sci(f.a),
        sci(f.b),
        f.preferred
    ))
}

fn run_csv(r: &AnnealResult) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    Ok(buf)
}

fn anneal(c: AnnealCommand) -> Result<String> {
    match c {
        AnnealCommand::Sa {
            model,
            schedule,
            rule,
            out,
        } => {
            let h0 = load_model(&model.model)?;
            let sched = make_schedule(&schedule.schedule, &schedule.params, schedule.horizon)?;
            let r = run_sa(&h0, &sched, rule, schedule.steps)?;
            let dest = emit(out.out.as_deref(), &run_csv(&r)?)?;
            Ok(format!(
                "SA success={} residual_energy={}{dest}",
                sci(r.final_success),
                sci(r.final_residual_energy())
            ))
        }
        AnnealCommand::Qa {
            model,
            schedule,
            out,
        } => {
            let h0 = load_model(&model.model)?;
            let sched = make_schedule(&schedule.schedule, &schedule.params, schedule.horizon)?;
            let r = run_qa(&h0, &sched, schedule.steps)?;
            let dest = emit(out.out.as_deref(), &run_csv(&r)?)?;
            Ok(format!(
                "QA success={} residual_energy={} norm_drift={}{dest}",
                sci(r.final_success),
                sci(r.final_residual_energy()),
                sci(r.norm_drift)
            ))
        }
        AnnealCommand::Compare {
            model,
            horizon,
            steps,
            sa_schedule,
            sa_params,
            qa_schedule,
            qa_params,
            rule,
            out,
        } => {
            let h0 = load_model(&model.model)?;
            let sa = run_sa(
                &h0,
                &make_schedule(&sa_schedule, &sa_params, horizon)?,
                rule,
                steps,
            )?;
            let qa = run_qa(
                &h0,
                &make_schedule(&qa_schedule, &qa_params, horizon)?,
                steps,
            )?;
            let report = compare_runs(&sa, &qa)?;
            let dest = emit(out.out.as_deref(), &json(&report)?)?;
            Ok(format!(
                "SA success={} QA success={}{dest}",
                sci(report.sa.final_success),
                sci(report.qa.final_success)
            ))
        }
    }
}
