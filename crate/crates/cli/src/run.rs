//! Experiment dispatch, report assembly and atomic output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};
use yamabe_core::energy::{quotient, w12_norm};
use yamabe_core::fit::linear_fit;
use yamabe_core::lsred::{geometric_ladder, GrowthFit};
use yamabe_core::minimize::estimate_on;
use yamabe_core::model::hemisphere_yamabe_constant;
use yamabe_core::stability::{norm_conversion_factor, StabilitySamples};
use yamabe_core::{
    assemble_operators, build_grid, conformal_deform, detect_integrability, eigen_decompose,
    fit_growth_exponent, fit_stability_exponent, kernel_split, make_model, sample_deficit_distance,
    DiscreteOperators, Error, Integrability, KernelSplit, MinimizeOptions, MinimizeReport,
    MinimizerFamily, PerturbationBasis, PerturbationKind, ReductionChart, SamplingSpec,
    SpectrumReport, StabilityFit, Topology,
};

use crate::config::{Experiment, ExperimentConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Convergence(_) => 3,
            RunError::Fit(_) => 4,
            RunError::Io(_) => 1,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidModel(_)
            | Error::InvalidGrid(_)
            | Error::GridMismatch(_)
            | Error::InvalidInput(_)
            | Error::ModesOutOfRange { .. } => RunError::Config(msg),
            Error::FitRejected { .. } | Error::InsufficientData(_) | Error::BelowNoiseFloor(_) => {
                RunError::Fit(msg)
            }
            _ => RunError::Convergence(msg),
        }
    }
}

/// Everything an experiment produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub result: Value,
    pub csv: String,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn ops_for(cfg: &ExperimentConfig) -> Result<Arc<DiscreteOperators>, RunError> {
    let m = Arc::new(make_model(&cfg.model)?);
    let grid = build_grid(&m, cfg.n)?;
    Ok(assemble_operators(m, grid)?)
}

fn minimize_stage(
    cfg: &ExperimentConfig,
    ops: &Arc<DiscreteOperators>,
) -> Result<MinimizeReport, RunError> {
    let opts = MinimizeOptions {
        max_iters: cfg.tolerances.max_iters,
        grad_tol: cfg.tolerances.grad_tol,
        step0: 1.0,
        newton_polish: true,
        seed: cfg.seed,
    };
    Ok(estimate_on(ops, cfg.starts, &opts)?)
}

fn spectrum_stage(
    cfg: &ExperimentConfig,
    rep: &MinimizeReport,
) -> Result<(SpectrumReport, KernelSplit), RunError> {
    let spec = eigen_decompose(&rep.v, cfg.modes)?;
    let split = kernel_split(&spec, cfg.tolerances.kernel_tol)?;
    Ok((spec, split))
}

fn label(cfg: &ExperimentConfig) -> String {
    format!(
        "{} {} N={}",
        cfg.experiment.name(),
        cfg.model.kind_name(),
        cfg.n
    )
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Runs the configured experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    match cfg.experiment {
        Experiment::Minimize => minimize(cfg),
        Experiment::Spectrum => spectrum(cfg),
        Experiment::Lsred => lsred(cfg),
        Experiment::Stability => stability(cfg),
        Experiment::Covariance => covariance(cfg),
    }
}

fn minimize(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let ops = ops_for(cfg)?;
    let rep = minimize_stage(cfg, &ops)?;
    let mut csv = String::from("node,t,v\n");
    for (i, (&t, &v)) in ops
        .grid()
        .nodes()
        .iter()
        .zip(rep.v.values().iter())
        .enumerate()
    {
        writeln!(csv, "{i},{},{}", num(t), num(v)).unwrap();
    }
    let result = json!({
        "model": ops.model().label,
        "Y_est": rep.y_est,
        "grad_norm": rep.grad_norm,
        "residual": rep.residual,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "volume": ops.volume(),
        "hemisphere_reference": hemisphere_yamabe_constant(ops.dim()),
    });
    Ok(Outcome {
        summary: format!(
            "{} Y_est={} grad_norm={:.3e} converged={}",
            label(cfg),
            num(rep.y_est),
            rep.grad_norm,
            rep.converged
        ),
        result,
        csv,
    })
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let ops = ops_for(cfg)?;
    let rep = minimize_stage(cfg, &ops)?;
    let (spec, split) = spectrum_stage(cfg, &rep)?;
    let scale = spec.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut csv = String::from("index,eigenvalue,in_kernel\n");
    for (i, &l) in spec.eigenvalues.iter().enumerate() {
        writeln!(
            csv,
            "{i},{},{}",
            num(l),
            i < split.kernel_dim && l.abs() <= split.threshold
        )
        .unwrap();
    }
    let result = json!({
        "model": ops.model().label,
        "Y_est": rep.y_est,
        "grad_norm": rep.grad_norm,
        "critical": spec.critical,
        "eigenvalues": spec.eigenvalues,
        "scale": scale,
        "threshold": split.threshold,
        "kernel_dim": split.kernel_dim,
        "lambda1": split.lambda1,
        "gap_ratio": finite(split.gap_ratio),
    });
    Ok(Outcome {
        summary: format!(
            "{} kernel_dim={} lambda1={}",
            label(cfg),
            split.kernel_dim,
            num(split.lambda1)
        ),
        result,
        csv,
    })
}

fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let d: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                break d.iter().map(|x| x / n).collect();
            }
        })
        .collect()
}

/// Log-log slope of `‖F(sφ̂)‖` against `s`, per direction, worst deviation
/// from 2 reported.
fn correction_slope(samples: &[yamabe_core::ReducedSample]) -> Option<f64> {
    let mut worst: Option<f64> = None;
    let dirs = samples.iter().map(|s| s.direction).max()?;
    for d in 0..=dirs {
        let (x, y): (Vec<f64>, Vec<f64>) = samples
            .iter()
            .filter(|s| s.direction == d && s.scale > 0.0 && s.correction_norm > 0.0)
            .map(|s| (s.scale.ln(), s.correction_norm.ln()))
            .unzip();
        if let Ok(f) = linear_fit(&x, &y) {
            if worst.is_none_or(|w| (f.slope - 2.0).abs() > (w - 2.0).abs()) {
                worst = Some(f.slope);
            }
        }
    }
    worst
}

fn lsred(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let ops = ops_for(cfg)?;
    let rep = minimize_stage(cfg, &ops)?;
    let (_, split) = spectrum_stage(cfg, &rep)?;
    let header = "direction,scale,q_value,gap,correction_norm,newton_iters,residual\n";
    if split.kernel_dim == 0 {
        let result = json!({
            "model": ops.model().label,
            "Y_est": rep.y_est,
            "kernel_dim": 0,
            "lambda1": split.lambda1,
            "integrability": Integrability::Nondegenerate,
            "samples": [],
        });
        return Ok(Outcome {
            summary: format!("{} kernel_dim=0 integrability=nondegenerate", label(cfg)),
            result,
            csv: header.to_string(),
        });
    }
    let kdim = split.kernel_dim;
    let lambda1 = split.lambda1;
    let mut chart = ReductionChart::new(
        rep.v.clone(),
        split,
        cfg.tolerances.newton_tol,
        cfg.tolerances.max_newton,
    )?;
    let dirs = unit_directions(kdim, cfg.sampling.directions, cfg.seed);
    let l = cfg.sampling.scales;
    let scales = geometric_ladder(l.min, l.max, l.steps);
    let samples = chart.sample_reduced(&dirs, &scales)?;
    let q0 = rep.v.quotient();
    let integrability = detect_integrability(kdim, &samples, q0, cfg.tolerances.integrability_tol);
    let growth: GrowthFit = fit_growth_exponent(&samples)?;
    let slope = correction_slope(&samples);
    let max_residual = samples.iter().fold(0.0f64, |a, s| a.max(s.residual));

    let mut csv = String::from(header);
    for s in &samples {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.direction,
            num(s.scale),
            num(s.q_value),
            num(s.gap),
            num(s.correction_norm),
            s.newton_iters,
            num(s.residual)
        )
        .unwrap();
    }
    let result = json!({
        "model": ops.model().label,
        "Y_est": rep.y_est,
        "kernel_dim": kdim,
        "lambda1": lambda1,
        "chart_radius": chart.radius(),
        "directions": dirs,
        "integrability": integrability,
        "growth": growth,
        "correction_slope": slope,
        "max_residual": max_residual,
        "samples": samples,
    });
    Ok(Outcome {
        summary: format!(
            "{} exponent={:.6} r2={:.6} integrability={}",
            label(cfg),
            growth.exponent,
            growth.r2,
            serde_json::to_value(integrability)
                .unwrap()
                .as_str()
                .unwrap()
        ),
        result,
        csv,
    })
}

/// Stability experiment results needed by the harness and by the report.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityOutcome {
    pub y_est: f64,
    pub kernel_dim: usize,
    pub lambda1: f64,
    pub norm_conversion: f64,
    pub fit: StabilityFit,
    pub samples: StabilitySamples,
}

pub fn stability_run(cfg: &ExperimentConfig) -> Result<StabilityOutcome, RunError> {
    let ops = ops_for(cfg)?;
    let rep = minimize_stage(cfg, &ops)?;
    let (spec, split) = spectrum_stage(cfg, &rep)?;
    let basis = PerturbationBasis::from_spectrum(&spec, &split, cfg.sampling.transverse_modes);
    let kinds = cfg.sampling.kinds.clone().unwrap_or_else(|| {
        if split.kernel_dim > 0 {
            vec![
                PerturbationKind::Kernel,
                PerturbationKind::Transverse,
                PerturbationKind::Mixed,
            ]
        } else {
            vec![PerturbationKind::Transverse]
        }
    });
    let l = cfg.sampling.scales;
    let sampling = SamplingSpec {
        kinds,
        scales: geometric_ladder(l.min, l.max, l.steps),
        count: cfg.sampling.count,
        seed: cfg.seed,
        delta: cfg.sampling.delta,
    };
    let fam = MinimizerFamily::Single(rep.v.clone());
    let samples = sample_deficit_distance(&fam, &basis, &sampling)?;
    let fit = fit_stability_exponent(&samples.records)?;
    let transverse: Vec<DVector<f64>> = samples
        .directions
        .iter()
        .filter(|(k, _, _)| *k != PerturbationKind::Kernel)
        .map(|(_, _, e)| e.clone())
        .collect();
    let norm_conversion = norm_conversion_factor(&rep.v, &transverse);
    Ok(StabilityOutcome {
        y_est: rep.y_est,
        kernel_dim: split.kernel_dim,
        lambda1: split.lambda1,
        norm_conversion,
        fit,
        samples,
    })
}

fn stability(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let out = stability_run(cfg)?;
    let mut csv = String::from("sample_id,kind,direction,scale,deficit,distance\n");
    for r in &out.samples.records {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.sample_id,
            r.perturbation_kind.name(),
            r.direction,
            num(r.scale),
            num(r.deficit),
            num(r.distance)
        )
        .unwrap();
    }
    let bound = out.lambda1 / 4.0 * out.norm_conversion;
    let result = json!({
        "Y_est": out.y_est,
        "kernel_dim": out.kernel_dim,
        "lambda1": out.lambda1,
        "norm_conversion": finite(out.norm_conversion),
        "coercivity_bound": finite(bound),
        "fit": out.fit,
        "delta": out.samples.delta,
        "skipped": out.samples.skipped,
        "records": out.samples.records,
    });
    Ok(Outcome {
        summary: format!(
            "{} exponent={:.6} c_lower={} r2={:.6}",
            label(cfg),
            out.fit.exponent,
            num(out.fit.c_lower),
            out.fit.r2
        ),
        result,
        csv,
    })
}

fn covariance(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let m = make_model(&cfg.model)?;
    let grid = build_grid(&m, cfg.n)?;
    let ops = assemble_operators(Arc::new(m.clone()), grid.clone())?;
    let k = if m.topology == Topology::Circle {
        2.0 * PI
    } else {
        PI
    } / m.length;
    let nodes = grid.nodes().to_vec();
    let field = |f: &dyn Fn(f64) -> f64| {
        DVector::from_iterator(nodes.len(), nodes.iter().map(|&t| f(k * t)))
    };
    let factors = [
        field(&|s| 1.0 + 0.3 * s.cos()),
        field(&|s| (0.4 * s.cos() + 0.1 * (2.0 * s).cos()).exp()),
        field(&|s| 2.0 - 0.5 * s.cos().powi(2)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut csv = String::from("factor,sample,q_deformed,q_product,rel_err\n");
    let mut worst = 0.0f64;
    for (fi, w) in factors.iter().enumerate() {
        let dops = assemble_operators(Arc::new(conformal_deform(&m, w, &grid)?), grid.clone())?;
        for j in 0..cfg.sampling.count {
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(-0.2..0.2)).collect();
            let u = field(&|s| {
                1.0 + c
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * ((i + 1) as f64 * s).cos())
                    .sum::<f64>()
            });
            let lhs = quotient(&dops, &u);
            let rhs = quotient(&ops, &u.component_mul(w));
            let rel = (lhs - rhs).abs() / rhs.abs();
            worst = worst.max(rel);
            writeln!(csv, "{fi},{j},{},{},{}", num(lhs), num(rhs), num(rel)).unwrap();
        }
    }
    let result = json!({
        "model": m.label,
        "factors": factors.len(),
        "max_rel_err": worst,
        "factor_w12_norms": factors.iter().map(|w| w12_norm(&ops, w)).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        summary: format!("{} max_rel_err={:.3e}", label(cfg), worst),
        result,
        csv,
    })
}

/// The full JSON document: version, config hash, exact config and results.
pub fn report_json(cfg: &ExperimentConfig, outcome: &Outcome) -> String {
    let doc = json!({
        "version": VERSION,
        "config_hash": cfg.hash(),
        "config": cfg,
        "experiment": cfg.experiment.name(),
        "summary": outcome.summary,
        "result": outcome.result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), RunError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| RunError::Io(e.to_string()))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| RunError::Io(e.to_string()))?;
    tmp.persist(path)
        .map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Output paths `<prefix>.json` and `<prefix>.csv`.
pub fn output_paths(prefix: &str) -> (PathBuf, PathBuf) {
    (
        PathBuf::from(format!("{prefix}.json")),
        PathBuf::from(format!("{prefix}.csv")),
    )
}

/// Runs the experiment and writes both files; nothing is written on failure.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let prefix = cfg.output.clone().ok_or_else(|| {
        RunError::Config("output: no output prefix in config or on the command line".into())
    })?;
    let outcome = execute(cfg)?;
    let json = report_json(cfg, &outcome);
    let (jp, cp) = output_paths(&prefix);
    write_atomic(&cp, &outcome.csv)?;
    write_atomic(&jp, &json)?;
    Ok(outcome)
}
