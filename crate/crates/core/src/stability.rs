//! Deficit–distance sampling near a minimizer and stability-exponent fits.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{self, chart_point, energy_deficit, w12_norm, NormalizedState};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::lsred::{ReductionChart, NOISE_FLOOR, RADIUS_FRACTION};
use crate::spectrum::{KernelSplit, SpectrumReport};

/// Width of the log10-distance bins used for the lower envelope.
pub const ENVELOPE_BIN: f64 = 0.2;
pub const MIN_RECORDS: usize = 8;
pub const MIN_R2: f64 = 0.99;

/// Known minimizers near `v`.
#[derive(Debug, Clone)]
pub enum MinimizerFamily {
    Single(NormalizedState),
    /// Members `Ψ(φ + F(φ))` for the stored kernel coordinates.
    Reduced {
        chart: ReductionChart,
        critical: Vec<Vec<f64>>,
    },
}

impl MinimizerFamily {
    pub fn center(&self) -> &NormalizedState {
        match self {
            MinimizerFamily::Single(v) => v,
            MinimizerFamily::Reduced { chart, .. } => chart.v(),
        }
    }

    pub fn y_est(&self) -> f64 {
        self.center().quotient()
    }

    pub fn members(&self) -> Result<Vec<NormalizedState>> {
        match self {
            MinimizerFamily::Single(v) => Ok(vec![v.clone()]),
            MinimizerFamily::Reduced { chart, critical } => {
                if critical.is_empty() {
                    return Err(Error::EmptyFamily);
                }
                critical.iter().map(|c| chart.member(c)).collect()
            }
        }
    }

    /// Checks that every member is critical to `grad_tol` and has quotient
    /// within `1e-8` of the center.
    pub fn check(&self, grad_tol: f64) -> Result<()> {
        let y = self.y_est();
        for m in self.members()? {
            let g = energy::dual_norm(m.ops(), &energy::gradient(&m));
            let q = m.quotient();
            if g > grad_tol || (q - y).abs() > 1e-8 {
                return Err(Error::InvalidInput(format!(
                    "family member not minimizing: grad {g:.3e}, Q−Y {:.3e}",
                    q - y
                )));
            }
        }
        Ok(())
    }
}

fn relative_distance(u: &NormalizedState, m: &DVector<f64>) -> f64 {
    let ops = u.ops();
    w12_norm(ops, &(u.values() - m)) / w12_norm(ops, u.values())
}

/// `min ‖u − w‖_{W^{1,2}} / ‖u‖_{W^{1,2}}` over family members `w`, refined
/// by a coordinate pattern search around the best stored kernel point.
pub fn distance_to_minimizers(u: &NormalizedState, fam: &MinimizerFamily) -> Result<f64> {
    match fam {
        MinimizerFamily::Single(v) => Ok(relative_distance(u, v.values())),
        MinimizerFamily::Reduced { chart, critical } => {
            if critical.is_empty() {
                return Err(Error::EmptyFamily);
            }
            let eval = |c: &[f64]| -> Option<f64> {
                chart
                    .member(c)
                    .ok()
                    .map(|m| relative_distance(u, m.values()))
            };
            let mut best: Option<(Vec<f64>, f64)> = None;
            for c in critical {
                if let Some(d) = eval(c) {
                    if best.as_ref().is_none_or(|b| d < b.1) {
                        best = Some((c.clone(), d));
                    }
                }
            }
            let (mut c, mut d) = best.ok_or(Error::EmptyFamily)?;
            let mut step = if critical.len() > 1 {
                let mut s = f64::INFINITY;
                for a in critical {
                    for b in critical {
                        let e = a
                            .iter()
                            .zip(b)
                            .map(|(x, y)| (x - y).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        if e > 0.0 {
                            s = s.min(e);
                        }
                    }
                }
                0.5 * s
            } else {
                0.1 * chart.radius()
            };
            for _ in 0..30 {
                let mut improved = false;
                for i in 0..c.len() {
                    for sign in [1.0, -1.0] {
                        let mut t = c.clone();
                        t[i] += sign * step;
                        if let Some(dt) = eval(&t) {
                            if dt < d {
                                c = t;
                                d = dt;
                                improved = true;
                            }
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            Ok(d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Kernel,
    Transverse,
    Mixed,
}

impl PerturbationKind {
    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::Kernel => "kernel",
            PerturbationKind::Transverse => "transverse",
            PerturbationKind::Mixed => "mixed",
        }
    }
}

/// Directions available for perturbing `v`: the kernel basis and the lowest
/// retained eigenvectors.
#[derive(Debug, Clone)]
pub struct PerturbationBasis {
    pub kernel: Vec<DVector<f64>>,
    pub transverse: Vec<DVector<f64>>,
    pub lambda1: f64,
}

impl PerturbationBasis {
    pub fn from_spectrum(
        spec: &SpectrumReport,
        split: &KernelSplit,
        max_transverse: usize,
    ) -> Self {
        let transverse = spec
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > split.threshold)
            .take(max_transverse)
            .map(|(j, _)| spec.eigenvector(j))
            .collect();
        PerturbationBasis {
            kernel: split.k_basis.clone(),
            transverse,
            lambda1: split.lambda1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub kinds: Vec<PerturbationKind>,
    pub scales: Vec<f64>,
    /// Random directions per kind.
    pub count: usize,
    pub seed: u64,
    /// Localization radius in `W^{1,2}`; defaults to the chart radius.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRecord {
    pub sample_id: usize,
    pub perturbation_kind: PerturbationKind,
    pub direction: usize,
    pub scale: f64,
    pub deficit: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySamples {
    pub records: Vec<StabilityRecord>,
    /// Samples outside the localization ball.
    pub skipped: usize,
    pub delta: f64,
    /// Unit directions actually sampled, by kind and index.
    #[serde(skip)]
    pub directions: Vec<(PerturbationKind, usize, DVector<f64>)>,
}

fn m_normalize(mass: &DVector<f64>, x: DVector<f64>) -> Option<DVector<f64>> {
    let n = x.dot(&mass.component_mul(&x)).sqrt();
    (n > 0.0).then(|| x / n)
}

fn gaussian_combination(basis: &[DVector<f64>], len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut x = DVector::zeros(len);
    for b in basis {
        let c: f64 = StandardNormal.sample(rng);
        x.axpy(c, b, 1.0);
    }
    x
}

/// Perturbed states `Ψ(s·e)` for seeded random unit directions `e` of each
/// requested kind; deficits are measured against `Q(v)`.
pub fn sample_deficit_distance(
    fam: &MinimizerFamily,
    basis: &PerturbationBasis,
    spec: &SamplingSpec,
) -> Result<StabilitySamples> {
    let v = fam.center();
    let ops = v.ops();
    let len = ops.len();
    let mass = ops.mass();
    let delta = spec
        .delta
        .unwrap_or(RADIUS_FRACTION * w12_norm(ops, v.values()));

    let mut dirs: Vec<(PerturbationKind, usize, DVector<f64>)> = Vec::new();
    for (ki, &kind) in spec.kinds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(ki as u64);
        let usable = match kind {
            PerturbationKind::Kernel => !basis.kernel.is_empty(),
            _ => !basis.transverse.is_empty(),
        };
        if !usable {
            log::warn!("no {} directions available; kind skipped", kind.name());
            continue;
        }
        for j in 0..spec.count {
            let raw = match kind {
                PerturbationKind::Kernel => gaussian_combination(&basis.kernel, len, &mut rng),
                PerturbationKind::Transverse => {
                    gaussian_combination(&basis.transverse, len, &mut rng)
                }
                PerturbationKind::Mixed => {
                    let t =
                        m_normalize(mass, gaussian_combination(&basis.transverse, len, &mut rng));
                    let k = m_normalize(mass, gaussian_combination(&basis.kernel, len, &mut rng));
                    match (k, t) {
                        (Some(k), Some(t)) => k + t,
                        (None, Some(t)) => t,
                        _ => DVector::zeros(len),
                    }
                }
            };
            if let Some(e) = m_normalize(mass, raw) {
                dirs.push((kind, j, e));
            }
        }
    }

    let jobs: Vec<(usize, usize, f64)> = (0..dirs.len())
        .flat_map(|d| spec.scales.iter().map(move |&s| (d, s)))
        .enumerate()
        .map(|(i, (d, s))| (i, d, s))
        .collect();
    let results: Vec<Result<Option<StabilityRecord>>> = jobs
        .par_iter()
        .map(|&(id, d, s)| {
            let (kind, j, e) = &dirs[d];
            let (u, dlt) = if s == 0.0 {
                (v.values().clone(), DVector::zeros(len))
            } else {
                chart_point(v, &(e * s))
            };
            let (state, dlt) = if s == 0.0 {
                (v.clone(), dlt)
            } else if u.iter().any(|&x| x < 0.0) {
                let st = energy::normalize(ops, &u.map(|x| x.max(0.0)))?;
                let d = st.values() - v.values();
                (st, d)
            } else {
                (energy::normalize(ops, &u)?, dlt)
            };
            if w12_norm(ops, &dlt) > delta {
                return Ok(None);
            }
            let distance = match fam {
                MinimizerFamily::Single(_) => w12_norm(ops, &dlt) / w12_norm(ops, state.values()),
                _ => distance_to_minimizers(&state, fam)?,
            };
            Ok(Some(StabilityRecord {
                sample_id: id,
                perturbation_kind: *kind,
                direction: *j,
                scale: s,
                deficit: energy_deficit(v, &dlt),
                distance,
            }))
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(rec) => records.push(rec),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} samples left the ball of radius {delta:.3e} and were skipped");
    }
    Ok(StabilitySamples {
        records,
        skipped,
        delta,
        directions: dirs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityFit {
    pub exponent: f64,
    /// `min deficit / distance^exponent` over the records used.
    pub c_lower: f64,
    pub r2: f64,
    /// Distance range of the records used.
    pub window: (f64, f64),
    pub used: usize,
    pub below_floor: usize,
}

/// Log-log regression of the lower envelope (minimum deficit per
/// `ENVELOPE_BIN`-decade distance bin).
pub fn fit_stability_exponent(records: &[StabilityRecord]) -> Result<StabilityFit> {
    let positive: Vec<&StabilityRecord> = records.iter().filter(|r| r.distance > 0.0).collect();
    let used: Vec<&StabilityRecord> = positive
        .iter()
        .copied()
        .filter(|r| r.deficit > NOISE_FLOOR)
        .collect();
    let below_floor = positive.len() - used.len();
    if used.len() < MIN_RECORDS {
        return Err(Error::InsufficientData(format!(
            "{} records above the noise floor, need {MIN_RECORDS}",
            used.len()
        )));
    }
    let lo = used
        .iter()
        .map(|r| r.distance)
        .fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|r| r.distance).fold(0.0, f64::max);
    if (hi / lo).log10() < 1.0 {
        return Err(Error::InsufficientData(format!(
            "distances span {:.3} decades",
            (hi / lo).log10()
        )));
    }
    let mut bins: std::collections::BTreeMap<i64, (f64, f64)> = std::collections::BTreeMap::new();
    for r in &used {
        let key = (r.distance.log10() / ENVELOPE_BIN).floor() as i64;
        let e = bins.entry(key).or_insert((r.distance, r.deficit));
        if r.deficit < e.1 {
            *e = (r.distance, r.deficit);
        }
    }
    if bins.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} envelope bins",
            bins.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = bins.values().map(|&(d, q)| (d.log10(), q.log10())).unzip();
    let line = linear_fit(&x, &y)?;
    if line.r2 < MIN_R2 {
        return Err(Error::FitRejected {
            r2: line.r2,
            min_r2: MIN_R2,
        });
    }
    let c_lower = used
        .iter()
        .map(|r| r.deficit / r.distance.powf(line.slope))
        .fold(f64::INFINITY, f64::min);
    Ok(StabilityFit {
        exponent: line.slope,
        c_lower,
        r2: line.r2,
        window: (lo, hi),
        used: used.len(),
        below_floor,
    })
}

/// `min_z (zᵀMz / zᵀ(S+M)z) · ‖v‖²_{W^{1,2}}` over the given directions: converts
/// an `M`-relative coercivity bound into one for the normalized distance.
pub fn norm_conversion_factor(v: &NormalizedState, dirs: &[DVector<f64>]) -> f64 {
    let ops = v.ops();
    let vw = w12_norm(ops, v.values()).powi(2);
    dirs.iter()
        .map(|z| z.dot(&ops.mass().component_mul(z)) / w12_norm(ops, z).powi(2) * vw)
        .fold(f64::INFINITY, f64::min)
}
