//! Simulation generator: six-variable health microdata whose dependency
//! strength is controlled by a single parameter kappa.
//!
//! All relationships flow through a latent socioeconomic score. Signal and
//! noise weights w_s = sqrt(kappa/(1+kappa)) and w_n = sqrt(1/(1+kappa))
//! satisfy w_s^2 + w_n^2 = 1, so kappa = 0 produces pure noise and large
//! kappa near-deterministic structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnData, ColumnDef, ColumnKind, Dataset, Role, Schema};
use crate::error::{RapidError, Result};
use crate::learners::AttackerSpec;
use crate::risk::{rapid_assess, AssessOptions};
use crate::stats;
use crate::synthesizer::{synthesize_cart, SynthesisPlan};

pub const AGE_MEAN: f64 = 45.0;
pub const AGE_SD: f64 = 12.0;
pub const AGE_MIN: f64 = 18.0;
pub const AGE_MAX: f64 = 85.0;
pub const EDU_CUT_LOW: f64 = -0.3;
pub const EDU_CUT_HIGH: f64 = 0.7;
pub const EDU_SES_COEF: f64 = 0.8;
pub const EDU_AGE_COEF: f64 = -0.4;
pub const INCOME_INTERCEPT: f64 = 10.0;
pub const INCOME_SES_COEF: f64 = 0.5;
pub const INCOME_AGE_COEF: f64 = 0.3;
pub const INCOME_EDU_COEF: f64 = 0.25;
pub const HEALTH_SES_COEF: f64 = 0.6;
pub const HEALTH_AGE_COEF: f64 = -0.5;
pub const HEALTH_EDU_COEF: f64 = 0.2;
pub const HEALTH_INCOME_COEF: f64 = 0.2;
pub const DIABETIC_INTERCEPT: f64 = -1.5;
pub const DIABETIC_AGE_COEF: f64 = 0.8;
pub const DIABETIC_INCOME_COEF: f64 = -0.3;
pub const DIABETIC_EDU_COEF: f64 = -0.2;
pub const HYPERTENSIVE_INTERCEPT: f64 = -1.3;
pub const HYPERTENSIVE_AGE_COEF: f64 = 1.0;
pub const HYPERTENSIVE_INCOME_COEF: f64 = -0.2;
pub const HYPERTENSIVE_EDU_COEF: f64 = -0.1;
pub const GENDER_SES_COEF: f64 = 0.3;
pub const GENDER_AGE_COEF: f64 = -0.2;
pub const GENDER_EDU_COEF: f64 = 0.2;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub kappa: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 1000,
            kappa: 1.0,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kappa < 0.0 || !self.kappa.is_finite() {
            return Err(RapidError::NegativeKappa(self.kappa));
        }
        if self.n < 1 {
            return Err(RapidError::InvalidSimConfig("n must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn signal_noise_weights(kappa: f64) -> Result<(f64, f64)> {
    if kappa < 0.0 || !kappa.is_finite() {
        return Err(RapidError::NegativeKappa(kappa));
    }
    Ok(((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt()))
}

/// Standardizes by the sample mean and sample standard deviation of the
/// generated vector itself.
fn standardize(xs: &[f64]) -> Vec<f64> {
    let m = stats::mean(xs);
    let s = stats::sample_sd(xs);
    let s = if s > 0.0 { s } else { 1.0 };
    xs.iter().map(|x| (x - m) / s).collect()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates a simulated dataset with columns gender, age, education,
/// income, health, and disease_status (the sensitive attribute).
pub fn generate(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let (w_s, w_n) = signal_noise_weights(config.kappa)?;
    let n = config.n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let normals = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    };

    let ses = normals(&mut rng);

    // age: truncated normal sampled by inverse CDF on the truncated interval
    let phi_lo = stats::norm_cdf((AGE_MIN - AGE_MEAN) / AGE_SD);
    let phi_hi = stats::norm_cdf((AGE_MAX - AGE_MEAN) / AGE_SD);
    let age: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let z = stats::norm_quantile(phi_lo + u * (phi_hi - phi_lo));
            (AGE_MEAN + AGE_SD * z).clamp(AGE_MIN, AGE_MAX)
        })
        .collect();
    let age_z = standardize(&age);

    // education: latent index cut into three ordinal levels
    let eps_e = normals(&mut rng);
    let edu: Vec<f64> = (0..n)
        .map(|i| {
            let l = w_s * (EDU_SES_COEF * ses[i] + EDU_AGE_COEF * age_z[i]) + w_n * eps_e[i];
            if l < EDU_CUT_LOW {
                0.0
            } else if l < EDU_CUT_HIGH {
                1.0
            } else {
                2.0
            }
        })
        .collect();

    // income: log-linear in SES, age, education
    let eps_i = normals(&mut rng);
    let log_income: Vec<f64> = (0..n)
        .map(|i| {
            INCOME_INTERCEPT
                + w_s
                    * (INCOME_SES_COEF * ses[i]
                        + INCOME_AGE_COEF * age_z[i]
                        + INCOME_EDU_COEF * edu[i])
                + w_n * eps_i[i]
        })
        .collect();
    let income: Vec<f64> = log_income.iter().map(|l| l.exp()).collect();
    let log_income_z = standardize(&log_income);

    // health: sigmoid of a linear predictor, scaled to (0, 100)
    let zeta = normals(&mut rng);
    let health: Vec<f64> = (0..n)
        .map(|i| {
            let h = w_s
                * (HEALTH_SES_COEF * ses[i]
                    + HEALTH_AGE_COEF * age_z[i]
                    + HEALTH_EDU_COEF * edu[i]
                    + HEALTH_INCOME_COEF * log_income_z[i])
                + w_n * zeta[i];
            100.0 * logistic(h)
        })
        .collect();

    // disease: multinomial logit, healthy as baseline; the slopes scale
    // linearly with kappa while intercepts stay fixed
    let disease: Vec<Option<u32>> = (0..n)
        .map(|i| {
            let eta_d = DIABETIC_INTERCEPT
                + config.kappa
                    * (DIABETIC_AGE_COEF * age_z[i]
                        + DIABETIC_INCOME_COEF * log_income_z[i]
                        + DIABETIC_EDU_COEF * edu[i]);
            let eta_h = HYPERTENSIVE_INTERCEPT
                + config.kappa
                    * (HYPERTENSIVE_AGE_COEF * age_z[i]
                        + HYPERTENSIVE_INCOME_COEF * log_income_z[i]
                        + HYPERTENSIVE_EDU_COEF * edu[i]);
            let m = 0.0_f64.max(eta_d).max(eta_h);
            let w = [(0.0 - m).exp(), (eta_d - m).exp(), (eta_h - m).exp()];
            let total: f64 = w.iter().sum();
            let u: f64 = rng.gen::<f64>() * total;
            let c = if u < w[0] {
                0
            } else if u < w[0] + w[1] {
                1
            } else {
                2
            };
            Some(c)
        })
        .collect();

    // gender: Bernoulli with mild SES dependency (male = success)
    let gender: Vec<Option<u32>> = (0..n)
        .map(|i| {
            let p = logistic(
                w_s * (GENDER_SES_COEF * ses[i]
                    + GENDER_AGE_COEF * age_z[i]
                    + GENDER_EDU_COEF * edu[i]),
            );
            Some((rng.gen::<f64>() < p) as u32)
        })
        .collect();

    let schema = Schema {
        columns: vec![
            ColumnDef {
                name: "gender".into(),
                kind: ColumnKind::Categorical {
                    levels: vec!["female".into(), "male".into()],
                },
                role: Role::QuasiIdentifier,
            },
            ColumnDef {
                name: "age".into(),
                kind: ColumnKind::Continuous,
                role: Role::QuasiIdentifier,
            },
            ColumnDef {
                name: "education".into(),
                kind: ColumnKind::Categorical {
                    levels: vec!["0".into(), "1".into(), "2".into()],
                },
                role: Role::QuasiIdentifier,
            },
            ColumnDef {
                name: "income".into(),
                kind: ColumnKind::Continuous,
                role: Role::QuasiIdentifier,
            },
            ColumnDef {
                name: "health".into(),
                kind: ColumnKind::Continuous,
                role: Role::QuasiIdentifier,
            },
            ColumnDef {
                name: "disease_status".into(),
                kind: ColumnKind::Categorical {
                    levels: vec!["healthy".into(), "diabetic".into(), "hypertensive".into()],
                },
                role: Role::Sensitive,
            },
        ],
    };
    Dataset::new(
        schema,
        vec![
            ColumnData::Categorical(gender),
            ColumnData::Continuous(age.into_iter().map(Some).collect()),
            ColumnData::Categorical(edu.into_iter().map(|e| Some(e as u32)).collect()),
            ColumnData::Continuous(income.into_iter().map(Some).collect()),
            ColumnData::Continuous(health.into_iter().map(Some).collect()),
            ColumnData::Categorical(disease),
        ],
    )
}

pub fn sim_qi_columns() -> Vec<String> {
    ["gender", "age", "education", "income", "health"]
        .map(str::to_string)
        .to_vec()
}

pub const SIM_SENSITIVE: &str = "disease_status";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub replications: usize,
    pub attacker: AttackerSpec,
    pub tau: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRun {
    pub kappa: f64,
    pub replication: usize,
    pub rapid: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub mean_rapid: f64,
    pub sd_rapid: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
    pub table: Vec<SweepRow>,
}

/// For each (kappa, replication): generate, synthesize one CART replicate,
/// and assess disclosure risk of the synthetic release. Runs execute in
/// parallel with seeds derived from (sweep seed, grid position, replication).
pub fn kappa_sweep(kappa_grid: &[f64], config: &SweepConfig) -> Result<SweepResult> {
    if kappa_grid.is_empty() {
        return Err(RapidError::EmptyGrid);
    }
    if config.replications < 1 {
        return Err(RapidError::InvalidSimConfig(
            "replications must be >= 1".into(),
        ));
    }
    for &k in kappa_grid {
        if k < 0.0 || !k.is_finite() {
            return Err(RapidError::NegativeKappa(k));
        }
    }
    let qi = sim_qi_columns();
    let cells: Vec<(usize, usize)> = (0..kappa_grid.len())
        .flat_map(|gi| (0..config.replications).map(move |rep| (gi, rep)))
        .collect();
    let runs: Vec<SweepRun> = cells
        .into_par_iter()
        .map(|(gi, rep)| -> Result<SweepRun> {
            let seed = config
                .rng_seed
                .wrapping_mul(1_000_003)
                .wrapping_add((gi * config.replications + rep) as u64);
            let data = generate(&SimConfig {
                n: config.n,
                kappa: kappa_grid[gi],
                rng_seed: seed,
            })?;
            let synth = synthesize_cart(&data, &SynthesisPlan {
                m: 1,
                ..SynthesisPlan::with_seed(seed.wrapping_add(1))
            })?
            .remove(0);
            let spec = AttackerSpec {
                rng_seed: seed.wrapping_add(2),
                ..config.attacker.clone()
            };
            let res = rapid_assess(&data, &synth, &qi, SIM_SENSITIVE, &spec, &AssessOptions {
                tau: config.tau,
                ..AssessOptions::default()
            })?;
            Ok(SweepRun {
                kappa: kappa_grid[gi],
                replication: rep,
                rapid: res.score,
                accuracy: res.accuracy.unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<_>>()?;
    let table = kappa_grid
        .iter()
        .map(|&k| {
            let scores: Vec<f64> = runs
                .iter()
                .filter(|r| r.kappa == k)
                .map(|r| r.rapid)
                .collect();
            let accs: Vec<f64> = runs
                .iter()
                .filter(|r| r.kappa == k)
                .map(|r| r.accuracy)
                .collect();
            SweepRow {
                kappa: k,
                mean_rapid: stats::mean(&scores),
                sd_rapid: if scores.len() > 1 {
                    stats::sample_sd(&scores)
                } else {
                    0.0
                },
                mean_accuracy: stats::mean(&accs),
            }
        })
        .collect();
    Ok(SweepResult { runs, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_identities() {
        assert_eq!(signal_noise_weights(0.0).unwrap(), (0.0, 1.0));
        let (s, n) = signal_noise_weights(1.0).unwrap();
        assert!((s - 1.0 / 2.0_f64.sqrt()).abs() < 1e-15);
        assert!((n - 1.0 / 2.0_f64.sqrt()).abs() < 1e-15);
        let (s, n) = signal_noise_weights(100.0).unwrap();
        assert!((s - 0.99504).abs() < 1e-5);
        assert!((n - 0.09950).abs() < 1e-5);
        for kappa in [0.0, 0.3, 1.0, 7.0, 50.0, 1e6] {
            let (s, n) = signal_noise_weights(kappa).unwrap();
            assert!((s * s + n * n - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            signal_noise_weights(-0.1),
            Err(RapidError::NegativeKappa(_))
        ));
    }

    #[test]
    fn kappa_zero_disease_matches_intercept_softmax() {
        let d = generate(&SimConfig {
            n: 10_000,
            kappa: 0.0,
            rng_seed: 1,
        })
        .unwrap();
        let m = crate::risk::baseline_marginals(&d, "disease_status").unwrap();
        let z = 1.0 + (-1.5_f64).exp() + (-1.3_f64).exp();
        assert!((m["healthy"] - 1.0 / z).abs() < 0.02, "{}", m["healthy"]);
        assert!((m["diabetic"] - (-1.5_f64).exp() / z).abs() < 0.02);
        assert!((m["hypertensive"] - (-1.3_f64).exp() / z).abs() < 0.02);
    }

    #[test]
    fn value_ranges_hold() {
        for kappa in [0.0, 2.0, 50.0] {
            let d = generate(&SimConfig {
                n: 2000,
                kappa,
                rng_seed: 3,
            })
            .unwrap();
            let get = |name: &str| -> Vec<f64> {
                let ColumnData::Continuous(v) = d.column(name).unwrap() else {
                    unreachable!()
                };
                v.iter().map(|x| x.unwrap()).collect()
            };
            assert!(get("age").iter().all(|&a| (18.0..=85.0).contains(&a)));
            assert!(get("income").iter().all(|&i| i > 0.0));
            assert!(get("health").iter().all(|&h| 0.0 < h && h < 100.0));
        }
    }

    #[test]
    fn kappa_zero_severs_education_age_link() {
        let d = generate(&SimConfig {
            n: 10_000,
            kappa: 0.0,
            rng_seed: 4,
        })
        .unwrap();
        let ColumnData::Categorical(edu) = d.column("education").unwrap() else {
            unreachable!()
        };
        let ColumnData::Continuous(age) = d.column("age").unwrap() else {
            unreachable!()
        };
        let e: Vec<f64> = edu.iter().map(|v| v.unwrap() as f64).collect();
        let a: Vec<f64> = age.iter().map(|v| v.unwrap()).collect();
        let (me, ma) = (stats::mean(&e), stats::mean(&a));
        let cov: f64 = e.iter().zip(&a).map(|(x, y)| (x - me) * (y - ma)).sum::<f64>()
            / (e.len() - 1) as f64;
        let rho = cov / (stats::sample_sd(&e) * stats::sample_sd(&a));
        assert!(rho.abs() < 0.05, "rho {rho}");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig {
            n: 500,
            kappa: 3.0,
            rng_seed: 12,
        };
        assert_eq!(generate(&cfg).unwrap().columns(), generate(&cfg).unwrap().columns());
    }

    #[test]
    fn dependence_grows_with_kappa() {
        // empirical mutual information between age decile and disease status
        let mi_at = |kappa: f64| -> f64 {
            let d = generate(&SimConfig {
                n: 10_000,
                kappa,
                rng_seed: 8,
            })
            .unwrap();
            let ColumnData::Continuous(age) = d.column("age").unwrap() else {
                unreachable!()
            };
            let ColumnData::Categorical(dis) = d.column("disease_status").unwrap() else {
                unreachable!()
            };
            let mut ages: Vec<f64> = age.iter().map(|v| v.unwrap()).collect();
            ages.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let bin = |a: f64| -> usize {
                (0..9)
                    .find(|&q| a < ages[(q + 1) * 1000])
                    .unwrap_or(9)
            };
            let mut joint = [[0.0_f64; 3]; 10];
            for (a, s) in age.iter().zip(dis) {
                joint[bin(a.unwrap())][s.unwrap() as usize] += 1e-4;
            }
            let mut mi = 0.0;
            for b in 0..10 {
                let pb: f64 = joint[b].iter().sum();
                for c in 0..3 {
                    let pc: f64 = joint.iter().map(|r| r[c]).sum();
                    if joint[b][c] > 0.0 {
                        mi += joint[b][c] * (joint[b][c] / (pb * pc)).ln();
                    }
                }
            }
            mi
        };
        let (m0, m1, m10) = (mi_at(0.0), mi_at(1.0), mi_at(10.0));
        assert!(m0 <= m1 + 0.01 && m1 <= m10 + 0.01, "{m0} {m1} {m10}");
        assert!(m10 > m0 + 0.05);
    }

    #[test]
    fn sweep_structure_and_guards() {
        let cfg = SweepConfig {
            n: 150,
            replications: 2,
            attacker: AttackerSpec::cart(0),
            tau: 0.3,
            rng_seed: 5,
        };
        let res = kappa_sweep(&[0.0, 5.0], &cfg).unwrap();
        assert_eq!(res.runs.len(), 4);
        assert_eq!(res.table.len(), 2);
        for r in &res.runs {
            assert!((0.0..=1.0).contains(&r.rapid));
            assert!((0.0..=1.0).contains(&r.accuracy));
        }
        assert!(matches!(kappa_sweep(&[], &cfg), Err(RapidError::EmptyGrid)));
    }
}
