//! Randomized identity suites and their reports.
//!
//! Every `(identity, trial)` pair draws from its own random stream derived
//! from the run seed, so reports are reproducible regardless of scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chains::{br_operation, connes_b, hochschild_b, shuffle_product, Chain, PROBES, PROBE_SEED};
use crate::combinatorics::{cyclic_partition_volumes, shuffle_partition_volumes};
use crate::config::RunConfig;
use crate::error::Result;
use crate::jlo::{
    bch_cochain, index_pairing, jlo_cochain, perturbed_cochain, perturbed_cochain_via_delta,
    verify_cyclic_multiplicativity, verify_perturbed_multiplicativity, verify_shuffle_multiplicativity, JloEvaluator,
    Method,
};
use crate::matrix::{c64, graded_kron, kron, GradedSpace};
use crate::random::Rng;
use crate::spectral::{Idempotent, SpectralTripleFD, DEFAULT_KERNEL_EPS};

pub const REPORT_SCHEMA: u32 = 1;
/// Deviation allowed for Monte-Carlo volume estimates, in standard errors.
pub const VOLUME_SIGMAS: f64 = 3.0;
/// Deviation allowed between exact and Monte-Carlo cochains, in standard errors.
pub const ORACLE_SIGMAS: f64 = 4.0;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub identity: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
    pub params: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    pub timestamp: u64,
    pub config: RunConfig,
    pub summary: Summary,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.checks.iter().map(|c| c.identity.len()).max().unwrap_or(8).max(8);
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>11}  {:>11}  result",
            "identity", "trial", "residual", "tolerance"
        );
        for c in &self.checks {
            let trial = c.params.get("trial").and_then(Value::as_u64).unwrap_or(0);
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>11.3e}  {:>11.3e}  {}",
                c.identity,
                trial,
                c.residual,
                c.tolerance,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            out,
            "{} checks, {} passed, {} failed",
            self.summary.total, self.summary.passed, self.summary.failed
        );
        out
    }

    /// Writes the JSON report to `path` and the text table next to it.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, self.to_json())?;
        let text_path = path.with_extension("txt");
        std::fs::write(&text_path, self.to_text())?;
        Ok(text_path)
    }
}

struct Trial<'a> {
    config: &'a RunConfig,
    index: usize,
    s1: GradedSpace,
    s2: GradedSpace,
}

impl Trial<'_> {
    fn degrees(&self, cap: usize) -> Vec<usize> {
        (0..=self.config.max_degree.min(cap)).collect()
    }

    fn params(&self, extra: Value) -> Value {
        let mut v = json!({
            "trial": self.index,
            "dims": [[self.s1.dim_even, self.s1.dim_odd], [self.s2.dim_even, self.s2.dim_odd]],
            "max_degree": self.config.max_degree,
        });
        if let (Value::Object(base), Value::Object(more)) = (&mut v, extra) {
            base.extend(more);
        }
        v
    }
}

/// `(residual, tolerance, extra params)`.
type Outcome = (f64, f64, Value);
type Suite = fn(&mut Rng, &Trial) -> Result<Outcome>;

fn tol(t: &Trial) -> f64 {
    t.config.tolerance
}

fn triple(rng: &mut Rng, space: GradedSpace) -> SpectralTripleFD {
    rng.triple(space, 1.0, 1)
}

fn b_squared(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let a = rng.chain(&t.s1, &t.degrees(4), 1);
    Ok((
        hochschild_b(&hochschild_b(&a)).probe_residual(PROBES, PROBE_SEED),
        tol(t),
        json!({}),
    ))
}

fn big_b_squared(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let a = rng.chain(&t.s1, &t.degrees(4), 1);
    Ok((
        connes_b(&connes_b(&a)).probe_residual(PROBES, PROBE_SEED),
        tol(t),
        json!({}),
    ))
}

fn anticommutator(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let a = rng.chain(&t.s1, &t.degrees(4), 1);
    let s = connes_b(&hochschild_b(&a)).plus(&hochschild_b(&connes_b(&a)))?;
    Ok((s.probe_residual(PROBES, PROBE_SEED), tol(t), json!({})))
}

fn b_one(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let a = rng.chain(&t.s1, &t.degrees(4), 1);
    Ok((
        br_operation(std::slice::from_ref(&a))?.residual_against(&connes_b(&a))?,
        tol(t),
        json!({}),
    ))
}

fn associativity(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let degrees = t.degrees(2);
    let (a, b) = (rng.chain(&t.s1, &degrees, 1), rng.chain(&t.s2, &degrees, 1));
    let c = rng.chain(&GradedSpace::new(1, 1), &degrees, 1);
    let left = shuffle_product(&shuffle_product(&a, &b)?, &c)?;
    let right = shuffle_product(&a, &shuffle_product(&b, &c)?)?;
    Ok((left.residual_against(&right)?, tol(t), json!({})))
}

fn derivation(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let p = rng.range_inclusive(0, t.config.max_degree.min(2));
    let q = rng.range_inclusive(0, t.config.max_degree.min(2));
    let (a, b) = (rng.chain(&t.s1, &[p], 1), rng.chain(&t.s2, &[q], 1));
    let lhs = hochschild_b(&shuffle_product(&a, &b)?);
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    let rhs = shuffle_product(&hochschild_b(&a), &b)?
        .plus(&shuffle_product(&a, &hochschild_b(&b))?.scaled(c64(sign, 0.0)))?;
    Ok((lhs.residual_against(&rhs)?, tol(t), json!({ "p": p, "q": q })))
}

fn heat_factorization(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let (t1, t2) = (triple(rng, t.s1), triple(rng, t.s2));
    let p = t1.product(&t2);
    let mut worst: f64 = 0.0;
    for time in [0.1, 1.0, 3.0] {
        let lhs = p.to_factor_basis(&[&t1, &t2], &p.heat(time)?)?;
        let rhs = graded_kron(&t1.heat(time)?, &t2.heat(time)?, &t.s1, &t.s2)?;
        worst = worst.max((&lhs - &rhs).norm_max());
    }
    Ok((worst, tol(t), json!({ "times": [0.1, 1.0, 3.0] })))
}

fn derivation_product(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let (t1, t2) = (triple(rng, t.s1), triple(rng, t.s2));
    let p = t1.product(&t2);
    let (b, c) = (rng.even(&t.s1), rng.even(&t.s2));
    let bc = p.from_factor_basis(&[&t1, &t2], &kron(&b, &c))?;
    let lhs = p.to_factor_basis(&[&t1, &t2], &p.commutator_d(&bc)?)?;
    let rhs =
        &graded_kron(&t1.commutator_d(&b)?, &c, &t.s1, &t.s2)? + &graded_kron(&b, &t2.commutator_d(&c)?, &t.s1, &t.s2)?;
    Ok(((&lhs - &rhs).norm_max(), tol(t), json!({})))
}

fn kernel_product(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let (t1, t2) = (triple(rng, t.s1), triple(rng, t.s2));
    let p = t1.product(&t2);
    let lhs = p.to_factor_basis(&[&t1, &t2], &p.kernel_projection(DEFAULT_KERNEL_EPS)?)?;
    let rhs = kron(
        &t1.kernel_projection(DEFAULT_KERNEL_EPS)?,
        &t2.kernel_projection(DEFAULT_KERNEL_EPS)?,
    );
    Ok(((&lhs - &rhs).norm_max(), tol(t), json!({})))
}

fn index_product(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let (t1, t2) = (triple(rng, t.s1), triple(rng, t.s2));
    let (i1, i2, i12) = (t1.index()?, t2.index()?, t1.product(&t2).index()?);
    Ok((
        ((i12 - i1 * i2) as f64).abs(),
        tol(t),
        json!({ "index": [i1, i2, i12] }),
    ))
}

fn relative(lhs: Complex64, rhs: Complex64) -> f64 {
    (lhs - rhs).norm() / (1.0 + rhs.norm())
}

fn shuffle_multiplicativity(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let (t1, t2) = (triple(rng, t.s1), triple(rng, t.s2));
    let degrees = t.degrees(2);
    let (a, b) = (rng.chain(&t.s1, &degrees, 1), rng.chain(&t.s2, &degrees, 1));
    let c = verify_shuffle_multiplicativity(&t1, &t2, &a, &b)?;
    Ok((c.relative(), tol(t), json!({ "rhs": c.rhs.norm() })))
}

fn cyclic_multiplicativity_two(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let (t1, t2) = (triple(rng, t.s1), triple(rng, t.s2));
    let degrees = t.degrees(2);
    let (a, b) = (rng.chain(&t.s1, &degrees, 1), rng.chain(&t.s2, &degrees, 1));
    let c = verify_cyclic_multiplicativity(&[&t1, &t2], &[a, b])?;
    Ok((c.relative(), tol(t), json!({ "r": 2, "rhs": c.rhs.norm() })))
}

fn cyclic_multiplicativity_three(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let spaces = [GradedSpace::new(2, 1), GradedSpace::new(1, 2), GradedSpace::new(2, 1)];
    let ts: Vec<SpectralTripleFD> = spaces.iter().map(|s| triple(rng, *s)).collect();
    let chains: Vec<Chain> = ts.iter().map(|x| rng.chain(x.space(), &[1], 1)).collect();
    let refs: Vec<&SpectralTripleFD> = ts.iter().collect();
    let c = verify_cyclic_multiplicativity(&refs, &chains)?;
    Ok((
        c.relative(),
        tol(t),
        json!({ "r": 3, "degrees": [1, 1, 1], "dims": [[2, 1], [1, 2], [2, 1]], "rhs": c.rhs.norm() }),
    ))
}

fn transgression(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let t1 = triple(rng, t.s1);
    let a = rng.chain(&t.s1, &t.degrees(3), 1);
    let (lhs, rhs) = (bch_cochain(&t1, &a)?, jlo_cochain(&t1, &connes_b(&a))?);
    Ok((relative(lhs, rhs), tol(t), json!({})))
}

fn cocycle(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let t1 = triple(rng, t.s1);
    let a = rng.chain(&t.s1, &t.degrees(3), 1);
    let boundary = hochschild_b(&a).plus(&connes_b(&a))?;
    Ok((perturbed_cochain(&t1, &boundary)?.norm(), tol(t), json!({})))
}

fn perturbed_forms(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let t1 = triple(rng, t.s1);
    let a = rng.chain(&t.s1, &t.degrees(3), 1);
    Ok((
        relative(perturbed_cochain(&t1, &a)?, perturbed_cochain_via_delta(&t1, &a)?),
        tol(t),
        json!({}),
    ))
}

fn perturbed_multiplicativity(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let (t1, t2) = (triple(rng, t.s1), triple(rng, t.s2));
    let degrees = t.degrees(2);
    let (a, b) = (rng.chain(&t.s1, &degrees, 1), rng.chain(&t.s2, &degrees, 1));
    let c = verify_perturbed_multiplicativity(&t1, &t2, &a, &b)?;
    Ok((c.relative(), tol(t), json!({ "rhs": c.rhs.norm() })))
}

fn scalar_slots(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let t1 = triple(rng, t.s1);
    let top = t.config.max_degree.clamp(1, 3);
    let a = rng.chain(&t.s1, &(1..=top).collect::<Vec<_>>(), 1);
    let base = jlo_cochain(&t1, &a)?;
    let mut worst: f64 = 0.0;
    for slot in 1..=top {
        let shifted = a.shift_slot_by_scalar(slot, rng.complex_normal());
        worst = worst.max(relative(jlo_cochain(&t1, &shifted)?, base));
    }
    Ok((worst, tol(t), json!({})))
}

fn oracle(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let t1 = triple(rng, t.s1);
    let a = rng.chain(&t.s1, &t.degrees(2), 1);
    let exact = jlo_cochain(&t1, &a)?;
    let seed = rng.below(u32::MAX as usize) as u64;
    let mc = JloEvaluator::new(
        &t1,
        Method::MonteCarlo {
            samples: t.config.mc_samples,
            seed,
        },
    )
    .cochain(&a)?;
    let residual = (mc.value - exact).norm();
    Ok((
        residual,
        ORACLE_SIGMAS * mc.std_error + 1e-14,
        json!({ "samples": t.config.mc_samples, "std_error": mc.std_error }),
    ))
}

fn pairing(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    // small Dirac norm keeps the Chern series within the degree cap
    let t1 = rng.triple(t.s1, 0.1, 1);
    let (re, ro) = (
        rng.range_inclusive(0, t.s1.dim_even),
        rng.range_inclusive(0, t.s1.dim_odd),
    );
    let e = Idempotent::new(rng.even_projection(&t.s1, re, ro), 1)?;
    let report = index_pairing(&t1, &e, 0.01)?;
    let target = report.target_index.unwrap_or(i64::MIN);
    let residual = (report.value - c64(target as f64, 0.0)).norm();
    Ok((
        residual,
        tol(t),
        json!({ "pairing": report.value.re, "fredholm_index": target, "ranks": [re, ro] }),
    ))
}

fn shuffle_volumes(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let (p, q) = (rng.range_inclusive(0, 2), rng.range_inclusive(1, 2));
    let stats = shuffle_partition_volumes(p, q, t.config.mc_samples, rng.below(u32::MAX as usize) as u64);
    let residual = if stats.coverage_failures > 0 {
        f64::INFINITY
    } else {
        stats.max_sigma()
    };
    Ok((
        residual,
        VOLUME_SIGMAS,
        json!({ "p": p, "q": q, "samples": t.config.mc_samples }),
    ))
}

fn cyclic_volumes(rng: &mut Rng, t: &Trial) -> Result<Outcome> {
    let p = [rng.range_inclusive(0, 1), rng.range_inclusive(0, 1)];
    let stats = cyclic_partition_volumes(&p, t.config.mc_samples, rng.below(u32::MAX as usize) as u64)?;
    let residual = if stats.coverage_failures > 0 {
        f64::INFINITY
    } else {
        stats.max_sigma()
    };
    Ok((
        residual,
        VOLUME_SIGMAS,
        json!({ "p": p, "samples": t.config.mc_samples }),
    ))
}

/// Identity name and the routine checking it.
const SUITES: &[(&str, Suite)] = &[
    ("chains.b_squared", b_squared),
    ("chains.B_squared", big_b_squared),
    ("chains.bB_plus_Bb", anticommutator),
    ("chains.B1_equals_B", b_one),
    ("chains.shuffle_associativity", associativity),
    ("chains.b_derivation_of_shuffle", derivation),
    ("spectral.heat_factorization", heat_factorization),
    ("spectral.commutator_product_rule", derivation_product),
    ("spectral.kernel_projection_product", kernel_product),
    ("spectral.index_multiplicativity", index_product),
    ("jlo.shuffle_multiplicativity", shuffle_multiplicativity),
    ("jlo.cyclic_multiplicativity_r2", cyclic_multiplicativity_two),
    ("jlo.cyclic_multiplicativity_r3", cyclic_multiplicativity_three),
    ("jlo.bch_transgression", transgression),
    ("jlo.perturbed_cocycle", cocycle),
    ("jlo.perturbed_forms_agree", perturbed_forms),
    ("jlo.perturbed_multiplicativity", perturbed_multiplicativity),
    ("jlo.scalar_slot_invariance", scalar_slots),
    ("jlo.exact_vs_monte_carlo", oracle),
    ("jlo.index_pairing", pairing),
    ("combinatorics.shuffle_volumes", shuffle_volumes),
    ("combinatorics.cyclic_shuffle_volumes", cyclic_volumes),
];

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs every suite `config.trials` times.
pub fn run(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.trials)
        .flat_map(|trial| (0..SUITES.len()).map(move |k| (trial, k)))
        .collect();
    let checks: Vec<Check> = jobs
        .par_iter()
        .map(|&(trial, k)| {
            let (name, suite) = SUITES[k];
            let dims = &config.dims;
            let (e1, o1) = dims[trial % dims.len()];
            let (e2, o2) = dims[(trial + 1) % dims.len()];
            let ctx = Trial {
                config,
                index: trial,
                s1: GradedSpace::new(e1, o1),
                s2: GradedSpace::new(e2, o2),
            };
            let mut rng = Rng::stream(config.seed, ((k as u64) << 32) | trial as u64);
            let (residual, tolerance, params) = match suite(&mut rng, &ctx) {
                Ok((r, tolerance, extra)) => (r, tolerance, ctx.params(extra)),
                Err(e) => (f64::INFINITY, tol(&ctx), ctx.params(json!({ "error": e.to_string() }))),
            };
            Check {
                identity: name.into(),
                residual,
                tolerance,
                pass: residual <= tolerance,
                seed: config.seed,
                params,
            }
        })
        .collect();
    let passed = checks.iter().filter(|c| c.pass).count();
    Ok(Report {
        schema: REPORT_SCHEMA,
        timestamp: timestamp(),
        config: config.clone(),
        summary: Summary {
            total: checks.len(),
            passed,
            failed: checks.len() - passed,
        },
        checks,
    })
}

/// Names of the identities checked by [`run`], in report order.
pub fn identity_names() -> impl Iterator<Item = &'static str> {
    SUITES.iter().map(|(name, _)| *name)
}
