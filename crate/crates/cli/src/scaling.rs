//! Query-count sweeps over a schedule of item counts.

use anyhow::{bail, ensure, Context, Result};
use fairdiv_core::generate::Generator;
use fairdiv_core::{run, Algorithm, ComparisonOracle, ExactOracle, FairDivError, TiePolicy};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub schedule: Vec<usize>,
    pub seeds: u64,
    pub tie_policy: TiePolicy,
    pub generator: Generator,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.algorithm.check_arity(self.n)?;
        ensure!(self.seeds >= 1, "at least one seed is required");
        ensure!(!self.schedule.is_empty(), "the m schedule is empty");
        ensure!(
            self.schedule.windows(2).all(|w| w[0] < w[1]),
            "the m schedule must be strictly increasing"
        );
        Ok(())
    }
}

/// Parses `64,128,256`, `2^6,2^8` or `2^6..2^16` (every power of two in
/// between).
pub fn parse_schedule(s: &str) -> Result<Vec<usize>> {
    fn one(t: &str) -> Result<usize> {
        let t = t.trim();
        match t.split_once('^') {
            Some(("2", e)) => {
                let e: u32 = e.parse().with_context(|| format!("bad exponent in `{t}`"))?;
                ensure!(e < usize::BITS, "`{t}` is too large");
                Ok(1 << e)
            }
            Some(_) => bail!("only powers of two may use `^`: `{t}`"),
            None => t.parse().with_context(|| format!("bad item count `{t}`")),
        }
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        match part.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (one(lo)?, one(hi)?);
                ensure!(
                    lo.is_power_of_two() && hi.is_power_of_two() && lo <= hi,
                    "ranges run between powers of two: `{part}`"
                );
                let mut m = lo;
                while m <= hi {
                    out.push(m);
                    m *= 2;
                }
            }
            None => out.push(one(part)?),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub queries: usize,
    pub verified: bool,
}

/// Runs every (m, seed) pair. Guarantees are checked on the generated
/// instance; maximin-share checks over the enumeration budget are skipped.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    cfg.validate()?;
    let jobs: Vec<(usize, u64)> = cfg
        .schedule
        .iter()
        .flat_map(|&m| (0..cfg.seeds).map(move |seed| (m, seed)))
        .collect();
    jobs.par_iter()
        .map(|&(m, seed)| -> Result<Row> {
            let inst = cfg.generator.instance(cfg.n, m, seed);
            let mut o = ExactOracle::new(&inst, cfg.tie_policy)?;
            let out = run(&mut o, cfg.algorithm, cfg.n, m)?;
            let mut verified = true;
            for check in cfg.algorithm.guarantees() {
                match check.check(&inst, &out.allocation) {
                    Ok(pass) => verified &= pass,
                    Err(FairDivError::Infeasible { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(Row {
                algorithm: cfg.algorithm.name().to_string(),
                n: cfg.n,
                m,
                seed,
                queries: o.log().total(),
                verified,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub m: usize,
    pub mean: f64,
    pub max: usize,
    pub max_over_mean: f64,
    /// Growth of the mean per doubling of m since the previous row.
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit {
    /// `mean ≈ a·log₂m + b`.
    pub a: f64,
    pub b: f64,
    pub rms_residual: f64,
}

pub fn summarize(rows: &[Row], schedule: &[usize]) -> Vec<Summary> {
    let mut out: Vec<Summary> = Vec::with_capacity(schedule.len());
    for &m in schedule {
        let counts: Vec<usize> = rows.iter().filter(|r| r.m == m).map(|r| r.queries).collect();
        if counts.is_empty() {
            continue;
        }
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        let max = counts.iter().copied().max().unwrap_or(0);
        let delta = out
            .last()
            .map(|prev| (mean - prev.mean) / (m as f64 / prev.m as f64).log2());
        out.push(Summary {
            m,
            mean,
            max,
            max_over_mean: if mean > 0.0 { max as f64 / mean } else { 1.0 },
            delta,
        });
    }
    out
}

/// Least-squares fit of the mean count against `log₂ m`.
pub fn fit_log(summary: &[Summary]) -> Option<Fit> {
    let pts: Vec<(f64, f64)> = summary.iter().map(|s| ((s.m as f64).log2(), s.mean)).collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let rss: f64 = pts.iter().map(|(x, y)| (y - (a * x + b)).powi(2)).sum();
    Some(Fit {
        a,
        b,
        rms_residual: (rss / k).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(parse_schedule("2^6..2^9").unwrap(), vec![64, 128, 256, 512]);
        assert_eq!(parse_schedule("3, 5,2^4").unwrap(), vec![3, 5, 16]);
        assert!(parse_schedule("3^2").is_err());
        assert!(parse_schedule("12..64").is_err());
        assert!(parse_schedule("x").is_err());
    }

    #[test]
    fn schedule_must_increase() {
        let mut cfg = ExperimentConfig {
            algorithm: Algorithm::Prop1,
            n: 2,
            schedule: vec![8, 8],
            seeds: 1,
            tie_policy: TiePolicy::FirstArgument,
            generator: Generator::Uniform,
        };
        assert!(cfg.validate().is_err());
        cfg.schedule = vec![8, 16];
        cfg.seeds = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exact_log_fit() {
        let rows: Vec<Row> = [(4usize, 10usize), (8, 13), (16, 16), (32, 19)]
            .iter()
            .map(|&(m, q)| Row {
                algorithm: "prop1".into(),
                n: 2,
                m,
                seed: 0,
                queries: q,
                verified: true,
            })
            .collect();
        let s = summarize(&rows, &[4, 8, 16, 32]);
        assert_eq!(s[1].delta, Some(3.0));
        let fit = fit_log(&s).unwrap();
        assert!((fit.a - 3.0).abs() < 1e-9 && (fit.b - 4.0).abs() < 1e-9);
        assert!(fit.rms_residual < 1e-9);
    }
}
