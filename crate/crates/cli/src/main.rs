mod elicit;
mod scaling;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fairdiv_core::adversary::{falsify, falsify_strawman, lower_bound, Falsification};
use fairdiv_core::generate::Generator;
use fairdiv_core::report::build_report;
use fairdiv_core::session::SessionConfig;
use fairdiv_core::verify::{fairness_report, Fairness};
use fairdiv_core::{run, Algorithm, Allocation, Bundle, ComparisonOracle, ExactOracle, Instance, TiePolicy};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "fairdiv", version, about = "Fair division of indivisible goods from comparison queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(clap::Args)]
struct Source {
    /// Instance JSON file; overrides the generator flags.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value = "uniform")]
    generator: Generator,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance.
    Generate {
        #[arg(long, default_value = "uniform")]
        generator: Generator,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an algorithm against an instance and report the allocation.
    ///
    /// Exits with 1 if a requested check fails.
    Run {
        #[arg(long)]
        algo: Algorithm,
        #[command(flatten)]
        source: Source,
        /// first, second or adversarial:SEED
        #[arg(long, default_value = "first")]
        tie_policy: TiePolicy,
        /// prop1, ef1, mms (one half) or mms=ALPHA; defaults to the
        /// algorithm's guarantees.
        #[arg(long)]
        verify: Vec<Fairness>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Check an allocation (or a run report) against an instance.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long, default_values = ["prop1", "ef1"])]
        verify: Vec<Fairness>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure query counts over a schedule of item counts.
    Scaling {
        #[arg(long)]
        algo: Algorithm,
        #[arg(long)]
        n: usize,
        /// e.g. 2^6..2^16 or 64,128,256
        #[arg(long, default_value = "2^6..2^16")]
        m: String,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value = "first")]
        tie_policy: TiePolicy,
        #[arg(long, default_value = "uniform")]
        generator: Generator,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run an algorithm against the lower-bound adversary.
    Falsify {
        /// An algorithm name or `strawman`.
        #[arg(long)]
        algo: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Answer an algorithm's queries at the terminal.
    Elicit {
        #[arg(long)]
        algo: Option<Algorithm>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        /// Answers are saved here after each query; rerun with the same
        /// file to resume.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Read answers from this file instead of standard input.
        #[arg(long)]
        answers: Option<PathBuf>,
    },
    /// Serve the session HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value = "sessions")]
        dir: PathBuf,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            Ok(stdout.flush()?)
        }
    }
}

fn json_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn read_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst: Instance = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    inst.validate()?;
    inst.valuations().context("the instance needs valuations to simulate answers")?;
    Ok(inst)
}

fn load_source(s: &Source) -> Result<(Instance, Option<u64>)> {
    if let Some(path) = &s.instance {
        return Ok((read_instance(path)?, None));
    }
    let (Some(n), Some(m)) = (s.n, s.m) else {
        bail!("give either --instance or both --n and --m");
    };
    Ok((s.generator.instance(n, m, s.seed), Some(s.seed)))
}

#[derive(Deserialize)]
struct BundlesOnly {
    bundles: Vec<Bundle>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AllocationFile {
    Report { allocation: BundlesOnly },
    Plain(BundlesOnly),
}

fn read_allocation(path: &Path, m: usize) -> Result<Allocation> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed: AllocationFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let (AllocationFile::Report { allocation } | AllocationFile::Plain(allocation)) = parsed;
    Ok(Allocation::from_bundles(allocation.bundles, m)?)
}

fn csv_bytes(rows: &[scaling::Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

fn cmd_run(
    algo: Algorithm,
    source: &Source,
    tie_policy: TiePolicy,
    verify: Vec<Fairness>,
    out: Option<&Path>,
    format: Format,
) -> Result<bool> {
    let (inst, seed) = load_source(source)?;
    algo.check_arity(inst.n)?;
    let checks = if verify.is_empty() { algo.guarantees() } else { verify };
    let mut oracle = ExactOracle::new(&inst, tie_policy)?;
    let outcome = run(&mut oracle, algo, inst.n, inst.m)?;
    let report = build_report(&inst, tie_policy, outcome, oracle.log(), &checks)?;
    let passed = report.passed();
    let bytes = match format {
        Format::Json => json_line(&report)?,
        Format::Text => {
            let mut text = format!("{algo} on n={}, m={}: {} queries\n", inst.n, inst.m, report.queries);
            for (i, b) in report.allocation.bundles.iter().enumerate() {
                let items: Vec<String> = b.iter().map(|g| g.to_string()).collect();
                text.push_str(&format!("  agent {}: {{{}}}\n", i + 1, items.join(", ")));
            }
            for v in &report.verdicts {
                text.push_str(&format!("{}: {}\n", v.check, if v.passed { "pass" } else { "FAIL" }));
            }
            text.into_bytes()
        }
        Format::Csv => csv_bytes(&[scaling::Row {
            algorithm: algo.name().to_string(),
            n: inst.n,
            m: inst.m,
            seed: seed.unwrap_or(0),
            queries: report.queries,
            verified: passed,
        }])?,
    };
    emit(out, &bytes)?;
    Ok(passed)
}

#[derive(Serialize)]
struct VerifyOutput {
    fairness: fairdiv_core::verify::FairnessReport,
    verdicts: Vec<fairdiv_core::report::Verdict>,
}

fn cmd_verify(instance: &Path, allocation: &Path, checks: Vec<Fairness>, out: Option<&Path>) -> Result<bool> {
    let inst = read_instance(instance)?;
    let alloc = read_allocation(allocation, inst.m)?;
    let with_mms = checks.iter().any(|c| matches!(c, Fairness::AlphaMms(_)));
    let fairness = fairness_report(&inst, &alloc, with_mms)?;
    let mut verdicts = Vec::new();
    for check in checks {
        verdicts.push(fairdiv_core::report::Verdict {
            check,
            passed: check.check(&inst, &alloc)?,
        });
    }
    let passed = verdicts.iter().all(|v| v.passed);
    emit(out, &json_line(&VerifyOutput { fairness, verdicts })?)?;
    Ok(passed)
}

#[derive(Serialize)]
struct ScalingOutput {
    runs: Vec<scaling::Row>,
    summary: Vec<scaling::Summary>,
    fit: Option<scaling::Fit>,
}

fn cmd_scaling(cfg: scaling::ExperimentConfig, out: Option<&Path>, format: Format) -> Result<bool> {
    let rows = scaling::run_experiment(&cfg)?;
    let summary = scaling::summarize(&rows, &cfg.schedule);
    let fit = scaling::fit_log(&summary);
    let passed = rows.iter().all(|r| r.verified);
    let table = || -> String {
        let mut t = format!("{:>8} {:>10} {:>8} {:>9} {:>8}\n", "m", "mean", "max", "max/mean", "delta");
        for s in &summary {
            let delta = s.delta.map_or("-".to_string(), |d| format!("{d:.2}"));
            t.push_str(&format!("{:>8} {:>10.2} {:>8} {:>9.3} {:>8}\n", s.m, s.mean, s.max, s.max_over_mean, delta));
        }
        if let Some(f) = &fit {
            t.push_str(&format!("fit: {:.3}·log2(m) {:+.3}, rms residual {:.3}\n", f.a, f.b, f.rms_residual));
        }
        t
    };
    match format {
        Format::Csv => {
            emit(out, &csv_bytes(&rows)?)?;
            eprint!("{}", table());
        }
        Format::Text => emit(out, table().as_bytes())?,
        Format::Json => emit(out, &json_line(&ScalingOutput { runs: rows, summary, fit })?)?,
    }
    Ok(passed)
}

fn cmd_falsify(algo: &str, n: usize, m: usize, format: Format) -> Result<()> {
    let verdict = if algo == "strawman" {
        falsify_strawman(n, m)?
    } else {
        let algorithm: Algorithm = algo.parse()?;
        falsify(algorithm, n, m)?.1
    };
    if format == Format::Csv {
        bail!("falsify prints text or json");
    }
    if format == Format::Json {
        #[derive(Serialize)]
        struct Out<'a> {
            algorithm: &'a str,
            n: usize,
            m: usize,
            #[serde(flatten)]
            verdict: &'a Falsification,
        }
        return emit(None, &json_line(&Out { algorithm: algo, n, m, verdict: &verdict })?);
    }
    let text = match &verdict {
        Falsification::Survived {
            value_queries,
            candidates,
            ..
        } => format!(
            "survived: {value_queries} value-queries ≥ log₂(m/2n) = {:.2}; {candidates} candidate items left\n",
            lower_bound(n, m)
        ),
        Falsification::Falsified {
            value_queries,
            fairness,
            witness,
            allocation,
            ..
        } => {
            let valued: Bundle = (0..m)
                .map(fairdiv_core::ItemId)
                .filter(|&g| witness.item(g).is_ok_and(|v| v > fairdiv_core::Rational::default()))
                .collect();
            let names: Vec<String> = valued.iter().map(|g| g.to_string()).collect();
            let mut text = format!(
                "falsified after {value_queries} value-queries: {fairness} fails when every agent values exactly {{{}}}\n",
                names.join(", ")
            );
            for (i, b) in allocation.bundles.iter().enumerate() {
                text.push_str(&format!(
                    "  agent {} holds {} items, {} of them valued\n",
                    i + 1,
                    b.len(),
                    b.intersection_len(&valued)
                ));
            }
            text
        }
    };
    emit(None, text.as_bytes())
}

fn cmd_elicit(
    algo: Option<Algorithm>,
    n: Option<usize>,
    m: Option<usize>,
    state: Option<&Path>,
    answers: Option<&Path>,
) -> Result<()> {
    let config = match (algo, n, m) {
        (Some(algorithm), Some(n), Some(m)) => Some(SessionConfig { algorithm, n, m }),
        (None, None, None) => None,
        _ => bail!("give all of --algo, --n and --m, or none to resume from --state"),
    };
    let saved = elicit::resume(config, state)?;
    let stdout = std::io::stdout();
    let end = match answers {
        Some(p) => {
            let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            elicit::elicit(saved, state, std::io::BufReader::new(f), stdout.lock())?
        }
        None => elicit::elicit(saved, state, std::io::stdin().lock(), stdout.lock())?,
    };
    let mut out = stdout.lock();
    match end {
        elicit::End::Finished { outcome, queries } => {
            writeln!(out, "\nfinished after {queries} queries")?;
            for (i, b) in outcome.allocation.bundles.iter().enumerate() {
                let items: Vec<String> = b.iter().map(|g| g.to_string()).collect();
                writeln!(out, "  agent {}: {{{}}}", i + 1, items.join(", "))?;
            }
        }
        elicit::End::Interrupted { answered } => match state {
            Some(p) => writeln!(out, "\nstopped after {answered} answers; resume with --state {}", p.display())?,
            None => writeln!(out, "\nstopped after {answered} answers (no --state file, nothing saved)")?,
        },
    }
    Ok(())
}

fn cmd_serve(addr: &str, dir: PathBuf) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        fairdiv_service::serve(listener, dir).await?;
        Ok(())
    })
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate {
            generator,
            n,
            m,
            seed,
            out,
        } => {
            if n == 0 {
                bail!("n must be at least 1");
            }
            emit(out.as_deref(), &json_line(&generator.instance(n, m, seed))?)?;
            Ok(true)
        }
        Command::Run {
            algo,
            source,
            tie_policy,
            verify,
            out,
            format,
        } => cmd_run(algo, &source, tie_policy, verify, out.as_deref(), format),
        Command::Verify {
            instance,
            allocation,
            verify,
            out,
        } => cmd_verify(&instance, &allocation, verify, out.as_deref()),
        Command::Scaling {
            algo,
            n,
            m,
            seeds,
            tie_policy,
            generator,
            out,
            format,
        } => {
            let cfg = scaling::ExperimentConfig {
                algorithm: algo,
                n,
                schedule: scaling::parse_schedule(&m)?,
                seeds,
                tie_policy,
                generator,
            };
            cmd_scaling(cfg, out.as_deref(), format)
        }
        Command::Falsify { algo, n, m, format } => cmd_falsify(&algo, n, m, format).map(|_| true),
        Command::Elicit {
            algo,
            n,
            m,
            state,
            answers,
        } => cmd_elicit(algo, n, m, state.as_deref(), answers.as_deref()).map(|_| true),
        Command::Serve { addr, dir } => cmd_serve(&addr, dir).map(|_| true),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
