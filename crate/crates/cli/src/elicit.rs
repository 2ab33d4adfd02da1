//! Answering queries at the terminal.

use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use fairdiv_core::session::{step, SessionConfig, Step};
use fairdiv_core::{Bundle, Preferred, RunOutcome};
use serde::{Deserialize, Serialize};

/// Everything needed to resume: the configuration and the answers so far.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Saved {
    pub config: SessionConfig,
    pub answers: Vec<Preferred>,
}

pub enum End {
    Finished { outcome: RunOutcome, queries: usize },
    Interrupted { answered: usize },
}

fn save(path: Option<&Path>, saved: &Saved) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(saved)?)?;
    std::fs::rename(&tmp, path).with_context(|| format!("saving {}", path.display()))
}

/// Loads the state file if there is one, checking it against `config`.
pub fn resume(config: Option<SessionConfig>, state: Option<&Path>) -> Result<Saved> {
    let existing = match state {
        Some(p) if p.exists() => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str::<Saved>(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        _ => None,
    };
    match (existing, config) {
        (Some(saved), Some(config)) if saved.config != config => bail!(
            "the state file belongs to {} with n={}, m={}",
            saved.config.algorithm,
            saved.config.n,
            saved.config.m
        ),
        (Some(saved), _) => Ok(saved),
        (None, Some(config)) => Ok(Saved {
            config,
            answers: Vec::new(),
        }),
        (None, None) => bail!("--algo, --n and --m are required for a new session"),
    }
}

fn show(b: &Bundle) -> String {
    if b.is_empty() {
        return "{}".into();
    }
    let items: Vec<String> = b.iter().map(|g| g.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

/// Asks each pending query on `out` and reads `x`, `y` or `q` from `input`.
/// Every answer is saved to `state` before the next query is asked.
pub fn elicit(mut saved: Saved, state: Option<&Path>, input: impl BufRead, mut out: impl Write) -> Result<End> {
    saved.config.validate()?;
    let mut lines = input.lines();
    loop {
        let (now, log) = step(&saved.config, &saved.answers)?;
        let query = match now {
            Step::Finished { outcome } => {
                save(state, &saved)?;
                return Ok(End::Finished {
                    outcome,
                    queries: log.total(),
                });
            }
            Step::Pending { query } => query,
        };
        let answer = loop {
            write!(
                out,
                "query {}: agent {}, which is better?\n  x = {}\n  y = {}\n[x/y/q] ",
                query.index + 1,
                query.agent.0 + 1,
                show(&query.x),
                show(&query.y)
            )?;
            out.flush()?;
            let Some(line) = lines.next() else {
                break None;
            };
            match line?.trim() {
                "x" | "X" => break Some(Preferred::X),
                "y" | "Y" => break Some(Preferred::Y),
                "q" | "quit" => break None,
                other => writeln!(out, "answer x or y (q to stop), not {other:?}")?,
            }
        };
        match answer {
            Some(a) => {
                saved.answers.push(a);
                save(state, &saved)?;
            }
            None => {
                save(state, &saved)?;
                return Ok(End::Interrupted {
                    answered: saved.answers.len(),
                });
            }
        }
    }
}
