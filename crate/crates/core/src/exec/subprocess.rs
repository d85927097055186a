//! Objectives evaluated by an external command.
//!
//! Each argument of the command template may contain `{name}` for any
//! parameter, `{resource}` and `{max_resource}`. The process also receives
//! `HT_PARAM_<NAME>` (upper-cased), `HT_RESOURCE`, `HT_MAX_RESOURCE` and
//! `HT_SEED`. The last stdout line of the form `HYPERTUNE_RESULT: <float>`
//! is the result; wall time is the cost.

use std::io::Read;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use log::warn;

use crate::bench::{EvalResult, Objective};
use crate::error::{Error, Result};
use crate::space::{Configuration, ParamKind, ParamValue, SearchSpace};
use crate::tuner::TunerParams;

const RESULT_PREFIX: &str = "HYPERTUNE_RESULT: ";
const POLL: Duration = Duration::from_millis(5);

#[derive(Debug)]
pub struct SubprocessObjective {
    space: SearchSpace,
    tuner: TunerParams,
    command: Vec<String>,
    timeout: Option<Duration>,
    resumable: bool,
    /// Bumped by `shutdown`; evaluations started under an older value are
    /// killed.
    generation: AtomicU64,
}

impl SubprocessObjective {
    pub fn new(space: SearchSpace, tuner: TunerParams, command: Vec<String>) -> Result<Self> {
        if command.is_empty() || command[0].is_empty() {
            return Err(Error::Setup("subprocess command is empty".into()));
        }
        Ok(Self {
            space,
            tuner,
            command,
            timeout: None,
            resumable: false,
            generation: AtomicU64::new(0),
        })
    }

    pub fn timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn resumable(mut self, resumable: bool) -> Self {
        self.resumable = resumable;
        self
    }

    fn render(&self, config: &Configuration) -> Vec<(String, String)> {
        self.space
            .params()
            .iter()
            .zip(config.values())
            .map(|(p, v)| {
                let text = match (p.kind(), v) {
                    (ParamKind::Categorical { choices }, ParamValue::Choice(c)) => {
                        choices[*c].clone()
                    }
                    (_, ParamValue::Real(x)) => format!("{x:?}"),
                    (_, ParamValue::Int(i)) => i.to_string(),
                    (_, ParamValue::Choice(c)) => c.to_string(),
                };
                (p.name().to_string(), text)
            })
            .collect()
    }

    fn run(&self, config: &Configuration, level: usize, seed: u64) -> Result<f64> {
        let values = self.render(config);
        let resource = self.tuner.resource(level).to_string();
        let max_resource = self.tuner.max_resource().to_string();
        let substitute = |arg: &str| {
            let mut out = arg
                .replace("{resource}", &resource)
                .replace("{max_resource}", &max_resource);
            for (name, text) in &values {
                out = out.replace(&format!("{{{name}}}"), text);
            }
            out
        };
        let mut cmd = Command::new(substitute(&self.command[0]));
        cmd.args(self.command[1..].iter().map(|a| substitute(a)))
            .env("HT_RESOURCE", &resource)
            .env("HT_MAX_RESOURCE", &max_resource)
            .env("HT_SEED", seed.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::piped());
        for (name, text) in &values {
            cmd.env(format!("HT_PARAM_{}", name.to_uppercase()), text);
        }

        let generation = self.generation.load(Ordering::SeqCst);
        let started = Instant::now();
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd.spawn()?;
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout.read_to_string(&mut buf);
            buf
        });

        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            let timed_out = self.timeout.is_some_and(|t| started.elapsed() >= t);
            if timed_out || self.generation.load(Ordering::SeqCst) != generation {
                kill_tree(&mut child);
                let _ = reader.join();
                return Err(Error::Evaluation(if timed_out {
                    "timed out".into()
                } else {
                    "cancelled".into()
                }));
            }
            thread::sleep(POLL);
        };
        let output = reader.join().unwrap_or_default();
        if !status.success() {
            return Err(Error::Evaluation(format!("process exited with {status}")));
        }
        parse_result(&output)
            .ok_or_else(|| Error::Evaluation("no HYPERTUNE_RESULT line on stdout".into()))
    }
}

/// Kills the child and, on Unix, everything in its process group, so that
/// grandchildren holding stdout open do not outlive it.
fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: signalling a process group we created; no memory is shared.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

/// Value of the last line that is exactly `HYPERTUNE_RESULT: <float>`.
pub fn parse_result(stdout: &str) -> Option<f64> {
    stdout
        .lines()
        .filter_map(|line| {
            line.strip_suffix('\r')
                .unwrap_or(line)
                .strip_prefix(RESULT_PREFIX)
        })
        .filter_map(|v| v.parse::<f64>().ok().filter(|y| y.is_finite()))
        .next_back()
}

impl Objective for SubprocessObjective {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn levels(&self) -> usize {
        self.tuner.levels()
    }

    fn evaluate(&self, config: &Configuration, level: usize, seed: u64) -> EvalResult {
        let started = Instant::now();
        let outcome = self.run(config, level, seed);
        let cost = started.elapsed().as_secs_f64().max(crate::bench::MIN_COST);
        match outcome {
            Ok(y) => EvalResult::ok(y, cost),
            Err(e) => {
                warn!("evaluation at level {level} failed: {e}");
                EvalResult::failed(cost)
            }
        }
    }

    fn resumable(&self) -> bool {
        self.resumable
    }

    fn shutdown(&self) {
        self.generation.fetch_add(1, Ordering::SeqCst);
    }
}
