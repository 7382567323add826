use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Parser;

use crate::config::{parse_scenario_with, Format, Kind, Overrides};
use crate::error::{CliError, CliResult};
use crate::export::export;
use crate::record::RunRecord;
use crate::run::run_scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Verb {
    Coop,
    Match,
    Nash,
    Learn,
    Ttscale,
    Stackelberg,
    Wardrop,
    Incentive,
    Resilience,
}

impl Verb {
    pub fn kind(self) -> Kind {
        match self {
            Verb::Coop => Kind::Coop,
            Verb::Match => Kind::Match,
            Verb::Nash => Kind::Nash,
            Verb::Learn => Kind::Learn,
            Verb::Ttscale => Kind::TwoTimescale,
            Verb::Stackelberg => Kind::Stackelberg,
            Verb::Wardrop => Kind::Wardrop,
            Verb::Incentive => Kind::Incentive,
            Verb::Resilience => Kind::Resilience,
        }
    }
}

/// Run game-theoretic scenarios described in TOML files.
#[derive(Debug, Parser)]
#[command(name = "stgames", version)]
pub struct Args {
    /// Scenario kind; must match the `kind` key of every config.
    #[arg(value_enum)]
    pub verb: Verb,
    /// Scenario file; repeat to run several.
    #[arg(long = "config", short = 'c', required = true)]
    pub configs: Vec<PathBuf>,
    /// Overrides the seed in every config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; with several configs each gets a subdirectory named after its file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Number of configs run concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// Reject missing coalition values instead of defaulting them to 0.
    #[arg(long)]
    pub strict: bool,
}

/// Result of one config file.
pub struct Outcome {
    pub path: PathBuf,
    pub result: CliResult<(RunRecord, Option<PathBuf>)>,
}

fn load_and_run(args: &Args, path: &Path, out_dir: Option<PathBuf>) -> CliResult<(RunRecord, Option<PathBuf>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg = parse_scenario_with(&text, Overrides { seed: args.seed, strict: args.strict })?;
    if cfg.kind != args.verb.kind() {
        return Err(CliError::Usage(format!(
            "{} describes a {} scenario; run it with `stgames {}`",
            path.display(),
            cfg.kind.name(),
            cfg.kind.verb()
        )));
    }
    let record = run_scenario(&cfg)?;
    let dir = out_dir.or_else(|| cfg.output.dir.as_ref().map(PathBuf::from));
    if let Some(dir) = &dir {
        let format = args.format.or(cfg.output.format).unwrap_or_default();
        export(&record, dir, format)?;
    }
    Ok((record, dir))
}

/// Output directory per config: `out` itself for one config, `out/<stem>`
/// (suffixed on clashes) for several.
fn out_dirs(args: &Args) -> Vec<Option<PathBuf>> {
    let Some(out) = &args.out else {
        return vec![None; args.configs.len()];
    };
    if args.configs.len() == 1 {
        return vec![Some(out.clone())];
    }
    let mut used = std::collections::HashSet::new();
    args.configs
        .iter()
        .map(|p| {
            let stem = p.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            let mut name = stem.clone();
            let mut k = 1;
            while !used.insert(name.clone()) {
                k += 1;
                name = format!("{stem}-{k}");
            }
            Some(out.join(name))
        })
        .collect()
}

pub fn execute(args: &Args) -> Vec<Outcome> {
    let dirs = out_dirs(args);
    let slots: Vec<Mutex<Option<Outcome>>> = args.configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let k = next.fetch_add(1, Ordering::SeqCst);
        if k >= args.configs.len() {
            break;
        }
        let path = args.configs[k].clone();
        let result = load_and_run(args, &path, dirs[k].clone());
        *slots[k].lock().expect("no poisoned slot") = Some(Outcome { path, result });
    };
    let jobs = usize::from(args.jobs).min(args.configs.len()).max(1);
    if jobs == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs {
                s.spawn(worker);
            }
        });
    }
    slots.into_iter().map(|m| m.into_inner().expect("no poisoned slot").expect("every config ran")).collect()
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut code = 0;
    for o in execute(&args) {
        match o.result {
            Ok((record, dir)) => {
                let _ = writeln!(stdout, "# {}", o.path.display());
                for (k, v) in &record.summary.0 {
                    let _ = writeln!(stdout, "{k} = {v}");
                }
                if let Some(d) = dir {
                    let _ = writeln!(stdout, "written to {}", d.display());
                }
            }
            Err(e) => {
                let _ = writeln!(stderr, "{}: {e}", o.path.display());
                if code == 0 {
                    code = e.exit_code();
                }
            }
        }
    }
    code
}
