use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use driftlab::bounds_cli::{evaluate, parse_params, parse_theorem};
use driftlab::experiments::run_with_threads;
use driftlab::spec::spec_from_spec_or_summary;
use driftlab::DriftlabError;

#[derive(Parser)]
#[command(name = "driftlab", version, about = "Drift analysis experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec (or re-run the spec stored in a summary).
    Run {
        spec: PathBuf,
        /// Worker threads; 0 uses all cores. Output does not depend on it.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a spec and print its canonical form.
    Validate { spec: PathBuf },
    /// Evaluate one drift bound and print the report as JSON.
    Bounds {
        theorem: String,
        /// key=value pairs, comma separated or repeated.
        #[arg(long, num_args = 1.., value_name = "K=V")]
        params: Vec<String>,
    },
}

fn load(path: &PathBuf) -> Result<driftlab::ExperimentSpec, DriftlabError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        DriftlabError::Config(vec![driftlab::FieldError {
            field: path.display().to_string(),
            message: e.to_string(),
        }])
    })?;
    spec_from_spec_or_summary(&text).map_err(DriftlabError::Config)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), DriftlabError> {
    let io = |e: std::io::Error| DriftlabError::Runtime(format!("writing to stdout: {e}"));
    match cli.command {
        Command::Run { spec, threads, out: dir } => {
            let spec = load(&spec)?;
            let report = run_with_threads(&spec, &dir, threads)?;
            log::info!("{} rows, {} failed cells", report.rows, report.failed_cells);
            writeln!(out, "{}", report.csv.display()).map_err(io)?;
            if let Some(trace) = &report.trace {
                writeln!(out, "{}", trace.display()).map_err(io)?;
            }
            writeln!(out, "{}", report.summary.display()).map_err(io)?;
        }
        Command::Validate { spec } => {
            let spec = load(&spec)?;
            writeln!(out, "{}", spec.to_json()).map_err(io)?;
        }
        Command::Bounds { theorem, params } => {
            let theorem = parse_theorem(&theorem)?;
            let report = evaluate(theorem, parse_params(&params)?)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            writeln!(out, "{text}").map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
fn run<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    ExitCode::from(run(std::env::args_os(), &mut std::io::stdout().lock()))
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::Path;

    use super::*;

    fn call(args: &[&str]) -> (u8, String) {
        let mut out = Vec::new();
        let code = run(std::iter::once("driftlab").chain(args.iter().copied()), &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    fn write_spec(dir: &Path, name: &str, text: &str) -> String {
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    }

    const SCAN: &str = r#"{
      "kind": "DECLINE_SCAN", "replications": 100, "master_seed": 7,
      "budget": "1000*ln(n)", "grid": {"n": [1000], "a": [2.0]}
    }"#;

    #[test]
    fn run_is_byte_identical_across_runs_and_threads() {
        let dir = tempfile::tempdir().unwrap();
        let spec = write_spec(dir.path(), "scan.json", SCAN);
        let one = dir.path().join("one");
        let many = dir.path().join("many");
        assert_eq!(call(&["run", &spec, "--threads", "1", "--out", one.to_str().unwrap()]).0, 0);
        assert_eq!(call(&["run", &spec, "--threads", "8", "--out", many.to_str().unwrap()]).0, 0);
        let a = fs::read(one.join("decline_scan.csv")).unwrap();
        assert_eq!(a, fs::read(many.join("decline_scan.csv")).unwrap());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("a,n,replications,mean,std_error,censored,ratio_mean_over_ln_n\r\n"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn rerun_from_summary_reproduces_csv() {
        let dir = tempfile::tempdir().unwrap();
        let spec = write_spec(
            dir.path(),
            "linear.json",
            r#"{"kind": "LINEAR_CONSTANT", "replications": 8, "master_seed": 3,
                "budget": "100*n*ln(n)", "grid": {"n": [64], "c": [1.0], "fitness": ["ONEMAX", "RANDOM_LINEAR"]}}"#,
        );
        let first = dir.path().join("first");
        let second = dir.path().join("second");
        let (code, printed) = call(&["run", &spec, "--out", first.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(printed.lines().count(), 2);
        let summary = first.join("linear_constant.summary.json");
        assert_eq!(call(&["run", summary.to_str().unwrap(), "--out", second.to_str().unwrap()]).0, 0);
        assert_eq!(
            fs::read(first.join("linear_constant.csv")).unwrap(),
            fs::read(second.join("linear_constant.csv")).unwrap()
        );
        let value: serde_json::Value = serde_json::from_slice(&fs::read(&summary).unwrap()).unwrap();
        assert_eq!(value["spec"]["master_seed"], 3);
        assert!(value["tool_version"].is_string());
    }

    #[test]
    fn density_run_writes_a_trace() {
        let dir = tempfile::tempdir().unwrap();
        let spec = write_spec(
            dir.path(),
            "density.json",
            r#"{"kind": "DENSITY_TRACK", "replications": 2, "master_seed": 1, "budget": "20*n",
                "grid": {"n": [40], "c": [1.0], "fitness": ["BINVAL"]},
                "density": {"set_size": 4, "stride": "n", "from": "n", "to": "20*n", "tolerance": 0.05}}"#,
        );
        let (code, printed) = call(&["run", &spec, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(printed.lines().count(), 3);
        let trace = fs::read_to_string(dir.path().join("density_track.trace.csv")).unwrap();
        assert!(trace.starts_with("t,probe_name,value\r\n0,cell0/run0/I,"));
        // 21 probe times, two sets, two runs
        assert_eq!(trace.lines().count(), 1 + 21 * 2 * 2);
    }

    #[test]
    fn invalid_specs_exit_with_one() {
        let dir = tempfile::tempdir().unwrap();
        let bad_a = write_spec(dir.path(), "bad.json", &SCAN.replace("2.0", "-1.0"));
        assert_eq!(call(&["validate", &bad_a]).0, 1);
        let no_seed = write_spec(dir.path(), "noseed.json", &SCAN.replace("\"master_seed\": 7,", ""));
        assert_eq!(call(&["run", &no_seed, "--out", dir.path().to_str().unwrap()]).0, 1);
        let missing = dir.path().join("absent.json");
        assert_eq!(call(&["validate", missing.to_str().unwrap()]).0, 1);
        assert_eq!(call(&["frobnicate"]).0, 1);
        assert_eq!(call(&["run"]).0, 1);
    }

    #[test]
    fn validate_prints_canonical_spec() {
        let dir = tempfile::tempdir().unwrap();
        let spec = write_spec(dir.path(), "scan.json", SCAN);
        let (code, echoed) = call(&["validate", &spec]);
        assert_eq!(code, 0);
        let again = write_spec(dir.path(), "again.json", &echoed);
        assert_eq!(call(&["validate", &again]).1, echoed);
    }

    #[test]
    fn unwritable_output_is_a_runtime_failure() {
        let dir = tempfile::tempdir().unwrap();
        let spec = write_spec(dir.path(), "scan.json", SCAN);
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let out = blocker.join("sub");
        assert_eq!(call(&["run", &spec, "--out", out.to_str().unwrap()]).0, 2);
    }

    #[test]
    fn bounds_prints_report_json() {
        let (code, text) = call(&["bounds", "additive", "--params", "n=50,c=0.5"]);
        assert_eq!(code, 0);
        let report: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(report["theorem_id"], "ADDITIVE");
        assert_eq!(report["bound_value"], 100.0);
        assert_eq!(report["direction"], "UPPER");

        let (_, text) = call(&["bounds", "multiplicative_tail", "--params", "n=1000", "delta=0.5", "k=2"]);
        let report: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(report["bound_value"]["t_threshold"], 13);

        assert_eq!(call(&["bounds", "additive", "--params", "n=50"]).0, 1);
        assert_eq!(call(&["bounds", "bogus", "--params", "n=1"]).0, 1);
    }
}
