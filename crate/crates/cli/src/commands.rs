use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use robustbar::joint_law::{pmf_csv, tails_csv};
use robustbar::numfmt::g12;
use robustbar::{
    band_pmf, calibrate, joint_pmfs, parse_quotes, robust_barrier_bounds, state_vol,
    up_and_out_call, up_and_out_put, validate, ArbitrageCertificate, Calibration,
    CalibrationConfig, Decomposition, Error, MarketQuotes, ObjectiveSpec, Side, ValidationReport,
};
use serde::Serialize;

use crate::args::{Cli, Command, InputArgs, ObjectiveArg, SideArg, SolveArgs};
use crate::output::stable_json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("quotes failed static validation")]
    Invalid,
    #[error("quotes admit arbitrage (gap {gap}); certificate written to {to}")]
    Arbitrage { gap: String, to: String },
    #[error("{0}")]
    Stalled(Error),
    #[error("{0}")]
    Core(Error),
    #[error("{0}")]
    Usage(String),
}

/// Where failure artifacts (reports, certificates) of a verb go.
enum Sink<'a> {
    Stdout,
    File(&'a Path),
    Prefix(&'a Path),
}

impl Sink<'_> {
    fn write(&self, kind: &str, body: &str) -> Result<String, CliError> {
        match self {
            Sink::Stdout => {
                print!("{body}");
                Ok("stdout".into())
            }
            Sink::File(p) => {
                write_file(p, body)?;
                Ok(p.display().to_string())
            }
            Sink::Prefix(p) => {
                let path = with_suffix(p, &format!(".{kind}.json"));
                write_file(&path, body)?;
                Ok(path.display().to_string())
            }
        }
    }
}

fn sink(out: Option<&PathBuf>) -> Sink<'_> {
    out.map_or(Sink::Stdout, |p| Sink::File(p))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Check { input, out } => check(input, out.as_ref()),
        Command::Calibrate { input, solve, out } => {
            let d = model(input, solve, &sink(out.as_ref()))?;
            emit(out.as_ref(), &stable_json(&d))
        }
        Command::Joint { input, solve, out } => {
            let d = model(input, solve, &Sink::Prefix(out))?;
            let pmfs = joint_pmfs(&d).map_err(CliError::Core)?;
            write_file(&with_suffix(out, ".pmf.csv"), &pmf_csv(&pmfs))?;
            write_file(
                &with_suffix(out, ".tails.csv"),
                &tails_csv(&d).map_err(CliError::Core)?,
            )
        }
        Command::Price {
            input,
            solve,
            maturity,
            strike,
            barrier,
            out,
        } => {
            let d = model(input, solve, &sink(out.as_ref()))?;
            let l = maturity_index(*maturity, d.num_maturities())?;
            let j = (1..=d.num_levels() + 1)
                .find(|&j| (d.level(j) - barrier).abs() <= 1e-12)
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "barrier {barrier} is not a level of the model ({:?})",
                        d.levels
                    ))
                })?;
            let put = up_and_out_put(&d, l, j, *strike).map_err(CliError::Core)?;
            let call = up_and_out_call(&d, l, j, *strike).map_err(CliError::Core)?;
            println!("{}", g12(put));
            if let Some(path) = out {
                #[derive(Serialize)]
                struct PriceDoc {
                    maturity: usize,
                    strike: f64,
                    barrier: f64,
                    up_and_out_put: f64,
                    up_and_out_call: f64,
                }
                let doc = PriceDoc {
                    maturity: *maturity,
                    strike: *strike,
                    barrier: *barrier,
                    up_and_out_put: put,
                    up_and_out_call: call,
                };
                write_file(path, &stable_json(&doc))?;
            }
            Ok(())
        }
        Command::Bounds {
            input,
            solve,
            maturity,
            barrier,
            side,
            out,
        } => {
            let q = quotes(input)?;
            let l = maturity_index(*maturity, q.num_maturities())?;
            let side = match side {
                SideArg::Max => Side::Max,
                SideArg::Min => Side::Min,
            };
            let cfg = config(solve)?;
            let sink = sink(out.as_ref());
            let res =
                robust_barrier_bounds(&q, l, *barrier, side, &cfg).map_err(|e| fail(e, &sink))?;
            println!("{}", g12(res.value));
            match out {
                Some(path) => write_file(path, &stable_json(&res)),
                None => Ok(()),
            }
        }
        Command::Vol {
            input,
            solve,
            maturity,
            lambda,
            out,
        } => {
            let d = model(input, solve, &sink(out.as_ref()))?;
            let l = maturity_index(*maturity, d.num_maturities())?;
            let p = band_pmf(&d, l).map_err(CliError::Core)?;
            let vol = state_vol(&p, *lambda).map_err(CliError::Core)?;
            let mut csv = String::from("maturity,x,band_lo,band_hi,sigma2\n");
            for (jm1, band) in vol.iter().enumerate() {
                let (lo, hi) = p.band_edges(jm1 + 1);
                for (i, s) in band.iter().enumerate() {
                    if let Some(s) = s {
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{}",
                            maturity,
                            g12(p.grid.x(i)),
                            g12(lo),
                            g12(hi),
                            g12(*s)
                        );
                    }
                }
            }
            emit(out.as_ref(), &csv)
        }
    }
}

fn check(input: &InputArgs, out: Option<&PathBuf>) -> Result<(), CliError> {
    let q = quotes(input)?;
    let report = validate(&q);
    let body = stable_json(&report);
    if let Some(path) = out {
        write_file(path, &body)?;
    }
    if report.has_fatal() {
        eprint!("{}", report_text(&report));
        return Err(CliError::Invalid);
    }
    if out.is_none() {
        print!("{body}");
    }
    Ok(())
}

fn report_text(report: &ValidationReport) -> String {
    let mut s = String::new();
    for v in &report.violations {
        let _ = write!(s, "{:?} {}", v.severity, v.rule);
        if let Some(l) = v.maturity {
            let _ = write!(s, " maturity {l}");
        }
        if let Some(x) = v.location {
            let _ = write!(s, " at {}", g12(x));
        }
        let _ = writeln!(s, ": {}", v.message);
    }
    s
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&PathBuf>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn quotes(input: &InputArgs) -> Result<MarketQuotes, CliError> {
    let q = parse_quotes(&read(&input.input)?).map_err(CliError::Core)?;
    match input.upper_bound {
        Some(n) => MarketQuotes::new(q.spot, Some(n), q.maturities).map_err(CliError::Core),
        None => Ok(q),
    }
}

fn is_decomposition(doc: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(doc).is_ok_and(|v| v.get("blocks").is_some())
}

fn config(solve: &SolveArgs) -> Result<CalibrationConfig, CliError> {
    let mut cfg = CalibrationConfig {
        refine: solve.refine,
        objective: match solve.objective {
            ObjectiveArg::Feasibility => ObjectiveSpec::Feasibility,
            ObjectiveArg::Regularize => ObjectiveSpec::Regularize,
        },
        ..Default::default()
    };
    if let Some(tol) = solve.tol {
        if !(tol > 0.0 && tol < 1e-2) {
            return Err(CliError::Usage(format!(
                "--tol must lie in (0, 0.01), got {tol}"
            )));
        }
        cfg.tolerances.feas = tol;
    }
    Ok(cfg)
}

/// The model of `input`: read directly from a decomposition file, or
/// calibrated from quotes. Failure artifacts go to `sink`.
fn model(input: &InputArgs, solve: &SolveArgs, sink: &Sink<'_>) -> Result<Decomposition, CliError> {
    let doc = read(&input.input)?;
    if is_decomposition(&doc) {
        return Decomposition::from_json(&doc).map_err(CliError::Core);
    }
    let q = quotes(input)?;
    match calibrate(&q, &config(solve)?).map_err(|e| fail(e, sink))? {
        Calibration::Model(d) => Ok(*d),
        Calibration::Arbitrage(cert) => Err(arbitrage(&cert, sink)),
    }
}

fn arbitrage(cert: &ArbitrageCertificate, sink: &Sink<'_>) -> CliError {
    match sink.write("certificate", &stable_json(cert)) {
        Ok(to) => CliError::Arbitrage {
            gap: g12(cert.gap),
            to,
        },
        Err(e) => e,
    }
}

/// Maps a library error to the exit protocol, writing its artifact.
fn fail(e: Error, sink: &Sink<'_>) -> CliError {
    match e {
        Error::Invalid(report) => {
            eprint!("{}", report_text(&report));
            match sink.write("report", &stable_json(&report)) {
                Ok(_) => CliError::Invalid,
                Err(io) => io,
            }
        }
        Error::Arbitrage(cert) => arbitrage(&cert, sink),
        e @ Error::Stalled(_) => CliError::Stalled(e),
        other => CliError::Core(other),
    }
}

fn maturity_index(maturity: usize, k: usize) -> Result<usize, CliError> {
    if maturity == 0 || maturity > k {
        return Err(CliError::Usage(format!(
            "--maturity must be in 1..={k}, got {maturity}"
        )));
    }
    Ok(maturity - 1)
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use clap::Parser;

    use super::*;

    fn fixture(name: &str) -> String {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/fixtures")
            .join(name)
            .display()
            .to_string()
    }

    fn run_args(args: &[&str]) -> Result<(), CliError> {
        let cli =
            Cli::try_parse_from(std::iter::once("robustbar").chain(args.iter().copied())).unwrap();
        run(&cli)
    }

    #[test]
    fn arbitrage_certificate_goes_to_the_out_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("c.json");
        let err = run_args(&[
            "calibrate",
            "--input",
            &fixture("model_a_arbitrage.json"),
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap_err();
        assert!(matches!(err, CliError::Arbitrage { .. }));
        let cert: ArbitrageCertificate =
            serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        assert!((cert.gap - 0.1).abs() < 1e-9);
    }

    #[test]
    fn joint_failure_artifacts_use_the_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("law");
        let err = run_args(&[
            "joint",
            "--input",
            &fixture("model_a_arbitrage.json"),
            "--out",
            prefix.to_str().unwrap(),
        ])
        .unwrap_err();
        assert!(matches!(err, CliError::Arbitrage { .. }));
        assert!(dir.path().join("law.certificate.json").exists());
        assert!(!dir.path().join("law.pmf.csv").exists());
    }

    #[test]
    fn joint_writes_both_tables() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("law");
        run_args(&[
            "joint",
            "--input",
            &fixture("model_a.json"),
            "--out",
            prefix.to_str().unwrap(),
        ])
        .unwrap();
        let pmf = fs::read_to_string(dir.path().join("law.pmf.csv")).unwrap();
        assert!(pmf.starts_with("maturity,x,band_lo,band_hi,mass\n"));
        assert!(dir.path().join("law.tails.csv").exists());
    }

    #[test]
    fn calibrated_file_round_trips_as_input() {
        let dir = tempfile::tempdir().unwrap();
        let model = dir.path().join("d.json");
        let priced = dir.path().join("p.json");
        run_args(&[
            "calibrate",
            "--input",
            &fixture("model_a.json"),
            "--out",
            model.to_str().unwrap(),
        ])
        .unwrap();
        run_args(&[
            "price",
            "--input",
            model.to_str().unwrap(),
            "--maturity",
            "1",
            "--strike",
            "1",
            "--barrier",
            "1.5",
            "--out",
            priced.to_str().unwrap(),
        ])
        .unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(priced).unwrap()).unwrap();
        assert_eq!(doc["up_and_out_put"].as_f64(), Some(0.25));
    }

    #[test]
    fn usage_errors_are_reported_before_solving() {
        let input = fixture("model_a.json");
        for args in [
            vec![
                "price",
                "--input",
                &input,
                "--maturity",
                "0",
                "--strike",
                "1",
                "--barrier",
                "1.5",
            ],
            vec![
                "price",
                "--input",
                &input,
                "--maturity",
                "1",
                "--strike",
                "1",
                "--barrier",
                "1.4",
            ],
            vec!["calibrate", "--input", &input, "--tol", "0"],
        ] {
            assert!(
                matches!(run_args(&args), Err(CliError::Usage(_))),
                "{args:?}"
            );
        }
        assert!(matches!(
            run_args(&["check", "--input", "/nonexistent.json"]),
            Err(CliError::Io { .. })
        ));
    }
}
