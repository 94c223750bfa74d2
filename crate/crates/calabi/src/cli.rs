//! Command-line front end: load a JSON composition spec, print the composed
//! hypersphere's constants, evaluate invariants, or run the verification
//! suites.
//!
//! Exit codes: 0 success, 1 failed checks, 2 unparseable arguments, 3
//! unreadable or invalid spec file. Reports are byte-identical for identical
//! arguments and spec files; human-readable summaries go to stderr.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::composition::{self, CompositionSpec};
use crate::equiaffine;
use crate::report::VerificationReport;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECKS: i32 = 1;
pub const EXIT_BAD_ARGS: i32 = 2;
pub const EXIT_BAD_SPEC: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "calabi",
    about = "Calabi compositions of hyperbolic affine hyperspheres: build, evaluate, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print dimensions and closed-form constants of the composition.
    Compose {
        /// Path to a JSON composition spec.
        #[arg(long)]
        spec: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        /// Comma-separated parameter point; when given, emit the full
        /// closed-form prediction (metric, cubic form, H, pairings) there.
        #[arg(long, value_name = "u1,u2,…")]
        at: Option<String>,
    },
    /// Evaluate engine invariants at sampled parameter points.
    Invariants {
        #[arg(long)]
        spec: PathBuf,
        /// Number of sample points.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run the full invariants-vs-prediction verification suite.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Relative tolerance (the 1e-8 default holds the closed forms to
        /// machine precision).
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Check the commutativity, associativity and equivalence laws.
    Laws {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

/// Parses `argv` and runs the requested command, returning the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return EXIT_BAD_ARGS;
        }
    };
    match cli.command {
        Command::Compose { spec, output, format, at } => with_spec(&spec, |spec| {
            let text = if let Some(at) = &at {
                let point: Vec<f64> = at
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| std::io::Error::other(format!("bad --at point: {e}")))?;
                if point.len() != spec.layout().n {
                    return Err(std::io::Error::other(format!(
                        "--at needs {} coordinates, got {}",
                        spec.layout().n,
                        point.len()
                    )));
                }
                match composition::predict_all(spec, &point) {
                    Ok(pred) => pred.to_json(),
                    Err(e) => return Err(std::io::Error::other(e.to_string())),
                }
            } else {
                match format {
                    Format::Json => compose_json(spec),
                    Format::Csv => compose_csv(spec),
                }
            };
            emit(output.as_deref(), &text)?;
            eprintln!(
                "composed {}: dim {} -> R^{}",
                spec.id(),
                spec.layout().n,
                spec.layout().n + 1
            );
            Ok(EXIT_OK)
        }),
        Command::Invariants { spec, samples, seed, output, format } => with_spec(&spec, |spec| {
            let (text, ok) = invariants_report(spec, samples.max(1), seed, format);
            emit(output.as_deref(), &text)?;
            Ok(if ok { EXIT_OK } else { EXIT_FAILED_CHECKS })
        }),
        Command::Verify { spec, samples, tol, seed, output, format } => with_spec(&spec, |spec| {
            if let (Ok(c), Ok(l1)) =
                (composition::structure_constant(spec), composition::predicted_l1(spec))
            {
                eprintln!("spec {}: C = {c:.15e}, predicted L1 = {l1:.15e}", spec.id());
            }
            let report = verify::verify_spec(spec, samples.max(1), tol, seed);
            finish_report(&report, output.as_deref(), format)
        }),
        Command::Laws { spec, tol, output, format } => with_spec(&spec, |spec| {
            let factors = spec.factors();
            let mut checks = Vec::new();
            let comm = verify::verify_commutativity(&factors[0], &factors[1], tol);
            checks.extend(comm.checks);
            let third = if factors.len() >= 3 { &factors[2] } else { &factors[1] };
            let assoc = verify::verify_associativity(&factors[0], &factors[1], third, tol);
            checks.extend(assoc.checks);
            let equiv = verify::verify_equivalence_triple(spec, tol);
            checks.extend(equiv.checks);
            let report = VerificationReport {
                spec_id: format!("laws[{}]", spec.id()),
                seed: 0,
                samples: 10,
                tolerance: tol,
                checks,
                runtime_seconds: 0.0,
            }
            .finalize();
            finish_report(&report, output.as_deref(), format)
        }),
    }
}

/// Honors the CALABI_THREADS worker cap; first caller wins.
fn init_threads() {
    if let Ok(v) = std::env::var("CALABI_THREADS") {
        if let Ok(k) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build_global();
        }
    }
}

fn with_spec(path: &Path, f: impl FnOnce(&CompositionSpec) -> std::io::Result<i32>) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read spec {}: {e}", path.display());
            return EXIT_BAD_SPEC;
        }
    };
    let spec = match CompositionSpec::from_json(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: invalid spec {}: {e}", path.display());
            return EXIT_BAD_SPEC;
        }
    };
    match f(&spec) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILED_CHECKS
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> std::io::Result<()> {
    match output {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish_report(
    report: &VerificationReport,
    output: Option<&Path>,
    format: Format,
) -> std::io::Result<i32> {
    let text = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    emit(output, &text)?;
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    if report.passed() {
        eprintln!("RESULT: all {} checks passed", report.checks.len());
        Ok(EXIT_OK)
    } else {
        let failed = report.checks.iter().filter(|c| !c.pass).count();
        eprintln!("RESULT: {failed} of {} checks FAILED", report.checks.len());
        Ok(EXIT_FAILED_CHECKS)
    }
}

fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn compose_data(spec: &CompositionSpec) -> Vec<(&'static str, String)> {
    let layout = spec.layout();
    let c = composition::structure_constant(spec);
    let l1 = composition::predicted_l1(spec);
    let (norm_c, norm_cp) = composition::normalization_constants(spec);
    let f_seq: Vec<String> = layout.f.iter().map(|f| f.to_string()).collect();
    vec![
        ("spec_id", format!("\"{}\"", spec.id())),
        ("dim", layout.n.to_string()),
        ("ambient_dim", (layout.n + 1).to_string()),
        ("factors", spec.k().to_string()),
        ("points_r", spec.r().to_string()),
        ("positive_s", spec.s().to_string()),
        ("f_sequence", format!("[{}]", f_seq.join(", "))),
        ("C", c.as_ref().map(|v| fmt17(*v)).unwrap_or_else(|e| format!("\"error: {e}\""))),
        ("L1", l1.as_ref().map(|v| fmt17(*v)).unwrap_or_else(|e| format!("\"error: {e}\""))),
        ("c", fmt17(norm_c)),
        ("c_prime", fmt17(norm_cp)),
    ]
}

fn compose_json(spec: &CompositionSpec) -> String {
    let mut out = String::from("{\n");
    let rows = compose_data(spec);
    for (i, (k, v)) in rows.iter().enumerate() {
        out.push_str(&format!(
            "  \"{k}\": {v}{}\n",
            if i + 1 < rows.len() { "," } else { "" }
        ));
    }
    out.push_str("}\n");
    out
}

fn compose_csv(spec: &CompositionSpec) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in compose_data(spec) {
        let field = if v.contains(',') || v.contains('"') {
            format!("\"{}\"", v.replace('"', "\"\""))
        } else {
            v
        };
        out.push_str(&format!("{k},{field}\n"));
    }
    out
}

fn invariants_report(
    spec: &CompositionSpec,
    samples: usize,
    seed: u64,
    format: Format,
) -> (String, bool) {
    let chart = composition::compose(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            chart
                .domain()
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..hi))
                .collect()
        })
        .collect();
    let mut ok = true;
    let mut rows: Vec<String> = Vec::new();
    let mut csv = String::from("sample,l1,pick,h,apolarity_rel,nabla_a_rel,error\n");
    for (idx, point) in points.iter().enumerate() {
        match equiaffine::invariant_set(&chart, point) {
            Ok(inv) => {
                let (_, apol) = verify::apolarity_residual(&inv);
                let nrel = verify::nabla_a_relative(&inv);
                let pick = inv.pick.map(fmt17).unwrap_or_else(|| "null".into());
                rows.push(format!(
                    "    {{\"sample\": {idx}, \"point\": [{}], \"l1\": {}, \"pick\": {}, \
                     \"h\": {}, \"apolarity_rel\": {}, \"nabla_a_rel\": {}}}",
                    point.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(", "),
                    fmt17(inv.shape.l1),
                    pick,
                    fmt17(inv.frame.big_h),
                    fmt17(apol),
                    fmt17(nrel),
                ));
                csv.push_str(&format!(
                    "{idx},{},{},{},{},{},\n",
                    fmt17(inv.shape.l1),
                    inv.pick.map(fmt17).unwrap_or_default(),
                    fmt17(inv.frame.big_h),
                    fmt17(apol),
                    fmt17(nrel)
                ));
            }
            Err(e) => {
                ok = false;
                rows.push(format!("    {{\"sample\": {idx}, \"error\": \"{e}\"}}"));
                csv.push_str(&format!("{idx},,,,,,\"{e}\"\n"));
            }
        }
    }
    let json = format!(
        "{{\n  \"spec_id\": \"{}\",\n  \"seed\": {seed},\n  \"samples\": {samples},\n  \"points\": [\n{}\n  ]\n}}\n",
        spec.id(),
        rows.join(",\n")
    );
    match format {
        Format::Json => (json, ok),
        Format::Csv => (csv, ok),
    }
}
