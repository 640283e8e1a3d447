//! `gapdefect` command-line front end.
//!
//! Data goes to standard output or `--output`; diagnostics go to standard
//! error. Exit codes: 0 success, 1 numerical diagnostic failure, 2 usage.

mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gapdefect_core::diophantine::{dirichlet_asymptote, ExceptionalReport, FaElement};
use gapdefect_core::evans::{evans_e_derivative_at_root, evans_scan, DerivativeCheck, DEFAULT_GRID_N, DEFAULT_ROOT_TOL};
use gapdefect_core::floquet::{self, classify, DEFAULT_EDGE_TOL, DEFAULT_SCAN_STEP};
use gapdefect_core::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use output::{num, Table};
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "gapdefect", version, about = "Defect eigenvalues in spectral gaps of periodic Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Floquet discriminant and band/gap classification on an energy grid.
    Bands(BandsArgs),
    /// Gap intervals.
    Gaps(GapsArgs),
    /// Evans function sampled across one gap.
    EvansScan(ScanArgs),
    /// Evans roots in one gap with derivative checks.
    Roots(RootsArgs),
    /// Eigenvalue counts with bounds, per gap.
    Count(CountArgs),
    /// Evans counts against the finite-volume box oracle.
    OracleVerify(OracleVerifyArgs),
    /// Continued fractions, F_a and residual tables.
    Diophantine(DiophantineArgs),
    /// Kronig–Penney golden-mean example.
    ExampleKp(ExampleKpArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct OutArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write data here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ScanParams {
    /// Largest energy step when scanning for band edges.
    #[arg(long, default_value_t = DEFAULT_SCAN_STEP)]
    scan_step: f64,
    /// Band edge tolerance.
    #[arg(long, default_value_t = DEFAULT_EDGE_TOL)]
    edge_tol: f64,
}

#[derive(Args, Debug)]
struct BandsArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    emax: f64,
    /// Defaults to min q − 1.
    #[arg(long)]
    emin: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
#[group(id = "range", required = true, multiple = false, args = ["emax", "jmax"])]
struct GapsArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    emax: Option<f64>,
    #[arg(long)]
    jmax: Option<usize>,
    #[command(flatten)]
    scan: ScanParams,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    gap: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_N)]
    grid_n: usize,
    #[command(flatten)]
    scan: ScanParams,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct RootsArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    gap: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_N)]
    grid_n: usize,
    #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
    root_tol: f64,
    #[command(flatten)]
    scan: ScanParams,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    /// Target phase error of the three-point stencil.
    #[arg(long, default_value_t = 2e-5)]
    phase_tol: f64,
    /// Required decay of gap modes across each half of the box.
    #[arg(long, default_value_t = 0.01)]
    decay: f64,
    #[arg(long, default_value_t = 12)]
    min_periods: usize,
    #[arg(long, default_value_t = 40_000)]
    max_periods: usize,
    /// Counting window shrink relative to 1 + |E|.
    #[arg(long, default_value_t = 1e-10)]
    margin_rel: f64,
}

impl OracleArgs {
    fn params(&self) -> OracleParams {
        OracleParams {
            phase_tol: self.phase_tol,
            decay: self.decay,
            min_periods: self.min_periods,
            max_periods: self.max_periods,
            margin_rel: self.margin_rel,
        }
    }
}

#[derive(Args, Debug)]
struct CountArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    jlo: usize,
    #[arg(long)]
    jhi: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_N)]
    grid_n: usize,
    #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
    root_tol: f64,
    /// Also run the box oracle.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    oracle_params: OracleArgs,
    #[command(flatten)]
    scan: ScanParams,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct OracleVerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    jlo: usize,
    #[arg(long)]
    jhi: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_N)]
    grid_n: usize,
    #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
    root_tol: f64,
    #[command(flatten)]
    oracle_params: OracleArgs,
    #[command(flatten)]
    scan: ScanParams,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
#[group(id = "number", required = true, multiple = false, args = ["quadratic", "real", "rational"])]
struct DiophantineArgs {
    /// Coefficients n1,n2,n3 of n1 x² + n2 x + n3.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    quadratic: Option<Vec<i64>>,
    /// Root selector for --quadratic: +1 takes (−n2 + √d)/(2 n1).
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    root_sign: i8,
    #[arg(long, allow_hyphen_values = true)]
    real: Option<f64>,
    /// p/q
    #[arg(long, allow_hyphen_values = true)]
    rational: Option<String>,
    /// List F_a for 1 ≤ |j| ≤ jmax.
    #[arg(long)]
    jmax: Option<i64>,
    /// Solution orbits of the form equal to j.
    #[arg(long, allow_hyphen_values = true)]
    j: Option<i64>,
    /// Terms per orbit and continued fraction length.
    #[arg(long, default_value_t = 8)]
    kmax: usize,
    /// Membership tolerance for the exceptional analysis.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Unimodular m1,m2,m3,m4 applied to the orbits.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    transform: Option<Vec<i64>>,
    /// Run the exceptional analysis for this potential.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ExampleKpArgs {
    /// Kronig–Penney amplitude.
    #[arg(long = "A")]
    amplitude: f64,
    /// Form value; the defect is chosen so a Δq/(2π²) = j/√5.
    #[arg(long, default_value_t = 11)]
    j: i64,
    /// Gaps to count; defaults to sequence gaps up to --nmax.
    #[arg(long = "nk", value_delimiter = ',')]
    nk: Vec<usize>,
    #[arg(long, default_value_t = 12)]
    nmax: usize,
    /// Control gaps, which must lie outside both sequences.
    #[arg(long, value_delimiter = ',', default_values_t = [7usize, 10])]
    control: Vec<usize>,
    /// Skip the box oracle.
    #[arg(long)]
    no_oracle: bool,
    #[arg(long, default_value_t = DEFAULT_GRID_N)]
    grid_n: usize,
    #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
    root_tol: f64,
    #[command(flatten)]
    oracle_params: OracleArgs,
    #[command(flatten)]
    scan: ScanParams,
    #[command(flatten)]
    out: OutArgs,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Diagnostic(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidPotential(_)
            | Error::OutOfRange { .. }
            | Error::NonPositiveTolerance(_)
            | Error::NotCovering { .. }
            | Error::InvalidQuadratic(_)
            | Error::NotUnimodular(..)
            | Error::Json(_) => Failure::Usage(e.to_string()),
            _ => Failure::Diagnostic(e.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `argv`, runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Diagnostic(m)) => {
            eprintln!("diagnostic failure: {m}");
            EXIT_DIAGNOSTIC
        }
    }
}

fn dispatch(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Bands(a) => bands(a),
        Command::Gaps(a) => gaps_cmd(a),
        Command::EvansScan(a) => evans_scan_cmd(a),
        Command::Roots(a) => roots(a),
        Command::Count(a) => count(a),
        Command::OracleVerify(a) => oracle_verify(a),
        Command::Diophantine(a) => diophantine_cmd(a),
        Command::ExampleKp(a) => example_kp(a),
    }
}

fn load(path: &Path) -> Outcome<PotentialSpec> {
    PotentialSpec::from_json_file(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn positive(name: &str, x: f64) -> Outcome<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {x}")))
    }
}

fn check_scan(s: &ScanParams) -> Outcome<()> {
    positive("scan-step", s.scan_step)?;
    positive("edge-tol", s.edge_tol)
}

fn check_oracle(o: &OracleArgs) -> Outcome<()> {
    positive("phase-tol", o.phase_tol)?;
    positive("margin-rel", o.margin_rel)?;
    if !(o.decay > 0.0 && o.decay < 1.0) {
        return Err(usage(format!("--decay must lie in (0, 1), got {}", o.decay)));
    }
    if o.min_periods == 0 || o.max_periods < o.min_periods {
        return Err(usage("need 1 ≤ --min-periods ≤ --max-periods"));
    }
    Ok(())
}

fn find_gap(spec: &PotentialSpec, j: usize, s: &ScanParams) -> Outcome<GapInterval> {
    floquet::gap(spec, j, s.scan_step, s.edge_tol)?
        .ok_or_else(|| Failure::Diagnostic(format!("gap {j} is closed (a double point)")))
}

fn header(command: &str, params: Value, spec: Option<&PotentialSpec>) -> Value {
    let mut h = json!({ "command": command, "version": env!("CARGO_PKG_VERSION"), "params": params });
    if let Some(s) = spec {
        h["potential"] = serde_json::to_value(s).expect("spec serializes");
    }
    h
}

fn bands(a: BandsArgs) -> Outcome<()> {
    let spec = load(&a.config)?;
    let (q_min, _) = spec.periodic_range();
    let emin = a.emin.unwrap_or(q_min - 1.0);
    if !(a.emax > emin) || a.samples < 2 {
        return Err(usage("need --emax > --emin and --samples ≥ 2"));
    }
    let mut t = Table::new(&["energy", "discriminant", "classification"]);
    for i in 0..a.samples {
        let e = emin + (a.emax - emin) * i as f64 / (a.samples - 1) as f64;
        let k = floquet::discriminant(&spec, e);
        let c = match classify(&spec, e)? {
            SpectralPosition::Band(n) => format!("band{n}"),
            SpectralPosition::Gap(n) => format!("gap{n}"),
        };
        t.row(vec![num(e), num(k), c]);
    }
    let h = header("bands", json!({ "emin": emin, "emax": a.emax, "samples": a.samples }), Some(&spec));
    output::emit(&a.out.output, a.out.format, &h, &t.to_json_records(), Some(&t))
}

fn gaps_cmd(a: GapsArgs) -> Outcome<()> {
    check_scan(&a.scan)?;
    let spec = load(&a.config)?;
    let list = match (a.emax, a.jmax) {
        (Some(e), _) => floquet::gaps(&spec, e, a.scan.scan_step, a.scan.edge_tol)?,
        (_, Some(j)) => floquet::gaps_through(&spec, j, a.scan.scan_step, a.scan.edge_tol)?,
        _ => unreachable!("clap enforces the group"),
    };
    let mut t = Table::new(&["j", "e_lo", "e_hi", "width", "lo_kind", "hi_kind", "omega"]);
    for g in &list {
        t.row(vec![
            g.index.to_string(),
            num(g.e_lo),
            num(g.e_hi),
            num(g.width()),
            g.lo_kind.map(|k| format!("{k:?}").to_lowercase()).unwrap_or_default(),
            format!("{:?}", g.hi_kind).to_lowercase(),
            g.omega.map(num).unwrap_or_default(),
        ]);
    }
    let h = header("gaps", json!({ "emax": a.emax, "jmax": a.jmax, "scan": a.scan }), Some(&spec));
    output::emit(&a.out.output, a.out.format, &h, &serde_json::to_value(&list).unwrap(), Some(&t))
}

fn evans_scan_cmd(a: ScanArgs) -> Outcome<()> {
    check_scan(&a.scan)?;
    let spec = load(&a.config)?;
    let g = find_gap(&spec, a.gap, &a.scan)?;
    let pts = evans_scan(&spec, &g, a.grid_n)?;
    let mut t = Table::new(&["energy", "coordinate", "f"]);
    for p in &pts {
        t.row(vec![num(p.energy), num(p.coordinate), num(p.f)]);
    }
    let h = header("evans-scan", json!({ "gap": g, "grid_n": a.grid_n, "scan": a.scan }), Some(&spec));
    output::emit(&a.out.output, a.out.format, &h, &serde_json::to_value(&pts).unwrap(), Some(&t))
}

#[derive(Serialize)]
struct CheckedRoot {
    root: EvansRoot,
    derivative: DerivativeCheck,
}

fn roots(a: RootsArgs) -> Outcome<()> {
    check_scan(&a.scan)?;
    positive("root-tol", a.root_tol)?;
    let spec = load(&a.config)?;
    let g = find_gap(&spec, a.gap, &a.scan)?;
    let found = evans_roots_in_gap(&spec, &g, a.grid_n, a.root_tol)?;
    let checked = found
        .iter()
        .map(|r| {
            Ok(CheckedRoot {
                root: *r,
                derivative: evans_e_derivative_at_root(&spec, r, &g)?,
            })
        })
        .collect::<Outcome<Vec<_>>>()?;
    let mut t = Table::new(&["energy", "mu", "f_e", "f_e_numeric", "rel"]);
    for c in &checked {
        t.row(vec![num(c.root.energy), num(c.root.mu), num(c.root.f_e), num(c.derivative.numeric), num(c.derivative.rel)]);
    }
    let h = header(
        "roots",
        json!({ "gap": g, "grid_n": a.grid_n, "root_tol": a.root_tol, "scan": a.scan }),
        Some(&spec),
    );
    output::emit(&a.out.output, a.out.format, &h, &serde_json::to_value(&checked).unwrap(), Some(&t))
}

fn count_params(grid_n: usize, root_tol: f64, scan: &ScanParams, oracle: Option<&OracleArgs>) -> Outcome<CountParams> {
    check_scan(scan)?;
    positive("root-tol", root_tol)?;
    if let Some(o) = oracle {
        check_oracle(o)?;
    }
    Ok(CountParams {
        scan_step: scan.scan_step,
        edge_tol: scan.edge_tol,
        grid_n,
        root_tol,
        oracle: oracle.map(OracleArgs::params),
    })
}

fn summary_table(reports: &[CountReport]) -> Table {
    let mut t = Table::new(&["j", "e_lo", "e_hi", "n_g", "n_boundary", "lower", "upper", "evans", "oracle", "certified"]);
    for r in reports {
        t.row(vec![
            r.gap.index.to_string(),
            num(r.gap.e_lo),
            num(r.gap.e_hi),
            r.n_g.to_string(),
            r.n_boundary.to_string(),
            r.lower_bound.to_string(),
            r.upper_bound.to_string(),
            r.evans_count.to_string(),
            r.oracle_count.map(|c| c.to_string()).unwrap_or_default(),
            r.exact_certified.to_string(),
        ]);
    }
    t
}

fn check_range(jlo: usize, jhi: usize) -> Outcome<()> {
    if jlo > jhi {
        return Err(usage("need --jlo ≤ --jhi"));
    }
    Ok(())
}

/// Oracle disagreements, which are diagnostic failures.
fn disagreements(reports: &[CountReport]) -> Vec<String> {
    reports
        .iter()
        .filter_map(|r| match r.oracle_count {
            Some(o) if o != r.evans_count => Some(format!("G{}: evans {} oracle {o}", r.gap.index, r.evans_count)),
            _ => None,
        })
        .collect()
}

fn count(a: CountArgs) -> Outcome<()> {
    check_range(a.jlo, a.jhi)?;
    let params = count_params(a.grid_n, a.root_tol, &a.scan, a.oracle.then_some(&a.oracle_params))?;
    let spec = load(&a.config)?;
    let reports = count_range(&spec, a.jlo, a.jhi, &params)?;
    let h = header("count", json!({ "jlo": a.jlo, "jhi": a.jhi, "count": params }), Some(&spec));
    let t = summary_table(&reports);
    output::emit(&a.out.output, a.out.format, &h, &serde_json::to_value(&reports).unwrap(), Some(&t))?;
    let bad = disagreements(&reports);
    if !bad.is_empty() {
        return Err(Failure::Diagnostic(format!("oracle disagrees: {}", bad.join("; "))));
    }
    Ok(())
}

fn oracle_verify(a: OracleVerifyArgs) -> Outcome<()> {
    check_range(a.jlo, a.jhi)?;
    let params = count_params(a.grid_n, a.root_tol, &a.scan, Some(&a.oracle_params))?;
    let spec = load(&a.config)?;
    let reports = count_range(&spec, a.jlo, a.jhi, &params)?;
    let mut t = Table::new(&["j", "evans", "oracle", "agree", "periods_small", "periods_large", "n_per", "n_def", "raw_small", "raw_large", "surface"]);
    let mut rows = Vec::new();
    for r in &reports {
        let o = r.oracle.as_ref().expect("oracle requested");
        let agree = o.count == r.evans_count;
        t.row(vec![
            r.gap.index.to_string(),
            r.evans_count.to_string(),
            o.count.to_string(),
            agree.to_string(),
            o.boxes[0].periods_left.to_string(),
            o.boxes[1].periods_left.to_string(),
            o.boxes[0].n_per.to_string(),
            o.boxes[0].n_def.to_string(),
            o.raw[0].to_string(),
            o.raw[1].to_string(),
            o.surface.to_string(),
        ]);
        rows.push(json!({ "gap": r.gap, "evans_count": r.evans_count, "oracle": o, "agree": agree }));
    }
    let h = header("oracle-verify", json!({ "jlo": a.jlo, "jhi": a.jhi, "count": params }), Some(&spec));
    output::emit(&a.out.output, a.out.format, &h, &Value::Array(rows), Some(&t))?;
    let bad = disagreements(&reports);
    if !bad.is_empty() {
        return Err(Failure::Diagnostic(format!("oracle disagrees: {}", bad.join("; "))));
    }
    Ok(())
}

fn parse_rational(s: &str) -> Outcome<BigRational> {
    let (p, q) = s.split_once('/').unwrap_or((s, "1"));
    let p: BigInt = p.trim().parse().map_err(|_| usage(format!("bad rational {s}")))?;
    let q: BigInt = q.trim().parse().map_err(|_| usage(format!("bad rational {s}")))?;
    if q == BigInt::from(0) {
        return Err(usage("zero denominator"));
    }
    Ok(BigRational::new(p, q))
}

fn diophantine_cmd(a: DiophantineArgs) -> Outcome<()> {
    positive("delta", a.delta)?;
    if a.kmax == 0 {
        return Err(usage("--kmax must be at least 1"));
    }
    if a.quadratic.as_ref().is_some_and(|c| c.len() != 3) {
        return Err(usage("--quadratic takes three integers n1,n2,n3"));
    }
    if a.transform.as_ref().is_some_and(|m| m.len() != 4) {
        return Err(usage("--transform takes four integers m1,m2,m3,m4"));
    }
    let number = if let Some(c) = &a.quadratic {
        RealNumber::Quadratic(QuadraticIrrational::new(c[0], c[1], c[2], a.root_sign)?)
    } else if let Some(x) = a.real {
        if !x.is_finite() {
            return Err(usage("--real must be finite"));
        }
        RealNumber::Float(x)
    } else {
        RealNumber::Rational(parse_rational(a.rational.as_deref().unwrap())?)
    };
    let quad = match &number {
        RealNumber::Quadratic(q) => Some(*q),
        _ => None,
    };
    if quad.is_none() && (a.j.is_some() || a.jmax.is_some() || a.transform.is_some()) {
        return Err(usage("--j, --jmax and --transform need --quadratic"));
    }

    let mut data = serde_json::Map::new();
    data.insert("value".into(), json!(number.value()));
    let cf = match continued_fraction(&number, a.kmax) {
        Ok(cf) => cf,
        Err(Error::PrecisionExhausted { available }) => {
            eprintln!("note: only {available} continued fraction terms are reliable for this float");
            continued_fraction(&number, available.max(1))?
        }
        Err(e) => return Err(e.into()),
    };
    let conv = convergents(&cf.terms);
    let conv_hits = residuals(&number, &conv)?;
    data.insert("continued_fraction".into(), serde_json::to_value(&cf).unwrap());
    data.insert("convergents".into(), serde_json::to_value(&conv_hits).unwrap());
    let mut table = Table::new(&["orbit", "k", "n", "m", "form_value", "residual"]);
    for (k, h) in conv_hits.iter().enumerate() {
        table.row(hit_row("convergent", k, h));
    }

    if let Some(q) = quad {
        if let Some(jmax) = a.jmax {
            if jmax < 1 {
                return Err(usage("--jmax must be at least 1"));
            }
            let fa: Vec<FaElement> = fa_quadratic(&q, jmax);
            data.insert("f_a".into(), serde_json::to_value(&fa).unwrap());
        }
        if let Some(j) = a.j {
            let orbits = form_solutions(&q, j, a.kmax)?;
            for (i, o) in orbits.iter().enumerate() {
                for (k, h) in o.iter().enumerate() {
                    table.row(hit_row(&format!("orbit{}", i + 1), k, h));
                }
            }
            data.insert("orbits".into(), serde_json::to_value(&orbits).unwrap());
            if let Some(m) = &a.transform {
                let g = Unimodular(m[0], m[1], m[2], m[3]);
                let mut moved = Vec::new();
                let mut image = None;
                for (i, o) in orbits.iter().enumerate() {
                    let (b, hits) = modular_transform(&q, o, g)?;
                    for (k, h) in hits.iter().enumerate() {
                        table.row(hit_row(&format!("transformed{}", i + 1), k, h));
                    }
                    image = Some(b);
                    moved.push(hits);
                }
                data.insert("transformed".into(), json!({ "b": image, "b_value": image.map(|b| b.value()), "orbits": moved }));
            }
        }
    }
    if let Some(path) = &a.config {
        let spec = load(path)?;
        let exact = match &number {
            RealNumber::Float(_) => None,
            other => Some(other.clone()),
        };
        let rep: ExceptionalReport = exceptional_analysis(&spec, exact.as_ref(), a.delta, a.kmax)?;
        data.insert("exceptional".into(), serde_json::to_value(&rep).unwrap());
    }
    let h = header(
        "diophantine",
        json!({
            "quadratic": a.quadratic, "root_sign": a.root_sign, "real": a.real, "rational": a.rational,
            "jmax": a.jmax, "j": a.j, "kmax": a.kmax, "delta": a.delta, "transform": a.transform,
        }),
        None,
    );
    output::emit(&a.out.output, a.out.format, &h, &Value::Object(data), Some(&table))
}

fn hit_row(orbit: &str, k: usize, h: &ApproxHit) -> Vec<String> {
    vec![
        orbit.to_string(),
        k.to_string(),
        h.n.to_string(),
        h.m.to_string(),
        h.form_value.as_ref().map(|v| v.to_string()).unwrap_or_default(),
        h.residual_decimal.clone(),
    ]
}

#[derive(Serialize)]
struct KpGap {
    n: usize,
    role: String,
    /// Asymptotic prediction; small gaps may differ.
    predicted: usize,
    report: CountReport,
}

fn example_kp(a: ExampleKpArgs) -> Outcome<()> {
    positive("A", a.amplitude)?;
    let params = count_params(a.grid_n, a.root_tol, &a.scan, (!a.no_oracle).then_some(&a.oracle_params))?;
    let q = QuadraticIrrational::golden();
    let phi = q.value();
    let sqrt5 = 5f64.sqrt();
    let j = a.j;
    if j == 0 {
        return Err(usage("--j must be non-zero"));
    }
    // a Δq / (2π²) = j/√5 with mean(q_per) = 0
    let q_def = 2.0 * j as f64 * PI * PI / (sqrt5 * phi);
    let threshold = 2.0 * (j as f64).abs() * PI * PI / (15f64.sqrt() * phi);
    let spec = PotentialSpec::kronig_penney(a.amplitude, phi, q_def)?;
    let exceptional = exceptional_analysis(&spec, Some(&RealNumber::Quadratic(q)), 1e-6, 8)?;
    let mut seq: Vec<(usize, String)> = Vec::new();
    for (i, orbit) in form_solutions(&q, j, 12)?.iter().enumerate() {
        for h in orbit {
            if let Some(n) = num_traits::ToPrimitive::to_usize(&h.n) {
                if n >= 1 && n <= a.nmax.max(a.nk.iter().copied().max().unwrap_or(0)) {
                    seq.push((n, format!("sequence {} (N, M) = ({}, {})", i + 1, h.n, h.m)));
                }
            }
        }
    }
    seq.sort();
    seq.dedup_by_key(|s| s.0);
    let mut targets: Vec<(usize, String, usize)> = if a.nk.is_empty() {
        seq.iter().filter(|s| s.0 <= a.nmax).map(|s| (s.0, s.1.clone(), 2)).collect()
    } else {
        let mut v = Vec::new();
        for &n in &a.nk {
            let role = seq.iter().find(|s| s.0 == n).map(|s| s.1.clone()).ok_or_else(|| usage(format!("gap {n} is not in either sequence")))?;
            v.push((n, role, 2));
        }
        v
    };
    for &c in &a.control {
        if seq.iter().any(|s| s.0 == c) {
            return Err(usage(format!("control gap {c} lies in a sequence")));
        }
        targets.push((c, "control".into(), 1));
    }
    let mut gaps_out = Vec::new();
    for (n, role, predicted) in targets {
        let g = find_gap(&spec, n, &a.scan)?;
        let report = count_gap(&spec, &g, &params)?;
        gaps_out.push(KpGap { n, role, predicted, report });
    }
    let reports: Vec<CountReport> = gaps_out.iter().map(|g| g.report.clone()).collect();
    let data = json!({
        "amplitude": a.amplitude,
        "period": phi,
        "j": j,
        "q_def": q_def,
        "threshold": threshold,
        "amplitude_exceeds_threshold": a.amplitude > threshold,
        "defect_dirichlet_asymptote_m1": dirichlet_asymptote(1.0, q_def, 1),
        "exceptional": exceptional,
        "gaps": gaps_out,
    });
    let h = header(
        "example-kp",
        json!({ "A": a.amplitude, "j": j, "nk": a.nk, "nmax": a.nmax, "control": a.control, "count": params }),
        Some(&spec),
    );
    output::emit(&a.out.output, a.out.format, &h, &data, Some(&summary_table(&reports)))?;
    let bad = disagreements(&reports);
    if !bad.is_empty() {
        return Err(Failure::Diagnostic(format!("oracle disagrees: {}", bad.join("; "))));
    }
    Ok(())
}

