use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qgraph::bounds::{
    self, comb_quadrature, comb_test_function, equality_suite, phase_portrait, reports_to_csv, BoundOptions, HarnessSettings,
    PortraitSettings,
};
use qgraph::exhaustion::{convergence_study, truncation_ladder, BoundaryRule};
use qgraph::graph::build_from_json;
use qgraph::{
    fem_spectrum, geometry_report, hypothesis_check, make_family, secular_eigenvalues, Bound, ConditionAssignment, EndCondition,
    FamilySpec, FemSettings, MetricGraph, QgError, ScanOptions, Spectrum, Verdict,
};

/// Rayleigh-quotient ceiling for the α = 1/2 comb probes.
const COMB_BOUND: f64 = 64.0 / (std::f64::consts::SQRT_2 - 1.0);

#[derive(Debug, Parser)]
#[command(name = "qg", version, about = "Spectra, geometry and eigenvalue bounds for metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// First k eigenvalues of the graph.
    Spectrum,
    /// Total length, diameter, Betti number, inradius and structural flags.
    Geometry,
    /// Evaluate the eigenvalue inequalities.
    Bounds {
        /// Comma-separated bound ids, or `all`.
        #[arg(long, default_value = "all")]
        check: String,
    },
    /// Eigenvalues along a truncation ladder of an infinite family.
    Exhaust {
        #[arg(long, value_delimiter = ',', default_value = "25,50,100,200,400")]
        sizes: Vec<usize>,
    },
    /// Rayleigh quotients of the comb test functions.
    CombProbe {
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1000,10000")]
        n: Vec<usize>,
        /// Also emit tail-indicator and annulus signatures per alpha.
        #[arg(long)]
        portrait: bool,
        /// Teeth in the truncation used by `--portrait`.
        #[arg(long, default_value_t = 400)]
        teeth: usize,
    },
    /// Finite elements against the secular oracle.
    OracleCompare {
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Canonical equality cases and the letter-T strictness example.
    EqualitySuite,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Geometry => "geometry",
            Command::Bounds { .. } => "bounds",
            Command::Exhaust { .. } => "exhaust",
            Command::CombProbe { .. } => "comb-probe",
            Command::OracleCompare { .. } => "oracle-compare",
            Command::EqualitySuite => "equality-suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Fem,
    Secular,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BoundaryArg {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Common {
    /// Graph document (JSON).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Family description as inline JSON.
    #[arg(long, global = true)]
    family: Option<String>,
    #[arg(long, global = true, default_value_t = 5)]
    k: usize,
    #[arg(long = "mesh-h", global = true, default_value_t = 5e-3)]
    mesh_h: f64,
    #[arg(long = "dof-cap", global = true, default_value_t = 200_000)]
    dof_cap: usize,
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Fem)]
    method: MethodArg,
    /// Condition at truncation ends.
    #[arg(long, global = true, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long, global = true, default_value = "qg-out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Diameter resolution.
    #[arg(long, global = true, default_value_t = 1e-3)]
    resolution: f64,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
}

enum Failure {
    Input(String),
    Solver(String),
}

impl From<QgError> for Failure {
    fn from(e: QgError) -> Self {
        match e {
            QgError::NotPositiveDefinite(_)
            | QgError::NoConvergence { .. }
            | QgError::MissedRoot { .. }
            | QgError::Mismatch(_)
            | QgError::Budget(_) => Failure::Solver(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Collects every artifact of a run and writes them in one pass.
struct Outputs {
    dir: PathBuf,
    force: bool,
    format: Format,
    header: Vec<String>,
    config: serde_json::Value,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(cli: &Cli, extra: BTreeMap<&str, String>) -> Self {
        let c = &cli.common;
        let mut header = vec![format!("qg {}", cli.command.name())];
        let mut config = serde_json::to_value(c).expect("config serializes");
        config["command"] = cli.command.name().into();
        if let serde_json::Value::Object(map) = &config {
            for (k, v) in map {
                if k != "command" && !v.is_null() {
                    header.push(format!("{k}={v}"));
                }
            }
        }
        for (k, v) in extra {
            header.push(format!("{k}={v}"));
            config[k] = v.into();
        }
        Self { dir: c.out.clone(), force: c.force, format: c.format, header, config, files: Vec::new() }
    }

    fn csv_text(&self, anchor: &str, body: &str) -> String {
        let mut s = String::new();
        for h in &self.header {
            s.push_str(&format!("# {h}\n"));
        }
        s.push_str(&format!("# anchor: {anchor}\n"));
        s.push_str(body);
        s
    }

    /// Adds a table, as CSV or JSON depending on `--format`.
    fn table<T: Serialize>(&mut self, stem: &str, anchor: &str, rows: &[T]) -> Outcome<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in rows {
                    w.serialize(r)?;
                }
                let body = String::from_utf8(w.into_inner().map_err(|e| Failure::Input(e.to_string()))?).expect("csv is utf-8");
                let text = self.csv_text(anchor, &body);
                self.files.push((format!("{stem}.csv"), text));
            }
            Format::Json => self.json(stem, anchor, rows)?,
        }
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, stem: &str, anchor: &str, data: &T) -> Outcome<()> {
        let doc = serde_json::json!({ "config": self.config, "anchor": anchor, "data": data });
        self.files.push((format!("{stem}.json"), serde_json::to_string_pretty(&doc)? + "\n"));
        Ok(())
    }

    /// Two-column plot data, always CSV.
    fn plot(&mut self, stem: &str, anchor: &str, points: &[(f64, f64)]) {
        let mut body = String::from("x,y\n");
        for (x, y) in points {
            body.push_str(&format!("{x:.15e},{y:.15e}\n"));
        }
        let text = self.csv_text(anchor, &body);
        self.files.push((format!("{stem}.csv"), text));
    }

    fn write(self) -> Outcome<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)?;
        let paths: Vec<PathBuf> = self.files.iter().map(|(n, _)| self.dir.join(n)).collect();
        if !self.force {
            if let Some(p) = paths.iter().find(|p| p.exists()) {
                return Err(Failure::Input(format!("{} already exists (pass --force to overwrite)", p.display())));
            }
        }
        for (p, (_, text)) in paths.iter().zip(&self.files) {
            fs::write(p, text)?;
        }
        Ok(paths)
    }
}

struct Input {
    graph: MetricGraph,
    conditions: ConditionAssignment,
    spec: Option<FamilySpec>,
}

fn end_rule(b: BoundaryArg) -> EndCondition {
    match b {
        BoundaryArg::Dirichlet => EndCondition::Dirichlet,
        BoundaryArg::Neumann => EndCondition::Neumann,
    }
}

fn load_input(c: &Common) -> Outcome<Input> {
    let (graph, mut conditions, spec) = match (&c.graph, &c.family) {
        (Some(_), Some(_)) => return Err(Failure::Input("pass either --graph or --family, not both".into())),
        (None, None) => return Err(Failure::Input("an input is required: --graph PATH or --family JSON".into())),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let (g, cond) = build_from_json(&text)?;
            (g, cond, None)
        }
        (None, Some(json)) => {
            let spec = FamilySpec::from_json(json)?;
            let fam = make_family(&spec)?;
            (fam.graph, fam.conditions, Some(spec))
        }
    };
    if let Some(b) = c.boundary {
        conditions = conditions.with_end_rule(end_rule(b));
    }
    Ok(Input { graph, conditions, spec })
}

fn fem_settings(c: &Common) -> FemSettings {
    FemSettings { h: c.mesh_h, dof_cap: c.dof_cap, ..FemSettings::default() }
}

#[derive(Serialize)]
struct SpectrumRow {
    k: usize,
    method: &'static str,
    eigenvalue: f64,
    residual: f64,
    group: usize,
    mesh_h: Option<f64>,
}

fn spectrum_rows(s: &Spectrum) -> Vec<SpectrumRow> {
    s.eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &ev)| SpectrumRow {
            k: i + 1,
            method: s.method.as_str(),
            eigenvalue: ev,
            residual: s.residuals.get(i).copied().unwrap_or(0.0),
            group: s.groups.get(i).copied().unwrap_or(0),
            mesh_h: s.mesh_h,
        })
        .collect()
}

fn spectra(input: &Input, cond: &ConditionAssignment, c: &Common, count: usize) -> Outcome<Vec<Spectrum>> {
    let mut out = Vec::new();
    if matches!(c.method, MethodArg::Fem | MethodArg::Both) {
        out.push(fem_spectrum(&input.graph, cond, count, &fem_settings(c))?.spectrum);
    }
    if matches!(c.method, MethodArg::Secular | MethodArg::Both) {
        out.push(secular_eigenvalues(&input.graph, cond, count, &ScanOptions::default())?.spectrum);
    }
    Ok(out)
}

#[derive(Serialize)]
struct CompareRow {
    k: usize,
    fem: f64,
    secular: f64,
    relative_difference: f64,
}

fn compare_rows(g: &MetricGraph, fem: &Spectrum, sec: &Spectrum) -> Vec<CompareRow> {
    // zero modes are compared on the scale of the first nonzero interval mode
    let scale = (std::f64::consts::PI / g.total_length()).powi(2);
    fem.eigenvalues
        .iter()
        .zip(&sec.eigenvalues)
        .enumerate()
        .map(|(i, (&a, &b))| CompareRow { k: i + 1, fem: a, secular: b, relative_difference: (a - b).abs() / b.abs().max(scale) })
        .collect()
}

fn cmd_spectrum(cli: &Cli) -> Outcome<i32> {
    let c = &cli.common;
    let input = load_input(c)?;
    let spectra = spectra(&input, &input.conditions, c, c.k)?;
    let mut out = Outputs::new(cli, BTreeMap::new());
    let rows: Vec<SpectrumRow> = spectra.iter().flat_map(spectrum_rows).collect();
    out.table("spectrum", "spectrum", &rows)?;
    for s in &spectra {
        let pts: Vec<(f64, f64)> = s.eigenvalues.iter().enumerate().map(|(i, &e)| ((i + 1) as f64, e)).collect();
        out.plot(&format!("spectrum_plot_{}", s.method.as_str()), "spectrum", &pts);
    }
    if let [fem, sec] = spectra.as_slice() {
        out.table("spectrum_compare", "oracle-equivalence", &compare_rows(&input.graph, fem, sec))?;
    }
    finish(out)?;
    Ok(0)
}

#[derive(Serialize)]
struct QuantityRow {
    quantity: String,
    value: String,
}

fn cmd_geometry(cli: &Cli) -> Outcome<i32> {
    let c = &cli.common;
    let input = load_input(c)?;
    let geo = geometry_report(&input.graph, &input.conditions, c.resolution)?;
    let hyp = hypothesis_check(&input.graph, &input.conditions);
    let mut out = Outputs::new(cli, BTreeMap::new());
    match c.format {
        Format::Json => out.json("geometry", "geometry", &serde_json::json!({ "geometry": geo, "hypotheses": hyp }))?,
        Format::Csv => {
            let mut rows = vec![
                QuantityRow { quantity: "total_length".into(), value: format!("{:.15e}", geo.total_length) },
                QuantityRow { quantity: "diameter".into(), value: format!("{:.15e}", geo.diameter.value) },
                QuantityRow { quantity: "diameter_error".into(), value: format!("{:.3e}", geo.diameter.error) },
                QuantityRow { quantity: "betti".into(), value: geo.betti.to_string() },
                QuantityRow {
                    quantity: "inradius".into(),
                    value: geo.inradius.map(|r| format!("{r:.15e}")).unwrap_or_else(|| "n/a".into()),
                },
            ];
            let flags = serde_json::to_value(&hyp)?;
            if let serde_json::Value::Object(map) = flags {
                for (k, v) in map {
                    let value = match v {
                        serde_json::Value::Null => "n/a".into(),
                        serde_json::Value::Number(n) => input.graph.vertex_label(qgraph::VertexId(n.as_u64().unwrap_or(0) as usize)).to_string(),
                        other => other.to_string(),
                    };
                    rows.push(QuantityRow { quantity: k, value });
                }
            }
            out.table("geometry", "geometry", &rows)?;
        }
    }
    finish(out)?;
    Ok(0)
}

fn parse_checks(check: &str) -> Outcome<Option<Vec<Bound>>> {
    if check == "all" {
        return Ok(None);
    }
    check.split(',').map(|s| s.trim().parse::<Bound>().map_err(Failure::from)).collect::<Outcome<Vec<_>>>().map(Some)
}

fn cmd_bounds(cli: &Cli, check: &str) -> Outcome<i32> {
    let c = &cli.common;
    let wanted = parse_checks(check)?;
    let input = load_input(c)?;
    let settings = HarnessSettings { fem: fem_settings(c), k: c.k, resolution: c.resolution, bounds: BoundOptions::default() };
    let mut reports = match c.method {
        MethodArg::Fem => bounds::evaluate_bounds(&input.graph, &input.conditions, &settings)?,
        MethodArg::Secular => {
            let standard = input.conditions.neumann_version();
            let opts = ScanOptions::default();
            let mu = secular_eigenvalues(&input.graph, &standard, c.k, &opts)?.spectrum;
            let lambda = if input.conditions.has_dirichlet() {
                Some(secular_eigenvalues(&input.graph, &input.conditions, 1, &opts)?.spectrum)
            } else {
                None
            };
            let geo = geometry_report(&input.graph, &input.conditions, c.resolution)?;
            bounds::check_bounds(&input.graph, &input.conditions, Some(&mu), lambda.as_ref(), &geo, &settings.bounds)?
        }
        MethodArg::Both => return Err(Failure::Input("bounds takes --method fem or --method secular".into())),
    };
    if let Some(w) = &wanted {
        reports.retain(|r| w.contains(&r.bound_id));
    }
    let mut extra = BTreeMap::new();
    extra.insert("check", check.to_string());
    let mut out = Outputs::new(cli, extra);
    let anchors: Vec<&str> = {
        let mut a: Vec<&str> = reports.iter().map(|r| r.bound_id.tag()).collect();
        a.dedup();
        a
    };
    let anchor = anchors.join(";");
    match c.format {
        Format::Csv => {
            let text = out.csv_text(&anchor, &reports_to_csv(&reports));
            out.files.push(("bounds.csv".into(), text));
        }
        Format::Json => out.json("bounds", &anchor, &reports)?,
    }
    finish(out)?;
    let violated = reports.iter().any(|r| r.verdict == Verdict::Violated);
    Ok(if violated { 3 } else { 0 })
}

fn cmd_exhaust(cli: &Cli, sizes: &[usize]) -> Outcome<i32> {
    let c = &cli.common;
    let spec = load_input(c)?.spec.ok_or_else(|| Failure::Input("exhaust needs --family".into()))?;
    let rule = match c.boundary.unwrap_or(BoundaryArg::Dirichlet) {
        BoundaryArg::Dirichlet => BoundaryRule::Dirichlet,
        BoundaryArg::Neumann => BoundaryRule::Neumann,
    };
    let steps = truncation_ladder(&spec, sizes, c.resolution)?;
    let table = convergence_study(&steps, rule, c.k, &fem_settings(c));
    let mut extra = BTreeMap::new();
    extra.insert("sizes", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
    let mut out = Outputs::new(cli, extra);
    let anchor = "exhaustion-convergence";
    match c.format {
        Format::Csv => {
            let text = out.csv_text(anchor, &table.to_csv());
            out.files.push(("exhaust.csv".into(), text));
            out.table("exhaust_tails", anchor, &table.tails)?;
            if !table.violations.is_empty() {
                out.table("exhaust_violations", anchor, &table.violations)?;
            }
        }
        Format::Json => out.json("exhaust", anchor, &table)?,
    }
    for k in 1..=c.k {
        let pts: Vec<(f64, f64)> = table.series(k).into_iter().map(|(n, e)| (n as f64, e)).collect();
        out.plot(&format!("exhaust_plot_k{k}"), anchor, &pts);
    }
    finish(out)?;
    if let Some((n, msg)) = table.failures.first() {
        return Err(Failure::Solver(format!("step {n}: {msg}")));
    }
    Ok(0)
}

#[derive(Serialize)]
struct ProbeRow {
    alpha: f64,
    n: usize,
    a: f64,
    peak: f64,
    b: f64,
    shaft_energy: f64,
    shaft_mass: f64,
    teeth_mass: f64,
    rayleigh: f64,
    quadrature_rayleigh: f64,
    relative_difference: f64,
    bound: Option<f64>,
}

#[derive(Serialize)]
struct PortraitCsvRow {
    alpha: f64,
    signature: &'static str,
    x: f64,
    y: String,
}

fn cmd_comb_probe(cli: &Cli, alphas: &[f64], ns: &[usize], portrait: bool, teeth: usize) -> Outcome<i32> {
    let c = &cli.common;
    let mut rows = Vec::new();
    for &alpha in alphas.iter().filter(|&&a| !portrait || (a > 0.0 && a <= 0.5)) {
        for &n in ns {
            let p = comb_test_function(alpha, n)?;
            let (e, m) = comb_quadrature(alpha, n)?;
            let q = e / m;
            rows.push(ProbeRow {
                alpha,
                n,
                a: p.a,
                peak: p.peak,
                b: p.b,
                shaft_energy: p.shaft_energy,
                shaft_mass: p.shaft_mass,
                teeth_mass: p.teeth_mass,
                rayleigh: p.rayleigh,
                quadrature_rayleigh: q,
                relative_difference: (q - p.rayleigh).abs() / p.rayleigh,
                bound: (alpha == 0.5).then_some(COMB_BOUND),
            });
        }
    }
    let mut extra = BTreeMap::new();
    extra.insert("alpha", alphas.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(","));
    extra.insert("n", ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
    let mut out = Outputs::new(cli, extra);
    let anchor = "comb-rayleigh-bound 64/(sqrt(2)-1)";
    out.table("comb_probe", anchor, &rows)?;
    for &alpha in alphas {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.alpha == alpha).map(|r| (r.n as f64, r.rayleigh)).collect();
        if !pts.is_empty() {
            out.plot(&format!("comb_probe_plot_alpha{alpha}"), anchor, &pts);
        }
    }
    if portrait {
        let settings = PortraitSettings { probe_ns: ns.to_vec(), teeth, h: c.mesh_h.max(1e-3), dof_cap: c.dof_cap, ..PortraitSettings::default() };
        let table = phase_portrait(alphas, &settings)?;
        let csv_rows: Vec<PortraitCsvRow> = table
            .iter()
            .map(|r| PortraitCsvRow { alpha: r.alpha, signature: r.signature, x: r.x, y: r.y.map(|y| format!("{y:.15e}")).unwrap_or_else(|| "n/a".into()) })
            .collect();
        out.table("phase_portrait", "comb-phase-transition", &csv_rows)?;
    }
    finish(out)?;
    Ok(0)
}

fn cmd_oracle_compare(cli: &Cli, tolerance: f64) -> Outcome<i32> {
    let c = &cli.common;
    let input = if c.graph.is_some() || c.family.is_some() {
        load_input(c)?
    } else {
        let p = bounds::pool_instance(c.seed)?;
        Input { graph: p.graph, conditions: ConditionAssignment::standard(), spec: Some(p.spec) }
    };
    let fem = fem_spectrum(&input.graph, &input.conditions, c.k, &fem_settings(c))?.spectrum;
    let sec = secular_eigenvalues(&input.graph, &input.conditions, c.k, &ScanOptions::default())?.spectrum;
    let rows = compare_rows(&input.graph, &fem, &sec);
    let mut extra = BTreeMap::new();
    extra.insert("tolerance", tolerance.to_string());
    let mut out = Outputs::new(cli, extra);
    out.table("oracle_compare", "oracle-equivalence", &rows)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.relative_difference)).collect();
    out.plot("oracle_compare_plot", "oracle-equivalence", &pts);
    finish(out)?;
    if let Some(r) = rows.iter().find(|r| r.relative_difference > tolerance) {
        return Err(Failure::Solver(format!("k = {}: fem {} vs secular {} (relative {:e})", r.k, r.fem, r.secular, r.relative_difference)));
    }
    Ok(0)
}

#[derive(Serialize)]
struct SuiteRow {
    instance: String,
    bound_id: &'static str,
    k: usize,
    expected: String,
    verdict: &'static str,
    bound_value: Option<f64>,
    eigenvalue: Option<f64>,
    margin: Option<f64>,
    gap: Option<f64>,
    pass: bool,
}

fn cmd_equality_suite(cli: &Cli) -> Outcome<i32> {
    let c = &cli.common;
    let entries = equality_suite(&fem_settings(c), &BoundOptions::default())?;
    let rows: Vec<SuiteRow> = entries
        .iter()
        .map(|e| SuiteRow {
            instance: e.instance.clone(),
            bound_id: e.report.bound_id.tag(),
            k: e.report.k,
            expected: match e.expected {
                bounds::Expectation::Equality => "equality".into(),
                bounds::Expectation::StrictBy(m) => format!("holds by > {m}"),
                bounds::Expectation::FailsBy(m) => format!("hypotheses fail, gap >= {m}"),
            },
            verdict: e.report.verdict.as_str(),
            bound_value: e.report.bound_value,
            eigenvalue: e.report.eigenvalue,
            margin: e.report.margin,
            gap: e.gap,
            pass: e.pass,
        })
        .collect();
    let mut out = Outputs::new(cli, BTreeMap::new());
    let mut anchors: Vec<&str> = rows.iter().map(|r| r.bound_id).collect();
    anchors.sort();
    anchors.dedup();
    out.table("equality_suite", &anchors.join(";"), &rows)?;
    finish(out)?;
    if entries.iter().any(|e| e.report.verdict == Verdict::Violated) {
        return Ok(3);
    }
    if let Some(e) = entries.iter().find(|e| !e.pass) {
        return Err(Failure::Solver(format!("{}: expected {:?}, got {}", e.instance, e.expected, e.report.verdict.as_str())));
    }
    Ok(0)
}

fn finish(out: Outputs) -> Outcome<()> {
    for p in out.write()? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn configure_threads() -> Outcome<()> {
    if let Ok(v) = std::env::var("QG_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Failure::Input(format!("QG_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(Failure::Input("QG_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Input(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome<i32> {
    configure_threads()?;
    match &cli.command {
        Command::Spectrum => cmd_spectrum(cli),
        Command::Geometry => cmd_geometry(cli),
        Command::Bounds { check } => cmd_bounds(cli, check),
        Command::Exhaust { sizes } => cmd_exhaust(cli, sizes),
        Command::CombProbe { alpha, n, portrait, teeth } => cmd_comb_probe(cli, alpha, n, *portrait, *teeth),
        Command::OracleCompare { tolerance } => cmd_oracle_compare(cli, *tolerance),
        Command::EqualitySuite => cmd_equality_suite(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure::Input(msg)) => {
            eprintln!("qg: input error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("qg: solver failure: {msg}");
            ExitCode::from(2)
        }
    }
}
