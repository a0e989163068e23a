//! Named, reproducible experiments driven by a flat `key = value` config.
//!
//! Each run returns a [`RunOutput`]: a [`RunRecord`] (config echo, resolved
//! parameters, version, timestamps, payload) and the CSV tables of the run.
//! Nothing here touches the filesystem; the CLI writes the files.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bergman::{gram, orthonormalize, BasisSummary, DegreeCap, MonomialBasis, Projector};
use crate::dbar::{
    hormander_solve, shell_weight, CauchyOperator, DbarStencil, ExtensionOperator, ExtensionOptions,
    HormanderOptions, WeightedDbarProblem,
};
use crate::diagnostics::{certificate, essential_norm_proxy, trend_csv, verdict, CompactnessVerdict, Thresholds, TruncationFamily};
use crate::domain::{Domain, Point};
use crate::error::{Error, Result};
use crate::hankel::{diagonal, HankelAssembler, HankelSpectrum};
use crate::linalg::{Arnoldi, CMatrix};
use crate::quadrature::{build_lattice_quadrature, build_quadrature, QuadratureRule};
use crate::symbol::{restrict_symbol, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Localize,
    Prop1,
    AnalyticDisc,
    Extend,
    Hormander,
    Certify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Localize,
        ExperimentKind::Prop1,
        ExperimentKind::AnalyticDisc,
        ExperimentKind::Extend,
        ExperimentKind::Hormander,
        ExperimentKind::Certify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Localize => "localize",
            ExperimentKind::Prop1 => "prop1",
            ExperimentKind::AnalyticDisc => "analytic_disc",
            ExperimentKind::Extend => "extend",
            ExperimentKind::Hormander => "hormander",
            ExperimentKind::Certify => "certify",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            Error::InvalidInput(format!("unknown experiment `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Experiment,
    Choice(&'static [&'static str]),
    /// Real in `[min, max]`, open at `min` when the flag is set.
    Real { min: f64, max: f64, open_min: bool },
    Int { min: u64, max: u64 },
    Complex,
    Expr,
    Caps,
    /// Comma-separated reals, each `>= 0`.
    Reals,
}

const POSITIVE: Kind = Kind::Real { min: 0.0, max: f64::INFINITY, open_min: true };
const NON_NEGATIVE: Kind = Kind::Real { min: 0.0, max: f64::INFINITY, open_min: false };

const KEYS: &[(&str, Kind)] = &[
    ("experiment", Kind::Experiment),
    ("domain", Kind::Choice(&["disc", "annulus", "bidisc"])),
    ("radius", POSITIVE),
    ("inner_radius", POSITIVE),
    ("outer_radius", POSITIVE),
    ("radius1", POSITIVE),
    ("radius2", POSITIVE),
    ("lens_center", Kind::Complex),
    ("lens_radius", POSITIVE),
    ("symbol", Kind::Expr),
    ("degree_caps", Kind::Caps),
    ("resolution", Kind::Int { min: 8, max: 4096 }),
    ("threshold", Kind::Real { min: 1e-14, max: 1e-4, open_min: false }),
    ("projection_margin", Kind::Int { min: 0, max: 32 }),
    ("plateau_floor", POSITIVE),
    ("slope_ceiling", Kind::Real { min: f64::NEG_INFINITY, max: -f64::MIN_POSITIVE, open_min: false }),
    ("growth_tolerance", NON_NEGATIVE),
    ("zero_floor", NON_NEGATIVE),
    ("cross_check_terms", Kind::Int { min: 0, max: 64 }),
    ("function", Kind::Expr),
    ("epsilon", POSITIVE),
    ("delta", POSITIVE),
    ("k_max", Kind::Real { min: 1.0, max: 1e6, open_min: false }),
    ("k_sweep", Kind::Reals),
    ("weight", Kind::Choice(&["none", "quadratic", "shell"])),
    ("weight_scales", Kind::Reals),
    ("shell_epsilon", POSITIVE),
    ("shell_center", Kind::Complex),
    ("shell_radius", POSITIVE),
    ("rhs", Kind::Expr),
    ("residual_tolerance", POSITIVE),
    ("gram_diagonal", Kind::Reals),
    ("samples", Kind::Int { min: 1, max: 100_000 }),
    ("seed", Kind::Int { min: 0, max: u64::MAX }),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, kind)| *kind)
}

fn bad(key: &str, msg: impl fmt::Display) -> Error {
    Error::InvalidInput(format!("config key `{key}`: {msg}"))
}

fn parse_real(key: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| bad(key, format!("`{raw}` is not a number")))
}

fn parse_complex(key: &str, raw: &str) -> Result<Complex64> {
    let s = Symbol::parse(raw).map_err(|e| bad(key, e))?;
    let probes = [Complex64::new(0.0, 0.0), Complex64::new(0.3, -0.2)];
    let v = s.eval(&Point::C1(probes[0]));
    if s.eval(&Point::C1(probes[1])) != v || !v.re.is_finite() || !v.im.is_finite() {
        return Err(bad(key, format!("`{raw}` is not a complex constant")));
    }
    Ok(v)
}

fn parse_caps(key: &str, raw: &str) -> Result<Vec<DegreeCap>> {
    let caps = raw
        .split(',')
        .map(|c| c.trim().parse::<DegreeCap>().map_err(|e| bad(key, e)))
        .collect::<Result<Vec<_>>>()?;
    for pair in caps.windows(2) {
        if !pair[0].precedes(&pair[1]) {
            return Err(bad(key, format!("caps must be strictly increasing, got {} then {}", pair[0], pair[1])));
        }
    }
    Ok(caps)
}

fn parse_reals(key: &str, raw: &str) -> Result<Vec<f64>> {
    let values = raw.split(',').map(|v| parse_real(key, v)).collect::<Result<Vec<_>>>()?;
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(bad(key, "values must be finite and >= 0"));
    }
    Ok(values)
}

fn check(key: &str, kind: Kind, raw: &str) -> Result<()> {
    match kind {
        Kind::Experiment => raw.parse::<ExperimentKind>().map(|_| ()).map_err(|e| bad(key, e)),
        Kind::Choice(options) => {
            if options.contains(&raw) {
                Ok(())
            } else {
                Err(bad(key, format!("`{raw}` is not one of {}", options.join(", "))))
            }
        }
        Kind::Real { min, max, open_min } => {
            let v = parse_real(key, raw)?;
            let low_ok = if open_min { v > min } else { v >= min };
            if low_ok && v <= max && v.is_finite() {
                Ok(())
            } else {
                let lo = if open_min { "(" } else { "[" };
                Err(bad(key, format!("{v} is outside {lo}{min:e}, {max:e}]")))
            }
        }
        Kind::Int { min, max } => {
            let v = raw.parse::<u64>().map_err(|_| bad(key, format!("`{raw}` is not a non-negative integer")))?;
            if (min..=max).contains(&v) {
                Ok(())
            } else {
                Err(bad(key, format!("{v} is outside [{min}, {max}]")))
            }
        }
        Kind::Complex => parse_complex(key, raw).map(|_| ()),
        Kind::Expr => Symbol::parse(raw).map(|_| ()).map_err(|e| bad(key, e)),
        Kind::Caps => parse_caps(key, raw).map(|_| ()),
        Kind::Reals => parse_reals(key, raw).map(|_| ()),
    }
}

/// Validated flat configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys,
    /// duplicates and out-of-range values are rejected with a message
    /// naming the key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("line {}: expected `key = value`, got `{line}`", no + 1)))?;
            let key = key.trim();
            if cfg.entries.contains_key(key) {
                return Err(bad(key, format!("duplicate entry on line {}", no + 1)));
            }
            cfg.set(key, value.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one entry after validating it.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let kind = kind_of(key).ok_or_else(|| Error::InvalidInput(format!("unknown config key `{key}`")))?;
        check(key, kind, value)?;
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// The experiment named in the file, if any.
    pub fn experiment(&self) -> Option<ExperimentKind> {
        self.get("experiment").and_then(|s| s.parse().ok())
    }
}

/// Typed access to a config that records every value used, defaults
/// included.
struct Params<'a> {
    cfg: &'a ExperimentConfig,
    used: RefCell<BTreeMap<String, String>>,
}

impl<'a> Params<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Params { cfg, used: RefCell::new(BTreeMap::new()) }
    }

    fn raw(&self, key: &str, default: &str) -> String {
        debug_assert!(kind_of(key).is_some(), "{key}");
        let v = self.cfg.get(key).unwrap_or(default).to_string();
        self.used.borrow_mut().insert(key.to_string(), v.clone());
        v
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        let raw = self.raw(key, &format!("{default}"));
        parse_real(key, &raw)
    }

    fn int(&self, key: &str, default: u64) -> Result<u64> {
        let raw = self.raw(key, &default.to_string());
        raw.parse().map_err(|_| bad(key, "not an integer"))
    }

    fn complex(&self, key: &str, default: &str) -> Result<Complex64> {
        parse_complex(key, &self.raw(key, default))
    }

    fn symbol(&self, key: &str, default: &str) -> Result<Symbol> {
        Symbol::parse(&self.raw(key, default)).map_err(|e| bad(key, e))
    }

    fn caps(&self, default: &str) -> Result<Vec<DegreeCap>> {
        parse_caps("degree_caps", &self.raw("degree_caps", default))
    }

    fn reals(&self, key: &str, default: &str) -> Result<Vec<f64>> {
        parse_reals(key, &self.raw(key, default))
    }

    fn choice(&self, key: &str, default: &str) -> String {
        self.raw(key, default)
    }

    fn resolved(self) -> BTreeMap<String, String> {
        self.used.into_inner()
    }
}

/// Everything a run reports, serialized to `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub experiment: ExperimentKind,
    pub version: String,
    /// Entries exactly as given.
    pub config: BTreeMap<String, String>,
    /// Every parameter the run read, defaults included.
    pub parameters: BTreeMap<String, String>,
    pub started_unix_seconds: f64,
    pub finished_unix_seconds: f64,
    pub wall_clock_seconds: f64,
    pub payload: Value,
}

/// One CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub file_name: String,
    pub content: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub tables: Vec<CsvTable>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

fn csv_table(file_name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<CsvTable> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Numerical(format!("writing {file_name}: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("writing {file_name}: {e}")))?;
    Ok(CsvTable { file_name: file_name.to_string(), content: String::from_utf8(bytes).expect("csv output is utf-8") })
}

/// Runs `kind` with `config`. A config naming a different experiment is
/// rejected.
pub fn run(kind: ExperimentKind, config: &ExperimentConfig) -> Result<RunOutput> {
    if let Some(named) = config.experiment() {
        if named != kind {
            return Err(bad("experiment", format!("config is for `{named}` but `{kind}` was requested")));
        }
    }
    let started = unix_now();
    let clock = Instant::now();
    let params = Params::new(config);
    let (payload, tables) = match kind {
        ExperimentKind::Localize => localize(&params)?,
        ExperimentKind::Prop1 => prop1(&params)?,
        ExperimentKind::AnalyticDisc => analytic_disc(&params)?,
        ExperimentKind::Extend => extend(&params)?,
        ExperimentKind::Hormander => hormander(&params)?,
        ExperimentKind::Certify => certify(&params)?,
    };
    let record = RunRecord {
        experiment: kind,
        version: crate::VERSION.to_string(),
        config: config.entries().clone(),
        parameters: params.resolved(),
        started_unix_seconds: started,
        finished_unix_seconds: unix_now(),
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        payload,
    };
    Ok(RunOutput { record, tables })
}

pub fn run_localize(config: &ExperimentConfig) -> Result<RunOutput> {
    run(ExperimentKind::Localize, config)
}

pub fn run_prop1(config: &ExperimentConfig) -> Result<RunOutput> {
    run(ExperimentKind::Prop1, config)
}

pub fn run_analytic_disc(config: &ExperimentConfig) -> Result<RunOutput> {
    run(ExperimentKind::AnalyticDisc, config)
}

pub fn run_extend(config: &ExperimentConfig) -> Result<RunOutput> {
    run(ExperimentKind::Extend, config)
}

pub fn run_hormander(config: &ExperimentConfig) -> Result<RunOutput> {
    run(ExperimentKind::Hormander, config)
}

pub fn run_certify(config: &ExperimentConfig) -> Result<RunOutput> {
    run(ExperimentKind::Certify, config)
}

type Outcome = Result<(Value, Vec<CsvTable>)>;

fn base_domain(p: &Params, default: &str) -> Result<Domain> {
    match p.choice("domain", default).as_str() {
        "disc" => Domain::disc(p.real("radius", 1.0)?),
        "annulus" => Domain::annulus(p.real("inner_radius", 0.5)?, p.real("outer_radius", 1.0)?),
        _ => Domain::bidisc(p.real("radius1", 1.0)?, p.real("radius2", 1.0)?),
    }
}

fn planar_base(p: &Params) -> Result<Domain> {
    let d = base_domain(p, "disc")?;
    if d.dimension() != 1 {
        return Err(bad("domain", "this experiment needs a planar base domain (disc or annulus)"));
    }
    Ok(d)
}

fn lens_of(p: &Params, base: &Domain, default_radius: f64) -> Result<(Domain, Complex64, f64)> {
    let center = p.complex("lens_center", "1")?;
    let radius = p.real("lens_radius", default_radius)?;
    Ok((Domain::lens(base.clone(), center, radius)?, center, radius))
}

fn thresholds(p: &Params) -> Result<Thresholds> {
    let d = Thresholds::default();
    let plateau_floor = match p.cfg.get("plateau_floor") {
        Some(_) => Some(p.real("plateau_floor", 0.0)?),
        None => None,
    };
    Ok(Thresholds {
        plateau_floor,
        slope_ceiling: p.real("slope_ceiling", d.slope_ceiling)?,
        growth_tolerance: p.real("growth_tolerance", d.growth_tolerance)?,
        zero_floor: p.real("zero_floor", d.zero_floor)?,
    })
}

/// Spectra at every cap plus the verdict and the trend at `k*`.
#[derive(Debug, Clone, Serialize)]
struct FamilyReport {
    domain_label: String,
    symbol: String,
    resolution: usize,
    projection: BasisSummary,
    bases: Vec<BasisSummary>,
    spectra: Vec<HankelSpectrum>,
    verdict: CompactnessVerdict,
}

struct Family {
    report: FamilyReport,
    family: TruncationFamily,
}

fn spectra_family(
    p: &Params,
    domain: &Domain,
    symbol: &Symbol,
    caps: &[DegreeCap],
    resolution: usize,
) -> Result<Family> {
    let last = *caps.last().ok_or_else(|| bad("degree_caps", "no caps given"))?;
    for cap in caps {
        if cap.dimension() != domain.dimension() {
            return Err(bad("degree_caps", format!("cap {cap} does not fit {}", domain.label())));
        }
    }
    let threshold = p.real("threshold", crate::bergman::DEFAULT_THRESHOLD)?;
    let margin = p.int("projection_margin", 2)? as u32;
    let rule = build_quadrature(domain, resolution)?;
    let assembler = HankelAssembler::new(rule, last, margin, threshold)?;
    let mut spectra = Vec::with_capacity(caps.len());
    let mut bases = Vec::with_capacity(caps.len());
    for &cap in caps {
        bases.push(assembler.domain_basis(cap)?.summary());
        spectra.push(assembler.spectrum(symbol, cap)?);
    }
    let family = TruncationFamily::new(spectra.clone())?;
    let verdict = verdict(&family, &thresholds(p)?);
    Ok(Family {
        report: FamilyReport {
            domain_label: domain.label(),
            symbol: symbol.label().to_string(),
            resolution,
            projection: assembler.projection.summary(),
            bases,
            spectra,
            verdict,
        },
        family,
    })
}

fn spectra_rows(reports: &[&FamilyReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        for s in &r.spectra {
            let cap = s.degree_cap.map(|c| c.to_string()).unwrap_or_default();
            for (i, sigma) in s.singular_values.iter().enumerate() {
                rows.push(vec![r.domain_label.clone(), cap.clone(), i.to_string(), num(*sigma)]);
            }
        }
    }
    rows
}

fn spectra_table(name: &str, reports: &[&FamilyReport]) -> Result<CsvTable> {
    csv_table(name, &["domain_label", "degree_cap", "index", "sigma"], spectra_rows(reports))
}

fn trend_table(name: &str, family: &Family) -> Result<CsvTable> {
    let rows = essential_norm_proxy(&family.family, family.family.tail_index())?;
    Ok(CsvTable { file_name: name.to_string(), content: trend_csv(&rows) })
}

fn localize(p: &Params) -> Outcome {
    let base = planar_base(p)?;
    let (lens, _, _) = lens_of(p, &base, 0.7)?;
    let symbol = p.symbol("symbol", "conj(z)")?;
    let caps = p.caps("10,20,30")?;
    let resolution = p.int("resolution", 256)? as usize;
    let omega = spectra_family(p, &base, &symbol, &caps, resolution)?;
    let restricted = restrict_symbol(&symbol, &lens)?;
    let local = spectra_family(p, &lens, &restricted, &caps, resolution)?;
    let compact = |f: &Family| f.report.verdict.label == crate::diagnostics::VerdictLabel::CompactConsistent;
    let payload = json!({
        "omega": omega.report,
        "lens": local.report,
        "localization_holds": !compact(&omega) || compact(&local),
    });
    let tables = vec![
        spectra_table("localize_spectra.csv", &[&omega.report, &local.report])?,
        trend_table("localize_trend_omega.csv", &omega)?,
        trend_table("localize_trend_lens.csv", &local)?,
    ];
    Ok((payload, tables))
}

#[derive(Debug, Clone, Serialize)]
struct CrossCheckRow {
    n: usize,
    /// `||(I - P) S(e_n dbar phi)||` through the Cauchy transform.
    cauchy_norm: f64,
    /// `||(I - P)(phi e_n)||` on the same lattice rule.
    direct_norm: f64,
    /// `sigma_n` of the largest truncation.
    sigma: f64,
    relative_gap: f64,
}

/// Hankel norms of the graded orthonormal polynomials `e_n` computed
/// through the Cauchy transform on a lattice rule.
fn cauchy_cross_check(
    p: &Params,
    domain: &Domain,
    symbol: &Symbol,
    cap: DegreeCap,
    sigma: &[f64],
    resolution: usize,
) -> Result<Vec<CrossCheckRow>> {
    let terms = p.int("cross_check_terms", 10)? as usize;
    let threshold = p.real("threshold", crate::bergman::DEFAULT_THRESHOLD)?;
    let margin = p.int("projection_margin", 2)? as u32;
    let rule = build_lattice_quadrature(domain, resolution)?;
    let op = CauchyOperator::new(&rule, None)?;
    let projection_basis = MonomialBasis::for_rule(&rule, cap.widened(margin))?;
    let projector = Projector::new(&orthonormalize(&gram(&projection_basis, &rule)?, threshold)?, &rule);
    let nodes = rule.planar_nodes();
    let x: Vec<Complex64> = nodes.iter().map(|z| (z - projection_basis.center.0) / projection_basis.scale.0).collect();
    let graded = Arnoldi::new(&x, &rule.weights, terms, 1e-12)?;
    let dbar_phi: Vec<Complex64> = rule
        .nodes
        .iter()
        .map(|pt| symbol.dbar(pt).map(|d| d[0]).unwrap_or(Complex64::new(0.0, 0.0)))
        .collect();
    let phi: Vec<Complex64> = rule.nodes.iter().map(|pt| symbol.eval(pt)).collect();
    let residual = |f: &[Complex64]| {
        let pf = projector.apply(f);
        let r: Vec<Complex64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
        rule.norm(&r)
    };
    let mut rows = Vec::new();
    for n in 0..graded.cols.min(terms + 1).min(sigma.len()) {
        let e: Vec<Complex64> = (0..rule.len()).map(|i| graded.q[i * graded.stride + n]).collect();
        let g: Vec<Complex64> = e.iter().zip(&dbar_phi).map(|(a, b)| a * b).collect();
        let cauchy_norm = residual(&op.solve(&g));
        let direct: Vec<Complex64> = e.iter().zip(&phi).map(|(a, b)| a * b).collect();
        let direct_norm = residual(&direct);
        let s = sigma[n];
        rows.push(CrossCheckRow {
            n,
            cauchy_norm,
            direct_norm,
            sigma: s,
            relative_gap: if s > 0.0 { (cauchy_norm - s).abs() / s } else { cauchy_norm },
        });
    }
    Ok(rows)
}

fn prop1(p: &Params) -> Outcome {
    let base = planar_base(p)?;
    let symbol = p.symbol("symbol", "conj(z)")?;
    let (domain, symbol) = if p.cfg.get("lens_radius").is_some() {
        let (lens, _, _) = lens_of(p, &base, 0.7)?;
        let restricted = restrict_symbol(&symbol, &lens)?;
        (lens, restricted)
    } else {
        (base, symbol)
    };
    let caps = p.caps("10,20,30")?;
    let resolution = p.int("resolution", 256)? as usize;
    let family = spectra_family(p, &domain, &symbol, &caps, resolution)?;
    let last = family.report.spectra.last().expect("family is non-empty");
    let cross = if symbol.has_dbar() {
        Some(cauchy_cross_check(p, &domain, &symbol, *caps.last().expect("caps"), &last.singular_values, resolution)?)
    } else {
        None
    };
    let mut tables = vec![
        spectra_table("prop1_spectra.csv", &[&family.report])?,
        trend_table("prop1_trend.csv", &family)?,
    ];
    if let Some(rows) = &cross {
        tables.push(csv_table(
            "prop1_cross_check.csv",
            &["n", "cauchy_norm", "direct_norm", "sigma"],
            rows.iter().map(|r| vec![r.n.to_string(), num(r.cauchy_norm), num(r.direct_norm), num(r.sigma)]),
        )?);
    }
    let payload = json!({
        "family": family.report,
        "regularity": symbol.regularity,
        "cross_check": cross,
        "cross_check_skipped": cross.is_none().then_some("symbol has no dbar derivative"),
    });
    Ok((payload, tables))
}

/// Tensor-factorization values for `conj(z)` on a bidisc: `e_{ij}` is an
/// eigenvector with `sigma = r1 / sqrt((i+1)(i+2))`.
pub fn bidisc_conj_z_oracle(radius1: f64, cap: DegreeCap) -> Vec<f64> {
    let basis = MonomialBasis::with_frame(cap, false, (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)), (1.0, 1.0));
    let mut v: Vec<f64> = basis
        .exponents
        .iter()
        .map(|&(i, _)| radius1 / (((i + 1) * (i + 2)) as f64).sqrt())
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn analytic_disc(p: &Params) -> Outcome {
    let domain = base_domain(p, "bidisc")?;
    let Domain::Bidisc { radius1, .. } = domain else {
        return Err(bad("domain", "analytic_disc needs a bidisc"));
    };
    let symbol = p.symbol("symbol", "conj(z)")?;
    let caps = p.caps("4x4,6x6,8x8")?;
    let resolution = p.int("resolution", 24)? as usize;
    let family = spectra_family(p, &domain, &symbol, &caps, resolution)?;
    let k = family.family.tail_index();
    let oracle: Option<Vec<Value>> = (symbol.label().replace(' ', "") == "conj(z)").then(|| {
        family
            .report
            .spectra
            .iter()
            .map(|s| {
                let cap = s.degree_cap.expect("cap recorded");
                let exact = bidisc_conj_z_oracle(radius1, cap)[k];
                let got = s.singular_values[k];
                json!({ "degree_cap": cap, "k": k, "sigma_k": got, "oracle": exact, "relative_error": (got - exact).abs() / exact })
            })
            .collect()
    });
    let tables = vec![
        spectra_table("analytic_disc_spectra.csv", &[&family.report])?,
        trend_table("analytic_disc_trend.csv", &family)?,
    ];
    Ok((json!({ "family": family.report, "tensor_oracle": oracle }), tables))
}

fn extend(p: &Params) -> Outcome {
    let base = planar_base(p)?;
    let center = p.complex("lens_center", "1")?;
    let radius = p.real("lens_radius", 0.8)?;
    let delta = p.real("delta", 0.2)?;
    let epsilon = p.real("epsilon", 1e-3)?;
    let k_max = p.real("k_max", 128.0)?;
    let ks = p.reals("k_sweep", "1,2,4,8,16")?;
    let function = p.symbol("function", "z")?;
    if function.variables() != 1 {
        return Err(bad("function", "must depend on z only"));
    }
    let resolution = p.int("resolution", 256)? as usize;
    let mut options = ExtensionOptions::default();
    if p.cfg.get("residual_tolerance").is_some() {
        options.hormander.residual_tolerance = p.real("residual_tolerance", f64::INFINITY)?;
    }
    let op = ExtensionOperator::new(&base, center, radius, delta, resolution, options)?;
    let f = op.sample_on_lens(|z| function.eval(&Point::C1(z)));
    let sweep: Vec<_> = op.sweep(&f, &ks)?.into_iter().map(|(step, _)| step).collect();
    let result = op.extend(&f, epsilon, k_max)?;
    let step_rows = |steps: &[crate::dbar::ExtensionStep]| -> Vec<Vec<String>> {
        steps
            .iter()
            .map(|s| {
                vec![
                    num(s.k),
                    num(s.achieved_error),
                    num(s.report.relative_residual),
                    num(s.report.weighted_norm),
                    s.report.retained_rank.to_string(),
                ]
            })
            .collect()
    };
    let header = ["k", "achieved_error", "relative_residual", "weighted_norm", "retained_rank"];
    let tables = vec![
        csv_table("extend_sweep.csv", &header, step_rows(&sweep))?,
        csv_table("extend_doubling.csv", &header, step_rows(&result.sweep))?,
    ];
    let payload = json!({
        "lens": Domain::lens(base, center, radius)?.label(),
        "r1": op.r1,
        "r2": op.r2,
        "lattice_nodes": op.rule().len(),
        "sweep": sweep,
        "extension": result,
        "options": options,
    });
    Ok((payload, tables))
}

fn weight_samples(p: &Params, rule: &QuadratureRule) -> Result<(Vec<f64>, Value)> {
    let nodes = rule.planar_nodes();
    match p.choice("weight", "quadratic").as_str() {
        "none" => Ok((vec![0.0; nodes.len()], json!({ "kind": "none" }))),
        "quadratic" => Ok((nodes.iter().map(|z| z.norm_sqr()).collect(), json!({ "kind": "quadratic", "psi": "|z|^2" }))),
        _ => {
            let s = shell_weight(
                p.real("shell_epsilon", 0.1)?,
                p.complex("shell_center", "0")?,
                p.real("shell_radius", 1.0)?,
            )?;
            let psi = nodes.iter().map(|z| s.psi(*z)).collect();
            Ok((psi, json!({ "kind": "shell", "shell": s })))
        }
    }
}

fn hormander(p: &Params) -> Outcome {
    let base = planar_base(p)?;
    let resolution = p.int("resolution", 128)? as usize;
    let rhs = p.symbol("rhs", "bump(0.2, 0.5)")?;
    if rhs.variables() != 1 {
        return Err(bad("rhs", "must depend on z only"));
    }
    let scales = p.reals("weight_scales", "1")?;
    let mut options = HormanderOptions::default();
    if p.cfg.get("residual_tolerance").is_some() {
        options.residual_tolerance = p.real("residual_tolerance", options.residual_tolerance)?;
    }
    let rule = build_lattice_quadrature(&base, resolution)?;
    let op = CauchyOperator::new(&rule, None)?;
    let stencil = DbarStencil::new(&rule)?;
    let (psi, weight) = weight_samples(p, &rule)?;
    let g: Vec<Complex64> = rule.nodes.iter().map(|pt| rhs.eval(pt)).collect();
    let mut reports = Vec::new();
    for &k in &scales {
        let problem = WeightedDbarProblem::new(g.clone(), psi.clone(), k)?;
        let (_, report) = hormander_solve(&op, &stencil, &problem, &options)?;
        reports.push(report);
    }
    let table = csv_table(
        "hormander_reports.csv",
        &["weight_scale", "residual", "relative_residual", "weighted_norm", "lhs", "rhs"],
        reports.iter().map(|r| {
            vec![num(r.weight_scale), num(r.residual), num(r.relative_residual), num(r.weighted_norm), num(r.lhs), num(r.rhs)]
        }),
    )?;
    let inequality: Vec<bool> = reports.iter().map(|r| r.lhs <= 1.1 * r.rhs).collect();
    let payload = json!({
        "domain": base.label(),
        "weight": weight,
        "options": options,
        "reports": reports,
        "inequality_within_10_percent": inequality,
    });
    Ok((payload, vec![table]))
}

fn certify(p: &Params) -> Outcome {
    let epsilon = p.real("epsilon", 0.05)?;
    let (m, source): (CMatrix, Value) = if p.cfg.get("gram_diagonal").is_some() {
        let d = p.reals("gram_diagonal", "")?;
        (diagonal(&d), json!({ "kind": "diagonal", "entries": d }))
    } else {
        let domain = base_domain(p, "disc")?;
        let symbol = p.symbol("symbol", "conj(z)")?;
        let caps = p.caps("20")?;
        let cap = *caps.last().expect("caps");
        let resolution = p.int("resolution", 256)? as usize;
        let threshold = p.real("threshold", crate::bergman::DEFAULT_THRESHOLD)?;
        let margin = p.int("projection_margin", 2)? as u32;
        let assembler = HankelAssembler::new(build_quadrature(&domain, resolution)?, cap, margin, threshold)?;
        let m = assembler.gram_for(&symbol, cap)?;
        (m, json!({ "kind": "hankel", "domain": domain.label(), "symbol": symbol.label(), "degree_cap": cap }))
    };
    let cert = certificate(&m, epsilon)?;
    let samples = p.int("samples", 100)? as usize;
    let seed = p.int("seed", 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m.nrows();
    let mut worst_slack = f64::INFINITY;
    for _ in 0..samples {
        if n == 0 {
            break;
        }
        let mut h: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        h.iter_mut().for_each(|v| *v /= norm);
        let (lhs, rhs) = cert.inequality_sides(&h);
        worst_slack = worst_slack.min(rhs + 1e-10 - lhs);
    }
    let table = csv_table(
        "certify_singular_values.csv",
        &["index", "sigma", "retained"],
        cert.singular_values
            .iter()
            .enumerate()
            .map(|(i, s)| vec![i.to_string(), num(*s), (i < cert.rank).to_string()]),
    )?;
    let payload = json!({
        "source": source,
        "certificate": cert,
        "exactness_gap": cert.exactness_gap(),
        "samples": samples,
        "seed": seed,
        "min_inequality_slack": if worst_slack.is_finite() { Some(worst_slack) } else { None },
        "inequality_holds": !(worst_slack < 0.0),
    });
    Ok((payload, vec![table]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::parse("# header\nexperiment = localize\nresolution = 64 # inline\n\n").unwrap();
        assert_eq!(cfg.get("resolution"), Some("64"));
        assert_eq!(cfg.experiment(), Some(ExperimentKind::Localize));
        let err = ExperimentConfig::parse("resolutoin = 64").unwrap_err();
        assert!(err.to_string().contains("resolutoin"), "{err}");
        assert!(ExperimentConfig::parse("just words").is_err());
        assert!(ExperimentConfig::parse("resolution = 64\nresolution = 32").is_err());
    }

    #[test]
    fn out_of_range_values_name_the_key() {
        for (text, key) in [
            ("resolution = 4", "resolution"),
            ("threshold = 0.5", "threshold"),
            ("radius = -1", "radius"),
            ("degree_caps = 20, 10, 30", "degree_caps"),
            ("slope_ceiling = 0.1", "slope_ceiling"),
            ("lens_center = z", "lens_center"),
            ("weight = cubic", "weight"),
            ("k_sweep = 1, -2", "k_sweep"),
            ("symbol = conj(", "symbol"),
        ] {
            let err = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(err.exit_code(), 2);
            assert!(err.to_string().contains(key), "{text}: {err}");
        }
    }

    #[test]
    fn mismatched_experiment_is_rejected() {
        let cfg = ExperimentConfig::parse("experiment = prop1").unwrap();
        assert!(run(ExperimentKind::Certify, &cfg).is_err());
    }

    #[test]
    fn certify_zero_matrix_has_rank_zero() {
        let cfg = ExperimentConfig::parse("gram_diagonal = 0, 0, 0\nepsilon = 0.1").unwrap();
        let out = run(ExperimentKind::Certify, &cfg).unwrap();
        assert_eq!(out.record.payload["certificate"]["rank"], 0);
        assert_eq!(out.record.payload["inequality_holds"], true);
    }

    #[test]
    fn hormander_zero_rhs_gives_zero_report() {
        let cfg = ExperimentConfig::parse("rhs = 0\nresolution = 32").unwrap();
        let out = run(ExperimentKind::Hormander, &cfg).unwrap();
        assert_eq!(out.record.payload["reports"][0]["weighted_norm"], 0.0);
    }

    #[test]
    fn bidisc_oracle_has_w_multiplicity() {
        let v = bidisc_conj_z_oracle(1.0, DegreeCap::PerVariable(4, 4));
        assert_eq!(v.len(), 25);
        assert!((v[12] - 1.0 / 12f64.sqrt()).abs() < 1e-15);
        let v = bidisc_conj_z_oracle(1.0, DegreeCap::PerVariable(6, 6));
        assert!((v[12] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lens_center_off_the_boundary_is_a_geometry_error() {
        let cfg = ExperimentConfig::parse("lens_center = 0.5\nresolution = 32\ndegree_caps = 2,3,4").unwrap();
        let err = run(ExperimentKind::Localize, &cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }
}
