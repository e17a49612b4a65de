use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use speckle::divergence::test_statistic;
use speckle::estimation::{fit_gamma_ml, fit_ml, sse_fit, FitOptions, Histogram};
use speckle::kstest::ks_two_sample;
use speckle::montecarlo::{
    contaminated_sample, empirical_power, empirical_size, estimator_study, scenario_grid, scenario_seed, ContaminationSpec,
    GridKind, McConfig, McReport, ScenarioClass, ScenarioSpec,
};
use speckle::{DistanceKind, ExtendedReal, G0Params, Sample};

use crate::io::{fmt_f64, read_dataset, sample_csv, sample_pgm, Dataset};
use crate::{CliError, ContrastArgs, FitArgs, Format, GofArgs, GridChoice, McArgs, McMode, SampleArgs, SampleFormat};

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}"))),
    }
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("values are serializable");
    s.push('\n');
    s.into_bytes()
}

/// JSON number, or the string "inf"/"nan" where JSON has no number.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(fmt_f64(x))
    }
}

pub fn sample(a: &SampleArgs) -> Result<(), CliError> {
    let params = match (a.gamma, a.mean) {
        (Some(g), None) => G0Params::new(a.alpha, g, a.looks)?,
        (None, Some(m)) => G0Params::from_mean(a.alpha, m, a.looks)?,
        _ => return Err(CliError::Input("give exactly one of --gamma and --mean".into())),
    };
    let contamination = ContaminationSpec::new(a.epsilon, a.scale_factor)?;
    let (n, shape) = match (a.n, a.width, a.height) {
        (Some(n), None, None) => (n, None),
        (None, Some(w), Some(h)) => (w * h, Some((w, h))),
        _ => return Err(CliError::Input("give either --n or both --width and --height".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let s = contaminated_sample(&params, &contamination, n, &mut rng)?;
    let bytes = match (a.format, shape) {
        (SampleFormat::Csv, _) => sample_csv(s.values(), shape.map(|s| s.0), a.looks).into_bytes(),
        (SampleFormat::Pgm, Some((w, h))) => sample_pgm(s.values(), w, h, a.looks),
        (SampleFormat::Pgm, None) => return Err(CliError::Input("PGM output needs --width and --height".into())),
    };
    emit(a.out.as_ref(), &bytes)
}

fn resolve_looks(flag: Option<f64>, files: &[&Dataset]) -> Result<f64, CliError> {
    let declared: Vec<f64> = files.iter().filter_map(|d| d.looks).collect();
    if declared.windows(2).any(|w| w[0] != w[1]) {
        return Err(CliError::Input(format!("files declare different numbers of looks: {declared:?}")));
    }
    match (flag, declared.first()) {
        (Some(l), Some(&d)) if l != d => {
            Err(CliError::Input(format!("--looks {l} contradicts the {d} looks declared in the input")))
        }
        (Some(l), _) if !(l.is_finite() && l >= 1.0) => Err(CliError::Input(format!("--looks must be >= 1, got {l}"))),
        (Some(l), _) => Ok(l),
        (None, Some(&d)) => Ok(d),
        (None, None) => Err(CliError::Input("number of looks unknown: pass --looks or declare it in the file".into())),
    }
}

fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(2)
}

struct FitSummary {
    params: G0Params,
    converged: bool,
    log_likelihood: f64,
    n: usize,
    sse_g0: f64,
    sse_gamma: Option<f64>,
    diagnostic: Option<String>,
}

fn fit_summary(s: &Sample, looks: f64, bins: usize) -> Result<FitSummary, CliError> {
    let fit = fit_ml(s, looks, &FitOptions::default())?;
    let sse_g0 = sse_fit(s, |z| fit.params.density(z), bins)?;
    let sse_gamma = match fit_gamma_ml(s) {
        Ok(g) => Some(sse_fit(s, |z| g.density(z), bins)?),
        Err(_) => None,
    };
    Ok(FitSummary {
        params: fit.params,
        converged: fit.converged,
        log_likelihood: fit.log_likelihood,
        n: s.len(),
        sse_g0,
        sse_gamma,
        diagnostic: fit.diagnostic,
    })
}

fn mean_text(m: ExtendedReal) -> String {
    match m {
        ExtendedReal::Finite(v) => fmt_f64(v),
        ExtendedReal::Infinite => "inf".into(),
    }
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let data = read_dataset(&a.input)?;
    let looks = resolve_looks(a.looks, &[&data])?;
    let s = data.sample(a.region)?;
    let bins = a.bins.unwrap_or_else(|| default_bins(s.len()));
    let f = fit_summary(&s, looks, bins)?;
    let bytes = match a.format {
        Format::Json => {
            let mean = match f.params.mean() {
                ExtendedReal::Finite(v) => json!(v),
                ExtendedReal::Infinite => json!("inf"),
            };
            json_bytes(&json!({
                "alpha_hat": f.params.alpha(),
                "gamma_hat": f.params.gamma(),
                "mean_hat": mean,
                "looks": looks,
                "converged": f.converged,
                "log_likelihood": num(f.log_likelihood),
                "n": f.n,
                "sse_g0": num(f.sse_g0),
                "sse_gamma": f.sse_gamma.map_or(Value::Null, num),
                "diagnostic": f.diagnostic,
            }))
        }
        Format::Csv => {
            let row = [
                fmt_f64(f.params.alpha()),
                fmt_f64(f.params.gamma()),
                mean_text(f.params.mean()),
                fmt_f64(looks),
                f.converged.to_string(),
                fmt_f64(f.log_likelihood),
                f.n.to_string(),
                fmt_f64(f.sse_g0),
                f.sse_gamma.map_or(String::new(), fmt_f64),
            ];
            format!(
                "alpha_hat,gamma_hat,mean_hat,looks,converged,log_likelihood,n,sse_g0,sse_gamma\n{}\n",
                row.join(",")
            )
            .into_bytes()
        }
    };
    emit(a.out.as_ref(), &bytes)
}

pub fn contrast(a: &ContrastArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.level) {
        return Err(CliError::Input(format!("--level must be a probability, got {}", a.level)));
    }
    let (da, db) = (read_dataset(&a.first)?, read_dataset(&a.second)?);
    let looks = resolve_looks(a.looks, &[&da, &db])?;
    let (x, y) = (da.sample(a.region_first)?, db.sample(a.region_second)?);
    let opts = FitOptions::default();
    let needs_fit = a.tests.iter().any(|k| k.is_parametric());
    let fits = if needs_fit { Some((fit_ml(&x, looks, &opts)?, fit_ml(&y, looks, &opts)?)) } else { None };
    let mut entries = Vec::new();
    for &kind in &a.tests {
        let entry = if kind.is_parametric() {
            let (fx, fy) = fits.as_ref().expect("fitted above");
            if !(fx.converged && fy.converged) {
                let why = [fx, fy].iter().filter_map(|f| f.diagnostic.clone()).collect::<Vec<_>>().join("; ");
                json!({ "test": kind.tag(), "error": format!("fit did not converge: {why}") })
            } else {
                match test_statistic(kind, &fx.params, &fy.params, x.len(), y.len()) {
                    Ok(r) => result_json(&r, a.level),
                    Err(e) => json!({ "test": kind.tag(), "error": e.to_string() }),
                }
            }
        } else {
            result_json(&ks_two_sample(&x, &y), a.level)
        };
        entries.push(entry);
    }
    emit(a.out.as_ref(), &json_bytes(&Value::Array(entries)))
}

fn result_json(r: &speckle::TestResult, level: f64) -> Value {
    json!({
        "test": r.kind.tag(),
        "distance": num(r.distance),
        "statistic": num(r.statistic),
        "p_value": num(r.p_value),
        "reject": r.reject(level),
        "level": level,
        "law": r.law,
        "m": r.sizes.0,
        "n": r.sizes.1,
    })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    List(Vec<ScenarioSpec>),
    Full(FullConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FullConfig {
    #[serde(default)]
    tests: Option<Vec<DistanceKindTag>>,
    scenarios: Vec<ScenarioSpec>,
}

#[derive(Debug, Clone, Copy)]
struct DistanceKindTag(DistanceKind);

impl<'de> Deserialize<'de> for DistanceKindTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map(DistanceKindTag).map_err(serde::de::Error::custom)
    }
}

fn read_config(path: &Path) -> Result<(Vec<ScenarioSpec>, Option<Vec<DistanceKind>>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    // Parse again through the typed shape for field-level messages.
    let parsed = if value.is_array() {
        serde_json::from_str::<Vec<ScenarioSpec>>(&text).map(ConfigFile::List)
    } else {
        serde_json::from_str::<FullConfig>(&text).map(ConfigFile::Full)
    }
    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let (scenarios, tests) = match parsed {
        ConfigFile::List(s) => (s, None),
        ConfigFile::Full(f) => (f.scenarios, f.tests.map(|t| t.into_iter().map(|k| k.0).collect())),
    };
    for (i, s) in scenarios.iter().enumerate() {
        s.validate().map_err(|e| CliError::Input(format!("{}: scenario {i}: {e}", path.display())))?;
    }
    if scenarios.is_empty() {
        return Err(CliError::Input(format!("{}: no scenarios", path.display())));
    }
    Ok((scenarios, tests))
}

const MC_HEADER: [&str; 14] = [
    "scenario_id",
    "alpha1",
    "alpha2",
    "gamma1",
    "gamma2",
    "looks",
    "n",
    "epsilon",
    "test",
    "level",
    "rejection_rate",
    "replications",
    "censored",
    "mean_discrepancy",
];

const ESTIMATOR_HEADER: [&str; 14] = [
    "scenario_id",
    "alpha",
    "gamma",
    "looks",
    "n",
    "epsilon",
    "parameter",
    "truth",
    "mean",
    "bias",
    "cv_percent",
    "mse",
    "replications",
    "censored",
];

pub fn mc(a: &McArgs) -> Result<(), CliError> {
    let (mut scenarios, config_tests) = match (a.mode, &a.config, a.grid) {
        (McMode::Grid, _, Some(g)) => {
            let kind = match g {
                GridChoice::Size => GridKind::Size,
                GridChoice::Power => GridKind::Power,
                GridChoice::Estimator => GridKind::Estimator,
            };
            (scenario_grid(kind), None)
        }
        (McMode::Grid, _, None) => return Err(CliError::Input("grid mode needs --grid size|power|estimator".into())),
        (_, Some(path), _) => read_config(path)?,
        (_, None, _) => return Err(CliError::Input("--config is required".into())),
    };
    let mode = match (a.mode, a.grid) {
        (McMode::Grid, Some(GridChoice::Size)) => McMode::Size,
        (McMode::Grid, Some(GridChoice::Power)) => McMode::Power,
        (McMode::Grid, Some(GridChoice::Estimator)) => McMode::Estimator,
        (m, _) => m,
    };
    if let Some(r) = a.replications {
        if r == 0 {
            return Err(CliError::Input("--replications must be positive".into()));
        }
        scenarios.iter_mut().for_each(|s| s.replications = r);
    }
    if a.workers == 0 {
        return Err(CliError::Input("--workers must be positive".into()));
    }
    let tests = a.tests.clone().or(config_tests).unwrap_or_else(|| DistanceKind::ALL.to_vec());
    let mut reports = Vec::with_capacity(scenarios.len());
    for (i, spec) in scenarios.iter().enumerate() {
        let cfg = McConfig::new(scenario_seed(a.seed, i)).with_workers(a.workers);
        let report = match mode {
            McMode::Size => {
                if spec.scenario_class != ScenarioClass::I {
                    return Err(CliError::Input(format!("scenario {i}: size mode needs class i")));
                }
                empirical_size(spec, &tests, &cfg)?
            }
            McMode::Power => {
                if spec.scenario_class == ScenarioClass::I {
                    return Err(CliError::Input(format!("scenario {i}: power mode needs classes ii-v")));
                }
                empirical_power(spec, &tests, &cfg)?
            }
            _ => estimator_study(&spec.first(), &spec.contamination, spec.sample_size, spec.replications, &cfg)?,
        };
        reports.push(report);
    }
    let bytes = match a.format {
        Format::Json => {
            let docs: Vec<Value> = scenarios
                .iter()
                .zip(&reports)
                .map(|(s, r)| json!({ "scenario": s, "report": report_json(r) }))
                .collect();
            json_bytes(&json!({ "seed": a.seed, "results": docs }))
        }
        Format::Csv => mc_csv(mode, &scenarios, &reports)?,
    };
    emit(a.out.as_ref(), &bytes)
}

fn report_json(r: &McReport) -> Value {
    let mut v = serde_json::to_value(r).expect("reports are serializable");
    // NaN rates (no valid replication) are not representable in JSON.
    if let Some(rates) = v.get_mut("rejection_rates").and_then(Value::as_array_mut) {
        for (slot, rate) in rates.iter_mut().zip(&r.rejection_rates) {
            slot["rate"] = num(rate.rate);
        }
    }
    v
}

fn mc_csv(mode: McMode, scenarios: &[ScenarioSpec], reports: &[McReport]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::Input(format!("CSV output: {e}"));
    if mode == McMode::Estimator {
        w.write_record(ESTIMATOR_HEADER).map_err(io_err)?;
        for (s, r) in scenarios.iter().zip(reports) {
            for e in &r.estimates {
                w.write_record([
                    s.label(),
                    fmt_f64(s.alpha1),
                    fmt_f64(s.gamma1),
                    fmt_f64(s.looks),
                    s.sample_size.to_string(),
                    fmt_f64(s.contamination.epsilon),
                    e.parameter.clone(),
                    fmt_f64(e.truth),
                    fmt_f64(e.mean),
                    fmt_f64(e.bias),
                    fmt_f64(e.cv_percent),
                    fmt_f64(e.mse),
                    r.replications.to_string(),
                    r.censored.to_string(),
                ])
                .map_err(io_err)?;
            }
        }
    } else {
        w.write_record(MC_HEADER).map_err(io_err)?;
        for (s, r) in scenarios.iter().zip(reports) {
            for rate in &r.rejection_rates {
                w.write_record([
                    s.label(),
                    fmt_f64(s.alpha1),
                    fmt_f64(s.alpha2),
                    fmt_f64(s.gamma1),
                    fmt_f64(s.gamma2),
                    fmt_f64(s.looks),
                    s.sample_size.to_string(),
                    fmt_f64(s.contamination.epsilon),
                    rate.test.tag().to_string(),
                    fmt_f64(rate.level),
                    fmt_f64(rate.rate),
                    r.replications.to_string(),
                    r.censored.to_string(),
                    r.mean_discrepancy.map_or(String::new(), fmt_f64),
                ])
                .map_err(io_err)?;
            }
        }
    }
    w.into_inner().map_err(|e| CliError::Input(format!("CSV output: {e}")))
}

pub fn gof(a: &GofArgs) -> Result<(), CliError> {
    let data = read_dataset(&a.input)?;
    let looks = resolve_looks(a.looks, &[&data])?;
    let s = data.sample(a.region)?;
    let bins = a.bins.unwrap_or_else(|| default_bins(s.len()));
    let fit = fit_ml(&s, looks, &FitOptions::default())?;
    let gamma = fit_gamma_ml(&s).ok();
    let hist = Histogram::new(&s, bins)?;
    let sse_g0 = sse_fit(&s, |z| fit.params.density(z), bins)?;
    let sse_gamma = gamma.map(|g| sse_fit(&s, |z| g.density(z), bins)).transpose()?;
    let mut out = String::new();
    out.push_str(&format!("# alpha_hat: {}\n", fmt_f64(fit.params.alpha())));
    out.push_str(&format!("# gamma_hat: {}\n", fmt_f64(fit.params.gamma())));
    out.push_str(&format!("# converged: {}\n", fit.converged));
    out.push_str(&format!("# sse_g0: {}\n", fmt_f64(sse_g0)));
    out.push_str(&format!("# sse_gamma: {}\n", sse_gamma.map_or("nan".into(), fmt_f64)));
    out.push_str("bin_lower,bin_upper,midpoint,histogram,g0_density,gamma_density\n");
    for (i, mid) in hist.midpoints().enumerate() {
        let g = gamma.map_or(f64::NAN, |g| g.density(mid));
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(hist.edges[i]),
            fmt_f64(hist.edges[i + 1]),
            fmt_f64(mid),
            fmt_f64(hist.densities[i]),
            fmt_f64(fit.params.density(mid)),
            fmt_f64(g)
        ));
    }
    emit(a.out.as_ref(), out.as_bytes())
}
