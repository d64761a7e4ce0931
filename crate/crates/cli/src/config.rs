//! Effective experiment configuration: command-line flags over a flat
//! `key = value` file over built-in defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qlan::channels::{AxisSpec, UGrid};
use qlan::measurements::ComparisonGrid;
use qlan::ModelParams;

use crate::CliError;

/// Keys accepted in config files, with their defaults. `None` means unset.
const KEYS: &[(&str, Option<&str>)] = &[
    ("n", Some("16,64,256")),
    ("mu", Some("0.75")),
    ("epsilon", Some("0.1")),
    ("grid", Some("-1:1:3")),
    ("trunc", None),
    ("seed", Some("0")),
    ("samples", Some("1000000")),
    ("method", Some("mc")),
    ("grid_radial", Some("100")),
    ("grid_angular", Some("128")),
    ("format", Some("csv")),
    ("out", None),
    ("workers", None),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonteCarlo,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: String,
    pub n: Vec<u32>,
    pub mu: Vec<f64>,
    pub epsilon: f64,
    pub grid: UGrid,
    pub trunc: Option<usize>,
    pub seed: u64,
    pub samples: usize,
    pub method: Method,
    pub comparison: ComparisonGrid,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Effective `key=value` pairs in key order, echoed into reports.
    pub echo: Vec<(String, String)>,
}

impl ExperimentConfig {
    /// Model parameters for one `(n, μ)` pair.
    pub fn params(&self, n: u32, mu: f64) -> Result<ModelParams, CliError> {
        ModelParams::new(n, mu, self.epsilon).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Reads a flat config file: one `key = value` per line, `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {} is not key = value", lineno + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.iter().any(|(name, _)| *name == key) {
            return Err(CliError::Config(format!("unknown config key '{}'", k.trim())));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("config key '{key}' given twice")));
        }
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("invalid value '{v}' for {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    let items = v
        .split(',')
        .map(|s| parse(key, s.trim()))
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key} is empty")));
    }
    Ok(items)
}

/// `x` for a square grid, or `x,y` with one `min:max:steps` per axis.
pub fn parse_grid(v: &str) -> Result<UGrid, CliError> {
    let axes = v
        .split(',')
        .map(|s| s.trim().parse::<AxisSpec>().map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    match axes[..] {
        [a] => Ok(UGrid::square(a)),
        [x, y] => Ok(UGrid { x, y }),
        _ => Err(CliError::Config(format!("grid '{v}' needs one or two axes"))),
    }
}

fn positive(key: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::Config(format!("{key} must be positive")));
    }
    Ok(v)
}

/// Merges flag values over file values over defaults and validates the result.
pub fn resolve(
    command: &str,
    flags: &BTreeMap<String, String>,
    file: &BTreeMap<String, String>,
) -> Result<ExperimentConfig, CliError> {
    let mut eff: BTreeMap<&str, String> = BTreeMap::new();
    for (key, default) in KEYS {
        let v = flags
            .get(*key)
            .or_else(|| file.get(*key))
            .cloned()
            .or_else(|| default.map(str::to_string));
        if let Some(v) = v {
            eff.insert(key, v);
        }
    }
    let get = |k: &str| eff.get(k).map(String::as_str);

    let n: Vec<u32> = parse_list("n", get("n").unwrap())?;
    if n.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("n list must be strictly ascending".into()));
    }
    let mu: Vec<f64> = parse_list("mu", get("mu").unwrap())?;
    let epsilon: f64 = parse("epsilon", get("epsilon").unwrap())?;
    for &m in &mu {
        for &k in &n {
            ModelParams::new(k, m, epsilon).map_err(|e| CliError::Config(e.to_string()))?;
        }
    }
    let grid = parse_grid(get("grid").unwrap())?;
    let trunc = get("trunc").map(|v| parse("trunc", v).and_then(|t| positive("trunc", t))).transpose()?;
    let seed = parse("seed", get("seed").unwrap())?;
    let samples: usize = parse("samples", get("samples").unwrap())?;
    if samples < 2 {
        return Err(CliError::Config("samples must be at least 2".into()));
    }
    let method = match get("method").unwrap() {
        "mc" => Method::MonteCarlo,
        "quadrature" => Method::Quadrature,
        other => return Err(CliError::Config(format!("method must be mc or quadrature, got '{other}'"))),
    };
    let comparison = ComparisonGrid {
        n_radial: positive("grid_radial", parse("grid_radial", get("grid_radial").unwrap())?)?,
        n_angular: positive("grid_angular", parse("grid_angular", get("grid_angular").unwrap())?)?,
        ..ComparisonGrid::default()
    };
    let format = match get("format").unwrap() {
        "csv" => Format::Csv,
        "json" => Format::Json,
        other => return Err(CliError::Config(format!("format must be csv or json, got '{other}'"))),
    };
    let out = get("out").map(PathBuf::from);
    let workers = get("workers").map(|v| parse("workers", v).and_then(|w| positive("workers", w))).transpose()?;

    Ok(ExperimentConfig {
        command: command.to_string(),
        n,
        mu,
        epsilon,
        grid,
        trunc,
        seed,
        samples,
        method,
        comparison,
        format,
        out,
        workers,
        echo: eff.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_resolve() {
        let c = resolve("convergence", &BTreeMap::new(), &BTreeMap::new()).unwrap();
        assert_eq!(c.n, vec![16, 64, 256]);
        assert_eq!(c.mu, vec![0.75]);
        assert_eq!(c.grid, UGrid::unit_square());
        assert_eq!(c.format, Format::Csv);
        assert!(c.echo.iter().all(|(k, _)| k != "out"));
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = parse_config_text("# sweep\nmu = 0.9\nn = 4, 8\nseed=5\n").unwrap();
        let flags = map(&[("mu", "0.6")]);
        let c = resolve("risk", &flags, &file).unwrap();
        assert_eq!(c.mu, vec![0.6]);
        assert_eq!(c.n, vec![4, 8]);
        assert_eq!(c.seed, 5);
        assert_eq!(c.samples, 1_000_000);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("mu = 0.7\nmu = 0.8").is_err());
        assert!(parse_config_text("mu 0.7").is_err());
        for (k, v) in [
            ("mu", "0.5"),
            ("n", "64,16"),
            ("n", "0"),
            ("epsilon", "0.7"),
            ("grid", "1:0:3"),
            ("grid", "0:1:2,0:1:2,0:1:2"),
            ("samples", "1"),
            ("format", "xml"),
            ("method", "exact"),
            ("workers", "0"),
            ("trunc", "-3"),
        ] {
            assert!(matches!(resolve("x", &map(&[(k, v)]), &BTreeMap::new()), Err(CliError::Config(_))), "{k}={v}");
        }
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0:0:1").unwrap().points().len(), 1);
        let g = parse_grid("0:1:2,-1:1:3").unwrap();
        assert_eq!(g.points().len(), 6);
    }
}
