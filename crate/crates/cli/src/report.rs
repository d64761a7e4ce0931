//! Report rows and their CSV and JSON forms.

use std::io::{Read, Write};

use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

pub const BASE_COLUMNS: [&str; 7] = ["n", "mu", "u_x", "u_y", "statistic", "value", "error_bound"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub n: Option<u32>,
    pub mu: f64,
    pub u: (f64, f64),
    pub statistic: String,
    pub value: f64,
    pub error_bound: f64,
    /// Values of the report's extra columns, in order.
    pub extra: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub experiment_id: String,
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    /// Command-specific columns after the base ones.
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    /// Set when the run stopped early; the rows are what finished.
    pub error: Option<String>,
}

/// FNV-1a over the config echo, stable across platforms and releases.
fn experiment_id(command: &str, config: &[(String, String)]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(command.as_bytes());
    for (k, v) in config {
        feed(b"\n");
        feed(k.as_bytes());
        feed(b"=");
        feed(v.as_bytes());
    }
    format!("{command}-{h:016x}")
}

impl RiskReport {
    pub fn new(config: &ExperimentConfig, columns: &[&str]) -> Self {
        let echo: Vec<(String, String)> = config
            .echo
            .iter()
            .filter(|(k, _)| k != "out" && k != "format" && k != "workers")
            .cloned()
            .collect();
        Self {
            experiment_id: experiment_id(&config.command, &echo),
            command: config.command.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: echo,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            error: None,
        }
    }

    pub fn status(&self) -> &'static str {
        if self.error.is_some() {
            "partial"
        } else {
            "complete"
        }
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn meta(&self) -> Vec<(String, String)> {
        let mut m = vec![
            ("experiment_id".to_string(), self.experiment_id.clone()),
            ("command".to_string(), self.command.clone()),
            ("version".to_string(), self.version.clone()),
            ("seed".to_string(), self.seed.to_string()),
            ("status".to_string(), self.status().to_string()),
        ];
        if let Some(e) = &self.error {
            m.push(("error".to_string(), e.clone()));
        }
        m
    }

    /// `#` lines with metadata and the config echo, then a plain CSV table.
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(e.to_string());
        for (k, v) in self.meta() {
            writeln!(out, "# {k}: {v}").map_err(io)?;
        }
        for (k, v) in &self.config {
            writeln!(out, "# config.{k}: {v}").map_err(io)?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let header: Vec<&str> = BASE_COLUMNS.iter().copied().chain(self.columns.iter().map(String::as_str)).collect();
        w.write_record(&header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            let mut rec = vec![
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                num(r.mu),
                num(r.u.0),
                num(r.u.1),
                r.statistic.clone(),
                num(r.value),
                num(r.error_bound),
            ];
            rec.extend(r.extra.iter().map(|&x| num(x)));
            w.write_record(&rec).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(io)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                m.insert("n".into(), r.n.map_or(Value::Null, Value::from));
                m.insert("mu".into(), json!(r.mu));
                m.insert("u_x".into(), json!(r.u.0));
                m.insert("u_y".into(), json!(r.u.1));
                m.insert("statistic".into(), json!(r.statistic));
                m.insert("value".into(), json!(r.value));
                m.insert("error_bound".into(), json!(r.error_bound));
                for (c, x) in self.columns.iter().zip(&r.extra) {
                    m.insert(c.clone(), json!(x));
                }
                Value::Object(m)
            })
            .collect();
        let meta: Map<String, Value> = self.meta().into_iter().map(|(k, v)| (k, Value::String(v))).collect();
        let config: Map<String, Value> = self.config.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        json!({
            "meta": meta,
            "config": config,
            "columns": BASE_COLUMNS.iter().map(|s| s.to_string()).chain(self.columns.iter().cloned()).collect::<Vec<_>>(),
            "rows": rows,
        })
    }

    pub fn write_json(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(e.to_string());
        serde_json::to_writer_pretty(&mut *out, &self.to_json()).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out).map_err(io)
    }

    /// Reads a report written by [`RiskReport::write`] in either format.
    pub fn read(input: &mut dyn Read) -> Result<Self, CliError> {
        let mut text = String::new();
        input
            .read_to_string(&mut text)
            .map_err(|e| CliError::Io(e.to_string()))?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_csv(&text)
        }
    }

    fn from_csv(text: &str) -> Result<Self, CliError> {
        let bad = |m: String| CliError::Config(format!("malformed report: {m}"));
        let mut meta = Map::new();
        let mut config = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line[1..].trim().split_once(": ") {
                match k.strip_prefix("config.") {
                    Some(key) => config.push((key.to_string(), v.to_string())),
                    None => {
                        meta.insert(k.to_string(), Value::String(v.to_string()));
                    }
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < BASE_COLUMNS.len() || header[..BASE_COLUMNS.len()] != BASE_COLUMNS {
            return Err(bad("unexpected header".into()));
        }
        let f = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}'")));
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let n = if rec[0].is_empty() {
                None
            } else {
                Some(rec[0].parse().map_err(|_| bad(format!("bad n '{}'", &rec[0])))?)
            };
            rows.push(Row {
                n,
                mu: f(&rec[1])?,
                u: (f(&rec[2])?, f(&rec[3])?),
                statistic: rec[4].to_string(),
                value: f(&rec[5])?,
                error_bound: f(&rec[6])?,
                extra: rec.iter().skip(BASE_COLUMNS.len()).map(f).collect::<Result<_, _>>()?,
            });
        }
        Self::assemble(&meta, config, header[BASE_COLUMNS.len()..].to_vec(), rows)
    }

    fn from_json(text: &str) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::Config(format!("malformed report: {m}"));
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed report: {e}")))?;
        let meta = v["meta"].as_object().cloned().ok_or_else(|| bad("no meta"))?;
        let config = v["config"]
            .as_object()
            .ok_or_else(|| bad("no config"))?
            .iter()
            .map(|(k, x)| (k.clone(), x.as_str().unwrap_or_default().to_string()))
            .collect();
        let columns: Vec<String> = v["columns"]
            .as_array()
            .ok_or_else(|| bad("no columns"))?
            .iter()
            .skip(BASE_COLUMNS.len())
            .map(|c| c.as_str().unwrap_or_default().to_string())
            .collect();
        let f = |r: &Value, k: &str| r[k].as_f64().ok_or_else(|| bad(k));
        let rows = v["rows"]
            .as_array()
            .ok_or_else(|| bad("no rows"))?
            .iter()
            .map(|r| {
                Ok(Row {
                    n: r["n"].as_u64().map(|n| n as u32),
                    mu: f(r, "mu")?,
                    u: (f(r, "u_x")?, f(r, "u_y")?),
                    statistic: r["statistic"].as_str().ok_or_else(|| bad("statistic"))?.to_string(),
                    value: f(r, "value")?,
                    error_bound: f(r, "error_bound")?,
                    extra: columns.iter().map(|c| f(r, c)).collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Self::assemble(&meta, config, columns, rows)
    }

    fn assemble(meta: &Map<String, Value>, config: Vec<(String, String)>, columns: Vec<String>, rows: Vec<Row>) -> Result<Self, CliError> {
        let s = |k: &str| meta.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
        Ok(Self {
            experiment_id: s("experiment_id"),
            command: s("command"),
            version: s("version"),
            seed: s("seed").parse().unwrap_or(0),
            config,
            columns,
            rows,
            error: meta.get("error").and_then(Value::as_str).map(str::to_string),
        })
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::resolve;
    use std::collections::BTreeMap;

    fn sample() -> RiskReport {
        let cfg = resolve("discriminate", &BTreeMap::new(), &BTreeMap::new()).unwrap();
        let mut r = RiskReport::new(&cfg, &["limit"]);
        r.rows.push(Row {
            n: Some(16),
            mu: 0.75,
            u: (0.1, -1.0 / 3.0),
            statistic: "helstrom".into(),
            value: std::f64::consts::PI / 7.0,
            error_bound: 0.0,
            extra: vec![1e-300],
        });
        r.rows.push(Row {
            n: None,
            mu: 1.0,
            u: (0.0, 0.0),
            statistic: "helstrom".into(),
            value: 0.5,
            error_bound: 2.5e-17,
            extra: vec![0.1024700089],
        });
        r
    }

    #[test]
    fn csv_and_json_round_trip_exactly() {
        let r = sample();
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv.clone()).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.contains("n,mu,u_x,u_y,statistic,value,error_bound,limit\n"));
        assert_eq!(RiskReport::read(&mut csv.as_slice()).unwrap(), r);
        let mut js = Vec::new();
        r.write_json(&mut js).unwrap();
        assert_eq!(RiskReport::read(&mut js.as_slice()).unwrap(), r);
    }

    #[test]
    fn numbers_keep_full_precision() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn experiment_id_follows_config() {
        let a = sample();
        let mut flags = BTreeMap::new();
        flags.insert("seed".to_string(), "9".to_string());
        let b = RiskReport::new(&resolve("discriminate", &flags, &BTreeMap::new()).unwrap(), &[]);
        assert_ne!(a.experiment_id, b.experiment_id);
        let mut flags = BTreeMap::new();
        flags.insert("out".to_string(), "x.csv".to_string());
        let c = RiskReport::new(&resolve("discriminate", &flags, &BTreeMap::new()).unwrap(), &[]);
        assert_eq!(a.experiment_id, c.experiment_id);
    }
}
