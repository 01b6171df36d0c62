use std::io::Write;

use serde::{Deserialize, Serialize};

use super::io::RunSummary;
use super::run::{prepare, run_all};
use super::schema::ScenarioConfig;
use crate::analysis::{analyze, BootstrapOptions};
use crate::error::{Error, Result};

/// Parses `a,b,c`, `lin:START:STOP:N` or `log:START:STOP:N`.
pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    let bad = |what: String| Error::Config(format!("bad value list `{list}`: {what}"));
    let list = list.trim();
    if let Some((kind, rest)) = list.split_once(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected KIND:START:STOP:N".into()));
        }
        let start: f64 = parts[0].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let stop: f64 = parts[1].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let n: usize = parts[2].trim().parse().map_err(|e| bad(format!("{e}")))?;
        if n == 0 {
            return Err(bad("N must be positive".into()));
        }
        let t = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        return match kind {
            "lin" => Ok((0..n).map(|i| start + (stop - start) * t(i)).collect()),
            "log" if start > 0.0 && stop > 0.0 => {
                Ok((0..n).map(|i| (start.ln() + (stop.ln() - start.ln()) * t(i)).exp()).collect())
            }
            "log" => Err(bad("log spacing needs positive bounds".into())),
            _ => Err(bad(format!("unknown spacing `{kind}`"))),
        };
    }
    let values: Vec<f64> =
        list.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}")))).collect::<Result<_>>()?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite".into()));
    }
    Ok(values)
}

fn set_in(node: &mut toml::Value, path: &[&str], value: f64, full: &str, insert: bool) -> Result<usize> {
    let bad = |what: &str| Error::Config(format!("parameter path `{full}`: {what}"));
    let Some((head, rest)) = path.split_first() else {
        let replacement = match node {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
            toml::Value::Integer(_) => return Err(bad("integer field needs an integral value")),
            _ => return Err(bad("does not address a numeric field")),
        };
        *node = replacement;
        return Ok(1);
    };
    match node {
        toml::Value::Table(t) if *head == "*" => {
            let mut n = 0;
            for (_, v) in t.iter_mut() {
                n += set_in(v, rest, value, full, false).unwrap_or(0);
            }
            Ok(n)
        }
        toml::Value::Table(t) => match t.get_mut(*head) {
            Some(v) => set_in(v, rest, value, full, insert),
            None if rest.is_empty() && insert => {
                // Optional numeric fields left at their default.
                t.insert(head.to_string(), toml::Value::Float(value));
                Ok(1)
            }
            None => Err(bad(&format!("no key `{head}`"))),
        },
        toml::Value::Array(a) if *head == "*" => {
            let mut n = 0;
            // Wildcards skip elements that lack the key.
            for v in a.iter_mut() {
                n += set_in(v, rest, value, full, false).unwrap_or(0);
            }
            Ok(n)
        }
        toml::Value::Array(a) => {
            let i: usize = head.parse().map_err(|_| bad(&format!("`{head}` is not an index")))?;
            let len = a.len();
            let v = a.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of range ({len})")))?;
            set_in(v, rest, value, full, insert)
        }
        _ => Err(bad(&format!("cannot descend into `{head}`"))),
    }
}

/// Returns a copy of `cfg` with the numeric field at dotted `path` set to
/// `value`. Array elements are addressed by index; `*` matches every
/// element that has the remaining path.
pub fn set_parameter(cfg: &ScenarioConfig, path: &str, value: f64) -> Result<ScenarioConfig> {
    let mut doc = toml::Value::try_from(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("parameter path `{path}` is malformed")));
    }
    let n = set_in(&mut doc, &parts, value, path, true)?;
    if n == 0 {
        return Err(Error::Config(format!("parameter path `{path}` matched no numeric field")));
    }
    let out: ScenarioConfig = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    out.validate()?;
    Ok(out)
}

/// One row of a scan table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub param: String,
    pub value: f64,
    pub scenario_id: String,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// Runs the scenario once per value and analyses each run. Analysis
/// failures are kept in the table; configuration errors abort.
pub fn scan(cfg: &ScenarioConfig, path: &str, values: &[f64], opts: &BootstrapOptions) -> Result<Vec<ScanRow>> {
    let configs = values.iter().map(|&v| set_parameter(cfg, path, v)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (c, &value) in configs.iter().zip(values) {
        let prep = prepare(c)?;
        let outcome = run_all(&prep).and_then(|records| analyze(&records, &prep.shifts, prep.mode, None, opts));
        let (summary, error) = match outcome {
            Ok(report) => (Some(RunSummary::from_report(&report)), None),
            Err(e) if e.is_config() => return Err(e),
            Err(e) => (None, Some(e.to_string())),
        };
        rows.push(ScanRow { param: path.to_string(), value, scenario_id: prep.scenario_id, summary, error });
    }
    Ok(rows)
}

/// Writes `param,value,scenario_id,W,W_db,ci_lo,ci_hi,n_trials,ellipse_v_min,error`.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param", "value", "scenario_id", "W", "W_db", "ci_lo", "ci_hi", "n_trials", "ellipse_v_min", "error"])?;
    for r in rows {
        let s = r.summary.as_ref();
        let num = |f: &dyn Fn(&RunSummary) -> f64| s.map(|s| format!("{}", f(s))).unwrap_or_default();
        w.write_record([
            r.param.clone(),
            format!("{}", r.value),
            r.scenario_id.clone(),
            num(&|s| s.w),
            num(&|s| s.w_db),
            num(&|s| s.ci_lo),
            num(&|s| s.ci_hi),
            s.map(|s| s.n_trials.to_string()).unwrap_or_default(),
            s.and_then(|s| s.ellipse_v_min).map(|v| v.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
