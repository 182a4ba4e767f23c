//! CSV rows, JSON summaries and grid dumps.

use std::io::{Read, Write};

use serde_json::{Map, Number, Value};
use splittree::statistics::{MeanSe, ReplicationRecord, ReplicationSummary};

use crate::CliError;

pub const CSV_HEADER: [&str; 12] =
    ["rep", "seed", "family", "n", "N", "height", "D_n", "D_n_star", "Psi", "Upsilon", "N_bad", "epsilon"];

/// `x` in plain decimal notation with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000".to_string();
    }
    let sci = format!("{:.11e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if x < 0.0 { "-" } else { "" };
    let body = if exp < 0 {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else if exp as usize >= digits.len() - 1 {
        format!("{digits}{}", "0".repeat(exp as usize + 1 - digits.len()))
    } else {
        let (int, frac) = digits.split_at(exp as usize + 1);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

fn float(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(serde_json::from_str::<Number>(&sig12(x)).expect("decimal literal"))
    } else {
        Value::Null
    }
}

fn mean_se(m: Option<MeanSe>) -> Value {
    match m {
        Some(m) => {
            let mut o = Map::new();
            o.insert("mean".into(), float(m.mean));
            o.insert("se".into(), float(m.se));
            Value::Object(o)
        }
        None => Value::Null,
    }
}

/// Optional per-size extras written next to the summary fields.
#[derive(Debug, Clone)]
pub struct SubtreeSummary {
    pub beta: f64,
    pub depth: u32,
    pub corollary_sum: MeanSe,
    pub corollary_prediction: f64,
    pub upsilon_sum: MeanSe,
    pub upsilon_leading: MeanSe,
}

pub fn summary_json(s: &ReplicationSummary, subtree: Option<&SubtreeSummary>) -> Value {
    let mut o = Map::new();
    o.insert("family".into(), Value::String(s.family.clone()));
    o.insert("n".into(), Value::from(s.n));
    o.insert("replications".into(), Value::from(s.replications));
    o.insert("seed".into(), Value::from(s.seed));
    o.insert("vertices_over_n".into(), mean_se(Some(s.vertices_over_n)));
    o.insert("last_depth".into(), mean_se(s.last_depth));
    o.insert("var_last_depth".into(), mean_se(s.var_last_depth));
    o.insert("mean_depth".into(), mean_se(s.mean_depth));
    o.insert("psi_over_n".into(), mean_se(Some(s.psi_over_n)));
    o.insert("upsilon_over_n".into(), mean_se(Some(s.upsilon_over_n)));
    o.insert("bad_fraction".into(), mean_se(Some(s.bad_fraction)));
    o.insert("alpha_hat".into(), float(s.alpha_hat));
    o.insert("q_hat".into(), mean_se(Some(s.q_hat)));
    o.insert("r_hat".into(), mean_se(Some(s.r_hat)));
    o.insert("var_vertices_over_n2".into(), float(s.var_vertices_over_n2));
    o.insert("ks_statistic".into(), s.ks_statistic.map_or(Value::Null, float));
    if let Some(t) = subtree {
        let mut sub = Map::new();
        sub.insert("beta".into(), float(t.beta));
        sub.insert("depth".into(), Value::from(t.depth));
        sub.insert("corollary_sum".into(), mean_se(Some(t.corollary_sum)));
        sub.insert("corollary_prediction".into(), float(t.corollary_prediction));
        sub.insert("upsilon_sum".into(), mean_se(Some(t.upsilon_sum)));
        sub.insert("upsilon_leading".into(), mean_se(Some(t.upsilon_leading)));
        o.insert("subtree_sums".into(), Value::Object(sub));
    }
    Value::Object(o)
}

pub fn write_json<W: Write>(mut out: W, summaries: &[Value]) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&Value::Array(summaries.to_vec())).expect("serialisable");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Result<Self, CliError> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        writer.write_record(CSV_HEADER)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, r: &ReplicationRecord) -> Result<(), CliError> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        self.writer.write_record([
            r.rep.to_string(),
            r.seed.to_string(),
            r.family.clone(),
            r.n.to_string(),
            r.vertices.to_string(),
            r.height.to_string(),
            opt(r.last_depth.map(|d| d.to_string())),
            opt(r.mean_depth.map(|m| m.to_string())),
            r.psi.to_string(),
            r.upsilon.to_string(),
            r.bad.to_string(),
            r.epsilon.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Parse replication rows written by [`CsvSink`].
pub fn read_records<R: Read>(input: R) -> Result<Vec<ReplicationRecord>, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(CliError::Config(format!("unexpected CSV header: {}", header.join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let field = |j: usize| row.get(j).unwrap_or("");
        let int = |j: usize| -> Result<u64, CliError> {
            field(j)
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("line {line}: bad {} `{}`", CSV_HEADER[j], field(j))))
        };
        let real = |j: usize| -> Result<f64, CliError> {
            field(j)
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("line {line}: bad {} `{}`", CSV_HEADER[j], field(j))))
        };
        out.push(ReplicationRecord {
            rep: int(0)?,
            seed: int(1)?,
            family: field(2).to_string(),
            n: int(3)?,
            vertices: int(4)?,
            height: int(5)? as u32,
            last_depth: if field(6).is_empty() { None } else { Some(int(6)? as u32) },
            mean_depth: if field(7).is_empty() { None } else { Some(real(7)?) },
            psi: int(8)?,
            upsilon: int(9)?,
            bad: int(10)?,
            epsilon: real(11)?,
        });
    }
    Ok(out)
}

/// Two-column `t,value` dump of a grid function.
pub fn write_grid<W: Write>(mut out: W, times: impl Iterator<Item = f64>, values: &[f64]) -> Result<(), CliError> {
    writeln!(out, "t,value")?;
    for (t, v) in times.zip(values) {
        writeln!(out, "{},{}", sig12(t), sig12(*v))?;
    }
    Ok(())
}
