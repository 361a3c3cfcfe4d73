//! Input and output file formats: per-risk CSV tables, prior matrices, the
//! JSON manifest, scenario files and saved reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::pipeline::SelectionReport;
use crate::ranking::PriorSpec;
use crate::risk::RiskTable;
use crate::simulate::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatErrorKind {
    /// The configuration is wrong: manifest, scenario, flags.
    Config,
    /// A data file is malformed or inconsistent.
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct FormatError {
    pub kind: FormatErrorKind,
    /// File name or other origin of the text.
    pub source_name: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_name)?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
            if let Some(c) = self.column {
                write!(f, ":{c}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

impl FormatError {
    pub fn config(source: &str, message: impl Into<String>) -> Self {
        Self::new(FormatErrorKind::Config, source, None, None, message)
    }

    pub fn data(source: &str, message: impl Into<String>) -> Self {
        Self::new(FormatErrorKind::Data, source, None, None, message)
    }

    fn new(
        kind: FormatErrorKind,
        source: &str,
        line: Option<usize>,
        column: Option<usize>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            kind,
            source_name: source.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    fn at(mut self, line: usize, column: Option<usize>) -> Self {
        self.line = Some(line);
        self.column = column;
        self
    }

    fn from_json(kind: FormatErrorKind, source: &str, e: serde_json::Error) -> Self {
        let line = (e.line() > 0).then_some(e.line());
        let column = (e.column() > 0).then_some(e.column());
        Self::new(kind, source, line, column, e.to_string())
    }

    fn from_csv(source: &str, e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize);
        Self::new(FormatErrorKind::Data, source, line, None, e.to_string())
    }
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

/// One risk function measured for every hyperparameter on every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCsv {
    pub labels: Vec<String>,
    /// `rows[sample][hyperparam]`.
    pub rows: Vec<Vec<f64>>,
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn check_labels(source: &str, labels: &[String], line: usize) -> FormatResult<()> {
    let mut seen = BTreeSet::new();
    for (c, l) in labels.iter().enumerate() {
        if l.is_empty() {
            return Err(FormatError::data(source, "empty hyperparameter label").at(line, Some(c + 1)));
        }
        if !seen.insert(l) {
            return Err(FormatError::data(source, format!("duplicate label `{l}`")).at(line, Some(c + 1)));
        }
    }
    Ok(())
}

/// Header row of hyperparameter labels, then one row of losses in `[0, 1]`
/// per sample.
pub fn parse_risk_csv(text: &str, source: &str) -> FormatResult<RiskCsv> {
    let mut rdr = reader(text);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| FormatError::from_csv(source, e))?,
        None => return Err(FormatError::data(source, "empty file, expected a header row")),
    };
    let header_line = header.position().map_or(1, |p| p.line() as usize);
    let labels: Vec<String> = header.iter().map(str::to_string).collect();
    check_labels(source, &labels, header_line)?;
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| FormatError::from_csv(source, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != labels.len() {
            return Err(FormatError::data(
                source,
                format!("expected {} values, found {}", labels.len(), rec.len()),
            )
            .at(line, None));
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| match field.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
                Ok(v) => Err(FormatError::data(source, format!("loss {v} outside [0, 1]")).at(line, Some(c + 1))),
                Err(_) => Err(FormatError::data(source, format!("`{field}` is not a number")).at(line, Some(c + 1))),
            })
            .collect::<FormatResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FormatError::data(source, "no sample rows"));
    }
    Ok(RiskCsv { labels, rows })
}

fn resolve_label(source: &str, labels: &[String], token: &str, line: usize, column: usize) -> FormatResult<usize> {
    if let Some(i) = labels.iter().position(|l| l == token) {
        return Ok(i);
    }
    match token.parse::<usize>() {
        Ok(i) if i < labels.len() => Ok(i),
        _ => Err(FormatError::data(source, format!("unknown hyperparameter `{token}`")).at(line, Some(column))),
    }
}

fn parse_eta(source: &str, field: &str, line: usize, column: usize) -> FormatResult<f64> {
    match field.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(FormatError::data(source, format!("`{field}` is not a probability")).at(line, Some(column))),
    }
}

/// Prior matrix over `labels`. Either square with a header of labels (and an
/// optional leading label column), or triplets under an `i,j,eta` header,
/// where a missing reverse pair is `1 - eta` and a missing pair is 0.5.
pub fn parse_priors_csv(text: &str, labels: &[String], source: &str) -> FormatResult<Vec<Vec<f64>>> {
    let n = labels.len();
    let mut eta = vec![vec![0.5; n]; n];
    let mut rdr = reader(text);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| FormatError::from_csv(source, e))?,
        None => return Err(FormatError::data(source, "empty prior file")),
    };
    let header_line = header.position().map_or(1, |p| p.line() as usize);
    let header: Vec<&str> = header.iter().collect();

    if header == ["i", "j", "eta"] {
        let mut given: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for rec in records {
            let rec = rec.map_err(|e| FormatError::from_csv(source, e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != 3 {
                return Err(FormatError::data(source, "expected `i,j,eta`").at(line, None));
            }
            let i = resolve_label(source, labels, &rec[0], line, 1)?;
            let j = resolve_label(source, labels, &rec[1], line, 2)?;
            if i == j {
                return Err(FormatError::data(source, "diagonal entries are not allowed").at(line, None));
            }
            let v = parse_eta(source, &rec[2], line, 3)?;
            if given.insert((i, j), v).is_some() {
                return Err(FormatError::data(source, format!("pair ({},{}) given twice", &rec[0], &rec[1])).at(line, None));
            }
        }
        for (&(i, j), &v) in &given {
            eta[i][j] = v;
            if !given.contains_key(&(j, i)) {
                eta[j][i] = 1.0 - v;
            }
        }
        return Ok(eta);
    }

    let with_row_labels = header.len() == n + 1;
    let cols: Vec<&str> = if with_row_labels { header[1..].to_vec() } else { header.clone() };
    if cols.len() != n {
        return Err(FormatError::data(
            source,
            format!("square prior needs {n} columns, found {}", cols.len()),
        )
        .at(header_line, None));
    }
    let offset = usize::from(with_row_labels);
    let col_index = cols
        .iter()
        .enumerate()
        .map(|(c, l)| resolve_label(source, labels, l, header_line, c + 1 + offset))
        .collect::<FormatResult<Vec<usize>>>()?;
    if col_index.iter().collect::<BTreeSet<_>>().len() != n {
        return Err(FormatError::data(source, "prior columns repeat a hyperparameter").at(header_line, None));
    }
    let mut seen_rows = BTreeSet::new();
    let mut r = 0;
    for rec in records {
        let rec = rec.map_err(|e| FormatError::from_csv(source, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != n + offset {
            return Err(FormatError::data(
                source,
                format!("expected {} fields, found {}", n + offset, rec.len()),
            )
            .at(line, None));
        }
        if r >= n {
            return Err(FormatError::data(source, format!("more than {n} prior rows")).at(line, None));
        }
        let i = if with_row_labels { resolve_label(source, labels, &rec[0], line, 1)? } else { col_index[r] };
        if !seen_rows.insert(i) {
            return Err(FormatError::data(source, "prior rows repeat a hyperparameter").at(line, None));
        }
        for c in 0..n {
            let v = parse_eta(source, &rec[c + offset], line, c + 1 + offset)?;
            let j = col_index[c];
            if i != j {
                eta[i][j] = v;
            }
        }
        r += 1;
    }
    if r != n {
        return Err(FormatError::data(source, format!("expected {n} prior rows, found {r}")));
    }
    Ok(eta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskEntry {
    pub name: String,
    pub file: PathBuf,
    pub constrained: bool,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub risks: Vec<RiskEntry>,
    /// Expected header of every risk file; taken from the first file when
    /// absent.
    #[serde(default)]
    pub hyperparameters: Option<Vec<String>>,
    #[serde(default)]
    pub priors: Option<PathBuf>,
    #[serde(default)]
    pub pseudocount: Option<f64>,
}

impl Manifest {
    pub fn check(&self, source: &str) -> FormatResult<()> {
        if !self.risks.iter().any(|r| r.constrained) {
            return Err(FormatError::config(source, "risks: at least one constrained risk is required"));
        }
        let mut names = BTreeSet::new();
        for (i, r) in self.risks.iter().enumerate() {
            if !names.insert(&r.name) {
                return Err(FormatError::config(source, format!("risks[{i}].name: duplicate `{}`", r.name)));
            }
            match (r.constrained, r.alpha) {
                (true, None) => {
                    return Err(FormatError::config(
                        source,
                        format!("risks[{i}].alpha: constrained risk `{}` needs an alpha", r.name),
                    ))
                }
                (true, Some(a)) if !(a > 0.0 && a < 1.0) => {
                    return Err(FormatError::config(source, format!("risks[{i}].alpha: {a} not in (0, 1)")))
                }
                (false, Some(_)) => {
                    return Err(FormatError::config(
                        source,
                        format!("risks[{i}].alpha: unconstrained risk `{}` takes no alpha", r.name),
                    ))
                }
                _ => {}
            }
        }
        if let Some(p) = self.pseudocount {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(FormatError::config(source, format!("pseudocount: {p} is not a non-negative number")));
            }
        }
        if let Some(h) = &self.hyperparameters {
            check_labels(source, h, 0).map_err(|mut e| {
                e.kind = FormatErrorKind::Config;
                e.line = None;
                e.column = None;
                e.message = format!("hyperparameters: {}", e.message);
                e
            })?;
        }
        Ok(())
    }
}

pub fn parse_manifest(text: &str, source: &str) -> FormatResult<Manifest> {
    let m: Manifest =
        serde_json::from_str(text).map_err(|e| FormatError::from_json(FormatErrorKind::Config, source, e))?;
    m.check(source)?;
    Ok(m)
}

/// A manifest with every referenced file read and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    /// Constrained risks first, in manifest order, then auxiliary risks.
    pub table: RiskTable,
    pub risk_names: Vec<String>,
    pub alphas: Vec<f64>,
    /// Raw prior matrix, oriented as stored in the file.
    pub priors: Option<Vec<Vec<f64>>>,
    pub priors_path: Option<PathBuf>,
}

impl LoadedManifest {
    /// Prior with the given pseudocount; uninformative when the manifest
    /// names no prior file.
    pub fn prior(&self, pseudocount: f64, flip: bool) -> crate::Result<PriorSpec> {
        let prior = match &self.priors {
            Some(eta) => PriorSpec::new(eta.clone(), pseudocount)?,
            None => PriorSpec::uninformative(self.table.n_hyperparams()).with_pseudocount(pseudocount)?,
        };
        Ok(if flip { prior.flipped() } else { prior })
    }
}

fn read(path: &Path, what: &str) -> FormatResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| FormatError::config(&path.display().to_string(), format!("cannot read {what}: {e}")))
}

/// Reads a manifest and the files it references, resolved against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> FormatResult<LoadedManifest> {
    let source = path.display().to_string();
    let manifest = parse_manifest(&read(path, "manifest")?, &source)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut order: Vec<&RiskEntry> = manifest.risks.iter().filter(|r| r.constrained).collect();
    order.extend(manifest.risks.iter().filter(|r| !r.constrained));

    let mut labels = manifest.hyperparameters.clone();
    let mut tables = Vec::with_capacity(order.len());
    for r in &order {
        let p = base.join(&r.file);
        let name = p.display().to_string();
        let csv = parse_risk_csv(&read(&p, "risk file")?, &name)?;
        match &labels {
            None => labels = Some(csv.labels.clone()),
            Some(l) if *l != csv.labels => {
                return Err(FormatError::data(&name, "header does not match the hyperparameter labels").at(1, None))
            }
            _ => {}
        }
        if let Some((_, first)) = tables.first() {
            let first: &RiskCsv = first;
            if first.rows.len() != csv.rows.len() {
                return Err(FormatError::data(
                    &name,
                    format!("{} samples, but the first risk file has {}", csv.rows.len(), first.rows.len()),
                ));
            }
        }
        tables.push((name, csv));
    }
    let labels = labels.expect("at least one risk");
    let (n_s, n_h, n_r) = (tables[0].1.rows.len(), labels.len(), tables.len());
    let table = RiskTable::from_fn(n_s, n_h, n_r, |z, h, l| tables[l].1.rows[z][h])
        .and_then(|t| t.with_labels(labels.clone()))
        .map_err(|e| FormatError::data(&source, e.to_string()))?;

    let (priors, priors_path) = match &manifest.priors {
        Some(p) => {
            let full = base.join(p);
            let eta = parse_priors_csv(&read(&full, "prior file")?, &labels, &full.display().to_string())?;
            (Some(eta), Some(full))
        }
        None => (None, None),
    };
    Ok(LoadedManifest {
        risk_names: order.iter().map(|r| r.name.clone()).collect(),
        alphas: order.iter().filter_map(|r| r.alpha).collect(),
        manifest,
        table,
        priors,
        priors_path,
    })
}

pub fn parse_scenario(text: &str, source: &str) -> FormatResult<Scenario> {
    let s: Scenario =
        serde_json::from_str(text).map_err(|e| FormatError::from_json(FormatErrorKind::Config, source, e))?;
    s.check().map_err(|e| FormatError::config(source, e.to_string()))?;
    Ok(s)
}

pub fn parse_report(text: &str, source: &str) -> FormatResult<SelectionReport> {
    SelectionReport::from_json(text).map_err(|e| FormatError::from_json(FormatErrorKind::Data, source, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::HyperparamId;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn risk_csv_round() {
        let c = parse_risk_csv("a,b\n0,1\n0.5, 0.25\n", "r.csv").unwrap();
        assert_eq!(c.labels, vec!["a", "b"]);
        assert_eq!(c.rows, vec![vec![0.0, 1.0], vec![0.5, 0.25]]);
    }

    #[test]
    fn risk_csv_errors_have_positions() {
        let e = parse_risk_csv("a,b\n0,1\n0.5,x\n", "r.csv").unwrap_err();
        assert_eq!((e.line, e.column), (Some(3), Some(2)));
        assert_eq!(e.kind, FormatErrorKind::Data);
        assert!(e.to_string().starts_with("r.csv:3:2: "));
        let e = parse_risk_csv("a,b\n0,1.5\n", "r.csv").unwrap_err();
        assert_eq!((e.line, e.column), (Some(2), Some(2)));
        assert!(parse_risk_csv("a,b\n0\n", "r.csv").is_err());
        assert!(parse_risk_csv("a,a\n0,0\n", "r.csv").is_err());
        assert!(parse_risk_csv("", "r.csv").is_err());
        assert!(parse_risk_csv("a,b\n", "r.csv").is_err());
        assert!(parse_risk_csv("a\nNaN\n", "r.csv").is_err());
    }

    #[test]
    fn square_priors() {
        let eta = parse_priors_csv("p0,p1\n0.5,0.8\n0.2,0.5\n", &labels(2), "q").unwrap();
        assert_eq!(eta, vec![vec![0.5, 0.8], vec![0.2, 0.5]]);
        let eta = parse_priors_csv(",p1,p0\np1,0.5,0.2\np0,0.8,0.5\n", &labels(2), "q").unwrap();
        assert_eq!(eta, vec![vec![0.5, 0.8], vec![0.2, 0.5]]);
        assert!(parse_priors_csv("p0,p9\n0.5,0.8\n0.2,0.5\n", &labels(2), "q").is_err());
        assert!(parse_priors_csv("p0,p1\n0.5,0.8\n", &labels(2), "q").is_err());
    }

    #[test]
    fn triplet_priors() {
        let eta = parse_priors_csv("i,j,eta\np0,p1,0.9\n2,0,0.3\n", &labels(3), "q").unwrap();
        assert_eq!(eta[0][1], 0.9);
        assert!((eta[1][0] - 0.1).abs() < 1e-15);
        assert_eq!(eta[2][0], 0.3);
        assert!((eta[0][2] - 0.7).abs() < 1e-15);
        assert_eq!(eta[1][2], 0.5);
        assert!(parse_priors_csv("i,j,eta\np0,p0,0.9\n", &labels(2), "q").is_err());
        assert!(parse_priors_csv("i,j,eta\np0,p1,1.9\n", &labels(2), "q").is_err());
        assert!(parse_priors_csv("i,j,eta\np0,p1,0.9\np0,p1,0.9\n", &labels(2), "q").is_err());
    }

    #[test]
    fn manifest_validation() {
        let ok = r#"{"risks":[{"name":"err","file":"e.csv","constrained":true,"alpha":0.2},{"name":"len","file":"l.csv","constrained":false}]}"#;
        assert!(parse_manifest(ok, "m").is_ok());
        let missing_alpha = ok.replace(r#","alpha":0.2"#, "");
        let e = parse_manifest(&missing_alpha, "m").unwrap_err();
        assert_eq!(e.kind, FormatErrorKind::Config);
        assert!(e.message.contains("risks[0].alpha"));
        let none_constrained = ok.replace("true", "false").replace(r#","alpha":0.2"#, "");
        assert!(parse_manifest(&none_constrained, "m").is_err());
        let e = parse_manifest("{\"risks\": [", "m").unwrap_err();
        assert_eq!(e.kind, FormatErrorKind::Config);
        assert!(e.line.is_some());
        assert!(parse_manifest(&ok.replace("\"risks\"", "\"rsks\""), "m").is_err());
    }

    #[test]
    fn load_from_disk() {
        let dir = std::env::temp_dir().join(format!("rgpt-formats-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("l.csv"), "a,b\n0.9,0.1\n0.8,0.2\n").unwrap();
        std::fs::write(dir.join("e.csv"), "a,b\n0,1\n1,0\n").unwrap();
        std::fs::write(dir.join("q.csv"), "i,j,eta\na,b,0.25\n").unwrap();
        std::fs::write(
            dir.join("m.json"),
            r#"{"risks":[{"name":"len","file":"l.csv","constrained":false},{"name":"err","file":"e.csv","constrained":true,"alpha":0.3}],"priors":"q.csv"}"#,
        )
        .unwrap();
        let m = load_manifest(&dir.join("m.json")).unwrap();
        assert_eq!(m.risk_names, vec!["err", "len"]);
        assert_eq!(m.alphas, vec![0.3]);
        assert_eq!(m.table.get(1, HyperparamId(0), 0), 1.0);
        assert_eq!(m.table.get(1, HyperparamId(1), 1), 0.2);
        assert_eq!(m.table.labels(), ["a", "b"]);
        let p = m.prior(5.0, true).unwrap();
        assert_eq!(p.eta(0, 1), 0.75);

        std::fs::write(dir.join("l.csv"), "a,c\n0.9,0.1\n0.8,0.2\n").unwrap();
        assert_eq!(load_manifest(&dir.join("m.json")).unwrap_err().kind, FormatErrorKind::Data);
        std::fs::remove_file(dir.join("l.csv")).unwrap();
        assert_eq!(load_manifest(&dir.join("m.json")).unwrap_err().kind, FormatErrorKind::Config);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn scenario_and_report_errors() {
        assert_eq!(parse_scenario("{}", "s").unwrap_err().kind, FormatErrorKind::Config);
        assert_eq!(parse_report("{}", "r").unwrap_err().kind, FormatErrorKind::Data);
    }
}
