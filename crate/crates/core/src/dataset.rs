//! Module-metric datasets: PROMISE-style CSV loading and seeded synthetic
//! generation.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::Label;

/// One software module: identifier, product metrics and true defect label.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub true_label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub records: Vec<ModuleRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn defective_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.true_label.is_defective())
            .count()
    }

    /// Checks what a simulation needs: at least two records, both classes.
    pub fn validate_for_experiment(&self) -> Result<()> {
        if self.records.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "dataset",
                reason: format!(
                    "`{}` has {} record(s), need at least 2",
                    self.name,
                    self.len()
                ),
            });
        }
        let defective = self.defective_count();
        if defective == 0 || defective == self.len() {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    /// Serializes to the CSV layout accepted by [`parse_dataset`] with the
    /// default options: `name`, the feature columns, then `bug` as 0/1.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["name"];
        header.extend(self.feature_names.iter().map(String::as_str));
        header.push("bug");
        // Writing into a Vec cannot fail.
        w.write_record(&header).expect("in-memory write");
        for rec in &self.records {
            let mut row = Vec::with_capacity(rec.features.len() + 2);
            row.push(rec.id.clone());
            // `{}` on f64 prints the shortest round-trippable form.
            row.extend(rec.features.iter().map(|v| v.to_string()));
            row.push(u8::from(rec.true_label.is_defective()).to_string());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
    }
}

/// How the label column is binarized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelRule {
    /// Defective iff the label value is strictly greater than the threshold.
    GreaterThan(f64),
}

impl Default for LabelRule {
    fn default() -> Self {
        LabelRule::GreaterThan(0.0)
    }
}

impl LabelRule {
    pub fn apply(self, value: f64) -> Label {
        match self {
            LabelRule::GreaterThan(t) => Label::from_defective(value > t),
        }
    }
}

/// Header names that are always treated as identifiers, even when their
/// values happen to be numeric (PROMISE files carry a numeric `version`).
pub const DEFAULT_ID_COLUMNS: &[&str] = &[
    "name", "version", "id", "project", "class", "file", "module",
];

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: String,
    pub label_rule: LabelRule,
    pub id_columns: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            label_column: "bug".to_string(),
            label_rule: LabelRule::default(),
            id_columns: DEFAULT_ID_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LoadOptions {
    pub fn with_label_column(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            ..Self::default()
        }
    }
}

/// Loads a dataset from a CSV file. The dataset is named after the file stem.
pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    parse_dataset(&name, &bytes, options)
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses CSV bytes into a [`Dataset`].
///
/// Row numbers in errors are 1-based file lines (the header is row 1).
/// A column is an identifier when its header is one of `options.id_columns`
/// (case-insensitive) or when its first data cell is not a finite number;
/// every other column except the label is a feature.
pub fn parse_dataset(name: &str, bytes: &[u8], options: &LoadOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            row: i + 1,
            message: e.to_string(),
        })?;
        rows.push(rec);
    }
    let mut rows = rows.into_iter();
    let header = rows.next().ok_or(Error::MissingHeader)?;
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::MissingHeader);
    }
    let body: Vec<csv::StringRecord> = rows.collect();

    let label_idx = header
        .iter()
        .position(|h| *h == options.label_column)
        .ok_or_else(|| Error::MissingLabelColumn(options.label_column.clone()))?;
    if body.is_empty() {
        return Err(Error::EmptyData);
    }

    for (i, rec) in body.iter().enumerate() {
        if rec.len() != header.len() {
            return Err(Error::Csv {
                row: i + 2,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
    }

    let first = &body[0];
    let is_id_column = |j: usize| {
        options
            .id_columns
            .iter()
            .any(|c| c.eq_ignore_ascii_case(&header[j]))
            || parse_number(&first[j]).is_none()
    };
    let mut id_cols = Vec::new();
    let mut feature_cols = Vec::new();
    for j in 0..header.len() {
        if j == label_idx {
            continue;
        }
        if is_id_column(j) {
            id_cols.push(j);
        } else {
            feature_cols.push(j);
        }
    }

    let mut records = Vec::with_capacity(body.len());
    for (i, rec) in body.iter().enumerate() {
        let row = i + 2;
        let cell_value = |j: usize| -> Result<f64> {
            let raw = rec[j].trim();
            if raw.is_empty() {
                return Err(Error::MissingCell {
                    row,
                    column: header[j].clone(),
                });
            }
            parse_number(raw).ok_or_else(|| Error::NonNumericCell {
                row,
                column: header[j].clone(),
                value: raw.to_string(),
            })
        };
        let features = feature_cols
            .iter()
            .map(|&j| cell_value(j))
            .collect::<Result<Vec<_>>>()?;
        let label = options.label_rule.apply(cell_value(label_idx)?);
        let id = if id_cols.is_empty() {
            format!("row{}", row)
        } else {
            id_cols
                .iter()
                .map(|&j| rec[j].trim())
                .collect::<Vec<_>>()
                .join("/")
        };
        records.push(ModuleRecord {
            id,
            features,
            true_label: label,
        });
    }

    Ok(Dataset {
        name: name.to_string(),
        feature_names: feature_cols.iter().map(|&j| header[j].clone()).collect(),
        records,
    })
}

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_modules: usize,
    pub defect_rate: f64,
    pub n_features: usize,
    pub separation: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_modules: 200,
            defect_rate: 0.3,
            n_features: 10,
            separation: 1.5,
        }
    }
}

impl SyntheticSpec {
    /// Parses `N:RATE:FEATURES:SEP`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::InvalidParameter {
            name: "synthetic",
            reason,
        };
        let parts: Vec<&str> = text.trim().split(':').collect();
        if parts.len() != 4 {
            return Err(bad(format!("expected N:RATE:FEATURES:SEP, got `{text}`")));
        }
        let n_modules = parts[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| bad(format!("module count `{}`: {e}", parts[0])))?;
        let defect_rate = parts[1]
            .trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("defect rate `{}`: {e}", parts[1])))?;
        let n_features = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| bad(format!("feature count `{}`: {e}", parts[2])))?;
        let separation = parts[3]
            .trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("separation `{}`: {e}", parts[3])))?;
        let spec = Self {
            n_modules,
            defect_rate,
            n_features,
            separation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modules == 0 {
            return Err(Error::InvalidParameter {
                name: "n_modules",
                reason: "must be positive".into(),
            });
        }
        if self.n_modules < 10 {
            return Err(Error::InvalidParameter {
                name: "n_modules",
                reason: format!("{} is below the minimum of 10", self.n_modules),
            });
        }
        if !(self.defect_rate > 0.0 && self.defect_rate < 1.0) {
            return Err(Error::InvalidProbability {
                name: "defect_rate",
                value: self.defect_rate,
            });
        }
        if self.n_features == 0 {
            return Err(Error::InvalidParameter {
                name: "n_features",
                reason: "must be positive".into(),
            });
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "separation",
                reason: format!("{} is not a finite nonnegative number", self.separation),
            });
        }
        Ok(())
    }

    pub fn to_arg(&self) -> String {
        format!(
            "{}:{}:{}:{}",
            self.n_modules, self.defect_rate, self.n_features, self.separation
        )
    }
}

/// Loading of feature `j` on the latent defect-proneness factor. Loadings fall
/// linearly from 0.9 to 0.1 so the features range from informative to noise.
fn loading(j: usize, n_features: usize) -> f64 {
    if n_features == 1 {
        0.9
    } else {
        0.9 - 0.8 * j as f64 / (n_features - 1) as f64
    }
}

/// Generates a seeded synthetic dataset.
///
/// Each module draws its label with probability `defect_rate`, then a latent
/// factor `z ~ N(separation * label, 1)`; feature `j` is
/// `a_j z + sqrt(1 - a_j^2) e_j` with independent standard-normal noise `e_j`.
/// Defective modules are therefore shifted by `separation` along the latent
/// direction, and the features are mutually correlated like real size and
/// complexity metrics.
pub fn generate_synthetic(name: &str, spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let loadings: Vec<f64> = (0..spec.n_features)
        .map(|j| loading(j, spec.n_features))
        .collect();
    let width = spec.n_modules.to_string().len().max(4);

    let records = (0..spec.n_modules)
        .map(|i| {
            let defective = rng.random::<f64>() < spec.defect_rate;
            let shift = if defective { spec.separation } else { 0.0 };
            let z: f64 = rng.sample::<f64, _>(StandardNormal) + shift;
            let features = loadings
                .iter()
                .map(|&a| {
                    let e: f64 = rng.sample(StandardNormal);
                    a * z + (1.0 - a * a).sqrt() * e
                })
                .collect();
            ModuleRecord {
                id: format!("m{:0width$}", i + 1),
                features,
                true_label: Label::from_defective(defective),
            }
        })
        .collect();

    Ok(Dataset {
        name: name.to_string(),
        feature_names: (1..=spec.n_features).map(|j| format!("x{j}")).collect(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> LoadOptions {
        LoadOptions::default()
    }

    #[test]
    fn loads_three_row_csv() {
        let csv = "name,wmc,loc,bug\na,1,10,0\nb,2,20,2\nc,3,30,0\n";
        let ds = parse_dataset("t", csv.as_bytes(), &opts()).unwrap();
        assert_eq!(ds.feature_names, vec!["wmc", "loc"]);
        assert_eq!(ds.records.len(), 3);
        let labels: Vec<Label> = ds.records.iter().map(|r| r.true_label).collect();
        assert_eq!(
            labels,
            vec![Label::NonDefective, Label::Defective, Label::NonDefective]
        );
        assert_eq!(ds.records[1].features, vec![2.0, 20.0]);
        assert_eq!(ds.records[1].id, "b");
    }

    #[test]
    fn missing_label_column() {
        let csv = "name,wmc,loc\na,1,10\n";
        let err = parse_dataset("t", csv.as_bytes(), &opts()).unwrap_err();
        assert!(matches!(err, Error::MissingLabelColumn(c) if c == "bug"));
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let csv = "name,wmc,bug\na,1,0\nb,oops,1\n";
        match parse_dataset("t", csv.as_bytes(), &opts()).unwrap_err() {
            Error::NonNumericCell { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (3, "wmc", "oops"));
            }
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn blank_feature_cell_is_rejected() {
        let csv = "name,wmc,bug\na,1,0\nb,,1\n";
        assert!(matches!(
            parse_dataset("t", csv.as_bytes(), &opts()),
            Err(Error::MissingCell { row: 3, .. })
        ));
    }

    #[test]
    fn infinite_cell_is_rejected() {
        let csv = "name,wmc,bug\na,1,0\nb,inf,1\n";
        assert!(matches!(
            parse_dataset("t", csv.as_bytes(), &opts()),
            Err(Error::NonNumericCell { row: 3, .. })
        ));
    }

    #[test]
    fn empty_body_and_missing_header() {
        assert!(matches!(
            parse_dataset("t", b"name,wmc,bug\n", &opts()),
            Err(Error::EmptyData)
        ));
        assert!(matches!(
            parse_dataset("t", b"", &opts()),
            Err(Error::MissingHeader)
        ));
    }

    #[test]
    fn ragged_row_is_rejected() {
        let csv = "name,wmc,bug\na,1,0\nb,2\n";
        assert!(matches!(
            parse_dataset("t", csv.as_bytes(), &opts()),
            Err(Error::Csv { row: 3, .. })
        ));
    }

    #[test]
    fn promise_layout_excludes_identifier_columns() {
        let csv = "name,version,name,wmc,dit,bug\n\
                   ant,1.7,org.A,5,1,0\n\
                   ant,1.7,org.B,9,2,3\n";
        let ds = parse_dataset("ant-1.7", csv.as_bytes(), &opts()).unwrap();
        assert_eq!(ds.feature_names, vec!["wmc", "dit"]);
        assert_eq!(ds.records[1].id, "ant/1.7/org.B");
        assert!(ds.records[1].true_label.is_defective());
    }

    #[test]
    fn custom_label_column_and_rule() {
        let csv = "f,defects\n1,0.5\n2,3\n";
        let options = LoadOptions {
            label_column: "defects".into(),
            label_rule: LabelRule::GreaterThan(1.0),
            ..LoadOptions::default()
        };
        let ds = parse_dataset("t", csv.as_bytes(), &options).unwrap();
        assert_eq!(ds.records[0].true_label, Label::NonDefective);
        assert_eq!(ds.records[1].true_label, Label::Defective);
        assert_eq!(ds.records[0].id, "row2");
    }

    #[test]
    fn load_from_missing_file() {
        assert!(matches!(
            load_dataset("/nonexistent/nope.csv", &opts()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            n_modules: 200,
            defect_rate: 0.3,
            n_features: 4,
            separation: 2.0,
        };
        let a = generate_synthetic("s", &spec, 7).unwrap();
        let b = generate_synthetic("s", &spec, 7).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a, b);
        let c = generate_synthetic("s", &spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_defect_count_concentrates() {
        let spec = SyntheticSpec {
            n_modules: 10_000,
            defect_rate: 0.3,
            n_features: 2,
            separation: 1.0,
        };
        let ds = generate_synthetic("s", &spec, 11).unwrap();
        let bound = 3.0 * (10_000.0_f64 * 0.3 * 0.7).sqrt();
        let diff = (ds.defective_count() as f64 - 3000.0).abs();
        assert!(diff <= bound, "{} defective", ds.defective_count());
    }

    #[test]
    fn synthetic_rejects_bad_parameters() {
        let spec = SyntheticSpec {
            defect_rate: 1.0,
            ..SyntheticSpec::default()
        };
        assert!(matches!(
            generate_synthetic("s", &spec, 1),
            Err(Error::InvalidProbability { .. })
        ));
        let spec = SyntheticSpec {
            n_modules: 0,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic("s", &spec, 1).is_err());
    }

    #[test]
    fn synthetic_spec_parsing() {
        let s = SyntheticSpec::parse("200:0.3:10:1.5").unwrap();
        assert_eq!(s, SyntheticSpec::default());
        assert_eq!(SyntheticSpec::parse(&s.to_arg()).unwrap(), s);
        assert!(SyntheticSpec::parse("200:0.3:10").is_err());
        assert!(SyntheticSpec::parse("x:0.3:10:1").is_err());
        assert!(SyntheticSpec::parse("200:1.3:10:1").is_err());
    }

    #[test]
    fn csv_export_round_trips() {
        let ds = generate_synthetic("syn", &SyntheticSpec::default(), 3).unwrap();
        let back = parse_dataset("syn", ds.to_csv().as_bytes(), &opts()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn experiment_validation() {
        let csv = "name,wmc,bug\na,1,0\nb,2,0\n";
        let ds = parse_dataset("t", csv.as_bytes(), &opts()).unwrap();
        assert!(matches!(
            ds.validate_for_experiment(),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn export_quotes_awkward_fields() {
        let csv = "name,\"loc,\nraw\",bug\n\"a,b\",1.5,1\nc,2,0\n";
        let ds = parse_dataset("t", csv.as_bytes(), &opts()).unwrap();
        assert_eq!(ds.feature_names, vec!["loc,\nraw"]);
        let again = parse_dataset("t", ds.to_csv().as_bytes(), &opts()).unwrap();
        assert_eq!(again.feature_names, ds.feature_names);
        assert_eq!(again.records, ds.records);
    }
}
