//! Input ingestion: a JSON document (canonical format) or a CSV pair
//! (observations file + covariance file). The document carries exactly one
//! covariance source: an explicit matrix, raw sample rows, or multinomial
//! counts; counts mode derives the observations (empirical proportions)
//! itself and therefore forbids an observations field.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use rank_verify::matrix::Matrix;
use rank_verify::model::{
    multinomial_gaussian_approx, sample_covariance, CovFamilyKind, CovFamilyTag, GaussianModel,
};

use crate::{CliError, CliResult};

/// Parsed and validated input: the observation model plus presentation
/// extras. `family` is set when the construction itself fixes the
/// covariance family (multinomial counts).
#[derive(Debug)]
pub struct LoadedInput {
    pub model: GaussianModel,
    pub labels: Option<Vec<String>>,
    pub family: Option<CovFamilyTag>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    #[serde(default)]
    pub observations: Option<Vec<f64>>,
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub samples: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub counts: Option<Vec<u64>>,
    #[serde(default)]
    pub t: Option<u64>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_error(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Load a model from `input`; when `covariance_csv` is given, both files
/// are read as CSV (header row carries the labels), otherwise `input` is a
/// JSON document.
pub fn load(input: &Path, covariance_csv: Option<&Path>) -> CliResult<LoadedInput> {
    match covariance_csv {
        Some(cov_path) => load_csv_pair(input, cov_path),
        None => {
            let text = read_file(input)?;
            let doc: InputDocument = serde_json::from_str(&text)
                .map_err(|e| parse_error(input, e.to_string()))?;
            doc.into_loaded(input)
        }
    }
}

impl InputDocument {
    pub fn into_loaded(self, path: &Path) -> CliResult<LoadedInput> {
        let sources = usize::from(self.covariance.is_some())
            + usize::from(self.samples.is_some())
            + usize::from(self.counts.is_some());
        if sources != 1 {
            return Err(parse_error(
                path,
                format!(
                    "exactly one covariance source required (covariance, samples, or counts); \
                     found {sources}"
                ),
            ));
        }
        let (model, family) = if let Some(counts) = self.counts {
            if self.observations.is_some() {
                return Err(parse_error(
                    path,
                    "counts mode derives observations from the counts; \
                     remove the observations field",
                ));
            }
            let t = self.t.ok_or_else(|| {
                parse_error(path, "counts mode requires the total trials field t")
            })?;
            let model = multinomial_gaussian_approx(&counts, t)?;
            let family = CovFamilyTag {
                kind: CovFamilyKind::MultinomialApprox,
                parameter: None,
            };
            (model, Some(family))
        } else {
            let observations = self.observations.ok_or_else(|| {
                parse_error(path, "observations field required with covariance or samples")
            })?;
            let sigma = if let Some(rows) = self.covariance {
                Matrix::from_rows(&rows)?
            } else {
                sample_covariance(self.samples.as_deref().unwrap_or_default())?
            };
            (GaussianModel::new(observations, sigma)?, None)
        };
        if let Some(labels) = &self.labels {
            if labels.len() != model.n() {
                return Err(parse_error(
                    path,
                    format!("{} labels for {} observations", labels.len(), model.n()),
                ));
            }
        }
        Ok(LoadedInput {
            model,
            labels: self.labels,
            family,
        })
    }
}

fn parse_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read_file(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, "empty file; expected a header row"))?;
    let labels: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (line_idx, line) in lines {
        let mut row = Vec::with_capacity(labels.len());
        for (col, cell) in line.split(',').enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                parse_error(
                    path,
                    format!("line {}, column {}: not a number: {:?}", line_idx + 1, col + 1, cell.trim()),
                )
            })?;
            row.push(value);
        }
        if row.len() != labels.len() {
            return Err(parse_error(
                path,
                format!(
                    "line {}: {} cells but {} header columns",
                    line_idx + 1,
                    row.len(),
                    labels.len()
                ),
            ));
        }
        rows.push(row);
    }
    Ok((labels, rows))
}

fn load_csv_pair(obs_path: &Path, cov_path: &Path) -> CliResult<LoadedInput> {
    let (labels, obs_rows) = parse_csv(obs_path)?;
    if obs_rows.len() != 1 {
        return Err(parse_error(
            obs_path,
            format!("expected exactly one observation row, found {}", obs_rows.len()),
        ));
    }
    let (cov_labels, cov_rows) = parse_csv(cov_path)?;
    if cov_labels != labels {
        return Err(parse_error(
            cov_path,
            "covariance header does not match the observations header",
        ));
    }
    let sigma = Matrix::from_rows(&cov_rows)?;
    let model = GaussianModel::new(obs_rows.into_iter().next().expect("one row"), sigma)?;
    if labels.len() != model.n() {
        return Err(parse_error(
            obs_path,
            format!("{} labels for {} observations", labels.len(), model.n()),
        ));
    }
    Ok(LoadedInput {
        model,
        labels: Some(labels),
        family: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp_file(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("rank-verify-input-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn json_covariance_document() {
        let path = temp_file(
            "cov.json",
            r#"{"observations": [3.5, 0.0], "covariance": [[1.0, 0.0], [0.0, 1.0]],
                "labels": ["a", "b"]}"#,
        );
        let loaded = load(&path, None).unwrap();
        assert_eq!(loaded.model.n(), 2);
        assert_eq!(loaded.labels.as_deref().unwrap(), ["a", "b"]);
        assert!(loaded.family.is_none());
    }

    #[test]
    fn json_counts_document() {
        let path = temp_file("counts.json", r#"{"counts": [60, 30, 10], "t": 100}"#);
        let loaded = load(&path, None).unwrap();
        assert_eq!(loaded.model.n(), 3);
        assert!((loaded.model.x()[0] - 0.6).abs() < 1e-15);
        assert!((loaded.model.sigma().get(0, 1) + 0.0018).abs() < 1e-18);
        assert_eq!(
            loaded.family.unwrap().kind,
            CovFamilyKind::MultinomialApprox
        );
    }

    #[test]
    fn exactly_one_source() {
        let none = temp_file("none.json", r#"{"observations": [1.0, 0.0]}"#);
        assert!(matches!(load(&none, None), Err(CliError::Parse { .. })));
        let two = temp_file(
            "two.json",
            r#"{"observations": [1.0, 0.0], "covariance": [[1,0],[0,1]],
                "counts": [1, 1], "t": 2}"#,
        );
        assert!(matches!(load(&two, None), Err(CliError::Parse { .. })));
    }

    #[test]
    fn counts_mode_forbids_observations() {
        let path = temp_file(
            "counts-obs.json",
            r#"{"observations": [0.6, 0.4], "counts": [60, 40], "t": 100}"#,
        );
        let err = load(&path, None).unwrap_err();
        assert!(err.to_string().contains("remove the observations field"));
    }

    #[test]
    fn label_count_must_match() {
        let path = temp_file(
            "labels.json",
            r#"{"observations": [1.0, 0.0], "covariance": [[1,0],[0,1]], "labels": ["a"]}"#,
        );
        assert!(matches!(load(&path, None), Err(CliError::Parse { .. })));
    }

    #[test]
    fn unknown_fields_rejected() {
        let path = temp_file(
            "unknown.json",
            r#"{"observations": [1.0, 0.0], "covariance": [[1,0],[0,1]], "mean": [0, 0]}"#,
        );
        assert!(matches!(load(&path, None), Err(CliError::Parse { .. })));
    }

    #[test]
    fn csv_pair() {
        let obs = temp_file("obs.csv", "alpha, beta\n3.5, 0.0\n");
        let cov = temp_file("cov.csv", "alpha, beta\n1.0, 0.0\n0.0, 1.0\n");
        let loaded = load(&obs, Some(cov.as_path())).unwrap();
        assert_eq!(loaded.model.x(), &[3.5, 0.0]);
        assert_eq!(loaded.labels.as_deref().unwrap(), ["alpha", "beta"]);
    }

    #[test]
    fn csv_header_mismatch_and_bad_cell() {
        let obs = temp_file("obs2.csv", "a,b\n1.0,2.0\n");
        let cov = temp_file("cov2.csv", "a,c\n1.0,0.0\n0.0,1.0\n");
        let err = load(&obs, Some(cov.as_path())).unwrap_err();
        assert!(err.to_string().contains("header"));
        let bad = temp_file("bad.csv", "a,b\n1.0,oops\n");
        let err = load(&bad, Some(bad.as_path())).unwrap_err();
        assert!(err.to_string().contains("not a number"), "{err}");
    }
}
