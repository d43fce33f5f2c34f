use std::collections::HashMap;
use std::fmt::Write as _;

use super::{csv_field, format_sig9};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{pca_project_2d, Matrix};

/// Joint 2D PCA of two named embedding sets, as CSV `key,set,label,x,y`.
///
/// Both sets share one projection so their relative layout is comparable.
/// `labels` maps keys to free-form labels; unlabeled rows get an empty field.
pub fn export_projection(
    sets: &[(&str, &EmbeddingMatrix)],
    labels: Option<&HashMap<String, String>>,
) -> Result<String> {
    let dim = match sets.first() {
        Some((_, e)) => e.dim(),
        None => return Err(Error::InvalidInput("no embedding sets to project".into())),
    };
    if let Some((name, e)) = sets.iter().find(|(_, e)| e.dim() != dim) {
        return Err(Error::DimensionError(format!(
            "set {name:?} has dimension {} but the first set has {dim}",
            e.dim()
        )));
    }
    let rows: Vec<&[f64]> = sets.iter().flat_map(|(_, e)| e.vectors().row_iter()).collect();
    let coords = pca_project_2d(&Matrix::from_rows(&rows)?)?;

    let mut out = String::from("key,set,label,x,y\n");
    let mut r = 0;
    for (name, e) in sets {
        for key in e.keys() {
            let label = labels.and_then(|l| l.get(key)).map(String::as_str).unwrap_or("");
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(key),
                csv_field(name),
                csv_field(label),
                format_sig9(coords.row(r)[0]),
                format_sig9(coords.row(r)[1])
            );
            r += 1;
        }
    }
    Ok(out)
}
