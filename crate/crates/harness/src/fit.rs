//! Ordinary least squares on `(log x, log y)`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub group: Option<String>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Fit `log y = intercept + slope * log x`. Points sharing an `x` are averaged
/// (in linear space) first. Needs at least three distinct positive `x` and positive `y`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<FitResult, String> {
    if xs.len() != ys.len() {
        return Err("x and y differ in length".into());
    }
    let mut by_x: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(format!("non-positive point ({x}, {y})"));
        }
        let e = by_x.entry(x.to_bits()).or_insert((x, 0.0, 0));
        e.1 += y;
        e.2 += 1;
    }
    if by_x.len() < 3 {
        return Err(format!("need at least 3 distinct x values, got {}", by_x.len()));
    }
    let pts: Vec<(f64, f64)> = by_x
        .values()
        .map(|&(x, sum, n)| (x.ln(), (sum / n as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(FitResult {
        group: None,
        slope,
        intercept,
        r_squared,
        n_points: pts.len(),
    })
}

/// Per-group fits over a CSV file. Rows with non-positive or missing `y` are
/// skipped and reported in the returned warnings.
pub fn fit_csv(
    path: &Path,
    x_col: &str,
    y_col: &str,
    group_col: Option<&str>,
) -> Result<(Vec<Result<FitResult, String>>, Vec<String>), String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("column `{name}` not found"))
    };
    let (xi, yi) = (col(x_col)?, col(y_col)?);
    let gi = group_col.map(col).transpose()?;

    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = line + 2;
        let x: f64 = match rec.get(xi).and_then(|s| s.trim().parse().ok()) {
            Some(x) if x > 0.0 => x,
            _ => {
                warnings.push(format!("row {row}: skipped, `{x_col}` is missing or not positive"));
                continue;
            }
        };
        let y: f64 = match rec.get(yi).and_then(|s| s.trim().parse().ok()) {
            Some(y) if y > 0.0 => y,
            _ => {
                warnings.push(format!("row {row}: skipped, `{y_col}` is missing or not positive"));
                continue;
            }
        };
        let key = gi.and_then(|g| rec.get(g)).unwrap_or("").to_string();
        let e = groups.entry(key).or_default();
        e.0.push(x);
        e.1.push(y);
    }
    let fits = groups
        .into_iter()
        .map(|(g, (xs, ys))| {
            fit_loglog(&xs, &ys)
                .map(|mut f| {
                    f.group = gi.map(|_| g.clone());
                    f
                })
                .map_err(|e| if gi.is_some() { format!("group `{g}`: {e}") } else { e })
        })
        .collect();
    Ok((fits, warnings))
}
