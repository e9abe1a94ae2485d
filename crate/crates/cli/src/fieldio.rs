//! Nodal fields as CSV: a `# dim=D n=N` header, then one value per line.

use std::fmt::Write as _;
use std::path::Path;

use nehari::{Field, Grid};

use crate::ConfigError;

/// Formats a field with 17 significant digits, enough to round-trip `f64`.
pub fn field_to_csv(grid: &Grid<f64>, field: &Field<f64>) -> String {
    let mut out = format!("# dim={} n={}\n", grid.dim(), grid.n());
    for v in field.values() {
        writeln!(out, "{v:.16e}").unwrap();
    }
    out
}

/// Parses the `# dim=D n=N` header line.
pub fn parse_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.trim().strip_prefix('#')?;
    let (mut dim, mut n) = (None, None);
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("dim=") {
            dim = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("n=") {
            n = v.parse().ok();
        }
    }
    Some((dim?, n?))
}

/// Parses a field and checks it against `grid`.
pub fn field_from_csv(grid: &Grid<f64>, text: &str) -> Result<Field<f64>, ConfigError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| ConfigError("empty field file".into()))?;
    let (dim, n) = parse_header(header).ok_or_else(|| ConfigError(format!("bad field header {header:?}")))?;
    if (dim, n) != (grid.dim(), grid.n()) {
        return Err(ConfigError(format!(
            "field shape dim={dim} n={n} does not match the configured grid dim={} n={}",
            grid.dim(),
            grid.n()
        )));
    }
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|e| ConfigError(format!("bad field value {l:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let field = Field::from_vec(values);
    grid.check(&field).map_err(|e| ConfigError(e.to_string()))?;
    Ok(field)
}

pub fn store_field(path: &Path, grid: &Grid<f64>, field: &Field<f64>) -> std::io::Result<()> {
    std::fs::write(path, field_to_csv(grid, field))
}

pub fn load_field(path: &Path, grid: &Grid<f64>) -> Result<Field<f64>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    field_from_csv(grid, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let grid = Grid::new(1, 17).unwrap();
        let f = grid.sample(|x: &[f64]| (x[0] * 3.0).sin() / 7.0 + 1e-300);
        let back = field_from_csv(&grid, &field_to_csv(&grid, &f)).unwrap();
        assert_eq!(back, f);
    }

    proptest::proptest! {
        #[test]
        fn round_trip_any_values(values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 9)) {
            let grid = Grid::new(2, 3).unwrap();
            let f = Field::from_vec(values);
            let back = field_from_csv(&grid, &field_to_csv(&grid, &f)).unwrap();
            proptest::prop_assert_eq!(back.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn header_parsing() {
        assert_eq!(parse_header("# dim=1 n=256"), Some((1, 256)));
        assert_eq!(parse_header("dim=1 n=256"), None);
        assert_eq!(parse_header("# dim=2"), None);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g2 = Grid::new(2, 4).unwrap();
        let g1 = Grid::new(1, 4).unwrap();
        let text = field_to_csv(&g2, &g2.zeros());
        assert!(field_from_csv(&g1, &text).is_err());
    }
}
