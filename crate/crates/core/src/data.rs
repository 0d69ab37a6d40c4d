//! Observation containers, panel indexing and CSV ingestion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Projector;

/// One cross-section `{(y_i, x_i, z_i)}`: outcome, mismeasured regressor and
/// perfectly measured controls (`n x k`, `k` may be zero).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    y: Vec<f64>,
    x: Vec<f64>,
    z: DMatrix<f64>,
    z_names: Vec<String>,
}

impl CrossSection {
    /// Validates equal lengths, finiteness, and full column rank of `z`.
    pub fn new(y: Vec<f64>, x: Vec<f64>, z: DMatrix<f64>) -> Result<Self> {
        let names = (0..z.ncols()).map(|j| format!("z{}", j + 1)).collect();
        Self::with_names(y, x, z, names)
    }

    pub fn without_controls(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, x, DMatrix::zeros(n, 0))
    }

    pub fn with_names(
        y: Vec<f64>,
        x: Vec<f64>,
        z: DMatrix<f64>,
        z_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InsufficientData("cross-section has no rows".into()));
        }
        if x.len() != n || z.nrows() != n {
            return Err(Error::Data(format!(
                "column lengths differ: y {n}, x {}, z {}",
                x.len(),
                z.nrows()
            )));
        }
        if z_names.len() != z.ncols() {
            return Err(Error::Parameter(format!(
                "{} control names for {} control columns",
                z_names.len(),
                z.ncols()
            )));
        }
        if let Some(i) = y.iter().chain(x.iter()).position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value in {} at row {}",
                if i < n { "y" } else { "x" },
                i % n
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in controls".into()));
        }
        if z.ncols() > 0 {
            Projector::new(z.clone(), "controls")?;
        }
        Ok(Self { y, x, z, z_names })
    }

    /// Construction for row subsets and transforms of already-validated data.
    pub(crate) fn from_parts(
        y: Vec<f64>,
        x: Vec<f64>,
        z: DMatrix<f64>,
        z_names: Vec<String>,
    ) -> Self {
        debug_assert_eq!(y.len(), x.len());
        debug_assert_eq!(y.len(), z.nrows());
        Self { y, x, z, z_names }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    /// Copy of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> CrossSection {
        let y = rows.iter().map(|&i| self.y[i]).collect();
        let x = rows.iter().map(|&i| self.x[i]).collect();
        let z = self.z.select_rows(rows);
        Self::from_parts(y, x, z, self.z_names.clone())
    }

    /// Adds a leading column of ones named `intercept`.
    pub fn with_intercept(&self) -> Result<CrossSection> {
        let n = self.n();
        let z = self.z.clone().insert_column(0, 1.0);
        debug_assert_eq!(z.nrows(), n);
        let mut names = Vec::with_capacity(self.k() + 1);
        names.push("intercept".to_string());
        names.extend(self.z_names.iter().cloned());
        Self::with_names(self.y.clone(), self.x.clone(), z, names)
    }
}

/// Removes a uniformly chosen subset of rows so that the count is a multiple
/// of `m`. Returns the kept row indices in their original order.
pub fn discard_indices<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::Parameter("multiple must be positive".into()));
    }
    if n < m {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot be reduced to a positive multiple of {m}"
        )));
    }
    let drop = n % m;
    let mut keep = vec![true; n];
    for i in rand::seq::index::sample(rng, n, drop) {
        keep[i] = false;
    }
    Ok((0..n).filter(|&i| keep[i]).collect())
}

pub fn discard_to_multiple<R: Rng + ?Sized>(
    cs: &CrossSection,
    m: usize,
    rng: &mut R,
) -> Result<CrossSection> {
    let kept = discard_indices(cs.n(), m, rng)?;
    if kept.len() == cs.n() {
        return Ok(cs.clone());
    }
    Ok(cs.select(&kept))
}

/// Unbalanced firm-year panel. Rows are stored sorted by `(firm, year)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    firm: Vec<i64>,
    year: Vec<i64>,
    y: Vec<f64>,
    x: Vec<f64>,
    z: DMatrix<f64>,
    z_names: Vec<String>,
    firm_labels: Option<BTreeMap<i64, String>>,
}

/// Rows removed by the single-year filter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub dropped_firms: usize,
    pub dropped_rows: usize,
}

impl PanelData {
    /// Strict constructor: every firm must already have at least two years.
    pub fn new(
        firm: Vec<i64>,
        year: Vec<i64>,
        y: Vec<f64>,
        x: Vec<f64>,
        z: DMatrix<f64>,
        z_names: Vec<String>,
    ) -> Result<Self> {
        let (panel, stats) = Self::filtered(firm, year, y, x, z, z_names)?;
        if stats.dropped_firms > 0 {
            return Err(Error::Data(format!(
                "{} firm(s) observed in a single year",
                stats.dropped_firms
            )));
        }
        Ok(panel)
    }

    /// Validates the rows and drops firms observed in only one year.
    pub fn filtered(
        firm: Vec<i64>,
        year: Vec<i64>,
        y: Vec<f64>,
        x: Vec<f64>,
        z: DMatrix<f64>,
        z_names: Vec<String>,
    ) -> Result<(Self, FilterStats)> {
        let n = firm.len();
        if year.len() != n || y.len() != n || x.len() != n || z.nrows() != n {
            return Err(Error::Data("panel columns have different lengths".into()));
        }
        if z_names.len() != z.ncols() {
            return Err(Error::Parameter(
                "control names do not match columns".into(),
            ));
        }
        let mut seen: HashMap<(i64, i64), usize> = HashMap::with_capacity(n);
        for i in 0..n {
            if let Some(prev) = seen.insert((firm[i], year[i]), i) {
                return Err(Error::Data(format!(
                    "duplicate (firm={}, year={}) at rows {} and {}",
                    firm[i],
                    year[i],
                    prev + 1,
                    i + 1
                )));
            }
            let row_finite = y[i].is_finite()
                && x[i].is_finite()
                && (0..z.ncols()).all(|j| z[(i, j)].is_finite());
            if !row_finite {
                return Err(Error::Data(format!("non-finite value at row {}", i + 1)));
            }
        }
        let mut years_per_firm: HashMap<i64, usize> = HashMap::new();
        for &f in &firm {
            *years_per_firm.entry(f).or_default() += 1;
        }
        let mut order: Vec<usize> = (0..n).filter(|&i| years_per_firm[&firm[i]] >= 2).collect();
        order.sort_by_key(|&i| (firm[i], year[i]));
        let stats = FilterStats {
            dropped_firms: years_per_firm.values().filter(|&&c| c < 2).count(),
            dropped_rows: n - order.len(),
        };
        let panel = PanelData {
            firm: order.iter().map(|&i| firm[i]).collect(),
            year: order.iter().map(|&i| year[i]).collect(),
            y: order.iter().map(|&i| y[i]).collect(),
            x: order.iter().map(|&i| x[i]).collect(),
            z: z.select_rows(&order),
            z_names,
            firm_labels: None,
        };
        Ok((panel, stats))
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn firm(&self) -> &[i64] {
        &self.firm
    }

    pub fn year(&self) -> &[i64] {
        &self.year
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    pub fn firm_label(&self, firm: i64) -> String {
        self.firm_labels
            .as_ref()
            .and_then(|m| m.get(&firm).cloned())
            .unwrap_or_else(|| firm.to_string())
    }

    /// Distinct years, ascending.
    pub fn years(&self) -> Vec<i64> {
        self.year
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn n_firms(&self) -> usize {
        self.firm_ranges().len()
    }

    /// Contiguous row ranges, one per firm.
    pub fn firm_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.firm.len() {
            if i == self.firm.len() || self.firm[i] != self.firm[start] {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Row indices observed in `year`, in ascending firm order.
    pub fn rows_in_year(&self, year: i64) -> Vec<usize> {
        (0..self.n_obs())
            .filter(|&i| self.year[i] == year)
            .collect()
    }

    pub fn cross_section_at(&self, year: i64) -> Result<CrossSection> {
        let rows = self.rows_in_year(year);
        if rows.is_empty() {
            return Err(Error::NotFound(format!("year {year} is not in the panel")));
        }
        Ok(self.select_cross_section(&rows))
    }

    pub(crate) fn select_cross_section(&self, rows: &[usize]) -> CrossSection {
        CrossSection::from_parts(
            rows.iter().map(|&i| self.y[i]).collect(),
            rows.iter().map(|&i| self.x[i]).collect(),
            self.z.select_rows(rows),
            self.z_names.clone(),
        )
    }

    /// All rows as one cross-section (no transforms).
    pub fn pooled(&self) -> CrossSection {
        CrossSection::from_parts(
            self.y.clone(),
            self.x.clone(),
            self.z.clone(),
            self.z_names.clone(),
        )
    }

    /// Rows with `start <= year <= end`, re-applying the two-year filter.
    pub fn window(&self, start: i64, end: i64) -> Result<(PanelData, FilterStats)> {
        let rows: Vec<usize> = (0..self.n_obs())
            .filter(|&i| self.year[i] >= start && self.year[i] <= end)
            .collect();
        let (mut panel, stats) = PanelData::filtered(
            rows.iter().map(|&i| self.firm[i]).collect(),
            rows.iter().map(|&i| self.year[i]).collect(),
            rows.iter().map(|&i| self.y[i]).collect(),
            rows.iter().map(|&i| self.x[i]).collect(),
            self.z.select_rows(&rows),
            self.z_names.clone(),
        )?;
        panel.firm_labels = self.firm_labels.clone();
        if panel.n_obs() == 0 {
            return Err(Error::InsufficientData(format!(
                "no firm has two or more years in {start}-{end}"
            )));
        }
        Ok((panel, stats))
    }

    /// Same rows with replaced values; used by the panel transforms.
    pub(crate) fn with_values(&self, y: Vec<f64>, x: Vec<f64>, z: DMatrix<f64>) -> PanelData {
        PanelData {
            firm: self.firm.clone(),
            year: self.year.clone(),
            y,
            x,
            z,
            z_names: self.z_names.clone(),
            firm_labels: self.firm_labels.clone(),
        }
    }
}

/// Column mapping for panel CSV files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub firm: String,
    pub year: String,
    pub y: String,
    pub x: String,
    #[serde(default)]
    pub z: Vec<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            firm: "firm".into(),
            year: "year".into(),
            y: "y".into(),
            x: "x".into(),
            z: vec!["z".into()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: PanelData,
    pub filter: FilterStats,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
}

fn parse_f64(field: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{field}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("`{field}` is not finite"),
        });
    }
    Ok(v)
}

/// Reads a header-row CSV panel. Row numbers in errors are 1-based data rows.
pub fn load_panel_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<LoadedPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    read_panel(&mut reader, schema)
}

pub fn read_panel<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
    schema: &Schema,
) -> Result<LoadedPanel> {
    let headers = reader.headers()?.clone();
    let firm_col = column_index(&headers, &schema.firm)?;
    let year_col = column_index(&headers, &schema.year)?;
    let y_col = column_index(&headers, &schema.y)?;
    let x_col = column_index(&headers, &schema.x)?;
    let z_cols = schema
        .z
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;

    let mut firm_raw: Vec<String> = Vec::new();
    let mut year = Vec::new();
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut z_flat = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        let field = |col: usize, name: &str| -> Result<String> {
            record
                .get(col)
                .map(str::to_string)
                .ok_or_else(|| Error::Parse {
                    row,
                    column: name.to_string(),
                    message: "missing cell".into(),
                })
        };
        let f = field(firm_col, &schema.firm)?;
        if f.trim().is_empty() {
            return Err(Error::Parse {
                row,
                column: schema.firm.clone(),
                message: "empty firm identifier".into(),
            });
        }
        firm_raw.push(f.trim().to_string());
        let yr = field(year_col, &schema.year)?;
        year.push(yr.trim().parse::<i64>().map_err(|_| Error::Parse {
            row,
            column: schema.year.clone(),
            message: format!("`{yr}` is not an integer year"),
        })?);
        y.push(parse_f64(&field(y_col, &schema.y)?, row, &schema.y)?);
        x.push(parse_f64(&field(x_col, &schema.x)?, row, &schema.x)?);
        for (c, name) in z_cols.iter().zip(&schema.z) {
            z_flat.push(parse_f64(&field(*c, name)?, row, name)?);
        }
    }

    let (firm, labels) = encode_firms(&firm_raw);
    let z = DMatrix::from_row_slice(year.len(), schema.z.len(), &z_flat);
    let (mut panel, filter) = PanelData::filtered(firm, year, y, x, z, schema.z.clone())?;
    panel.firm_labels = labels;
    Ok(LoadedPanel { panel, filter })
}

/// Integer identifiers are kept; anything else is mapped to dense integers in
/// order of first appearance.
fn encode_firms(raw: &[String]) -> (Vec<i64>, Option<BTreeMap<i64, String>>) {
    let parsed: Option<Vec<i64>> = raw.iter().map(|s| s.parse::<i64>().ok()).collect();
    if let Some(ids) = parsed {
        // Keep the textual form only if it differs from the canonical integer.
        if raw.iter().zip(&ids).all(|(s, i)| *s == i.to_string()) {
            return (ids, None);
        }
    }
    let mut dense: HashMap<&str, i64> = HashMap::new();
    let mut labels = BTreeMap::new();
    let ids = raw
        .iter()
        .map(|s| {
            let next = dense.len() as i64;
            let id = *dense.entry(s.as_str()).or_insert(next);
            labels.entry(id).or_insert_with(|| s.clone());
            id
        })
        .collect();
    (ids, Some(labels))
}

pub fn write_panel<W: std::io::Write>(panel: &PanelData, schema: &Schema, out: W) -> Result<()> {
    if schema.z.len() != panel.z().ncols() {
        return Err(Error::Schema(format!(
            "schema names {} control columns, panel has {}",
            schema.z.len(),
            panel.z().ncols()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        schema.firm.clone(),
        schema.year.clone(),
        schema.y.clone(),
        schema.x.clone(),
    ];
    header.extend(schema.z.iter().cloned());
    w.write_record(&header)?;
    for i in 0..panel.n_obs() {
        let mut rec = vec![
            panel.firm_label(panel.firm()[i]),
            panel.year()[i].to_string(),
            panel.y()[i].to_string(),
            panel.x()[i].to_string(),
        ];
        rec.extend((0..panel.z().ncols()).map(|j| panel.z()[(i, j)].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_panel_csv(panel: &PanelData, schema: &Schema, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_panel(panel, schema, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn read_str(s: &str, schema: &Schema) -> Result<LoadedPanel> {
        let mut r = csv::ReaderBuilder::new().from_reader(s.as_bytes());
        read_panel(&mut r, schema)
    }

    #[test]
    fn single_year_firm_is_dropped() {
        let csv = "firm,year,y,x,z\n1,1990,1.0,2.0,0.5\n1,1991,1.5,2.5,0.1\n2,1990,0.3,0.2,0.9\n";
        let loaded = read_str(csv, &Schema::default()).unwrap();
        assert_eq!(loaded.panel.n_obs(), 2);
        assert_eq!(loaded.filter.dropped_firms, 1);
        assert_eq!(loaded.filter.dropped_rows, 1);
    }

    #[test]
    fn duplicate_pair_names_row() {
        let csv = "firm,year,y,x,z\n7,1990,1,2,3\n7,1991,1,2,3\n7,1990,1,2,3\n";
        let err = read_str(csv, &Schema::default()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Data(_)));
        assert!(
            msg.contains("firm=7") && msg.contains("year=1990") && msg.contains("3"),
            "{msg}"
        );
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "firm,year,y,x\n1,1,1,1\n";
        assert!(matches!(
            read_str(csv, &Schema::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let csv = "firm,year,y,x,z\n1,1,1,1,1\n1,2,abc,1,1\n";
        match read_str(csv, &Schema::default()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
        let csv = "firm,year,y,x,z\n1,1,1,,1\n1,2,1,1,1\n";
        assert!(matches!(
            read_str(csv, &Schema::default()),
            Err(Error::Parse { row: 1, .. })
        ));
        let csv = "firm,year,y,x,z\n1,1,NaN,1,1\n1,2,1,1,1\n";
        assert!(matches!(
            read_str(csv, &Schema::default()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn string_firms_map_to_dense_ids() {
        let csv = "firm,year,y,x,z\nabc,1,1,1,1\nxyz,1,2,2,2\nabc,2,3,3,3\nxyz,2,4,4,4\n";
        let p = read_str(csv, &Schema::default()).unwrap().panel;
        assert_eq!(p.firm(), &[0, 0, 1, 1]);
        assert_eq!(p.firm_label(1), "xyz");
        let mut buf = Vec::new();
        write_panel(&p, &Schema::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("xyz,2,4,4,4"));
    }

    fn small_panel() -> PanelData {
        PanelData::new(
            vec![2, 1, 1, 2],
            vec![1, 1, 2, 2],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.5, 0.6, 0.7, 0.8],
            DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 2.0, 5.0]),
            vec!["z".into()],
        )
        .unwrap()
    }

    #[test]
    fn cross_section_in_firm_order() {
        let p = small_panel();
        let cs = p.cross_section_at(1).unwrap();
        assert_eq!(cs.y(), &[2.0, 1.0]);
        assert!(matches!(p.cross_section_at(3), Err(Error::NotFound(_))));
    }

    #[test]
    fn strict_constructor_rejects_single_year_firm() {
        let r = PanelData::new(
            vec![1, 1, 2],
            vec![1, 2, 1],
            vec![0.0; 3],
            vec![0.0; 3],
            DMatrix::zeros(3, 0),
            vec![],
        );
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn discard_arithmetic() {
        let mut rng = stream(1, "t", 0);
        assert_eq!(discard_indices(10, 4, &mut rng).unwrap().len(), 8);
        assert_eq!(
            discard_indices(8, 4, &mut rng).unwrap(),
            (0..8).collect::<Vec<_>>()
        );
        assert!(matches!(
            discard_indices(3, 4, &mut rng),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn discard_is_seed_stable() {
        let a = discard_indices(11, 2, &mut stream(42, "discard", 0)).unwrap();
        let b = discard_indices(11, 2, &mut stream(42, "discard", 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
    }

    #[test]
    fn cross_section_rejects_nan_and_rank_deficiency() {
        assert!(CrossSection::without_controls(vec![1.0, f64::NAN], vec![1.0, 2.0]).is_err());
        let z = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert!(matches!(
            CrossSection::new(vec![1.0; 3], vec![1.0, 2.0, 3.0], z),
            Err(Error::SingularDesign(_))
        ));
    }
}
