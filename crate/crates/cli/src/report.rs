//! Tabular reports: CSV, JSON and gnuplot-ready plot data, each carrying the resolved
//! config in its header.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::{json, Map, Value};

/// Decimal with 12 significant digits.
pub fn decimal(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x.fract() == 0.0 && x.abs() < 1e15 {
        return format!("{}", x as i64);
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        format!("{:.*}", (11 - e) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Int(String),
    Float(f64),
    /// Exact value: the fraction as written (not necessarily reduced) and its value.
    Exact(String, f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Cell {
    pub fn int(v: impl ToString) -> Cell {
        Cell::Int(v.to_string())
    }

    pub fn ratio(num: &BigUint, den: &BigUint) -> Cell {
        let q = BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()));
        Cell::Exact(format!("{num}/{den}"), q.to_f64().unwrap_or(f64::NAN))
    }

    pub fn ratio_u64(num: u64, den: u64) -> Cell {
        Cell::ratio(&num.into(), &den.into())
    }

    pub fn rational(q: &BigRational) -> Cell {
        Cell::Exact(format!("{}/{}", q.numer(), q.denom()), q.to_f64().unwrap_or(f64::NAN))
    }

    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    /// Numeric value for plotting.
    fn value(&self) -> Option<f64> {
        match self {
            Cell::Int(s) => s.parse().ok(),
            Cell::Float(x) | Cell::Exact(_, x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    PlotData,
}

/// Which columns a plot shows, and an optional horizontal reference line.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    pub title: String,
    pub reference: Option<(String, f64)>,
    pub log_y: bool,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub plot: Option<PlotSpec>,
}

impl Report {
    pub fn new<S: Into<String>>(config: Vec<(String, String)>, columns: impl IntoIterator<Item = S>) -> Report {
        Report {
            config,
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn column(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| *c == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }

    /// Exact columns expand to `name` and `name_decimal`.
    fn is_exact(&self, col: usize) -> bool {
        self.rows.iter().any(|r| matches!(r[col], Cell::Exact(..)))
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
            Format::PlotData => self.write_plot_data(out),
        }
    }

    fn write_config(&self, out: &mut dyn Write) -> io::Result<()> {
        for (k, v) in &self.config {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }

    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        self.write_config(out)?;
        let exact: Vec<bool> = (0..self.columns.len()).map(|c| self.is_exact(c)).collect();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = Vec::new();
        for (c, name) in self.columns.iter().enumerate() {
            header.push(name.clone());
            if exact[c] {
                header.push(format!("{name}_decimal"));
            }
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = Vec::new();
            for (c, cell) in row.iter().enumerate() {
                match cell {
                    Cell::Exact(s, x) => {
                        record.push(s.clone());
                        record.push(decimal(*x));
                    }
                    other => {
                        record.push(match other {
                            Cell::Int(s) | Cell::Text(s) => s.clone(),
                            Cell::Float(x) => decimal(*x),
                            Cell::Bool(b) => b.to_string(),
                            _ => String::new(),
                        });
                        if exact[c] {
                            record.push(String::new());
                        }
                    }
                }
            }
            w.write_record(&record)?;
        }
        w.flush()
    }

    fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        let number = |x: f64| -> Value {
            decimal(x)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number)
        };
        let config: Map<String, Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    let name = name.clone();
                    match cell {
                        Cell::Int(s) => {
                            let v = s.parse::<i64>().map_or(Value::String(s.clone()), Value::from);
                            obj.insert(name, v);
                        }
                        Cell::Float(x) => {
                            obj.insert(name, number(*x));
                        }
                        Cell::Exact(s, x) => {
                            obj.insert(format!("{name}_decimal"), number(*x));
                            obj.insert(name, Value::String(s.clone()));
                        }
                        Cell::Text(s) => {
                            obj.insert(name, Value::String(s.clone()));
                        }
                        Cell::Bool(b) => {
                            obj.insert(name, Value::Bool(*b));
                        }
                        Cell::Missing => {
                            obj.insert(name, Value::Null);
                        }
                    }
                }
                Value::Object(obj)
            })
            .collect();
        let doc = json!({ "config": config, "rows": rows });
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)
    }

    /// Whitespace-separated columns `x y1 y2 ...`; rows with a missing value are skipped.
    fn write_plot_data(&self, out: &mut dyn Write) -> io::Result<()> {
        let Some(plot) = &self.plot else {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "this report has no plot layout; use csv or json",
            ));
        };
        self.write_config(out)?;
        writeln!(out, "# {} {}", plot.x, plot.y.join(" "))?;
        let x = self.column(&plot.x);
        let ys: Vec<usize> = plot.y.iter().map(|y| self.column(y)).collect();
        for row in &self.rows {
            let values: Option<Vec<f64>> =
                std::iter::once(x).chain(ys.iter().copied()).map(|c| row[c].value()).collect();
            if let Some(values) = values {
                let line: Vec<String> = values.iter().map(|v| decimal(*v)).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
        Ok(())
    }

    /// Gnuplot script that draws the plot-data file at `data`.
    pub fn gnuplot_script(&self, data: &Path) -> Option<String> {
        let plot = self.plot.as_ref()?;
        let mut s = String::new();
        let data = data.display().to_string().replace('\'', "''");
        let _ = writeln!(s, "set title '{}'", plot.title.replace('\'', "''"));
        let _ = writeln!(s, "set xlabel '{}'", plot.x);
        let _ = writeln!(s, "set key outside");
        if plot.log_y {
            let _ = writeln!(s, "set logscale y");
        }
        let mut series: Vec<String> = plot
            .y
            .iter()
            .enumerate()
            .map(|(i, y)| format!("'{data}' using 1:{} with linespoints title '{y}'", i + 2))
            .collect();
        if let Some((label, value)) = &plot.reference {
            series.push(format!("{} with lines dashtype 2 title '{}'", decimal(*value), label.replace('\'', "''")));
        }
        let _ = writeln!(s, "plot {}", series.join(", \\\n     "));
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(decimal(6.0 / std::f64::consts::PI.powi(2)), "0.607927101854");
        assert_eq!(decimal(1000.0 / 3.0), "333.333333333");
        assert_eq!(decimal(2.5e-7), "2.50000000000e-7");
        assert_eq!(decimal(0.0), "0");
        assert_eq!(decimal(1000.0), "1000");
    }

    fn sample() -> Report {
        let mut r = Report::new(vec![("k".into(), "2".into())], vec!["n", "s"]);
        r.push(vec![Cell::int(1), Cell::ratio_u64(8, 12)]);
        r.push(vec![Cell::int(2), Cell::Missing]);
        r.plot = Some(PlotSpec {
            x: "n".into(),
            y: vec!["s".into()],
            title: "t".into(),
            reference: Some(("limit".into(), 0.5)),
            log_y: false,
        });
        r
    }

    fn render(r: &Report, f: Format) -> String {
        let mut buf = Vec::new();
        r.write(f, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_expands_exact_columns() {
        let out = render(&sample(), Format::Csv);
        assert_eq!(out, "# k=2\nn,s,s_decimal\n1,8/12,0.666666666667\n2,,\n");
    }

    #[test]
    fn json_keeps_config_and_exact_strings() {
        let v: Value = serde_json::from_str(&render(&sample(), Format::Json)).unwrap();
        assert_eq!(v["config"]["k"], "2");
        assert_eq!(v["rows"][0]["s"], "8/12");
        assert_eq!(v["rows"][0]["s_decimal"], 0.666666666667);
        assert!(v["rows"][1]["s"].is_null());
    }

    #[test]
    fn plot_data_skips_missing_rows() {
        let out = render(&sample(), Format::PlotData);
        assert_eq!(out, "# k=2\n# n s\n1 0.666666666667\n");
        let script = sample().gnuplot_script(Path::new("d.dat")).unwrap();
        assert!(script.contains("'d.dat' using 1:2"));
        assert!(script.contains("0.500000000000 with lines"));
    }
}
