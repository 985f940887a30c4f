//! Per-iteration solver records and their CSV form.
//!
//! Row `k` carries `f` and `Φ` at the iterate `k` together with everything
//! computed while moving from iterate `k` to `k + 1`. The last row of a
//! finished run holds the terminal `f`, `Φ` and `NaN` iteration fields.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::prox::StopReason;

pub const TRACE_COLUMNS: [&str; 15] = [
    "k",
    "time_s",
    "f",
    "phi",
    "h",
    "delta_k",
    "d_k",
    "alpha_k",
    "beta_k",
    "L_or_gamma",
    "lambda_k",
    "inner_iters",
    "backtracks",
    "psi",
    "x_step_norm",
];

pub const REL_GAP_COLUMN: &str = "rel_gap";

pub const AUX_COLUMNS: [&str; 9] = [
    "k",
    "y_step_norm",
    "s_step_norm",
    "prox_stop",
    "duality_residual",
    "abs_tol",
    "branch",
    "halvings",
    "gamma_k",
];

/// Which candidate an iPila step kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `(ỹ, x)`.
    Inertial,
    /// `(x + λ d_x, s + λ d_s)`.
    LineSearch,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Inertial => "inertial",
            Branch::LineSearch => "linesearch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inertial" => Some(Branch::Inertial),
            "linesearch" => Some(Branch::LineSearch),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub time_s: f64,
    pub f: f64,
    pub phi: f64,
    pub h: f64,
    pub delta_k: f64,
    pub d_k: f64,
    pub alpha_k: f64,
    pub beta_k: f64,
    /// `L_k`, or `γ_k` for solvers without a Lipschitz estimate.
    pub l_or_gamma: f64,
    pub lambda_k: f64,
    pub inner_iters: usize,
    pub backtracks: usize,
    pub psi: f64,
    pub x_step_norm: f64,
    pub y_step_norm: f64,
    pub s_step_norm: f64,
    pub prox_stop: Option<StopReason>,
    pub duality_residual: f64,
    pub abs_tol: f64,
    pub branch: Option<Branch>,
    pub halvings: usize,
    pub gamma_k: f64,
}

impl TraceRow {
    /// Row for iterate `k` with every iteration field unset.
    pub fn terminal(k: usize, time_s: f64, f: f64, phi: f64) -> Self {
        Self {
            k,
            time_s,
            f,
            phi,
            h: f64::NAN,
            delta_k: f64::NAN,
            d_k: f64::NAN,
            alpha_k: f64::NAN,
            beta_k: f64::NAN,
            l_or_gamma: f64::NAN,
            lambda_k: f64::NAN,
            inner_iters: 0,
            backtracks: 0,
            psi: f64::NAN,
            x_step_norm: f64::NAN,
            y_step_norm: f64::NAN,
            s_step_norm: f64::NAN,
            prox_stop: None,
            duality_residual: f64::NAN,
            abs_tol: f64::NAN,
            branch: None,
            halvings: 0,
            gamma_k: f64::NAN,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.h.is_nan()
    }

    fn main_line(&self, f_star: Option<f64>) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.k,
            self.time_s,
            self.f,
            self.phi,
            self.h,
            self.delta_k,
            self.d_k,
            self.alpha_k,
            self.beta_k,
            self.l_or_gamma,
            self.lambda_k,
            self.inner_iters,
            self.backtracks,
            self.psi,
            self.x_step_norm
        );
        if let Some(fs) = f_star {
            let _ = write!(s, ",{}", relative_gap(self.f, fs));
        }
        s
    }

    fn aux_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.k,
            self.y_step_norm,
            self.s_step_norm,
            self.prox_stop.map_or("", StopReason::as_str),
            self.duality_residual,
            self.abs_tol,
            self.branch.map_or("", Branch::as_str),
            self.halvings,
            self.gamma_k
        )
    }
}

/// `(f − f*)/|f*|`, or `f − f*` when `f* = 0`.
pub fn relative_gap(f: f64, f_star: f64) -> f64 {
    if f_star == 0.0 {
        f - f_star
    } else {
        (f - f_star) / f_star.abs()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// Whether the aux file was present when the trace was read back.
    pub has_aux: bool,
}

impl Trace {
    pub fn new() -> Self {
        Self { rows: Vec::new(), has_aux: true }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn total_inner_iters(&self) -> usize {
        self.rows.iter().map(|r| r.inner_iters).sum()
    }

    /// First `k` with `relative_gap(f_k, f*) ≤ gap`.
    pub fn first_k_below_gap(&self, f_star: f64, gap: f64) -> Option<usize> {
        self.rows.iter().find(|r| relative_gap(r.f, f_star) <= gap).map(|r| r.k)
    }

    /// Cumulative inner iterations spent before reaching iterate `k`.
    pub fn inner_iters_before(&self, k: usize) -> usize {
        self.rows.iter().filter(|r| r.k < k).map(|r| r.inner_iters).sum()
    }

    pub fn write_csv(&self, dir: &Path, f_star: Option<f64>) -> Result<()> {
        let mut w = TraceWriter::create(dir, f_star)?;
        for r in &self.rows {
            w.write_row(r)?;
        }
        w.finish()
    }

    /// Reads `trace.csv` and, when present, `trace_aux.csv` from `dir`.
    pub fn read_csv(dir: &Path) -> Result<Self> {
        let main = read_table(&dir.join("trace.csv"))?;
        if main.header.len() < TRACE_COLUMNS.len() || main.header[..TRACE_COLUMNS.len()] != TRACE_COLUMNS {
            return Err(Error::Parse(format!("unexpected trace header: {}", main.header.join(","))));
        }
        let mut rows = Vec::with_capacity(main.rows.len());
        for (line, cells) in main.rows.iter().enumerate() {
            let num = |i: usize| parse_f64(&cells[i], line);
            let int = |i: usize| parse_usize(&cells[i], line);
            let mut r = TraceRow::terminal(int(0)?, num(1)?, num(2)?, num(3)?);
            r.h = num(4)?;
            r.delta_k = num(5)?;
            r.d_k = num(6)?;
            r.alpha_k = num(7)?;
            r.beta_k = num(8)?;
            r.l_or_gamma = num(9)?;
            r.lambda_k = num(10)?;
            r.inner_iters = int(11)?;
            r.backtracks = int(12)?;
            r.psi = num(13)?;
            r.x_step_norm = num(14)?;
            rows.push(r);
        }
        let aux_path = dir.join("trace_aux.csv");
        let has_aux = aux_path.exists();
        if has_aux {
            let aux = read_table(&aux_path)?;
            if aux.header != AUX_COLUMNS {
                return Err(Error::Parse(format!("unexpected aux header: {}", aux.header.join(","))));
            }
            if aux.rows.len() != rows.len() {
                return Err(Error::Parse("trace and aux files have different lengths".into()));
            }
            for (line, (cells, r)) in aux.rows.iter().zip(rows.iter_mut()).enumerate() {
                if parse_usize(&cells[0], line)? != r.k {
                    return Err(Error::Parse(format!("aux row {line} does not match trace row")));
                }
                r.y_step_norm = parse_f64(&cells[1], line)?;
                r.s_step_norm = parse_f64(&cells[2], line)?;
                r.prox_stop = StopReason::parse(&cells[3]);
                r.duality_residual = parse_f64(&cells[4], line)?;
                r.abs_tol = parse_f64(&cells[5], line)?;
                r.branch = Branch::parse(&cells[6]);
                r.halvings = parse_usize(&cells[7], line)?;
                r.gamma_k = parse_f64(&cells[8], line)?;
            }
        }
        Ok(Self { rows, has_aux })
    }
}

/// Streams rows to `trace.csv` and `trace_aux.csv` as they are produced.
pub struct TraceWriter {
    main: BufWriter<File>,
    aux: BufWriter<File>,
    f_star: Option<f64>,
}

impl TraceWriter {
    pub fn create(dir: &Path, f_star: Option<f64>) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut main = BufWriter::new(File::create(dir.join("trace.csv"))?);
        let mut aux = BufWriter::new(File::create(dir.join("trace_aux.csv"))?);
        let mut header = TRACE_COLUMNS.join(",");
        if f_star.is_some() {
            header.push(',');
            header.push_str(REL_GAP_COLUMN);
        }
        writeln!(main, "{header}")?;
        writeln!(aux, "{}", AUX_COLUMNS.join(","))?;
        Ok(Self { main, aux, f_star })
    }

    pub fn write_row(&mut self, row: &TraceRow) -> Result<()> {
        writeln!(self.main, "{}", row.main_line(self.f_star))?;
        writeln!(self.aux, "{}", row.aux_line())?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.main.flush()?;
        self.aux.flush()?;
        Ok(())
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut lines = BufReader::new(file).lines();
    let header: Vec<String> = match lines.next() {
        Some(l) => l?.trim().split(',').map(str::to_owned).collect(),
        None => return Err(Error::Parse(format!("{} is empty", path.display()))),
    };
    let mut rows = Vec::new();
    for l in lines {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = l.trim().split(',').map(str::to_owned).collect();
        if cells.len() < header.len() {
            return Err(Error::Parse(format!("short row in {}: {l}", path.display())));
        }
        rows.push(cells);
    }
    Ok(Table { header, rows })
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("row {line}: bad number {s:?}")))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("row {line}: bad integer {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        let mut t = Trace::new();
        let mut r = TraceRow::terminal(0, 0.125, 3.5, 3.5);
        r.h = -0.25;
        r.delta_k = -0.25;
        r.d_k = 0.5;
        r.alpha_k = 0.1 + 0.2;
        r.beta_k = 0.0;
        r.l_or_gamma = 1.5;
        r.lambda_k = 1.0;
        r.inner_iters = 3;
        r.psi = -1e300;
        r.x_step_norm = 1.0 / 3.0;
        r.prox_stop = Some(StopReason::DualityGap);
        r.branch = Some(Branch::LineSearch);
        r.halvings = 2;
        t.push(r);
        t.push(TraceRow::terminal(1, 0.25, 3.0, 3.0));
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = std::env::temp_dir().join(format!("inertiafb-trace-{}", std::process::id()));
        let t = sample();
        t.write_csv(&dir, Some(2.0)).unwrap();
        let back = Trace::read_csv(&dir).unwrap();
        assert_eq!(back.rows.len(), 2);
        for (a, b) in t.rows.iter().zip(&back.rows) {
            assert_eq!(a.main_line(None), b.main_line(None));
            assert_eq!(a.aux_line(), b.aux_line());
        }
        let text = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",rel_gap"));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn gap_queries() {
        let t = sample();
        assert_eq!(t.first_k_below_gap(3.0, 0.0), Some(1));
        assert_eq!(t.first_k_below_gap(1.0, 0.5), None);
        assert_eq!(t.inner_iters_before(1), 3);
        assert_eq!(relative_gap(3.0, -2.0), 2.5);
    }
}
