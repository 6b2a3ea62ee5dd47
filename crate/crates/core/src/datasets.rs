//! Analytic test models, point-file formats and SVG export.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataSet, GridDataSet};
use crate::error::{FairingError, Result};
use crate::geometry::CurvatureComb;
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::spline::{Parametrization, SplineCurve};

/// Default per-coordinate noise level (standard deviation) of the Viviani model.
pub const VIVIANI_NOISE: f64 = 0.005;

/// `(1 + cos(5t)/5)(cos t, sin t)` sampled at `m` uniform angles over `[0, 2π]`,
/// chord-length parametrized.
pub fn sample_starfish<T: Scalar>(m: usize) -> Result<DataSet<T>> {
    if m < 4 {
        return Err(FairingError::InvalidSize(format!("starfish needs at least 4 samples, got {m}")));
    }
    let points = Mat::from_fn(m, 2, |i, c| {
        let t = 2.0 * PI * i as f64 / (m - 1) as f64;
        let r = 1.0 + (5.0 * t).cos() / 5.0;
        T::lit(if c == 0 { r * t.cos() } else { r * t.sin() })
    });
    DataSet::parametrized(points, Parametrization::ChordLength)
}

/// Standard normal pairs by the Box–Muller transform.
pub struct GaussianSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 − U keeps the logarithm finite
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random::<f64>();
        let rad = (-2.0 * u1.ln()).sqrt();
        self.spare = Some(rad * (2.0 * PI * u2).sin());
        rad * (2.0 * PI * u2).cos()
    }
}

/// Noiseless point of Viviani's curve `x² + y² + z² = 25`, `x² + y² = 5x`.
pub fn viviani_point(u: f64) -> [f64; 3] {
    [2.5 * (1.0 + u.cos()), 2.5 * u.sin(), 5.0 * (u / 2.0).sin()]
}

/// Viviani's curve at `u = 4πi/m` with Gaussian noise of standard deviation
/// `sigma` added to every coordinate, chord-length parametrized.
pub fn sample_viviani<T: Scalar>(m: usize, sigma: f64, seed: u64) -> Result<DataSet<T>> {
    if m < 4 {
        return Err(FairingError::InvalidSize(format!("Viviani needs at least 4 samples, got {m}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(FairingError::Config(format!("noise level {sigma} must be finite and nonnegative")));
    }
    let mut noise = GaussianSource::new(seed);
    let mut points = Mat::zeros(m, 3);
    for i in 0..m {
        let p = viviani_point(4.0 * PI * i as f64 / m as f64);
        for (c, v) in p.into_iter().enumerate() {
            let e = if sigma > 0.0 { sigma * noise.sample() } else { 0.0 };
            points[(i, c)] = T::lit(v + e);
        }
    }
    DataSet::parametrized(points, Parametrization::ChordLength)
}

/// Height field `z = 0.2 sin(2πs) cos(2πt) + 0.05 sin(9s + 4t)` over the unit
/// square with Gaussian height noise, on a uniform `m1 × m2` grid.
pub fn sample_bumpy_patch<T: Scalar>(m1: usize, m2: usize, noise: f64, seed: u64) -> Result<GridDataSet<T>> {
    if m1 < 2 || m2 < 2 {
        return Err(FairingError::InvalidSize(format!("patch grid {m1}×{m2} too small")));
    }
    let mut src = GaussianSource::new(seed);
    let s: Vec<f64> = (0..m1).map(|a| a as f64 / (m1 - 1) as f64).collect();
    let t: Vec<f64> = (0..m2).map(|b| b as f64 / (m2 - 1) as f64).collect();
    let mut points = Mat::zeros(m1 * m2, 3);
    for (a, &x) in s.iter().enumerate() {
        for (b, &y) in t.iter().enumerate() {
            let z = 0.2 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos() + 0.05 * (9.0 * x + 4.0 * y).sin();
            let e = if noise > 0.0 { noise * src.sample() } else { 0.0 };
            let row = points.row_mut(a * m2 + b);
            row[0] = T::lit(x);
            row[1] = T::lit(y);
            row[2] = T::lit(z + e);
        }
    }
    GridDataSet::new(points, s.into_iter().map(T::lit).collect(), t.into_iter().map(T::lit).collect())
}

/// Points read from or written to a file, with optional parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
}

impl PointFile {
    pub fn from_dataset<T: Scalar>(data: &DataSet<T>) -> Self {
        let cast = data.points().cast::<f64>();
        Self {
            dim: data.dim(),
            points: cast.row_vecs(),
            params: Some(data.params().iter().map(|t| t.as_f64()).collect()),
        }
    }

    pub fn matrix<T: Scalar>(&self) -> Mat<T> {
        Mat::from_rows(&self.points).cast()
    }

    /// Uses the stored parameters when present, `rule` otherwise.
    pub fn into_dataset<T: Scalar>(&self, rule: Parametrization) -> Result<DataSet<T>> {
        self.validate()?;
        let points = self.matrix::<T>();
        match &self.params {
            Some(p) => DataSet::new(points, p.iter().map(|&t| T::lit(t)).collect()),
            None => DataSet::parametrized(points, rule),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(FairingError::Unsupported(format!("points of dimension {}", self.dim)));
        }
        if let Some(i) = self.points.iter().position(|p| p.len() != self.dim) {
            return Err(FairingError::Parse { line: i + 1, message: format!("expected {} coordinates", self.dim) });
        }
        if let Some(p) = &self.params {
            if p.len() != self.points.len() {
                return Err(FairingError::InvalidSize(format!(
                    "{} parameters for {} points",
                    p.len(),
                    self.points.len()
                )));
            }
        }
        Ok(())
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a `.json` point file or CSV (any other extension).
///
/// CSV rows hold 2 or 3 coordinates. A parameter column is recognised from a
/// header whose last name is `t` or `param`, or as the fourth column of a
/// headerless file. Lines starting with `#` are ignored.
pub fn load_points(path: &Path) -> Result<PointFile> {
    let text = std::fs::read_to_string(path)?;
    if is_json(path) {
        let pf: PointFile = serde_json::from_str(&text)?;
        pf.validate()?;
        return Ok(pf);
    }
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<PointFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    let mut params = Vec::new();
    let mut layout: Option<(usize, bool)> = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| FairingError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let fields: Vec<&str> = rec.iter().collect();
        if layout.is_none() && points.is_empty() && fields[0].parse::<f64>().is_err() {
            let has_param = matches!(fields.last().map(|s| s.to_ascii_lowercase()).as_deref(), Some("t" | "param"));
            let dim = fields.len() - usize::from(has_param);
            if dim != 2 && dim != 3 {
                return Err(FairingError::Parse { line, message: format!("header names {dim} coordinates") });
            }
            layout = Some((dim, has_param));
            continue;
        }
        let values = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| FairingError::Parse { line, message: format!("not a number: {f:?}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        let (dim, has_param) = *layout.get_or_insert(match values.len() {
            2 | 3 => (values.len(), false),
            4 => (3, true),
            k => return Err(FairingError::Parse { line, message: format!("expected 2 to 4 columns, found {k}") }),
        });
        if values.len() != dim + usize::from(has_param) {
            return Err(FairingError::Parse {
                line,
                message: format!("expected {} columns, found {}", dim + usize::from(has_param), values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FairingError::Parse { line, message: "non-finite value".into() });
        }
        points.push(values[..dim].to_vec());
        if has_param {
            params.push(values[dim]);
        }
    }
    let Some((dim, has_param)) = layout else {
        return Err(FairingError::Parse { line: 1, message: "no points".into() });
    };
    if points.is_empty() {
        return Err(FairingError::Parse { line: 1, message: "no points".into() });
    }
    Ok(PointFile { dim, points, params: has_param.then_some(params) })
}

/// Writes JSON for `.json` paths and CSV otherwise. Numbers use the shortest
/// representation that reads back to the same value.
pub fn save_points(path: &Path, file: &PointFile) -> Result<()> {
    file.validate()?;
    let text = if is_json(path) { serde_json::to_string_pretty(file)? + "\n" } else { format_csv(file) };
    std::fs::write(path, text)?;
    Ok(())
}

pub fn format_csv(file: &PointFile) -> String {
    let mut out = String::new();
    if file.params.is_some() {
        out.push_str(if file.dim == 2 { "x,y,t\n" } else { "x,y,z,t\n" });
    }
    for (i, p) in file.points.iter().enumerate() {
        let mut cols: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        if let Some(params) = &file.params {
            cols.push(format!("{:?}", params[i]));
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Number of polyline samples used for the curve in SVG output.
pub const SVG_CURVE_SAMPLES: usize = 400;

/// SVG drawing of a planar curve with optional comb teeth and data points.
pub fn render_svg<T: Scalar>(
    curve: &SplineCurve<T>,
    comb: Option<&CurvatureComb>,
    data: Option<&Mat<T>>,
) -> Result<String> {
    if curve.dim() != 2 {
        return Err(FairingError::Unsupported(format!(
            "SVG export of {}-dimensional curves; use JSON instead",
            curve.dim()
        )));
    }
    let samples: Vec<[f64; 2]> =
        curve.sample(SVG_CURVE_SAMPLES).into_iter().map(|p| [p[0].as_f64(), p[1].as_f64()]).collect();
    let teeth: Vec<([f64; 2], [f64; 2])> = comb
        .map(|c| c.samples.iter().map(|s| ([s.point[0], s.point[1]], [s.tooth_end[0], s.tooth_end[1]])).collect())
        .unwrap_or_default();
    let dots: Vec<[f64; 2]> =
        data.map(|d| (0..d.rows()).map(|i| [d[(i, 0)].as_f64(), d[(i, 1)].as_f64()]).collect()).unwrap_or_default();

    let all = samples.iter().chain(teeth.iter().flat_map(|(a, b)| [a, b])).chain(dots.iter());
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let pad = 0.05 * span;
    let (w, h) = (hi[0] - lo[0] + 2.0 * pad, hi[1] - lo[1] + 2.0 * pad);
    let stroke = span / 400.0;
    // flip y so the drawing has the usual orientation
    let xy = |p: &[f64; 2]| format!("{:.6},{:.6}", p[0], lo[1] + hi[1] - p[1]);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{:.6} {:.6} {:.6} {:.6}" width="800" height="{:.0}">"#,
        lo[0] - pad,
        lo[1] - pad,
        w,
        h,
        800.0 * h / w
    );
    if !teeth.is_empty() {
        let _ = writeln!(s, r##"<g class="comb" stroke="#2a9d3a" stroke-width="{:.6}" fill="none">"##, stroke * 0.5);
        for (a, b) in &teeth {
            let (pa, pb) = (xy(a), xy(b));
            let (ax, ay) = pa.split_once(',').unwrap_or_default();
            let (bx, by) = pb.split_once(',').unwrap_or_default();
            let _ = writeln!(s, r#"<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}"/>"#);
        }
        let env: Vec<String> = teeth.iter().map(|(_, b)| xy(b)).collect();
        let _ = writeln!(s, r#"<polyline points="{}"/>"#, env.join(" "));
        let _ = writeln!(s, "</g>");
    }
    let d: Vec<String> =
        samples.iter().enumerate().map(|(i, p)| format!("{}{}", if i == 0 { "M" } else { "L" }, xy(p))).collect();
    let _ = writeln!(
        s,
        r##"<path class="curve" d="{}" stroke="#1f3b8c" stroke-width="{:.6}" fill="none"/>"##,
        d.join(" "),
        stroke
    );
    if !dots.is_empty() {
        let _ = writeln!(s, r##"<g class="data" fill="#c0392b">"##);
        for p in &dots {
            let c = xy(p);
            let (cx, cy) = c.split_once(',').unwrap_or_default();
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="{:.6}"/>"#, stroke * 1.5);
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn export_svg<T: Scalar>(
    curve: &SplineCurve<T>,
    comb: Option<&CurvatureComb>,
    data: Option<&Mat<T>>,
    path: &Path,
) -> Result<()> {
    let svg = render_svg(curve, comb, data)?;
    std::fs::write(path, svg)?;
    Ok(())
}
