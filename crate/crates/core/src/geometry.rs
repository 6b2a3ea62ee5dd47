//! Curvature, curvature combs, mean curvature maps and ASOD weights.

use serde::{Deserialize, Serialize};

use crate::error::{FairingError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::spline::{SplineCurve, SplineSurface};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn derivs<T: Scalar>(curve: &SplineCurve<T>, t: T) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let conv = |v: Vec<T>| v.into_iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
    Ok((conv(curve.eval(t, 0)?), conv(curve.eval(t, 1)?), conv(curve.eval(t, 2)?)))
}

const MIN_SPEED: f64 = 1e-12;

/// Signed planar curvature (positive turning left), or unsigned space curvature.
fn signed_curvature(d1: &[f64], d2: &[f64], t: f64) -> Result<f64> {
    let speed = norm(d1);
    if speed <= MIN_SPEED {
        return Err(FairingError::UndefinedCurvature(format!("vanishing tangent at t = {t}")));
    }
    match d1.len() {
        2 => Ok((d1[0] * d2[1] - d1[1] * d2[0]) / speed.powi(3)),
        3 => Ok(norm(&cross(d1, d2)) / speed.powi(3)),
        d => Err(FairingError::Unsupported(format!("curvature in dimension {d}"))),
    }
}

/// Curvature `κ ≥ 0` at `t`.
pub fn curvature<T: Scalar>(curve: &SplineCurve<T>, t: T) -> Result<f64> {
    let (_, d1, d2) = derivs(curve, t)?;
    signed_curvature(&d1, &d2, t.as_f64()).map(f64::abs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombSample {
    pub t: f64,
    pub point: Vec<f64>,
    pub curvature: f64,
    /// Unit principal normal (towards the centre of curvature).
    pub normal: Vec<f64>,
    pub tooth_end: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureComb {
    pub samples: Vec<CombSample>,
    pub scale: f64,
}

impl CurvatureComb {
    pub fn max_curvature(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.curvature))
    }
}

fn principal_normal(d1: &[f64], d2: &[f64], kappa: f64) -> Vec<f64> {
    let speed = norm(d1);
    let tangent: Vec<f64> = d1.iter().map(|v| v / speed).collect();
    if d1.len() == 2 {
        let left = vec![-tangent[1], tangent[0]];
        return if kappa < 0.0 { left.iter().map(|v| -v).collect() } else { left };
    }
    let along = dot(d2, &tangent);
    let perp: Vec<f64> = d2.iter().zip(&tangent).map(|(a, t)| a - along * t).collect();
    let len = norm(&perp);
    if len > MIN_SPEED * speed * speed {
        return perp.iter().map(|v| v / len).collect();
    }
    // straight piece: any unit vector orthogonal to the tangent
    let axis = (0..3).min_by(|&i, &j| tangent[i].abs().total_cmp(&tangent[j].abs())).unwrap_or(0);
    let mut e = vec![0.0; 3];
    e[axis] = 1.0;
    let c = cross(&tangent, &e);
    let l = norm(&c);
    c.iter().map(|v| v / l).collect()
}

/// Comb with `sample_count` uniformly spaced samples; samples where the
/// curvature is undefined are left out. Teeth point away from the centre of
/// curvature.
pub fn curvature_comb<T: Scalar>(curve: &SplineCurve<T>, sample_count: usize, scale: f64) -> Result<CurvatureComb> {
    if sample_count < 2 {
        return Err(FairingError::Config("a comb needs at least two samples".into()));
    }
    if !(scale > 0.0) {
        return Err(FairingError::Config(format!("comb scale {scale} must be positive")));
    }
    let mut samples = Vec::with_capacity(sample_count);
    for i in 0..sample_count {
        let t = i as f64 / (sample_count - 1) as f64;
        let (p, d1, d2) = derivs(curve, T::lit(t))?;
        let signed = match signed_curvature(&d1, &d2, t) {
            Ok(k) => k,
            Err(FairingError::UndefinedCurvature(_)) => continue,
            Err(e) => return Err(e),
        };
        let kappa = signed.abs();
        let normal = principal_normal(&d1, &d2, signed);
        let tooth_end = p.iter().zip(&normal).map(|(x, n)| x - scale * kappa * n).collect();
        samples.push(CombSample { t, point: p, curvature: kappa, normal, tooth_end });
    }
    Ok(CurvatureComb { samples, scale })
}

/// Mean curvature `H = (E N − 2 F M + G L) / (2 (E G − F²))` of a space surface.
pub fn mean_curvature<T: Scalar>(surface: &SplineSurface<T>, s: T, t: T) -> Result<f64> {
    if surface.dim() != 3 {
        return Err(FairingError::Unsupported(format!("mean curvature in dimension {}", surface.dim())));
    }
    let ev = |a, b| -> Result<Vec<f64>> { Ok(surface.eval(s, t, a, b)?.into_iter().map(|x| x.as_f64()).collect()) };
    let (su, sv) = (ev(1, 0)?, ev(0, 1)?);
    let (suu, suv, svv) = (ev(2, 0)?, ev(1, 1)?, ev(0, 2)?);
    let (e, f, g) = (dot(&su, &su), dot(&su, &sv), dot(&sv, &sv));
    let det = e * g - f * f;
    if det <= 1e-14 {
        return Err(FairingError::UndefinedCurvature(format!("degenerate metric at ({}, {})", s.as_f64(), t.as_f64())));
    }
    let nrm = cross(&su, &sv);
    let len = norm(&nrm);
    let n: Vec<f64> = nrm.iter().map(|v| v / len).collect();
    let (l, m, nn) = (dot(&suu, &n), dot(&suv, &n), dot(&svv, &n));
    Ok((e * nn - 2.0 * f * m + g * l) / (2.0 * det))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSample {
    pub s: f64,
    pub t: f64,
    /// `|H|`, clamped to the map maximum.
    pub value: f64,
    /// `|H|` before clamping.
    pub raw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureMap {
    pub samples: Vec<MapSample>,
    pub clamp_max: f64,
}

impl CurvatureMap {
    pub fn max_raw(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.raw))
    }
}

/// `|H|` on a uniform `count_s × count_t` grid, row by row in `s`. Values
/// above `clamp_max` (default: the largest sample) are clamped for display.
pub fn curvature_map<T: Scalar>(
    surface: &SplineSurface<T>,
    count_s: usize,
    count_t: usize,
    clamp_max: Option<f64>,
) -> Result<CurvatureMap> {
    if count_s < 2 || count_t < 2 {
        return Err(FairingError::Config("curvature map needs at least 2 samples per direction".into()));
    }
    let mut samples = Vec::with_capacity(count_s * count_t);
    for a in 0..count_s {
        let s = a as f64 / (count_s - 1) as f64;
        for b in 0..count_t {
            let t = b as f64 / (count_t - 1) as f64;
            match mean_curvature(surface, T::lit(s), T::lit(t)) {
                Ok(h) => samples.push(MapSample { s, t, value: h.abs(), raw: h.abs() }),
                Err(FairingError::UndefinedCurvature(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let clamp_max = clamp_max.unwrap_or_else(|| samples.iter().fold(0.0, |m, s| m.max(s.raw)));
    for s in &mut samples {
        s.value = s.raw.min(clamp_max);
    }
    Ok(CurvatureMap { samples, clamp_max })
}

/// `‖Q_{i+1} − 2Q_i + Q_{i−1}‖` per data point, zero at both ends.
pub fn asod<T: Scalar>(points: &Mat<T>) -> Vec<T> {
    let m = points.rows();
    let two = T::lit(2.0);
    (0..m)
        .map(|i| {
            if i == 0 || i + 1 >= m {
                return T::zero();
            }
            let (a, b, c) = (points.row(i - 1), points.row(i), points.row(i + 1));
            (0..points.cols()).fold(T::zero(), |s, k| s + (c[k] - two * b[k] + a[k]).powi(2)).sqrt()
        })
        .collect()
}

/// Gives `high_omega` to the `high_count` control points whose data points
/// have the largest ASOD, `base_omega` to the rest. Ties go to the lower
/// control index.
pub fn asod_weights<T: Scalar>(
    points: &Mat<T>,
    control_indices: &[usize],
    high_count: usize,
    high_omega: T,
    base_omega: T,
) -> Result<Vec<T>> {
    for w in [high_omega, base_omega] {
        if !(w >= T::zero() && w <= T::one()) {
            return Err(FairingError::Config(format!("smoothing weight {w} outside [0, 1]")));
        }
    }
    let n = control_indices.len();
    if high_count > n {
        return Err(FairingError::Config(format!("{high_count} high weights for {n} control points")));
    }
    if let Some(&i) = control_indices.iter().find(|&&i| i >= points.rows()) {
        return Err(FairingError::InvalidSize(format!("control index {i} outside {} data points", points.rows())));
    }
    let values = asod(points);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[control_indices[b]].total_cmp_scalar(values[control_indices[a]]).then(a.cmp(&b)));
    let mut omega = vec![base_omega; n];
    for &j in &order[..high_count] {
        omega[j] = high_omega;
    }
    Ok(omega)
}

trait TotalCmp {
    fn total_cmp_scalar(self, other: Self) -> std::cmp::Ordering;
}

impl<T: Scalar> TotalCmp for T {
    fn total_cmp_scalar(self, other: Self) -> std::cmp::Ordering {
        self.as_f64().total_cmp(&other.as_f64())
    }
}
