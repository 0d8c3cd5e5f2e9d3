//! Analytic scalp potential for a current dipole inside the three-shell
//! concentric-sphere head: the ground truth the solver under test is scored
//! against.
//!
//! Per harmonic degree the potential in each shell is a combination of r^n
//! and r^-(n-1) radial modes. The dipole's free-space field supplies a known
//! outgoing mode in the brain; continuity of potential and radial current at
//! the two interfaces plus zero radial current at the scalp close a 5x5
//! system per degree. Radial basis functions are rescaled so every matrix
//! entry stays O(1) up to degree several hundred.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HeadModel, PointSet};
use crate::vec3::{dot, norm, scale, sub, Vec3};

/// Current dipole: position (m) and moment (A·m), position strictly inside
/// the brain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dipole {
    pub position: Vec3,
    pub moment: Vec3,
}

impl Dipole {
    pub fn new(position: Vec3, moment: Vec3) -> Self {
        Dipole { position, moment }
    }

    /// Distance from the center divided by the brain radius.
    pub fn eccentricity(&self, head: &HeadModel) -> f64 {
        norm(&self.position) / head.r_brain
    }
}

/// Potential samples (V) aligned with the point set they were evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalpField {
    pub values: Vec<f64>,
}

impl ScalpField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Truncation control for the spherical-harmonic series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Relative tail bound at which the series is cut off.
    pub tol: f64,
    /// Hard cap on the harmonic degree; exceeding it is a convergence error.
    pub max_degree: usize,
    /// When set, sum exactly this many degrees with no adaptive cutoff.
    /// Used by the self-consistency checks.
    pub fixed_degree: Option<usize>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tol: 1e-10,
            max_degree: 400,
            fixed_degree: None,
        }
    }
}

/// Default admissible depth margin (m): dipoles are kept at least this far
/// below the brain surface.
pub const EPSILON_DEPTH: f64 = 0.005;

/// Solve a 5x5 system by Gaussian elimination with partial pivoting.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Result<[f64; 5]> {
    for col in 0..5 {
        let mut pivot = col;
        for row in (col + 1)..5 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Numerical(
                "singular interface system in layered series".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..5 {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..5 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 5];
    for col in (0..5).rev() {
        let mut s = b[col];
        for k in (col + 1)..5 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

/// Per-degree scalp gain of the three-shell model for a unit outgoing source
/// mode anchored at the brain surface.
///
/// Unknowns are the five homogeneous mode amplitudes (brain regular; skull
/// regular+singular; scalp regular+singular) in locally rescaled bases.
fn layered_gain(head: &HeadModel, n: usize, p32n: f64, p32n1: f64, p21n: f64, p21n1: f64) -> Result<f64> {
    let nf = n as f64;
    let np1 = nf + 1.0;
    let (s1, s2, s3) = (head.sigma_scalp, head.sigma_skull, head.sigma_brain);

    // x = [a3, a2, c2, a1, c1]
    let a = [
        // potential continuity at the brain surface
        [1.0, -p32n, -1.0, 0.0, 0.0],
        // radial current continuity at the brain surface
        [s3 * nf, -s2 * nf * p32n, s2 * np1, 0.0, 0.0],
        // potential continuity at the skull surface
        [0.0, 1.0, p32n1, -p21n, -1.0],
        // radial current continuity at the skull surface
        [0.0, s2 * nf, -s2 * np1 * p32n1, -s1 * nf * p21n, s1 * np1],
        // insulating scalp: zero radial current at the outer surface
        [0.0, 0.0, 0.0, nf, -np1 * p21n1],
    ];
    let b = [-1.0, s3 * np1, 0.0, 0.0, 0.0];
    let x = solve5(a, b)?;
    Ok(x[3] + x[4] * p21n1)
}

/// Shared series driver. `gain(n)` yields the per-degree scalp gain already
/// multiplied by the eccentricity power; the caller owns that recurrence.
struct SeriesState {
    cos_gamma: Vec<f64>,
    moment_tangential_dot: Vec<f64>,
    moment_radial: f64,
    values: Vec<f64>,
    // Legendre recurrences per evaluation point.
    p_prev: Vec<f64>,
    p_cur: Vec<f64>,
    dp_prev: Vec<f64>,
    dp_cur: Vec<f64>,
}

impl SeriesState {
    fn new(dipole: &Dipole, eval: &PointSet) -> Result<Self> {
        let b = norm(&dipole.position);
        // Degenerate (central) dipoles keep a well-defined field; the axis
        // choice cancels because only degree 1 survives.
        let axis = if b < 1e-15 {
            [0.0, 0.0, 1.0]
        } else {
            scale(&dipole.position, 1.0 / b)
        };
        let moment_radial = dot(&dipole.moment, &axis);
        let tangential = sub(&dipole.moment, &scale(&axis, moment_radial));

        let k = eval.points.len();
        let mut cos_gamma = Vec::with_capacity(k);
        let mut moment_tangential_dot = Vec::with_capacity(k);
        for p in &eval.points {
            let r = norm(p);
            if ((r - eval.radius) / eval.radius).abs() > 1e-6 {
                return Err(Error::Domain(format!(
                    "evaluation point at radius {r} is not on the sphere of radius {}",
                    eval.radius
                )));
            }
            let hat = scale(p, 1.0 / r);
            cos_gamma.push(dot(&hat, &axis).clamp(-1.0, 1.0));
            moment_tangential_dot.push(dot(&tangential, &hat));
        }
        Ok(SeriesState {
            p_prev: vec![1.0; k],
            p_cur: cos_gamma.clone(),
            dp_prev: vec![0.0; k],
            dp_cur: vec![1.0; k],
            cos_gamma,
            moment_tangential_dot,
            moment_radial,
            values: vec![0.0; k],
        })
    }

    /// Add the degree-n contribution (`p_cur`/`dp_cur` must hold degree n).
    fn accumulate(&mut self, n: usize, gain: f64) {
        let nf = n as f64;
        for k in 0..self.values.len() {
            self.values[k] += gain
                * (nf * self.moment_radial * self.p_cur[k]
                    + self.moment_tangential_dot[k] * self.dp_cur[k]);
        }
    }

    /// Advance the Legendre recurrences from degree n to n+1:
    /// (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1} and
    /// P'_{n+1} = P'_{n-1} + (2n+1) P_n.
    fn advance(&mut self, n: usize) {
        let nf = n as f64;
        for k in 0..self.values.len() {
            let x = self.cos_gamma[k];
            let p_n = self.p_cur[k];
            let p_nm1 = self.p_prev[k];
            let p_next = ((2.0 * nf + 1.0) * x * p_n - nf * p_nm1) / (nf + 1.0);
            let dp_next = self.dp_prev[k] + (2.0 * nf + 1.0) * p_n;
            self.p_prev[k] = p_n;
            self.p_cur[k] = p_next;
            self.dp_prev[k] = self.dp_cur[k];
            self.dp_cur[k] = dp_next;
        }
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn tangential_scale(&self) -> f64 {
        self.moment_tangential_dot
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn run_series<G: FnMut(usize) -> Result<f64>>(
    dipole: &Dipole,
    eval: &PointSet,
    cfg: &OracleConfig,
    sigma_source: f64,
    mut gain: G,
) -> Result<(ScalpField, usize)> {
    let k = eval.points.len();
    if norm(&dipole.moment) == 0.0 {
        return Ok((ScalpField { values: vec![0.0; k] }, 0));
    }
    let mut state = SeriesState::new(dipole, eval)?;
    let prefactor = 1.0 / (4.0 * std::f64::consts::PI * sigma_source);
    let w_scale = state.tangential_scale();
    let q_r = state.moment_radial.abs();

    let mut peak_bound = 0.0f64;
    let mut prev_bound = f64::NAN;
    let mut ratio = 0.9f64;
    let mut used = 0;
    let limit = cfg.fixed_degree.unwrap_or(cfg.max_degree);
    for n in 1..=limit {
        let g = gain(n)? * prefactor;
        state.accumulate(n, g);
        used = n;

        let nf = n as f64;
        // Worst-case degree bound: |P_n| <= 1, |P_n'| <= n(n+1)/2.
        let bound = g.abs() * (nf * q_r + w_scale * nf * (nf + 1.0) / 2.0);
        peak_bound = peak_bound.max(bound);
        if cfg.fixed_degree.is_none() && n >= 8 {
            if prev_bound > 0.0 && bound > 0.0 {
                ratio = (bound / prev_bound).clamp(1e-6, 0.999);
            }
            let tail = bound * ratio / (1.0 - ratio);
            let scale = state.max_abs().max(1e-6 * peak_bound);
            if bound == 0.0 || tail <= cfg.tol * scale {
                return Ok((ScalpField { values: state.values }, used));
            }
        }
        prev_bound = bound;
        state.advance(n);
    }
    if cfg.fixed_degree.is_some() {
        Ok((ScalpField { values: state.values }, used))
    } else {
        Err(Error::Convergence {
            max_degree: cfg.max_degree,
        })
    }
}

/// Exact scalp potential of the three-shell model, with the number of
/// harmonic degrees the adaptive truncation used.
pub fn layered_potential_detailed(
    head: &HeadModel,
    dipole: &Dipole,
    eval: &PointSet,
    cfg: &OracleConfig,
) -> Result<(ScalpField, usize)> {
    head.validate()?;
    let b = norm(&dipole.position);
    if b >= head.r_brain {
        return Err(Error::Domain(format!(
            "dipole at radius {b} is not strictly inside the brain (r_brain {})",
            head.r_brain
        )));
    }
    if ((eval.radius - head.r_scalp) / head.r_scalp).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "evaluation set radius {} is not the scalp radius {}",
            eval.radius, head.r_scalp
        )));
    }

    let t = b / head.r_brain;
    let p32 = head.r_brain / head.r_skull;
    let p21 = head.r_skull / head.r_scalp;
    let inv_rb2 = 1.0 / (head.r_brain * head.r_brain);

    // Running powers: t^(n-1), (r3/r2)^n, (r3/r2)^(n+1), (r2/r1)^n, (r2/r1)^(n+1).
    let mut t_pow = 1.0;
    let mut p32n = p32;
    let mut p32n1 = p32 * p32;
    let mut p21n = p21;
    let mut p21n1 = p21 * p21;

    run_series(dipole, eval, cfg, head.sigma_brain, move |n| {
        let g = layered_gain(head, n, p32n, p32n1, p21n, p21n1)? * t_pow * inv_rb2;
        t_pow *= t;
        p32n *= p32;
        p32n1 *= p32;
        p21n *= p21;
        p21n1 *= p21;
        Ok(g)
    })
}

/// Exact scalp potential of the three-shell model (truncated series, tail
/// below `cfg.tol` relative).
pub fn layered_potential(
    head: &HeadModel,
    dipole: &Dipole,
    eval: &PointSet,
    cfg: &OracleConfig,
) -> Result<ScalpField> {
    layered_potential_detailed(head, dipole, eval, cfg).map(|(f, _)| f)
}

/// Reference solution for the homogeneous insulated sphere: per-degree gain
/// (2n+1)/n relative to the free-space mode. Validates the layered series on
/// the uniform-conductivity configuration.
pub fn homogeneous_reference(
    sigma: f64,
    radius: f64,
    dipole: &Dipole,
    eval: &PointSet,
) -> Result<ScalpField> {
    if sigma <= 0.0 || radius <= 0.0 {
        return Err(Error::InvalidArgument(
            "conductivity and radius must be positive".into(),
        ));
    }
    let b = norm(&dipole.position);
    if b >= radius {
        return Err(Error::Domain(format!(
            "dipole at radius {b} is not strictly inside the sphere of radius {radius}"
        )));
    }
    if ((eval.radius - radius) / radius).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "evaluation set radius {} is not the sphere radius {radius}",
            eval.radius
        )));
    }
    let t = b / radius;
    let inv_r2 = 1.0 / (radius * radius);
    let mut t_pow = 1.0;
    let cfg = OracleConfig::default();
    let (field, _) = run_series(dipole, eval, &cfg, sigma, move |n| {
        let nf = n as f64;
        let g = (2.0 * nf + 1.0) / nf * t_pow * inv_r2;
        t_pow *= t;
        Ok(g)
    })?;
    Ok(field)
}

/// Closed form for the central dipole in a homogeneous insulated sphere:
/// u = 3 (q . r_hat) / (4 pi sigma R^2).
pub fn central_dipole_closed_form(sigma: f64, radius: f64, moment: &Vec3, point: &Vec3) -> f64 {
    let r = norm(point);
    let hat = scale(point, 1.0 / r);
    3.0 * dot(moment, &hat) / (4.0 * std::f64::consts::PI * sigma * radius * radius)
}
