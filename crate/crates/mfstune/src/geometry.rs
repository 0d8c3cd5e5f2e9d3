//! Concentric three-shell head geometry: the physical shells, the five
//! fictitious source spheres derived from a scale-factor vector, and
//! near-uniform point sets on spheres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{dist, norm, Vec3};

/// Margin (m) below which a fictitious radius is considered to collide with a
/// physical interface.
pub const EPSILON_GEOM: f64 = 1e-4;

/// Radii and conductivities of the three concentric shells.
///
/// Layer 1 is the scalp (outermost), layer 2 the skull, layer 3 the brain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadModel {
    /// Outer scalp radius (m).
    pub r_scalp: f64,
    /// Skull outer radius (m); also the scalp layer's inner surface.
    pub r_skull: f64,
    /// Brain radius (m); also the skull layer's inner surface.
    pub r_brain: f64,
    /// Scalp conductivity (S/m).
    pub sigma_scalp: f64,
    /// Skull conductivity (S/m).
    pub sigma_skull: f64,
    /// Brain conductivity (S/m).
    pub sigma_brain: f64,
}

impl HeadModel {
    pub fn new(
        r_scalp: f64,
        r_skull: f64,
        r_brain: f64,
        sigma_scalp: f64,
        sigma_skull: f64,
        sigma_brain: f64,
    ) -> Result<Self> {
        let head = HeadModel {
            r_scalp,
            r_skull,
            r_brain,
            sigma_scalp,
            sigma_skull,
            sigma_brain,
        };
        head.validate()?;
        Ok(head)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_scalp > self.r_skull && self.r_skull > self.r_brain && self.r_brain > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "shell radii must satisfy r_scalp > r_skull > r_brain > 0, got {} / {} / {}",
                self.r_scalp, self.r_skull, self.r_brain
            )));
        }
        if self.sigma_scalp <= 0.0 || self.sigma_skull <= 0.0 || self.sigma_brain <= 0.0 {
            return Err(Error::InvalidArgument(
                "conductivities must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Same geometry with every layer set to one conductivity. Used by the
    /// oracle self-checks: the layered solution must then reduce to the
    /// single-sphere one.
    pub fn with_uniform_conductivity(&self, sigma: f64) -> Self {
        HeadModel {
            sigma_scalp: sigma,
            sigma_skull: sigma,
            sigma_brain: sigma,
            ..*self
        }
    }
}

impl Default for HeadModel {
    /// The standard three-shell reference head: brain/skull/scalp radii
    /// 0.087 / 0.092 / 0.1 m with conductivities 0.33 / 0.0125 / 0.33 S/m.
    fn default() -> Self {
        HeadModel {
            r_scalp: 0.1,
            r_skull: 0.092,
            r_brain: 0.087,
            sigma_scalp: 0.33,
            sigma_skull: 0.0125,
            sigma_brain: 0.33,
        }
    }
}

/// The five fictitious-boundary scale factors being tuned.
///
/// Each solution layer carries kernel centers on an inflated copy of its outer
/// surface and (except the brain) on a deflated copy of its inner surface.
/// Inflation factors are > 1, deflation factors in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaVector {
    pub scalp_inflation: f64,
    pub scalp_deflation: f64,
    pub skull_inflation: f64,
    pub skull_deflation: f64,
    pub brain_inflation: f64,
}

impl ThetaVector {
    pub fn new(
        scalp_inflation: f64,
        scalp_deflation: f64,
        skull_inflation: f64,
        skull_deflation: f64,
        brain_inflation: f64,
    ) -> Self {
        ThetaVector {
            scalp_inflation,
            scalp_deflation,
            skull_inflation,
            skull_deflation,
            brain_inflation,
        }
    }

    /// Component order: scalp inflation, scalp deflation, skull inflation,
    /// skull deflation, brain inflation. All normalization and serialization
    /// uses this order.
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.scalp_inflation,
            self.scalp_deflation,
            self.skull_inflation,
            self.skull_deflation,
            self.brain_inflation,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        ThetaVector::new(a[0], a[1], a[2], a[3], a[4])
    }
}

/// Per-component search box for [`ThetaVector`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaBounds {
    pub lower: [f64; 5],
    pub upper: [f64; 5],
}

impl Default for ThetaBounds {
    /// Inflation factors in [1.05, 2.5], deflation factors in [0.2, 0.95].
    fn default() -> Self {
        ThetaBounds {
            lower: [1.05, 0.2, 1.05, 0.2, 1.05],
            upper: [2.5, 0.95, 2.5, 0.95, 2.5],
        }
    }
}

impl ThetaBounds {
    pub fn validate(&self) -> Result<()> {
        for d in 0..5 {
            if !(self.lower[d] < self.upper[d]) {
                return Err(Error::Config(format!(
                    "bounds component {d}: lower {} must be below upper {}",
                    self.lower[d], self.upper[d]
                )));
            }
        }
        // Inflation components must stay above 1, deflation inside (0, 1),
        // otherwise a center sphere enters its own solution layer.
        for &d in &[0usize, 2, 4] {
            if self.lower[d] <= 1.0 {
                return Err(Error::Config(format!(
                    "inflation bound component {d} must exceed 1, got {}",
                    self.lower[d]
                )));
            }
        }
        for &d in &[1usize, 3] {
            if self.lower[d] <= 0.0 || self.upper[d] >= 1.0 {
                return Err(Error::Config(format!(
                    "deflation bounds component {d} must lie inside (0, 1), got [{}, {}]",
                    self.lower[d], self.upper[d]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, theta: &ThetaVector) -> bool {
        let a = theta.as_array();
        (0..5).all(|d| a[d] >= self.lower[d] && a[d] <= self.upper[d])
    }

    pub fn check(&self, theta: &ThetaVector) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "theta {:?} outside bounds {:?}..{:?}",
                theta.as_array(),
                self.lower,
                self.upper
            )))
        }
    }

    /// Map a factor vector onto the unit hypercube.
    pub fn normalize(&self, theta: &ThetaVector) -> [f64; 5] {
        let a = theta.as_array();
        let mut x = [0.0; 5];
        for d in 0..5 {
            x[d] = (a[d] - self.lower[d]) / (self.upper[d] - self.lower[d]);
        }
        x
    }

    /// Inverse of [`normalize`](Self::normalize).
    pub fn denormalize(&self, x: &[f64; 5]) -> ThetaVector {
        let mut a = [0.0; 5];
        for d in 0..5 {
            a[d] = self.lower[d] + x[d] * (self.upper[d] - self.lower[d]);
        }
        ThetaVector::from_array(a)
    }
}

/// Points on a sphere of a common radius, in a fixed deterministic order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<Vec3>,
    pub radius: f64,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Near-uniform points on a sphere via the generalized spiral construction
/// (Saff & Kuijlaars). Deterministic: the k-th point depends only on (n, k).
///
/// Latitudes are h_k = -1 + 2(k-1)/(n-1); azimuths advance by
/// 3.6 / sqrt(n (1 - h_k^2)) and are pinned to 0 at both poles.
pub fn spiral_points(n: usize, radius: f64) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "spiral point count must be at least 2, got {n}"
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    let mut points = Vec::with_capacity(n);
    let mut phi = 0.0f64;
    for k in 1..=n {
        let h = -1.0 + 2.0 * (k - 1) as f64 / (n - 1) as f64;
        let h = h.clamp(-1.0, 1.0);
        if k == 1 || k == n {
            phi = 0.0;
        } else {
            phi = (phi + 3.6 / (n as f64 * (1.0 - h * h)).sqrt()) % (2.0 * std::f64::consts::PI);
        }
        let sin_theta = (1.0 - h * h).sqrt();
        points.push([
            radius * sin_theta * phi.cos(),
            radius * sin_theta * phi.sin(),
            radius * h,
        ]);
    }
    Ok(PointSet { points, radius })
}

/// The five fictitious sphere radii produced by a factor vector: inflated
/// copies of each layer's outer surface and deflated copies of the scalp and
/// skull layers' inner surfaces (the brain has no deflation sphere).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FictitiousRadii {
    pub scalp_inflated: f64,
    pub scalp_deflated: f64,
    pub skull_inflated: f64,
    pub skull_deflated: f64,
    pub brain_inflated: f64,
}

impl FictitiousRadii {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.scalp_inflated,
            self.scalp_deflated,
            self.skull_inflated,
            self.skull_deflated,
            self.brain_inflated,
        ]
    }
}

/// Scale the physical interfaces into the five fictitious radii.
///
/// Fails with a degenerate-geometry error when any fictitious radius comes
/// within `eps_geom` of any physical interface, which would put kernel
/// singularities onto a collocation sphere.
pub fn fictitious_radii(
    theta: &ThetaVector,
    head: &HeadModel,
    eps_geom: f64,
) -> Result<FictitiousRadii> {
    let radii = FictitiousRadii {
        scalp_inflated: theta.scalp_inflation * head.r_scalp,
        scalp_deflated: theta.scalp_deflation * head.r_skull,
        skull_inflated: theta.skull_inflation * head.r_skull,
        skull_deflated: theta.skull_deflation * head.r_brain,
        brain_inflated: theta.brain_inflation * head.r_brain,
    };
    let physical = [head.r_scalp, head.r_skull, head.r_brain];
    for (name, rho) in [
        ("scalp_inflated", radii.scalp_inflated),
        ("scalp_deflated", radii.scalp_deflated),
        ("skull_inflated", radii.skull_inflated),
        ("skull_deflated", radii.skull_deflated),
        ("brain_inflated", radii.brain_inflated),
    ] {
        for r_phys in physical {
            if (rho - r_phys).abs() < eps_geom {
                return Err(Error::GeometryDegenerate(format!(
                    "{name} radius {rho:.6} within {eps_geom} of physical radius {r_phys}"
                )));
            }
        }
    }
    Ok(radii)
}

/// How many kernel centers to place on each fictitious sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterCounts {
    pub scalp_inflated: usize,
    pub scalp_deflated: usize,
    pub skull_inflated: usize,
    pub skull_deflated: usize,
    pub brain_inflated: usize,
}

impl Default for CenterCounts {
    /// Reference counts: 180 on the scalp's inflated sphere, 90 on the other
    /// four, 540 in total.
    fn default() -> Self {
        CenterCounts {
            scalp_inflated: 180,
            scalp_deflated: 90,
            skull_inflated: 90,
            skull_deflated: 90,
            brain_inflated: 90,
        }
    }
}

impl CenterCounts {
    pub fn total(&self) -> usize {
        self.scalp_inflated
            + self.scalp_deflated
            + self.skull_inflated
            + self.skull_deflated
            + self.brain_inflated
    }

    pub fn validate(&self) -> Result<()> {
        for (name, c) in [
            ("scalp_inflated", self.scalp_inflated),
            ("scalp_deflated", self.scalp_deflated),
            ("skull_inflated", self.skull_inflated),
            ("skull_deflated", self.skull_deflated),
            ("brain_inflated", self.brain_inflated),
        ] {
            if c == 0 {
                return Err(Error::InvalidArgument(format!(
                    "center count {name} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Kernel center sets on the five fictitious spheres.
#[derive(Debug, Clone)]
pub struct CenterSets {
    pub scalp_inflated: PointSet,
    pub scalp_deflated: PointSet,
    pub skull_inflated: PointSet,
    pub skull_deflated: PointSet,
    pub brain_inflated: PointSet,
}

impl CenterSets {
    pub fn total(&self) -> usize {
        self.scalp_inflated.len()
            + self.scalp_deflated.len()
            + self.skull_inflated.len()
            + self.skull_deflated.len()
            + self.brain_inflated.len()
    }
}

fn center_set(count: usize, radius: f64) -> Result<PointSet> {
    // A singleton set degenerates to the spiral's first point (south pole).
    if count == 1 {
        return Ok(PointSet {
            points: vec![[0.0, 0.0, -radius]],
            radius,
        });
    }
    spiral_points(count, radius)
}

/// Place spiral center sets on each fictitious sphere.
pub fn build_center_sets(
    theta: &ThetaVector,
    head: &HeadModel,
    counts: &CenterCounts,
    eps_geom: f64,
) -> Result<CenterSets> {
    counts.validate()?;
    let radii = fictitious_radii(theta, head, eps_geom)?;
    Ok(CenterSets {
        scalp_inflated: center_set(counts.scalp_inflated, radii.scalp_inflated)?,
        scalp_deflated: center_set(counts.scalp_deflated, radii.scalp_deflated)?,
        skull_inflated: center_set(counts.skull_inflated, radii.skull_inflated)?,
        skull_deflated: center_set(counts.skull_deflated, radii.skull_deflated)?,
        brain_inflated: center_set(counts.brain_inflated, radii.brain_inflated)?,
    })
}

/// Smallest pairwise distance in a point set, by brute force.
pub fn min_pairwise_distance(set: &PointSet) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..set.points.len() {
        for j in (i + 1)..set.points.len() {
            let d = dist(&set.points[i], &set.points[j]);
            if d < best {
                best = d;
            }
        }
    }
    best
}

#[allow(dead_code)]
pub(crate) fn max_norm_deviation(set: &PointSet) -> f64 {
    set.points
        .iter()
        .map(|p| ((norm(p) - set.radius) / set.radius).abs())
        .fold(0.0, f64::max)
}
