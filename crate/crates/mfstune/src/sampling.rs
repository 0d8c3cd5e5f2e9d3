//! Random dipole sources: uniform positions over configurable brain regions,
//! isotropic orientations, and the seeded stream type that every piece of
//! randomness in the crate flows through.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HeadModel;
use crate::oracle::{Dipole, EPSILON_DEPTH};
use crate::vec3::{norm, Vec3};

/// Reproducible random stream: identical (seed, stream) pairs yield identical
/// draws, and distinct stream ids are statistically independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Shape of a dipole region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionKind {
    /// Ball with center and radius in meters.
    Ball { center: Vec3, radius: f64 },
    /// Radial shell crossed with a polar-angle band. Radial extent is given
    /// as eccentricity (fraction of the brain radius), angles in radians
    /// from the +z axis.
    ShellSector {
        ecc_min: f64,
        ecc_max: f64,
        polar_min: f64,
        polar_max: f64,
    },
    /// The whole admissible brain volume.
    WholeBrain,
}

/// A named sampling region for dipole positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleRegion {
    pub name: String,
    pub kind: RegionKind,
    /// Keep positions at least this far (m) below the brain surface.
    #[serde(default = "default_depth_margin")]
    pub depth_margin: f64,
    /// Dipole moment magnitude (A·m).
    #[serde(default = "default_moment_magnitude")]
    pub moment_magnitude: f64,
}

fn default_depth_margin() -> f64 {
    EPSILON_DEPTH
}

fn default_moment_magnitude() -> f64 {
    1.0
}

impl DipoleRegion {
    pub fn new(name: impl Into<String>, kind: RegionKind) -> Self {
        DipoleRegion {
            name: name.into(),
            kind,
            depth_margin: EPSILON_DEPTH,
            moment_magnitude: 1.0,
        }
    }
}

const MAX_REJECTION_ATTEMPTS: usize = 100_000;

fn position_admissible(x: &Vec3, kind: &RegionKind, r_adm: f64, r_brain: f64) -> bool {
    let r = norm(x);
    if r > r_adm {
        return false;
    }
    match kind {
        RegionKind::Ball { center, radius } => crate::vec3::dist(x, center) <= *radius,
        RegionKind::ShellSector {
            ecc_min,
            ecc_max,
            polar_min,
            polar_max,
        } => {
            let ecc = r / r_brain;
            if ecc < *ecc_min || ecc > *ecc_max || r == 0.0 {
                return false;
            }
            let polar = (x[2] / r).clamp(-1.0, 1.0).acos();
            polar >= *polar_min && polar <= *polar_max
        }
        RegionKind::WholeBrain => true,
    }
}

/// Axis-aligned bounding box the rejection sampler draws from.
fn bounding_box(kind: &RegionKind, r_adm: f64, r_brain: f64) -> (Vec3, Vec3) {
    match kind {
        RegionKind::Ball { center, radius } => {
            let lo = [
                (center[0] - radius).max(-r_adm),
                (center[1] - radius).max(-r_adm),
                (center[2] - radius).max(-r_adm),
            ];
            let hi = [
                (center[0] + radius).min(r_adm),
                (center[1] + radius).min(r_adm),
                (center[2] + radius).min(r_adm),
            ];
            (lo, hi)
        }
        RegionKind::ShellSector { ecc_max, .. } => {
            let r = (ecc_max * r_brain).min(r_adm);
            ([-r, -r, -r], [r, r, r])
        }
        RegionKind::WholeBrain => ([-r_adm, -r_adm, -r_adm], [r_adm, r_adm, r_adm]),
    }
}

/// Isotropic unit vector from three standard normals.
fn random_unit_vector(rng: &mut RngStream) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = norm(&v);
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Draw one dipole: position uniform over the region's admissible
/// intersection with the brain (rejection sampling from the bounding box),
/// orientation isotropic, moment of the region's configured magnitude.
pub fn sample_dipole(
    region: &DipoleRegion,
    head: &HeadModel,
    rng: &mut RngStream,
) -> Result<Dipole> {
    let r_adm = head.r_brain - region.depth_margin;
    if r_adm <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "depth margin {} consumes the whole brain radius {}",
            region.depth_margin, head.r_brain
        )));
    }

    // A zero-radius ball degenerates to its center.
    if let RegionKind::Ball { center, radius } = &region.kind {
        if *radius == 0.0 {
            if norm(center) > r_adm {
                return Err(Error::RegionInfeasible { attempts: 0 });
            }
            let orientation = random_unit_vector(rng);
            return Ok(Dipole::new(
                *center,
                crate::vec3::scale(&orientation, region.moment_magnitude),
            ));
        }
    }

    let (lo, hi) = bounding_box(&region.kind, r_adm, head.r_brain);
    if lo[0] >= hi[0] || lo[1] >= hi[1] || lo[2] >= hi[2] {
        return Err(Error::RegionInfeasible { attempts: 0 });
    }
    let mut position = None;
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let x = [
            rng.random_range(lo[0]..hi[0]),
            rng.random_range(lo[1]..hi[1]),
            rng.random_range(lo[2]..hi[2]),
        ];
        if position_admissible(&x, &region.kind, r_adm, head.r_brain) {
            position = Some(x);
            break;
        }
    }
    let position = position.ok_or(Error::RegionInfeasible {
        attempts: MAX_REJECTION_ATTEMPTS,
    })?;
    let orientation = random_unit_vector(rng);
    Ok(Dipole::new(
        position,
        crate::vec3::scale(&orientation, region.moment_magnitude),
    ))
}

/// Six named regions of graded difficulty: eccentricity grows and volume
/// shrinks with the index. These are experiment parameters, not ground
/// truth; sizes are derived from the reference head's brain radius.
pub fn region_catalog() -> Vec<DipoleRegion> {
    let r_brain = HeadModel::default().r_brain;
    vec![
        DipoleRegion::new(
            "deep-central-ball",
            RegionKind::Ball {
                center: [0.0, 0.0, 0.0],
                radius: 0.3 * r_brain,
            },
        ),
        DipoleRegion::new(
            "mid-ball",
            RegionKind::Ball {
                center: [0.0, 0.0, 0.0],
                radius: 0.5 * r_brain,
            },
        ),
        DipoleRegion::new(
            "offset-deep-ball",
            RegionKind::Ball {
                center: [0.0, 0.0, 0.25 * r_brain],
                radius: 0.2 * r_brain,
            },
        ),
        DipoleRegion::new(
            "upper-mid-shell",
            RegionKind::ShellSector {
                ecc_min: 0.5,
                ecc_max: 0.7,
                polar_min: 0.0,
                polar_max: std::f64::consts::FRAC_PI_2,
            },
        ),
        DipoleRegion::new(
            "outer-shell-cap",
            RegionKind::ShellSector {
                ecc_min: 0.65,
                ecc_max: 0.8,
                polar_min: 0.0,
                polar_max: std::f64::consts::FRAC_PI_3,
            },
        ),
        DipoleRegion::new(
            "shallow-cap",
            RegionKind::ShellSector {
                ecc_min: 0.8,
                ecc_max: 0.848,
                polar_min: 0.0,
                polar_max: std::f64::consts::FRAC_PI_3,
            },
        ),
    ]
}

/// Fetch a catalog region by its 1-based index.
pub fn catalog_region(index: usize) -> Result<DipoleRegion> {
    let catalog = region_catalog();
    if index == 0 || index > catalog.len() {
        return Err(Error::Config(format!(
            "region index {index} outside 1..={}",
            catalog.len()
        )));
    }
    Ok(catalog[index - 1].clone())
}
