//! The coupled three-domain MFS collocation system: assembly, truncated-SVD
//! least-squares solution, scalp evaluation, and the scalar quality metric.
//!
//! One potential per shell is expanded in free-space Laplace kernels centered
//! on that shell's fictitious spheres. Collocation enforces an insulated
//! scalp, potential and current continuity at both interfaces, and moves the
//! dipole's free-space field to the right-hand side of the brain-skull rows.
//! The matrix depends on the scale factors and geometry only, never on the
//! dipole, so one factorization serves any number of sources.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    build_center_sets, spiral_points, CenterCounts, CenterSets, HeadModel, PointSet, ThetaVector,
    EPSILON_GEOM,
};
use crate::oracle::{layered_potential, Dipole, OracleConfig, ScalpField};
use crate::vec3::{dot, norm, sub, Vec3};

/// Free-space Green's kernel of the 3D Laplacian, 1/|p - xi|.
pub fn kernel(p: &Vec3, xi: &Vec3) -> Result<f64> {
    let d = norm(&sub(p, xi));
    if d == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(1.0 / d)
}

/// Directional derivative of the kernel along the unit normal at `p`:
/// -n.(p - xi)/|p - xi|^3.
pub fn kernel_normal_derivative(p: &Vec3, xi: &Vec3, normal: &Vec3) -> Result<f64> {
    let d = sub(p, xi);
    let r = norm(&d);
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(-dot(normal, &d) / (r * r * r))
}

/// Free-space dipole potential and gradient in the brain medium:
/// u_p = q.d / (4 pi sigma_brain |d|^3) with d = p - position.
pub fn dipole_primary(head: &HeadModel, dipole: &Dipole, p: &Vec3) -> Result<(f64, Vec3)> {
    let d = sub(p, &dipole.position);
    let r = norm(&d);
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    let c = 1.0 / (4.0 * std::f64::consts::PI * head.sigma_brain);
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let qd = dot(&dipole.moment, &d);
    let u = c * qd / r3;
    let grad = [
        c * (dipole.moment[0] / r3 - 3.0 * qd * d[0] / r5),
        c * (dipole.moment[1] / r3 - 3.0 * qd * d[1] / r5),
        c * (dipole.moment[2] / r3 - 3.0 * qd * d[2] / r5),
    ];
    Ok((u, grad))
}

/// Sizing and solver thresholds for the collocation system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfsConfig {
    /// Collocation points per sphere (three spheres).
    pub n_colloc: usize,
    pub counts: CenterCounts,
    /// Multiply flux rows by the scalp radius so potential and flux blocks
    /// carry comparable scale.
    pub flux_row_scaling: bool,
    /// Relative singular-value cutoff for the least-squares solution.
    pub tau_svd: f64,
    /// Relative threshold defining the numerical rank; `None` means
    /// machine-epsilon times max(rows, cols).
    pub tau_rank: Option<f64>,
    /// Collision margin between fictitious and physical radii (m).
    pub eps_geom: f64,
}

impl Default for MfsConfig {
    fn default() -> Self {
        MfsConfig {
            n_colloc: 300,
            counts: CenterCounts::default(),
            flux_row_scaling: true,
            tau_svd: 1e-12,
            tau_rank: None,
            eps_geom: EPSILON_GEOM,
        }
    }
}

impl MfsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_colloc == 0 {
            return Err(Error::InvalidArgument(
                "collocation count must be positive".into(),
            ));
        }
        self.counts.validate()?;
        if !(self.tau_svd > 0.0 && self.tau_svd < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau_svd must lie in (0, 1), got {}",
                self.tau_svd
            )));
        }
        Ok(())
    }
}

/// Collocation points on the three physical spheres.
#[derive(Debug, Clone)]
pub struct CollocationSets {
    pub scalp: PointSet,
    pub skull: PointSet,
    pub brain: PointSet,
}

/// Column ranges of the five center groups, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnBlocks {
    pub scalp_inflated: (usize, usize),
    pub scalp_deflated: (usize, usize),
    pub skull_inflated: (usize, usize),
    pub skull_deflated: (usize, usize),
    pub brain_inflated: (usize, usize),
}

/// Row ranges of the five collocation blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowBlocks {
    pub scalp_flux: (usize, usize),
    pub interface_skull_scalp_potential: (usize, usize),
    pub interface_skull_scalp_flux: (usize, usize),
    pub interface_brain_skull_potential: (usize, usize),
    pub interface_brain_skull_flux: (usize, usize),
}

/// Assembled collocation system. Dipole-independent by construction.
pub struct MfsSystem {
    pub matrix: Mat<f64>,
    pub head: HeadModel,
    pub colloc: CollocationSets,
    pub centers: CenterSets,
    pub rows: RowBlocks,
    pub cols: ColumnBlocks,
    /// Factor applied to flux rows (the scalp radius, or 1).
    pub flux_scale: f64,
}

impl MfsSystem {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Right-hand side for one dipole: the free-space dipole field moved onto
    /// the brain-skull interface rows (potential rows carry +u_p, flux rows
    /// +sigma_brain times its normal derivative).
    pub fn rhs(&self, dipole: &Dipole) -> Result<Vec<f64>> {
        let b = norm(&dipole.position);
        if b >= self.head.r_brain {
            return Err(Error::Domain(format!(
                "dipole at radius {b} is not strictly inside the brain (r_brain {})",
                self.head.r_brain
            )));
        }
        let mut rhs = vec![0.0; self.nrows()];
        let (pot_lo, _) = self.rows.interface_brain_skull_potential;
        let (flux_lo, _) = self.rows.interface_brain_skull_flux;
        for (k, p) in self.colloc.brain.points.iter().enumerate() {
            let normal = unit_normal(p);
            let (u_p, grad) = dipole_primary(&self.head, dipole, p)?;
            rhs[pot_lo + k] = u_p;
            rhs[flux_lo + k] = self.flux_scale * self.head.sigma_brain * dot(&grad, &normal);
        }
        Ok(rhs)
    }
}

fn unit_normal(p: &Vec3) -> Vec3 {
    let r = norm(p);
    [p[0] / r, p[1] / r, p[2] / r]
}

fn block(start: usize, len: usize) -> (usize, usize) {
    (start, start + len)
}

/// Assemble the collocation system from prebuilt point sets.
pub fn assemble_from_parts(
    colloc: CollocationSets,
    centers: CenterSets,
    head: &HeadModel,
    flux_row_scaling: bool,
) -> Result<MfsSystem> {
    let n = colloc.scalp.len();
    if colloc.skull.len() != n || colloc.brain.len() != n {
        return Err(Error::InvalidArgument(
            "collocation sets must have equal sizes".into(),
        ));
    }
    let flux_scale = if flux_row_scaling { head.r_scalp } else { 1.0 };

    let c = [
        centers.scalp_inflated.len(),
        centers.scalp_deflated.len(),
        centers.skull_inflated.len(),
        centers.skull_deflated.len(),
        centers.brain_inflated.len(),
    ];
    let cols = ColumnBlocks {
        scalp_inflated: block(0, c[0]),
        scalp_deflated: block(c[0], c[1]),
        skull_inflated: block(c[0] + c[1], c[2]),
        skull_deflated: block(c[0] + c[1] + c[2], c[3]),
        brain_inflated: block(c[0] + c[1] + c[2] + c[3], c[4]),
    };
    let rows = RowBlocks {
        scalp_flux: block(0, n),
        interface_skull_scalp_potential: block(n, n),
        interface_skull_scalp_flux: block(2 * n, n),
        interface_brain_skull_potential: block(3 * n, n),
        interface_brain_skull_flux: block(4 * n, n),
    };

    let total_cols: usize = c.iter().sum();
    let mut matrix = Mat::<f64>::zeros(5 * n, total_cols);

    // Column groups with the solution domain they belong to:
    // scalp potential u1 uses the scalp sets, skull u2 the skull sets, and
    // the brain's homogeneous part the brain set.
    let scalp_groups = [
        (&centers.scalp_inflated, cols.scalp_inflated.0),
        (&centers.scalp_deflated, cols.scalp_deflated.0),
    ];
    let skull_groups = [
        (&centers.skull_inflated, cols.skull_inflated.0),
        (&centers.skull_deflated, cols.skull_deflated.0),
    ];
    let brain_group = [(&centers.brain_inflated, cols.brain_inflated.0)];

    let (s1, s2, s3) = (head.sigma_scalp, head.sigma_skull, head.sigma_brain);

    // Insulated scalp: sigma_scalp du1/dn = 0 on the scalp sphere.
    for (k, p) in colloc.scalp.points.iter().enumerate() {
        let nrm = unit_normal(p);
        let row = rows.scalp_flux.0 + k;
        for (set, col0) in scalp_groups {
            for (j, xi) in set.points.iter().enumerate() {
                matrix[(row, col0 + j)] =
                    flux_scale * s1 * kernel_normal_derivative(p, xi, &nrm)?;
            }
        }
    }

    // Skull-scalp interface: u1 - u2 = 0 and sigma_scalp du1 - sigma_skull du2 = 0.
    for (k, p) in colloc.skull.points.iter().enumerate() {
        let nrm = unit_normal(p);
        let pot_row = rows.interface_skull_scalp_potential.0 + k;
        let flux_row = rows.interface_skull_scalp_flux.0 + k;
        for (set, col0) in scalp_groups {
            for (j, xi) in set.points.iter().enumerate() {
                matrix[(pot_row, col0 + j)] = kernel(p, xi)?;
                matrix[(flux_row, col0 + j)] =
                    flux_scale * s1 * kernel_normal_derivative(p, xi, &nrm)?;
            }
        }
        for (set, col0) in skull_groups {
            for (j, xi) in set.points.iter().enumerate() {
                matrix[(pot_row, col0 + j)] = -kernel(p, xi)?;
                matrix[(flux_row, col0 + j)] =
                    -flux_scale * s2 * kernel_normal_derivative(p, xi, &nrm)?;
            }
        }
    }

    // Brain-skull interface: u2 - u3_hom carries the dipole field on the RHS.
    for (k, p) in colloc.brain.points.iter().enumerate() {
        let nrm = unit_normal(p);
        let pot_row = rows.interface_brain_skull_potential.0 + k;
        let flux_row = rows.interface_brain_skull_flux.0 + k;
        for (set, col0) in skull_groups {
            for (j, xi) in set.points.iter().enumerate() {
                matrix[(pot_row, col0 + j)] = kernel(p, xi)?;
                matrix[(flux_row, col0 + j)] =
                    flux_scale * s2 * kernel_normal_derivative(p, xi, &nrm)?;
            }
        }
        for (set, col0) in brain_group {
            for (j, xi) in set.points.iter().enumerate() {
                matrix[(pot_row, col0 + j)] = -kernel(p, xi)?;
                matrix[(flux_row, col0 + j)] =
                    -flux_scale * s3 * kernel_normal_derivative(p, xi, &nrm)?;
            }
        }
    }

    Ok(MfsSystem {
        matrix,
        head: *head,
        colloc,
        centers,
        rows,
        cols,
        flux_scale,
    })
}

/// Assemble the collocation system for a factor vector: spiral collocation
/// points on the three physical spheres, spiral centers on the five
/// fictitious spheres.
pub fn assemble(theta: &ThetaVector, head: &HeadModel, cfg: &MfsConfig) -> Result<MfsSystem> {
    cfg.validate()?;
    head.validate()?;
    let colloc = CollocationSets {
        scalp: spiral_points(cfg.n_colloc, head.r_scalp)?,
        skull: spiral_points(cfg.n_colloc, head.r_skull)?,
        brain: spiral_points(cfg.n_colloc, head.r_brain)?,
    };
    let centers = build_center_sets(theta, head, &cfg.counts, cfg.eps_geom)?;
    assemble_from_parts(colloc, centers, head, cfg.flux_row_scaling)
}

/// SVD-factorized system, reusable across dipoles for a fixed factor vector.
pub struct MfsSolver {
    system: MfsSystem,
    u: Mat<f64>,
    singular_values: Vec<f64>,
    v: Mat<f64>,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    tau_svd: f64,
}

/// Least-squares solution for one dipole.
#[derive(Debug, Clone)]
pub struct MfsSolution {
    pub coefficients: Vec<f64>,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub residual_norm: f64,
    pub rhs_norm: f64,
}

/// Factorize the system and apply the rank rule: a numerical rank below the
/// column count marks the factor vector as an invalid parameterization.
pub fn factorize(system: MfsSystem, cfg: &MfsConfig) -> Result<MfsSolver> {
    let svd = system
        .matrix
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD failed to converge: {e:?}")))?;
    let s_col = svd.S().column_vector();
    let singular_values: Vec<f64> = (0..s_col.nrows()).map(|i| s_col[i]).collect();
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let sigma_min = singular_values.last().copied().unwrap_or(0.0);

    let (m, n) = (system.nrows(), system.ncols());
    let tau_rank = cfg.tau_rank.unwrap_or(f64::EPSILON * m.max(n) as f64);
    let rank = singular_values
        .iter()
        .filter(|s| **s > tau_rank * sigma_max)
        .count();
    if rank < n {
        return Err(Error::RankFailure { rank, cols: n });
    }

    Ok(MfsSolver {
        u: svd.U().to_owned(),
        v: svd.V().to_owned(),
        system,
        singular_values,
        rank,
        sigma_max,
        sigma_min,
        tau_svd: cfg.tau_svd,
    })
}

impl MfsSolver {
    pub fn system(&self) -> &MfsSystem {
        &self.system
    }

    /// Minimum-norm truncated-SVD least squares for one dipole's right-hand
    /// side. Linear in the dipole moment.
    pub fn solve(&self, dipole: &Dipole) -> Result<MfsSolution> {
        let b = self.system.rhs(dipole)?;
        self.solve_rhs(&b)
    }

    /// Minimum-norm truncated-SVD least squares for an arbitrary right-hand
    /// side of matching length.
    pub fn solve_rhs(&self, b: &[f64]) -> Result<MfsSolution> {
        let (m, n) = (self.system.nrows(), self.system.ncols());
        if b.len() != m {
            return Err(Error::InvalidArgument(format!(
                "right-hand side length {} does not match {m} rows",
                b.len()
            )));
        }
        let k = self.singular_values.len();
        let cutoff = self.tau_svd * self.sigma_max;

        let mut x = vec![0.0; n];
        for j in 0..k {
            let s = self.singular_values[j];
            if s <= cutoff {
                continue;
            }
            let mut utb = 0.0;
            for i in 0..m {
                utb += self.u[(i, j)] * b[i];
            }
            let c = utb / s;
            for i in 0..n {
                x[i] += self.v[(i, j)] * c;
            }
        }

        let mut res_sq = 0.0;
        for i in 0..m {
            let mut ax = 0.0;
            for j in 0..n {
                ax += self.system.matrix[(i, j)] * x[j];
            }
            res_sq += (ax - b[i]) * (ax - b[i]);
        }
        let rhs_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();

        Ok(MfsSolution {
            coefficients: x,
            rank: self.rank,
            sigma_max: self.sigma_max,
            sigma_min: self.sigma_min,
            residual_norm: res_sq.sqrt(),
            rhs_norm,
        })
    }

    /// Scalp potential of a solution, summed over the scalp domain's two
    /// center groups only.
    pub fn evaluate_scalp(&self, solution: &MfsSolution, test: &PointSet) -> Result<ScalpField> {
        evaluate_scalp(&self.system, solution, test)
    }
}

/// Evaluate the scalp-domain expansion at test points.
pub fn evaluate_scalp(
    system: &MfsSystem,
    solution: &MfsSolution,
    test: &PointSet,
) -> Result<ScalpField> {
    if solution.coefficients.len() != system.ncols() {
        return Err(Error::InvalidArgument(
            "coefficient count does not match system columns".into(),
        ));
    }
    let groups = [
        (&system.centers.scalp_inflated, system.cols.scalp_inflated.0),
        (&system.centers.scalp_deflated, system.cols.scalp_deflated.0),
    ];
    let mut values = Vec::with_capacity(test.len());
    for p in &test.points {
        let mut u = 0.0;
        for (set, col0) in groups {
            for (j, xi) in set.points.iter().enumerate() {
                u += solution.coefficients[col0 + j] * kernel(p, xi)?;
            }
        }
        values.push(u);
    }
    Ok(ScalpField { values })
}

/// Logarithm convention for the quality metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    Natural,
    Base10,
}

/// Options for the quality metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricOptions {
    pub log_base: LogBase,
    /// Subtract each field's mean over the test points before comparing;
    /// removes the additive-constant ambiguity of the insulated problem.
    pub common_average_reference: bool,
    /// Upper cap keeping the metric finite for (near-)exact matches.
    pub q_cap: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            log_base: LogBase::Natural,
            common_average_reference: false,
            q_cap: 40.0,
        }
    }
}

/// Solution quality: negative log of the relative squared error between the
/// solver's scalp field and the reference field. Larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore(pub f64);

impl std::fmt::Display for QualityScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// Compress the field mismatch into a scalar:
/// Q = -log( sum |u - u_true|^2 / sum |u_true|^2 ), capped at `q_cap`.
pub fn quality_q(
    u_mfs: &ScalpField,
    u_true: &ScalpField,
    opts: &MetricOptions,
) -> Result<QualityScore> {
    if u_mfs.len() != u_true.len() {
        return Err(Error::InvalidArgument(format!(
            "field lengths differ: {} vs {}",
            u_mfs.len(),
            u_true.len()
        )));
    }
    if u_true.is_empty() {
        return Err(Error::InvalidArgument("empty fields".into()));
    }
    let (off_m, off_t) = if opts.common_average_reference {
        (u_mfs.mean(), u_true.mean())
    } else {
        (0.0, 0.0)
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for (m, t) in u_mfs.values.iter().zip(&u_true.values) {
        let mv = m - off_m;
        let tv = t - off_t;
        num += (mv - tv) * (mv - tv);
        den += tv * tv;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    if num == 0.0 {
        return Ok(QualityScore(opts.q_cap));
    }
    let q = match opts.log_base {
        LogBase::Natural => -(num / den).ln(),
        LogBase::Base10 => -(num / den).log10(),
    };
    Ok(QualityScore(q.min(opts.q_cap)))
}

/// One-shot composition: assemble, factorize, solve, evaluate, and score one
/// factor vector on one dipole against the analytic reference.
///
/// Callers scoring several dipoles at one factor vector should keep the
/// [`MfsSolver`] instead; the factorization is dipole-independent.
pub fn forward_quality(
    theta: &ThetaVector,
    head: &HeadModel,
    mfs_cfg: &MfsConfig,
    dipole: &Dipole,
    test: &PointSet,
    oracle_cfg: &OracleConfig,
    metric: &MetricOptions,
) -> Result<QualityScore> {
    let solver = factorize(assemble(theta, head, mfs_cfg)?, mfs_cfg)?;
    let solution = solver.solve(dipole)?;
    let u_mfs = solver.evaluate_scalp(&solution, test)?;
    let u_true = layered_potential(head, dipole, test, oracle_cfg)?;
    quality_q(&u_mfs, &u_true, metric)
}
