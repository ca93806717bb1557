//! The convergence-study harness: derives blended geometries from a sweep
//! of atomistic-region radii, solves the coupled methods on each, and
//! reports error records with fitted decay slopes against the element
//! count.
//!
//! Geometry convention: a sweep value R_a is the start of the blend ramp
//! and the blend ends at blend_ratio·R_a. The mesh is fully refined a
//! cutoff-collar beyond the ramp end, the triangulated domain contains
//! the ball of radius (R_a)^s with a per-method exponent s, and elements
//! then coarsen in proportion to distance. The recorded radii are
//! measured from the mesh that was actually built.

use std::fmt;
use std::time::Instant;

use nalgebra::SVector;

use crate::analysis::fit::log_log_fit;
use crate::analysis::norms;
use crate::error::{BlendError, Result};
use crate::exec::Exec;
use crate::geometry::{BlendProfile, Mesh, MeshField, MeshParams, MIN_BLEND_WIDTH};
use crate::la::Csr;
use crate::lattice::{AtomisticModel, Site};
use crate::methods::{bqce_hessian, bqcf_jacobian, quasi_best_approx, CoupledState};
use crate::solvers::{
    expand_components, mesh_stiffness, solve_bqce, solve_bqcf, stability_constant, DofMap,
    ReferenceSolution, SolveStatus,
};

/// Which coupled method a sweep point ran.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    /// Blended energy functional.
    Bqce,
    /// Blended force operator.
    Bqcf,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bqce => "bqce",
            Method::Bqcf => "bqcf",
        })
    }
}

/// One solved sweep point.
#[derive(Clone, Debug)]
pub struct ConvergenceRecord {
    pub method: Method,
    /// Start of the blend ramp (the atomistic-region radius).
    pub r_atom: f64,
    /// End of the blend ramp.
    pub r_blend: f64,
    /// Inscribed radius of the triangulated domain.
    pub r_refined: f64,
    /// Circumscribed radius of the triangulated domain.
    pub r_outer: f64,
    /// Element count of the mesh — the cost proxy all slopes are fitted
    /// against.
    pub dof: usize,
    /// Lattice-sampled gradient error against the reference displacement.
    pub h1_error: f64,
    /// |E_coupled − E_reference|; energy method only.
    pub energy_error: Option<f64>,
    /// Smallest stiffness-normalized hessian quotient (energy method,
    /// when stability probing is enabled).
    pub gamma: Option<f64>,
    /// Same quotient for the symmetrized force-method jacobian.
    pub mu: Option<f64>,
    /// Wall time of this sweep point.
    pub seconds: f64,
}

/// Sweep configuration. Radii are blend-ramp starts; everything else is
/// derived per method.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub methods: Vec<Method>,
    pub r_atoms: Vec<f64>,
    /// Ramp end over ramp start; must leave at least the minimum blend
    /// width at the smallest radius.
    pub blend_ratio: f64,
    /// Domain-size exponent for the energy method: the domain contains
    /// the ball of radius (R_a)^s. Must satisfy s > 1.
    pub bqce_domain_exponent: f64,
    /// Domain-size exponent for the force method. Must satisfy s >= 2.
    pub bqcf_domain_exponent: f64,
    /// Mesh grading slope.
    pub h_factor: f64,
    /// Nonlinear solve tolerance (Euclidean residual).
    pub tol: f64,
    pub max_iter: usize,
    /// Also compute the stability quotients per record (adds a banded
    /// eigensolve per point).
    pub with_stability: bool,
    pub exec: Exec,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            methods: vec![Method::Bqce, Method::Bqcf],
            r_atoms: vec![4.0, 8.0, 16.0],
            blend_ratio: 2.0,
            bqce_domain_exponent: 1.5,
            bqcf_domain_exponent: 2.0,
            h_factor: 1.0,
            tol: 1e-10,
            max_iter: 60,
            with_stability: false,
            exec: Exec::Par,
        }
    }
}

/// A guarded log-log slope fit.
#[derive(Clone, Debug)]
pub struct SlopeFitOutcome {
    /// None when the fit is undefined (a single point, or non-positive
    /// values); `note` says why.
    pub slope: Option<f64>,
    /// True when the pre-asymptotic guard dropped the smallest-radius
    /// point.
    pub excluded_smallest: bool,
    pub points_used: usize,
    pub note: Option<String>,
}

/// Fitted slopes for one method's sweep.
#[derive(Clone, Debug)]
pub struct MethodSlopes {
    pub method: Method,
    pub h1: SlopeFitOutcome,
    /// Energy method only.
    pub energy: Option<SlopeFitOutcome>,
}

/// Everything a sweep produced.
#[derive(Clone, Debug)]
pub struct StudyReport {
    /// Sorted by (method, r_atom) regardless of execution order.
    pub records: Vec<ConvergenceRecord>,
    pub slopes: Vec<MethodSlopes>,
}

/// Least-squares slope of log(error) vs log(dof) with a pre-asymptotic
/// guard: with at least three points, the smallest-radius point is
/// dropped (and the drop reported) when its residual exceeds twice the
/// fit RMS. Inputs are ordered by increasing radius.
pub fn guarded_slope(dofs: &[f64], errors: &[f64]) -> SlopeFitOutcome {
    assert_eq!(dofs.len(), errors.len(), "point counts");
    if dofs.len() < 2 {
        return SlopeFitOutcome {
            slope: None,
            excluded_smallest: false,
            points_used: dofs.len(),
            note: Some(format!(
                "slope undefined: {} sweep point(s), need at least 2",
                dofs.len()
            )),
        };
    }
    let Some(fit) = log_log_fit(dofs, errors) else {
        return SlopeFitOutcome {
            slope: None,
            excluded_smallest: false,
            points_used: dofs.len(),
            note: Some("slope undefined: non-positive errors or repeated dof".into()),
        };
    };
    if dofs.len() >= 3 && fit.rms > 0.0 && fit.residuals[0].abs() > 2.0 * fit.rms {
        if let Some(refit) = log_log_fit(&dofs[1..], &errors[1..]) {
            return SlopeFitOutcome {
                slope: Some(refit.slope),
                excluded_smallest: true,
                points_used: dofs.len() - 1,
                note: Some(format!(
                    "pre-asymptotic guard dropped the smallest radius \
                     (residual {:.3} > 2 × rms {:.3})",
                    fit.residuals[0].abs(),
                    fit.rms
                )),
            };
        }
    }
    SlopeFitOutcome {
        slope: Some(fit.slope),
        excluded_smallest: false,
        points_used: dofs.len(),
        note: None,
    }
}

fn cutoff_collar<const M: usize>(model: &AtomisticModel<M>) -> f64 {
    let r_cut = model
        .potential()
        .range()
        .vectors()
        .iter()
        .map(|v| ((v[0] * v[0] + v[1] * v[1]) as f64).sqrt())
        .fold(0.0, f64::max);
    (2.0 * r_cut + std::f64::consts::SQRT_2).ceil()
}

fn domain_exponent(cfg: &StudyConfig, method: Method) -> f64 {
    match method {
        Method::Bqce => cfg.bqce_domain_exponent,
        Method::Bqcf => cfg.bqcf_domain_exponent,
    }
}

fn validate(cfg: &StudyConfig) -> Result<()> {
    if cfg.methods.is_empty() {
        return Err(BlendError::Config("no methods selected for the sweep".into()));
    }
    if cfg.r_atoms.is_empty() {
        return Err(BlendError::Config("empty radius sweep".into()));
    }
    for &r in &cfg.r_atoms {
        if !(r > 0.0) || !r.is_finite() {
            return Err(BlendError::Config(format!(
                "sweep radius must be positive and finite, got {r}"
            )));
        }
        let width = (cfg.blend_ratio - 1.0) * r;
        if width < MIN_BLEND_WIDTH {
            return Err(BlendError::Config(format!(
                "blend width (blend_ratio − 1)·R_a = {width} at R_a = {r} violates \
                 width >= {MIN_BLEND_WIDTH}"
            )));
        }
    }
    if cfg.methods.contains(&Method::Bqce) && !(cfg.bqce_domain_exponent > 1.0) {
        return Err(BlendError::Config(format!(
            "energy-method domain exponent violates s > 1, got s = {}",
            cfg.bqce_domain_exponent
        )));
    }
    if cfg.methods.contains(&Method::Bqcf) && !(cfg.bqcf_domain_exponent >= 2.0) {
        return Err(BlendError::Config(format!(
            "force-method domain exponent violates s >= 2, got s = {}",
            cfg.bqcf_domain_exponent
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(BlendError::Config(format!(
            "solve tolerance must be positive, got {}",
            cfg.tol
        )));
    }
    if cfg.max_iter == 0 {
        return Err(BlendError::Config("max_iter must be at least 1".into()));
    }
    Ok(())
}

/// Mesh parameters and blend profile for one sweep point.
fn sweep_geometry<const M: usize>(
    model: &AtomisticModel<M>,
    cfg: &StudyConfig,
    method: Method,
    r_atom: f64,
) -> Result<(MeshParams, BlendProfile)> {
    let r_ramp_end = cfg.blend_ratio * r_atom;
    let blend = BlendProfile::ramp(r_atom, r_ramp_end)?;
    let r_core = r_ramp_end + cutoff_collar(model);
    let r_domain = r_atom.powf(domain_exponent(cfg, method)).max(r_core + 2.0);
    Ok((
        MeshParams {
            r_core,
            r_domain,
            r_blend: r_ramp_end,
            h_factor: cfg.h_factor,
        },
        blend,
    ))
}

struct SweepPoint {
    method: Method,
    r_atom: f64,
    mesh: Mesh,
    blend: BlendProfile,
}

/// Runs the sweep against a precomputed reference solution clamped at
/// radius `r_ref`. Fails loudly — with the offending point and its solve
/// status — if any point does not converge, rather than fitting slopes
/// through bad data.
pub fn convergence_study<const M: usize>(
    model: &AtomisticModel<M>,
    reference: &ReferenceSolution<M>,
    r_ref: f64,
    cfg: &StudyConfig,
) -> Result<StudyReport> {
    validate(cfg)?;

    let mut radii = cfg.r_atoms.clone();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();

    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();

    // Build all geometries first so the reference-domain policy can be
    // checked before any solve runs.
    let mut points = Vec::new();
    for &method in &methods {
        for &r_atom in &radii {
            let (params, blend) = sweep_geometry(model, cfg, method, r_atom)?;
            let mesh = Mesh::build(&params)?;
            points.push(SweepPoint {
                method,
                r_atom,
                mesh,
                blend,
            });
        }
    }
    let max_outer = points.iter().map(|p| p.mesh.r_outer()).fold(0.0, f64::max);
    if r_ref < 2.0 * max_outer {
        return Err(BlendError::Config(format!(
            "reference radius {r_ref} violates R_ref >= 2·max(R_o) = {}",
            2.0 * max_outer
        )));
    }

    let free = reference.op.free();
    let u_ref = |s: Site| -> SVector<f64, M> {
        match free.index_of(s) {
            Some(i) => reference.u[i],
            None => SVector::zeros(),
        }
    };

    let mut records = Vec::with_capacity(points.len());
    for point in points {
        let t0 = Instant::now();
        let state = CoupledState::new(model.clone(), point.mesh, point.blend, cfg.exec)?;
        let init = quasi_best_approx(state.mesh(), state.mesh().r_inscribed(), u_ref)?;
        let (u_h, report) = match point.method {
            Method::Bqce => solve_bqce(&state, Some(&init), cfg.tol, cfg.max_iter)?,
            Method::Bqcf => solve_bqcf(&state, Some(&init), cfg.tol, cfg.max_iter)?,
        };
        if report.status != SolveStatus::Converged {
            return Err(BlendError::Solve(format!(
                "sweep point {} R_a = {} ended {:?} after {} iterations \
                 (residual {:.3e}); the sweep is abandoned",
                point.method,
                point.r_atom,
                report.status,
                report.iterations,
                report.residual_history.last().copied().unwrap_or(f64::NAN)
            )));
        }

        let mesh = state.mesh();
        let r_cmp = r_ref.min(2.0 * mesh.r_outer());
        let field = MeshField::new(mesh, &u_h);
        let coarse = |s: Site| -> SVector<f64, M> {
            field
                .value([s[0] as f64, s[1] as f64])
                .unwrap_or_else(SVector::zeros)
        };
        let h1 = norms::h1_error(coarse, u_ref, r_cmp);
        let energy_err = match point.method {
            Method::Bqce => Some(norms::energy_error(
                report.energy.expect("energy method reports its energy"),
                reference
                    .report
                    .energy
                    .expect("reference solve reports its energy"),
            )),
            Method::Bqcf => None,
        };

        let (gamma, mu) = if cfg.with_stability {
            let map = DofMap::interior(mesh, M);
            let n = map.len();
            let gram_trips = map.pack_triplets(&expand_components::<M>(&mesh_stiffness(mesh)));
            let gram = Csr::from_triplets(n, n, &gram_trips)?;
            match point.method {
                Method::Bqce => {
                    let h_trips = map.pack_triplets(&bqce_hessian(&state, &u_h)?);
                    let h = Csr::from_triplets(n, n, &h_trips)?;
                    (Some(stability_constant(&h, &gram)?), None)
                }
                Method::Bqcf => {
                    let j_trips = map.pack_triplets(&bqcf_jacobian(&state, &u_h)?);
                    let j = Csr::from_triplets(n, n, &j_trips)?;
                    (None, Some(stability_constant(&j.symmetrize()?, &gram)?))
                }
            }
        } else {
            (None, None)
        };

        records.push(ConvergenceRecord {
            method: point.method,
            r_atom: point.r_atom,
            r_blend: cfg.blend_ratio * point.r_atom,
            r_refined: mesh.r_inscribed(),
            r_outer: mesh.r_outer(),
            dof: mesh.triangles().len(),
            h1_error: h1,
            energy_error: energy_err,
            gamma,
            mu,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }

    records.sort_by(|a, b| {
        (a.method, a.r_atom)
            .partial_cmp(&(b.method, b.r_atom))
            .unwrap()
    });

    let mut slopes = Vec::new();
    for &method in &methods {
        let of_method: Vec<&ConvergenceRecord> =
            records.iter().filter(|r| r.method == method).collect();
        let dofs: Vec<f64> = of_method.iter().map(|r| r.dof as f64).collect();
        let h1s: Vec<f64> = of_method.iter().map(|r| r.h1_error).collect();
        let h1 = guarded_slope(&dofs, &h1s);
        let energy = match method {
            Method::Bqce => {
                let es: Vec<f64> = of_method
                    .iter()
                    .map(|r| r.energy_error.unwrap_or(f64::NAN))
                    .collect();
                Some(guarded_slope(&dofs, &es))
            }
            Method::Bqcf => None,
        };
        slopes.push(MethodSlopes { method, h1, energy });
    }

    Ok(StudyReport { records, slopes })
}

/// Renders records as CSV. With `timing` off, the seconds column is NA so
/// reruns of the same configuration are byte-identical.
pub fn records_to_csv(records: &[ConvergenceRecord], timing: bool) -> String {
    let opt = |v: Option<f64>| match v {
        Some(x) => format!("{x}"),
        None => "NA".into(),
    };
    let mut out = String::from("method,Ra,Rb,Ri,Ro,dof,h1_error,energy_error,gamma,mu,seconds\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.r_atom,
            r.r_blend,
            r.r_refined,
            r.r_outer,
            r.dof,
            r.h1_error,
            opt(r.energy_error),
            opt(r.gamma),
            opt(r.mu),
            if timing {
                format!("{}", r.seconds)
            } else {
                "NA".into()
            }
        ));
    }
    out
}
