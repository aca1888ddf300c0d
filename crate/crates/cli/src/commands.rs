use std::fs;
use std::path::Path;
use std::sync::Arc;

use galbrun_core::analysis::{
    consistency_error, inf_sup_constant, mach_report, x_norm_error, x_norm_error_exact, MachReport, UNSTABLE_BETA,
};
use galbrun_core::coefficients::SourceField;
use galbrun_core::fem::{BcMode, Family};
use galbrun_core::solver::{
    build_mesh, manufactured_solution, solve_galbrun, solve_on_mesh, MeshFamily, ProblemConfig, Rhs, Solution, Variant,
};
use galbrun_core::{barycentric_refine, generate_square_mesh, Mesh};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    ErrorTarget, InfSupConfig, MachConfig, MeshConfig, RhsChoice, SolveConfig, StudyConfig, VelocityBc,
};
use crate::error::{CliError, Result};
use crate::plot::convergence_svg;
use crate::records::{fmt17, write_rows, Row};

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("plain data serializes");
    v.push(b'\n');
    v
}

fn l2_norm(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    config: &'a ProblemConfig,
    rhs: RhsChoice,
    num_triangles: usize,
    num_dofs: usize,
    residual: f64,
    method: String,
    norm: f64,
    /// `[re, im]` per DOF; DOF `2·node + c`.
    velocity: Vec<[f64; 2]>,
    pressure: Option<Vec<[f64; 2]>>,
}

fn pairs(u: &[Complex64]) -> Vec<[f64; 2]> {
    u.iter().map(|z| [z.re, z.im]).collect()
}

fn rhs_of(choice: RhsChoice) -> Rhs {
    match choice {
        RhsChoice::GaussianSource => Rhs::GaussianSource,
        RhsChoice::Manufactured => Rhs::Manufactured,
        RhsChoice::Zero => {
            let zero: SourceField = Arc::new(|_| [Complex64::default(); 2]);
            Rhs::Custom(zero)
        }
    }
}

/// Solves one problem and writes `solution.json`. Returns the summary line.
pub fn solve(cfg: &SolveConfig, out: &Path) -> Result<String> {
    let s = solve_galbrun(&cfg.problem, &rhs_of(cfg.rhs))?;
    let norm = l2_norm(&s.velocity);
    let file = SolutionFile {
        config: &cfg.problem,
        rhs: cfg.rhs,
        num_triangles: s.space.mesh().num_triangles(),
        num_dofs: s.space.num_dofs(),
        residual: s.report.residual,
        method: format!("{:?}", s.report.method),
        norm,
        velocity: pairs(&s.velocity),
        pressure: s.pressure.as_deref().map(pairs),
    };
    write_file(&out.join("solution.json"), &json_bytes(&file))?;
    Ok(format!(
        "solved k={} h={} triangles={} dofs={} residual={:.3e} norm={}",
        cfg.problem.k,
        cfg.problem.h,
        file.num_triangles,
        file.num_dofs,
        file.residual,
        fmt17(norm)
    ))
}

/// Error and consistency error of one study point.
fn study_point(study: &StudyConfig, reference: Option<&Solution>, k: usize, h: f64) -> Result<Row> {
    let cfg = study.point(k, h);
    let (s, error) = match reference {
        Some(r) => {
            let s = solve_on_mesh(&cfg, Arc::new(build_mesh(&cfg)?), &Rhs::GaussianSource)?;
            let e = x_norm_error(&s, r)?;
            (s, e)
        }
        None => {
            let s = solve_galbrun(&cfg, &Rhs::Manufactured)?;
            let exact = manufactured_solution(&s.coefficients).exact;
            let e = x_norm_error_exact(&s.space, &s.velocity, &s.coefficients.b, &exact)?;
            (s, e)
        }
    };
    let conserror = if k >= 2 { consistency_error(&s.space, &s.velocity, &s.coefficients)? } else { f64::NAN };
    Ok(Row { order: k, h, error, conserror })
}

/// Runs a study on the current rayon pool. Rows come out ordered by
/// ascending `k`, then by the configured (decreasing) `h`.
pub fn study_rows(study: &StudyConfig) -> Result<Vec<Row>> {
    let reference = match study.target {
        ErrorTarget::Reference { k, h } => Some(solve_galbrun(&study.point(k, h), &Rhs::GaussianSource)?),
        ErrorTarget::Manufactured => None,
    };
    let mut ks = study.k_values.clone();
    ks.sort_unstable();
    let points: Vec<(usize, f64)> = ks.iter().flat_map(|&k| study.h_values.iter().map(move |&h| (k, h))).collect();
    points.par_iter().map(|&(k, h)| study_point(study, reference.as_ref(), k, h)).collect()
}

/// Writes the CSV (and the SVG if asked). Returns one line per row.
pub fn convergence(study: &StudyConfig, out: &Path, svg: bool) -> Result<Vec<String>> {
    let rows = study_rows(study)?;
    let mut csv = Vec::new();
    write_rows(&mut csv, &rows).map_err(|e| CliError::Solver(format!("csv encoding: {e}")))?;
    write_file(&out.join(&study.csv), &csv)?;
    if svg {
        write_file(&out.join(&study.svg), convergence_svg(&rows).as_bytes())?;
    }
    Ok(rows
        .iter()
        .map(|r| format!("k={} h={} error={:.6e} conserror={:.6e}", r.order, r.h, r.error, r.conserror))
        .collect())
}

/// One row of the inf-sup table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfSupRow {
    pub family: MeshFamily,
    pub k: usize,
    pub level: usize,
    pub h: f64,
    pub beta: f64,
    /// Set when `β_h` is numerically zero: the pair locks.
    pub unstable: bool,
}

fn family_name(f: MeshFamily) -> &'static str {
    match f {
        MeshFamily::Unstructured => "unstructured",
        MeshFamily::Barycentric => "barycentric",
    }
}

fn square_mesh(family: MeshFamily, h: f64, seed: u64, periodic: bool) -> Result<Mesh> {
    let base = generate_square_mesh(h, seed, periodic)?;
    Ok(match family {
        MeshFamily::Unstructured => base,
        MeshFamily::Barycentric => barycentric_refine(&base),
    })
}

pub fn infsup_rows(cfg: &InfSupConfig) -> Result<Vec<InfSupRow>> {
    let bc = match cfg.velocity_bc {
        VelocityBc::FullDirichlet => BcMode::FullDirichlet,
        VelocityBc::StrongNormal => BcMode::StrongNormal,
    };
    let pressure = match cfg.pair {
        Variant::ScottVogelius => Family::ScalarDiscontinuousZeroMean,
        Variant::TaylorHood => Family::ScalarContinuousZeroMean,
    };
    let mut points = Vec::new();
    for &family in &cfg.families {
        for &k in &cfg.k_values {
            for (level, &h) in cfg.h_values.iter().enumerate() {
                points.push((family, k, level, h));
            }
        }
    }
    points
        .par_iter()
        .map(|&(family, k, level, h)| {
            let mesh = Arc::new(square_mesh(family, h, cfg.seed, false)?);
            let beta = inf_sup_constant(mesh, k, bc, pressure)?;
            Ok(InfSupRow { family, k, level, h, beta, unstable: beta < UNSTABLE_BETA })
        })
        .collect()
}

/// Writes the inf-sup table as CSV. Returns the printed table.
pub fn infsup(cfg: &InfSupConfig, out: &Path) -> Result<Vec<String>> {
    let rows = infsup_rows(cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| CliError::Solver(format!("csv encoding: {e}"));
    w.write_record(["family", "k", "level", "h", "beta", "unstable"]).map_err(enc)?;
    let mut lines = vec![format!("{:<13} {:>2} {:>5} {:>8} {:>12}", "family", "k", "level", "h", "beta")];
    for r in &rows {
        let name = family_name(r.family);
        w.write_record([name.to_string(), r.k.to_string(), r.level.to_string(), fmt17(r.h), fmt17(r.beta), r.unstable.to_string()])
            .map_err(enc)?;
        let flag = if r.unstable { "  WARNING: unstable pair (beta ~ 0)" } else { "" };
        lines.push(format!("{name:<13} {:>2} {:>5} {:>8} {:>12.6e}{flag}", r.k, r.level, r.h, r.beta));
    }
    let bytes = w.into_inner().map_err(|e| CliError::Solver(format!("csv encoding: {e}")))?;
    write_file(&out.join(&cfg.table), &bytes)?;
    Ok(lines)
}

pub fn mach(cfg: &MachConfig, out: &Path) -> Result<MachReport> {
    let report = mach_report(&cfg.problem().coefficients(), cfg.beta_h, cfg.grid)?;
    #[derive(Serialize)]
    struct MachFile<'a> {
        config: &'a MachConfig,
        report: MachReport,
    }
    write_file(&out.join("mach.json"), &json_bytes(&MachFile { config: cfg, report }))?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct MeshSummary {
    pub vertices: usize,
    pub triangles: usize,
    pub boundary_edges: usize,
    pub periodic_pairs: usize,
    pub h_max: f64,
    pub min_angle_degrees: f64,
    pub area: f64,
    pub valid: bool,
}

pub fn mesh_info(cfg: &MeshConfig, out: Option<&Path>) -> Result<MeshSummary> {
    let mesh = square_mesh(cfg.mesh, cfg.h, cfg.seed, cfg.periodic)?;
    let summary = MeshSummary {
        vertices: mesh.num_vertices(),
        triangles: mesh.num_triangles(),
        boundary_edges: mesh.boundary_edges().len(),
        periodic_pairs: mesh.periodic_pairs().map_or(0, <[_]>::len),
        h_max: mesh.h_max(),
        min_angle_degrees: mesh.min_angle_degrees(),
        area: mesh.total_area(),
        valid: mesh.validate().is_valid(),
    };
    if let Some(dir) = out {
        #[derive(Serialize)]
        struct MeshFile<'a> {
            summary: &'a MeshSummary,
            vertices: Vec<[f64; 2]>,
            triangles: &'a [[usize; 3]],
        }
        let file = MeshFile {
            summary: &summary,
            vertices: mesh.vertices().iter().map(|p| [p.x, p.y]).collect(),
            triangles: mesh.triangles(),
        };
        write_file(&dir.join("mesh.json"), &json_bytes(&file))?;
    }
    Ok(summary)
}
