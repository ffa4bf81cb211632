//! The six subcommands: mesh generation, solving, estimation, trace
//! verification, parameter sweeps and weight comparison.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use aniso_fem::analysis::fuzz::{run_verification, Family};
use aniso_fem::estimator::{
    compare_weights, report_to_csv, total_estimator, EstimatorReport, WeightScheme,
};
use aniso_fem::fem::{energy_error, solve_linear, solve_semilinear, NewtonParams, Reaction};
use aniso_fem::mesh::{
    generate_patch, node_patches, validate_mesh, write_mesh, ClassificationParams, PatchStyle,
    QualityParams, Triangulation,
};
use aniso_fem::quadrature::TriangleRule;

use crate::config::{build_generator_mesh, CliError, ExperimentConfig};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Serialize)]
struct MeshStats {
    nodes: usize,
    triangles: usize,
    edges: usize,
    n_anisotropic: usize,
    n_regular: usize,
    n_unclassified: usize,
    max_interior_angle: f64,
    quality_violations: usize,
}

fn mesh_stats(mesh: &Triangulation) -> MeshStats {
    let report = validate_mesh(mesh, &QualityParams::default());
    MeshStats {
        nodes: mesh.n_nodes(),
        triangles: mesh.triangles.len(),
        edges: mesh.edges.len(),
        n_anisotropic: report.n_anisotropic,
        n_regular: report.n_regular,
        n_unclassified: report.n_unclassified,
        max_interior_angle: report.max_interior_angle,
        quality_violations: report.violations.len(),
    }
}

#[derive(Serialize)]
struct SchemeSummary {
    scheme: &'static str,
    jump_total: f64,
    interior_total: f64,
    quad_total: f64,
    total: f64,
    effectivity: Option<f64>,
}

fn summarize(report: &EstimatorReport) -> SchemeSummary {
    SchemeSummary {
        scheme: report.scheme.id(),
        jump_total: report.jump_total,
        interior_total: report.interior_total,
        quad_total: report.quad_total,
        total: report.total,
        effectivity: report.effectivity,
    }
}

#[derive(Serialize)]
struct RunRecord {
    version: &'static str,
    config: ExperimentConfig,
    mesh_stats: MeshStats,
    solve_residual: f64,
    newton_iterations: usize,
    energy_error: Option<f64>,
    estimates: Vec<SchemeSummary>,
    wall_ms: WallTimes,
}

#[derive(Serialize)]
struct WallTimes {
    mesh: u128,
    solve: u128,
    estimate: u128,
}

pub struct GenerateMeshArgs {
    pub kind: String,
    pub n: usize,
    pub epsilon: f64,
    pub sigma: f64,
    pub diameter: f64,
    pub width: f64,
    pub triangles: usize,
    pub style: String,
    pub obtuseness: f64,
    pub out: PathBuf,
}

pub fn cmd_generate_mesh(args: &GenerateMeshArgs) -> Result<(), CliError> {
    let mesh = match args.kind.as_str() {
        "patch" => {
            let style = match args.style.as_str() {
                "fan" => PatchStyle::Fan,
                "strip" => PatchStyle::Strip,
                other => return Err(CliError::Config(format!("unknown patch style '{other}'"))),
            };
            generate_patch(args.diameter, args.width, args.triangles, style, args.obtuseness)?
        }
        kind => build_generator_mesh(kind, args.n, args.epsilon, args.sigma)?,
    };
    write_mesh(&mesh, &args.out)?;
    eprintln!(
        "wrote {} ({} nodes, {} triangles)",
        args.out.display(),
        mesh.n_nodes(),
        mesh.triangles.len()
    );
    Ok(())
}

fn solve_for(
    mesh: &Triangulation,
    spec: &aniso_fem::fem::ProblemSpec,
) -> Result<aniso_fem::fem::FemSolution, CliError> {
    match &spec.reaction {
        Reaction::Linear { .. } => Ok(solve_linear(mesh, spec)?),
        Reaction::Semilinear { .. } => {
            Ok(solve_semilinear(mesh, spec, NewtonParams::default())?)
        }
    }
}

pub fn cmd_solve(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let mesh = config.build_mesh()?;
    let spec = config.build_problem()?;
    let sol = solve_for(&mesh, &spec)?;
    #[derive(Serialize)]
    struct SolutionFile<'a> {
        nodal_values: &'a [f64],
    }
    let text = serde_json::to_string_pretty(&SolutionFile { nodal_values: &sol.nodal_values })
        .expect("serializable");
    std::fs::write(out, text)?;
    eprintln!(
        "solved: {} unknowns, residual {:.3e}",
        sol.nodal_values.len(),
        sol.residual_inf
    );
    Ok(())
}

fn parse_schemes(config: &ExperimentConfig) -> Result<Vec<WeightScheme>, CliError> {
    let mut schemes = Vec::new();
    for id in &config.estimator.schemes {
        match WeightScheme::from_id(id) {
            Some(s) => schemes.push(s),
            None => return Err(CliError::Config(format!("unknown weight scheme '{id}'"))),
        }
    }
    if schemes.is_empty() {
        return Err(CliError::Config("no weight schemes configured".into()));
    }
    Ok(schemes)
}

pub fn cmd_estimate(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let schemes = parse_schemes(config)?;
    let out_dir = PathBuf::from(&config.output.dir);
    std::fs::create_dir_all(&out_dir)?;

    let t0 = Instant::now();
    let mesh = config.build_mesh()?;
    let spec = config.build_problem()?;
    let t_mesh = t0.elapsed().as_millis();

    let t1 = Instant::now();
    let sol = solve_for(&mesh, &spec)?;
    let t_solve = t1.elapsed().as_millis();

    let t2 = Instant::now();
    let rule = TriangleRule::with_degree(config.estimator.quadrature_degree);
    let patches = node_patches(&mesh, &ClassificationParams::default());
    let mut estimates = Vec::new();
    for scheme in &schemes {
        let report = total_estimator(&mesh, &patches, &sol, &spec, *scheme, &rule)?;
        let csv = report_to_csv(&report, &patches);
        std::fs::write(out_dir.join(format!("estimate_{}.csv", scheme.id())), csv)?;
        std::fs::write(
            out_dir.join(format!("estimate_{}.json", scheme.id())),
            serde_json::to_string_pretty(&report).expect("serializable"),
        )?;
        estimates.push(summarize(&report));
    }
    let err = match &spec.exact {
        Some(_) => Some(energy_error(&mesh, &sol, &spec, &rule)?),
        None => None,
    };
    let t_est = t2.elapsed().as_millis();

    let record = RunRecord {
        version: VERSION,
        config: config.clone(),
        mesh_stats: mesh_stats(&mesh),
        solve_residual: sol.residual_inf,
        newton_iterations: sol.newton_iterations,
        energy_error: err,
        estimates,
        wall_ms: WallTimes { mesh: t_mesh, solve: t_solve, estimate: t_est },
    };
    let path = out_dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&record).expect("serializable"))?;
    Ok(path)
}

pub struct VerifyTraceArgs {
    pub families: String,
    pub aspects: String,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_verify_trace(args: &VerifyTraceArgs) -> Result<(), CliError> {
    let families: Vec<Family> = if args.families == "all" {
        Family::ALL.to_vec()
    } else {
        args.families
            .split(',')
            .map(|id| {
                Family::from_id(id.trim())
                    .ok_or_else(|| CliError::Config(format!("unknown family '{id}'")))
            })
            .collect::<Result<_, _>>()?
    };
    let aspects: Vec<f64> = args
        .aspects
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad aspect '{a}'")))
        })
        .collect::<Result<_, _>>()?;
    if aspects.is_empty() || aspects.iter().any(|&a| a < 1.0) {
        return Err(CliError::Config("aspects must be >= 1".into()));
    }
    let report = run_verification(&families, &aspects, args.samples, args.seed);
    #[derive(Serialize)]
    struct TraceRecord<'a> {
        version: &'static str,
        families_requested: &'a str,
        report: &'a aniso_fem::analysis::fuzz::VerificationReport,
    }
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&TraceRecord {
            version: VERSION,
            families_requested: &args.families,
            report: &report,
        })
        .expect("serializable"),
    )?;
    for fam in &report.families {
        eprintln!(
            "{:<12} count {:>8}  max ratio {:.6e}  slope {:+.3}",
            fam.family.id(),
            fam.count,
            fam.max_ratio,
            fam.aspect_slope
        );
    }
    Ok(())
}

#[derive(Clone, Serialize)]
struct SweepRow {
    epsilon: f64,
    n: usize,
    scheme: &'static str,
    nodes: usize,
    energy_error: Option<f64>,
    estimator_total: f64,
    jump_total: f64,
    interior_total: f64,
    quad_total: f64,
    effectivity: Option<f64>,
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no sweep block".into()))?;
    if sweep.epsilons.is_empty() || sweep.ns.is_empty() {
        return Err(CliError::Config("sweep lists must be nonempty".into()));
    }
    let schemes = parse_schemes(config)?;
    let out_dir = PathBuf::from(&config.output.dir);
    std::fs::create_dir_all(&out_dir)?;

    let mut points = Vec::new();
    for &eps in &sweep.epsilons {
        for &n in &sweep.ns {
            points.push((eps, n));
        }
    }

    // independent task pool over sweep points, capped by ANISO_THREADS
    let workers = crate::config::thread_cap().min(points.len()).max(1);
    let results: Vec<Result<Vec<SweepRow>, CliError>> = {
        let mut slots: Vec<Option<Result<Vec<SweepRow>, CliError>>> =
            (0..points.len()).map(|_| None).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots_mx = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if k >= points.len() {
                        break;
                    }
                    let (eps, n) = points[k];
                    let result = sweep_point(config, &schemes, eps, n);
                    let mut guard = slots_mx.lock().unwrap();
                    guard[k] = Some(result);
                });
            }
        });
        slots.into_iter().map(|s| s.expect("all points computed")).collect()
    };

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let mut csv = String::from(
        "epsilon,n,scheme,nodes,energy_error,estimator_total,jump_total,interior_total,quad_total,effectivity\n",
    );
    for r in &rows {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        csv.push_str(&format!(
            "{:e},{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
            r.epsilon,
            r.n,
            r.scheme,
            r.nodes,
            opt(r.energy_error),
            r.estimator_total,
            r.jump_total,
            r.interior_total,
            r.quad_total,
            opt(r.effectivity),
        ));
    }
    let path = out_dir.join("sweep.csv");
    std::fs::write(&path, csv)?;
    #[derive(Serialize)]
    struct SweepRecord<'a> {
        version: &'static str,
        config: &'a ExperimentConfig,
        rows: Vec<SweepRow>,
    }
    std::fs::write(
        out_dir.join("sweep.json"),
        serde_json::to_string_pretty(&SweepRecord { version: VERSION, config, rows })
            .expect("serializable"),
    )?;
    Ok(path)
}

fn sweep_point(
    config: &ExperimentConfig,
    schemes: &[WeightScheme],
    eps: f64,
    n: usize,
) -> Result<Vec<SweepRow>, CliError> {
    let mut point_cfg = config.clone();
    point_cfg.problem.epsilon = eps;
    point_cfg.mesh.n = n;
    let mesh = point_cfg.build_mesh()?;
    let spec = point_cfg.build_problem()?;
    let sol = solve_for(&mesh, &spec)?;
    let rule = TriangleRule::with_degree(config.estimator.quadrature_degree);
    let patches = node_patches(&mesh, &ClassificationParams::default());
    let err = match &spec.exact {
        Some(_) => Some(energy_error(&mesh, &sol, &spec, &rule)?),
        None => None,
    };
    let mut rows = Vec::new();
    for &scheme in schemes {
        let report = total_estimator(&mesh, &patches, &sol, &spec, scheme, &rule)?;
        let effectivity = match err {
            Some(e) if e > 0.0 => Some(report.total / e),
            _ => None,
        };
        rows.push(SweepRow {
            epsilon: eps,
            n,
            scheme: scheme.id(),
            nodes: mesh.n_nodes(),
            energy_error: err,
            estimator_total: report.total,
            jump_total: report.jump_total,
            interior_total: report.interior_total,
            quad_total: report.quad_total,
            effectivity,
        });
    }
    Ok(rows)
}

pub fn cmd_compare_weights(config: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let out_dir = PathBuf::from(&config.output.dir);
    std::fs::create_dir_all(&out_dir)?;
    let mesh = config.build_mesh()?;
    let spec = config.build_problem()?;
    let sol = solve_for(&mesh, &spec)?;
    let patches = node_patches(&mesh, &ClassificationParams::default());
    let cmp = compare_weights(&mesh, &patches, &sol, &spec);

    let mut csv = String::from("node_id,jump_old,jump_new,jump_split\n");
    for (z, (old, new, split)) in cmp.per_node.iter().enumerate() {
        csv.push_str(&format!("{z},{old:.12e},{new:.12e},{split:.12e}\n"));
    }
    let csv_path = out_dir.join("compare_weights.csv");
    std::fs::write(&csv_path, csv)?;

    #[derive(Serialize)]
    struct CompareRecord<'a> {
        version: &'static str,
        config: &'a ExperimentConfig,
        old_total: f64,
        new_total: f64,
        split_total: f64,
        ratio_new_old: f64,
        ratio_split_new: f64,
    }
    std::fs::write(
        out_dir.join("compare_weights.json"),
        serde_json::to_string_pretty(&CompareRecord {
            version: VERSION,
            config,
            old_total: cmp.old_total,
            new_total: cmp.new_total,
            split_total: cmp.split_total,
            ratio_new_old: cmp.ratio_new_old,
            ratio_split_new: cmp.ratio_split_new,
        })
        .expect("serializable"),
    )?;
    let mut stderr = std::io::stderr().lock();
    let _ = writeln!(
        stderr,
        "jump totals: old {:.6e}, new {:.6e}, split {:.6e} (new/old {:.3e})",
        cmp.old_total, cmp.new_total, cmp.split_total, cmp.ratio_new_old
    );
    Ok(csv_path)
}
