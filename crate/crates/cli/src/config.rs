//! Experiment configuration: JSON file plus flag overrides, resolved
//! against the registries of built-in reactions and manufactured solutions.

use serde::{Deserialize, Serialize};

use aniso_fem::fem::{
    manufactured_layer1d, manufactured_sinsin, ExactSolution, ProblemSpec, Reaction,
};
use aniso_fem::mesh::{read_mesh, MeshError, Triangulation};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or parameters -> exit code 2.
    Config(String),
    /// Numerical failure or I/O trouble at run time -> exit code 3.
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::InvalidParams(_) | MeshError::Parse(_) => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<aniso_fem::fem::FemError> for CliError {
    fn from(e: aniso_fem::fem::FemError) -> Self {
        match e {
            aniso_fem::fem::FemError::InvalidProblem(_) => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub reaction: ReactionConfig,
    /// One of `sinsin`, `layer1d`, `zero`, `none`.
    #[serde(default = "default_manufactured")]
    pub manufactured: String,
}

fn default_epsilon() -> f64 {
    1.0
}

fn default_manufactured() -> String {
    "none".into()
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            reaction: ReactionConfig::default(),
            manufactured: default_manufactured(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionConfig {
    /// One of `linear`, `cubic`, `zero`.
    #[serde(default = "default_reaction_id")]
    pub id: String,
    /// Constant reaction coefficient for `linear`.
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_reaction_id() -> String {
    "linear".into()
}

fn default_c() -> f64 {
    1.0
}

impl Default for ReactionConfig {
    fn default() -> Self {
        Self { id: default_reaction_id(), c: default_c() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// One of `uniform`, `shishkin`; ignored when `file` is set.
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Path to a mesh JSON file; overrides the generator.
    #[serde(default)]
    pub file: Option<String>,
}

fn default_kind() -> String {
    "shishkin".into()
}

fn default_n() -> usize {
    16
}

fn default_sigma() -> f64 {
    2.0
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { kind: default_kind(), n: default_n(), sigma: default_sigma(), file: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Subset of `new`, `old`, `split`.
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    #[serde(default = "default_degree")]
    pub quadrature_degree: usize,
}

fn default_schemes() -> Vec<String> {
    vec!["new".into(), "old".into(), "split".into()]
}

fn default_degree() -> usize {
    6
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { schemes: default_schemes(), quadrature_degree: default_degree() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_file(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))
    }

    /// Flag overrides take precedence over file values.
    pub fn apply_overrides(&mut self, epsilon: Option<f64>, n: Option<usize>) {
        if let Some(e) = epsilon {
            self.problem.epsilon = e;
        }
        if let Some(n) = n {
            self.mesh.n = n;
        }
    }

    pub fn build_mesh(&self) -> Result<Triangulation, CliError> {
        if let Some(path) = &self.mesh.file {
            return Ok(read_mesh(path)?);
        }
        build_generator_mesh(&self.mesh.kind, self.mesh.n, self.problem.epsilon, self.mesh.sigma)
    }

    pub fn build_problem(&self) -> Result<ProblemSpec, CliError> {
        build_problem(&self.problem)
    }
}

pub fn build_generator_mesh(
    kind: &str,
    n: usize,
    epsilon: f64,
    sigma: f64,
) -> Result<Triangulation, CliError> {
    match kind {
        "uniform" => Ok(aniso_fem::mesh::generate_uniform(n)?),
        "shishkin" => Ok(aniso_fem::mesh::generate_shishkin(n, epsilon, sigma)?),
        other => Err(CliError::Config(format!("unknown mesh kind '{other}'"))),
    }
}

/// Resolves the problem block against the registries. The manufactured
/// solution supplies the matched right-hand side for `linear` and `cubic`.
pub fn build_problem(cfg: &ProblemConfig) -> Result<ProblemSpec, CliError> {
    let eps = cfg.epsilon;
    let manufactured: Option<ProblemSpec> = match cfg.manufactured.as_str() {
        "sinsin" => Some(manufactured_sinsin(eps)),
        "layer1d" => Some(manufactured_layer1d(eps)),
        "zero" => None, // handled below: u = 0 with zero reaction
        "none" => None,
        other => {
            return Err(CliError::Config(format!(
                "unknown manufactured solution '{other}'"
            )))
        }
    };

    match cfg.reaction.id.as_str() {
        "linear" => {
            let c = cfg.reaction.c;
            if c < 0.0 {
                return Err(CliError::Config("reaction coefficient c must be >= 0".into()));
            }
            match (cfg.manufactured.as_str(), manufactured) {
                ("none", _) => {
                    // no manufactured solution: homogeneous right-hand side
                    let spec = ProblemSpec::new(eps, Reaction::linear_const_c(c, |_, _| 0.0), c)?;
                    Ok(spec)
                }
                ("zero", _) => {
                    let spec = ProblemSpec::new(eps, Reaction::linear_const_c(c, |_, _| 0.0), c)?
                        .with_exact(zero_exact());
                    Ok(spec)
                }
                (_, Some(mut base)) => {
                    if (c - 1.0).abs() > 1e-14 {
                        return Err(CliError::Config(
                            "manufactured right-hand sides are matched for c = 1".into(),
                        ));
                    }
                    // base already carries reaction u - F and the exact fields
                    base.c_f = c;
                    Ok(base)
                }
                _ => unreachable!(),
            }
        }
        "cubic" => {
            // f = u^3 + u - F, matched against the manufactured solution
            let base = match manufactured {
                Some(b) => b,
                None => {
                    return Err(CliError::Config(
                        "cubic reaction requires a manufactured solution".into(),
                    ))
                }
            };
            let exact = base.exact.expect("registry solutions carry exact fields");
            let u = exact.u;
            let lap = exact
                .laplacian
                .expect("registry solutions carry laplacians");
            let e2 = eps * eps;
            let f = move |x: f64, y: f64, s: f64| {
                let ue = u(x, y);
                let rhs = -e2 * lap(x, y) + ue.powi(3) + ue;
                s.powi(3) + s - rhs
            };
            let reaction = Reaction::Semilinear {
                f: Box::new(f),
                df_du: Some(Box::new(|_, _, s| 3.0 * s * s + 1.0)),
            };
            let spec = ProblemSpec::new(eps, reaction, 1.0)?;
            // re-resolve the exact fields (the closures moved into f)
            let fresh = match cfg.manufactured.as_str() {
                "sinsin" => manufactured_sinsin(eps),
                "layer1d" => manufactured_layer1d(eps),
                _ => unreachable!(),
            };
            Ok(spec.with_exact(fresh.exact.unwrap()))
        }
        "zero" => {
            if eps < 1.0 {
                return Err(CliError::Config(
                    "the zero reaction requires epsilon = 1 (normalization c_f + eps^2 >= 1)"
                        .into(),
                ));
            }
            let spec = ProblemSpec::new(eps, Reaction::linear_const_c(0.0, |_, _| 0.0), 0.0);
            let spec = match spec {
                Ok(s) => s,
                Err(e) => return Err(CliError::Config(e.to_string())),
            };
            Ok(if cfg.manufactured == "zero" {
                spec.with_exact(zero_exact())
            } else {
                spec
            })
        }
        other => Err(CliError::Config(format!("unknown reaction '{other}'"))),
    }
}

fn zero_exact() -> ExactSolution {
    ExactSolution {
        u: Box::new(|_, _| 0.0),
        grad: Box::new(|_, _| (0.0, 0.0)),
        laplacian: Some(Box::new(|_, _| 0.0)),
        energy_sq: Some(0.0),
        x_breaks: None,
    }
}

/// Worker cap: `ANISO_THREADS` when set, otherwise the machine parallelism.
pub fn thread_cap() -> usize {
    std::env::var("ANISO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}
