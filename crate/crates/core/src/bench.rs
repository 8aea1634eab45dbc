//! Method dispatch and the benchmark harness for the four standard examples.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::factorized::{
    factorized_bicgstab, factorized_cg, factorized_cg_lyapunov, lowrank_residual,
    FactorizedSolution,
};
use crate::history::{ConvergenceHistory, SolveError, SolveStatus, SolverConfig};
use crate::problems::{
    convection_diffusion_sylvester, laplacian_lyapunov, ProblemInstance, DEFAULT_CONVECTION,
};
use crate::reference::{
    dense_relative_residual, matrix_oriented_bicgstab, matrix_oriented_cg, truncated_bicgstab,
    truncated_cg, DenseSolution, LowRankSolution, SymmetricLowRankSolution,
    TruncatedBicgstabOptions, TruncatedCgOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mo-cg")]
    MoCg,
    #[serde(rename = "mo-bicgstab")]
    MoBicgstab,
    #[serde(rename = "f-cg")]
    FCg,
    #[serde(rename = "f-bicgstab")]
    FBicgstab,
    #[serde(rename = "t-cg")]
    TCg,
    #[serde(rename = "t-bicgstab")]
    TBicgstab,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::MoCg,
        Method::MoBicgstab,
        Method::FCg,
        Method::FBicgstab,
        Method::TCg,
        Method::TBicgstab,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::MoCg => "mo-cg",
            Method::MoBicgstab => "mo-bicgstab",
            Method::FCg => "f-cg",
            Method::FBicgstab => "f-bicgstab",
            Method::TCg => "t-cg",
            Method::TBicgstab => "t-bicgstab",
        }
    }

    pub fn is_cg(self) -> bool {
        matches!(self, Method::MoCg | Method::FCg | Method::TCg)
    }

    pub fn is_truncated(self) -> bool {
        matches!(self, Method::TCg | Method::TBicgstab)
    }

    /// Methods of one family (CG or BiCGSTAB).
    pub fn family(cg: bool) -> [Method; 3] {
        if cg {
            [Method::MoCg, Method::FCg, Method::TCg]
        } else {
            [Method::MoBicgstab, Method::FBicgstab, Method::TBicgstab]
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| format!("unknown method '{s}' (expected one of mo-cg, mo-bicgstab, f-cg, f-bicgstab, t-cg, t-bicgstab)"))
    }
}

/// Output of any of the six methods.
#[derive(Clone, Debug)]
pub enum MethodOutput {
    Factorized(FactorizedSolution),
    Dense(DenseSolution),
    Symmetric(SymmetricLowRankSolution),
    General(LowRankSolution),
}

impl MethodOutput {
    pub fn history(&self) -> &ConvergenceHistory {
        match self {
            MethodOutput::Factorized(s) => &s.history,
            MethodOutput::Dense(s) => &s.history,
            MethodOutput::Symmetric(s) => &s.history,
            MethodOutput::General(s) => &s.history,
        }
    }

    pub fn status(&self) -> SolveStatus {
        match self {
            MethodOutput::Factorized(s) => s.status,
            MethodOutput::Dense(s) => s.status,
            MethodOutput::Symmetric(s) => s.status,
            MethodOutput::General(s) => s.status,
        }
    }

    pub fn breakdown(&self) -> Option<&str> {
        match self {
            MethodOutput::Factorized(s) => s.breakdown.as_deref(),
            MethodOutput::Dense(s) => s.breakdown.as_deref(),
            MethodOutput::Symmetric(s) => s.breakdown.as_deref(),
            MethodOutput::General(s) => s.breakdown.as_deref(),
        }
    }

    /// Factor width of the stored solution; `None` for dense iterates.
    pub fn rank(&self) -> Option<usize> {
        match self {
            MethodOutput::Factorized(s) => Some(s.rank()),
            MethodOutput::Dense(_) => None,
            MethodOutput::Symmetric(s) => Some(s.x.rank()),
            MethodOutput::General(s) => Some(s.x.rank()),
        }
    }

    /// `‖C₁C₂ᵀ − A X − X B‖ / ‖C₁C₂ᵀ‖`, recomputed from the stored solution.
    pub fn true_residual(&self, p: &ProblemInstance) -> Result<f64, SolveError> {
        let b = p.b_matrix();
        let ratio = |(res, rhs): (f64, f64)| res / rhs;
        match self {
            MethodOutput::Factorized(s) => {
                lowrank_residual(&p.a, &b, &p.c1, &p.c2, &s.v, &s.core, &s.w).map(ratio)
            }
            MethodOutput::Dense(s) => {
                dense_relative_residual(&p.a, &b, &p.c1.matmul_t(&p.c2), &s.x)
            }
            MethodOutput::Symmetric(s) => {
                lowrank_residual(&p.a, &b, &p.c1, &p.c2, &s.x.z, &s.x.d, &s.x.z).map(ratio)
            }
            MethodOutput::General(s) => {
                lowrank_residual(&p.a, &b, &p.c1, &p.c2, &s.x.u, &s.x.s, &s.x.v).map(ratio)
            }
        }
    }
}

/// Runs `method` on `p`. Lyapunov instances use the single-basis factorized CG
/// and the symmetric truncated CG; `t-cg` requires a Lyapunov instance.
pub fn run_method(
    method: Method,
    p: &ProblemInstance,
    cfg: &SolverConfig,
    eps_t: f64,
) -> Result<MethodOutput, SolveError> {
    let b = p.b_matrix();
    Ok(match method {
        Method::MoCg => {
            MethodOutput::Dense(matrix_oriented_cg(&p.a, &b, &p.c1.matmul_t(&p.c2), cfg)?)
        }
        Method::MoBicgstab => MethodOutput::Dense(matrix_oriented_bicgstab(
            &p.a,
            &b,
            &p.c1.matmul_t(&p.c2),
            cfg,
        )?),
        Method::FCg if p.is_lyapunov() => {
            MethodOutput::Factorized(factorized_cg_lyapunov(&p.a, &p.c1, cfg)?)
        }
        Method::FCg => MethodOutput::Factorized(factorized_cg(&p.a, &b, &p.c1, &p.c2, cfg)?),
        Method::FBicgstab => {
            MethodOutput::Factorized(factorized_bicgstab(&p.a, &b, &p.c1, &p.c2, cfg)?)
        }
        Method::TCg if p.is_lyapunov() => MethodOutput::Symmetric(truncated_cg(
            &p.a,
            &p.c1,
            cfg,
            eps_t,
            TruncatedCgOptions::default(),
        )?),
        Method::TCg => {
            return Err(SolveError::InvalidConfig(
                "t-cg solves Lyapunov equations only (omit B and C2)".into(),
            ))
        }
        Method::TBicgstab => MethodOutput::General(truncated_bicgstab(
            &p.a,
            &b,
            &p.c1,
            &p.c2,
            cfg,
            eps_t,
            TruncatedBicgstabOptions::default(),
        )?),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
}

impl ExampleId {
    pub fn id(self) -> &'static str {
        match self {
            ExampleId::Ex1 => "ex1",
            ExampleId::Ex2 => "ex2",
            ExampleId::Ex3 => "ex3",
            ExampleId::Ex4 => "ex4",
        }
    }

    /// Lyapunov / CG examples.
    pub fn is_symmetric(self) -> bool {
        matches!(self, ExampleId::Ex1 | ExampleId::Ex3)
    }

    pub fn default_tol(self) -> f64 {
        match self {
            ExampleId::Ex1 | ExampleId::Ex2 => 1e-8,
            ExampleId::Ex3 | ExampleId::Ex4 => 1e-6,
        }
    }

    pub fn grid(self, scale: Scale) -> usize {
        match (self, scale) {
            (ExampleId::Ex1 | ExampleId::Ex3, Scale::Full) => 100,
            (ExampleId::Ex1 | ExampleId::Ex3, Scale::Desk) => 30,
            (ExampleId::Ex2, Scale::Full) => 20,
            (ExampleId::Ex4, Scale::Full) => 25,
            (ExampleId::Ex2 | ExampleId::Ex4, Scale::Desk) => 8,
        }
    }

    /// Methods run when none are requested.
    pub fn default_methods(self) -> Vec<Method> {
        match self {
            ExampleId::Ex1 => vec![Method::MoCg, Method::FCg],
            ExampleId::Ex2 => vec![Method::MoBicgstab, Method::FBicgstab],
            ExampleId::Ex3 => vec![Method::FCg, Method::TCg],
            ExampleId::Ex4 => vec![Method::FBicgstab, Method::TBicgstab],
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ExampleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ex1" => Ok(ExampleId::Ex1),
            "ex2" => Ok(ExampleId::Ex2),
            "ex3" => Ok(ExampleId::Ex3),
            "ex4" => Ok(ExampleId::Ex4),
            _ => Err(format!(
                "unknown example '{s}' (expected ex1, ex2, ex3 or ex4)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Full,
    Desk,
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            _ => Err(format!("unknown scale '{s}' (expected full or desk)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub s: usize,
    pub seed: u64,
    /// Truncation thresholds; truncated methods run once per entry.
    pub eps_t: Vec<f64>,
    pub convection: [f64; 3],
    /// Overrides the example's tolerance.
    pub tol: Option<f64>,
    /// Overrides the grid size implied by the scale.
    pub grid: Option<usize>,
    pub max_iter: Option<usize>,
    /// Run methods concurrently (timings then contend for cores).
    pub parallel_methods: bool,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            s: 3,
            seed: 1,
            eps_t: vec![1e-8, 1e-10, 1e-12],
            convection: DEFAULT_CONVECTION,
            tol: None,
            grid: None,
            max_iter: None,
            parallel_methods: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub eps_t: Option<f64>,
    pub status: Option<SolveStatus>,
    pub error: Option<String>,
    pub iterations: usize,
    pub total_s: f64,
    pub basic_ops_s: f64,
    pub krylov_process_s: f64,
    pub truncation_s: f64,
    pub final_true_residual: Option<f64>,
    pub final_rank: Option<usize>,
    pub history: ConvergenceHistory,
}

impl MethodRecord {
    /// File-name friendly label, e.g. `t-cg_eps1e-12`.
    pub fn label(&self) -> String {
        match self.eps_t {
            Some(e) => format!("{}_eps{e:e}", self.method),
            None => self.method.id().to_string(),
        }
    }

    fn failed(method: Method, eps_t: Option<f64>, err: String) -> Self {
        Self {
            method,
            eps_t,
            status: None,
            error: Some(err),
            iterations: 0,
            total_s: 0.0,
            basic_ops_s: 0.0,
            krylov_process_s: 0.0,
            truncation_s: 0.0,
            final_true_residual: None,
            final_rank: None,
            history: ConvergenceHistory::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub example: ExampleId,
    pub scale: Scale,
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub seed: u64,
    pub tol: f64,
    pub records: Vec<MethodRecord>,
}

impl BenchReport {
    pub fn record(&self, method: Method) -> Option<&MethodRecord> {
        self.records.iter().find(|r| r.method == method)
    }
}

pub fn build_instance(example: ExampleId, scale: Scale, params: &BenchParams) -> ProblemInstance {
    let grid = params.grid.unwrap_or_else(|| example.grid(scale));
    if example.is_symmetric() {
        laplacian_lyapunov(grid, params.s, params.seed)
    } else {
        convection_diffusion_sylvester(grid, params.convection, params.s, params.seed)
    }
}

fn run_one(
    method: Method,
    eps_t: Option<f64>,
    p: &ProblemInstance,
    cfg: &SolverConfig,
) -> MethodRecord {
    let out = match run_method(method, p, cfg, eps_t.unwrap_or(0.0)) {
        Ok(out) => out,
        Err(e) => return MethodRecord::failed(method, eps_t, e.to_string()),
    };
    let h = out.history();
    let (final_true_residual, error) = match out.true_residual(p) {
        Ok(r) => (Some(r), out.breakdown().map(str::to_string)),
        Err(e) => (None, Some(e.to_string())),
    };
    MethodRecord {
        method,
        eps_t,
        status: Some(out.status()),
        error,
        iterations: h.iterations(),
        total_s: h.total_s(),
        basic_ops_s: h.basic_ops_s(),
        krylov_process_s: h.krylov_process_s(),
        truncation_s: h.truncation_s(),
        final_true_residual,
        final_rank: out.rank(),
        history: h.clone(),
    }
}

/// Builds the example instance and runs each method. A method that fails (or
/// does not fit the example) is recorded with its error; the rest still run.
pub fn run_benchmark(
    example: ExampleId,
    scale: Scale,
    methods: &[Method],
    params: &BenchParams,
) -> Result<BenchReport, SolveError> {
    if params.s == 0 {
        return Err(SolveError::InvalidConfig(
            "block size s must be at least 1".into(),
        ));
    }
    if params.eps_t.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(SolveError::InvalidConfig(
            "truncation thresholds must be >= 0".into(),
        ));
    }
    let tol = params.tol.unwrap_or_else(|| example.default_tol());
    let mut cfg = SolverConfig::with_tol(tol);
    cfg.max_iter = params.max_iter;
    cfg.validate()?;
    let p = build_instance(example, scale, params);

    let mut jobs = Vec::new();
    for &method in methods {
        if method.is_truncated() {
            jobs.extend(params.eps_t.iter().map(|&e| (method, Some(e))));
        } else {
            jobs.push((method, None));
        }
    }
    let run = |&(method, eps_t): &(Method, Option<f64>)| {
        if method.is_cg() != example.is_symmetric() {
            let family = if example.is_symmetric() {
                "CG"
            } else {
                "BiCGSTAB"
            };
            MethodRecord::failed(method, eps_t, format!("{example} uses the {family} family"))
        } else {
            run_one(method, eps_t, &p, &cfg)
        }
    };
    let records: Vec<MethodRecord> = if params.parallel_methods {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    Ok(BenchReport {
        example,
        scale,
        label: p.label.clone(),
        n: p.n(),
        m: p.m(),
        s: params.s,
        seed: params.seed,
        tol,
        records,
    })
}
