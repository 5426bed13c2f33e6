//! Synthetic instances, recovery metrics, method dispatch and sweeps.
//!
//! Randomness comes from ChaCha20 seeded with the instance seed; each array is
//! drawn from its own stream so changing one shape does not perturb the
//! others: stream 0 picks the support, 1 the planted values, 2 the matrix
//! (row-major), 3 the noise.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sparsecs_core::bnb::{self, BnbConfig, BnbStatus};
use sparsecs_core::conic::ConicSolver;
use sparsecs_core::sos::{self, SosCertificate};
use sparsecs_core::{heuristics, relaxations, Error, ProblemInstance, SolutionVector, DEFAULT_SUPPORT_THRESHOLD};

use crate::clock::WallClock;

pub const DEFAULT_SIGMA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, m: usize, k: usize, alpha: f64, seed: u64) -> Self {
        Self {
            n,
            m,
            k,
            sigma: DEFAULT_SIGMA,
            alpha,
            seed,
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws `x` with `k` nonzeros `~ N(0, sigma^2/n)`, `A_ij ~ N(0, sigma^2/n)`,
/// `b = A x + eta` with `eta_j ~ N(0, sigma^2)`, and sets
/// `epsilon = alpha ||b||^2`, `gamma = sqrt(n)`, unit weights.
pub fn generate(spec: &SyntheticSpec) -> Result<(ProblemInstance, DVector<f64>), Error> {
    let SyntheticSpec {
        n,
        m,
        k,
        sigma,
        alpha,
        seed,
    } = *spec;
    if k > n {
        return Err(Error::DimensionMismatch {
            what: "planted support size",
            expected: n,
            found: k,
        });
    }
    let scale = sigma / (n as f64).sqrt();
    let mut support = index::sample(&mut stream(seed, 0), n, k).into_vec();
    support.sort_unstable();
    let mut values = stream(seed, 1);
    let mut x = DVector::zeros(n);
    for &i in &support {
        x[i] = scale * values.sample::<f64, _>(StandardNormal);
    }
    let mut entries = stream(seed, 2);
    let row_major: Vec<f64> = (0..m * n)
        .map(|_| scale * entries.sample::<f64, _>(StandardNormal))
        .collect();
    let a = DMatrix::from_row_slice(m, n, &row_major);
    let mut noise = stream(seed, 3);
    let eta = DVector::from_iterator(m, (0..m).map(|_| sigma * noise.sample::<f64, _>(StandardNormal)));
    let b = &a * &x + eta;
    let epsilon = alpha * b.norm_squared();
    let inst = ProblemInstance::with_defaults(a, b, epsilon)?;
    Ok((inst, x))
}

/// Support-recovery metrics. Rates with an empty denominator are reported
/// as 1 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub sparsity: usize,
    pub acc: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub tpr_defined: bool,
    pub tnr_defined: bool,
}

/// With `I = {|x_true| > thr}` and `J = {|x_hat| > thr}`:
/// `ACC = (|I ∩ J| + |I^c ∩ J^c|) / n`, `TPR = |I ∩ J| / |J|`,
/// `TNR = |I^c ∩ J^c| / (n - |J|)`.
pub fn evaluate(x_true: &DVector<f64>, x_hat: &DVector<f64>, threshold: f64) -> Metrics {
    assert_eq!(x_true.len(), x_hat.len(), "length mismatch");
    let n = x_true.len();
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut est = 0usize;
    for (t, h) in x_true.iter().zip(x_hat.iter()) {
        let truth = t.abs() > threshold;
        let pred = h.abs() > threshold;
        est += pred as usize;
        tp += (truth && pred) as usize;
        tn += (!truth && !pred) as usize;
    }
    let rate = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Metrics {
        sparsity: est,
        acc: if n == 0 { 1.0 } else { (tp + tn) as f64 / n as f64 },
        tpr: rate(tp, est),
        tnr: rate(tn, n - est),
        tpr_defined: est > 0,
        tnr_defined: est < n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bnb,
    Omp,
    Bpd,
    Irwl1,
    SosBound,
    SocBound,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Bnb,
        Method::Omp,
        Method::Bpd,
        Method::Irwl1,
        Method::SosBound,
        Method::SocBound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Bnb => "bnb",
            Method::Omp => "omp",
            Method::Bpd => "bpd",
            Method::Irwl1 => "irwl1",
            Method::SosBound => "sos-bound",
            Method::SocBound => "soc-bound",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOptions {
    pub time_limit: Option<Duration>,
    pub delta: f64,
    pub strict_bounds: bool,
    /// Backbone threshold for branch-and-bound; `None` searches all columns.
    pub backbone_threshold: Option<f64>,
    pub irwl1_delta: f64,
    pub irwl1_iters: usize,
    /// Greedy-round BPD and IRWL1 outputs.
    pub round: bool,
    pub sos_max_n: usize,
    /// Print a progress line every this many nodes.
    pub progress_every: Option<usize>,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            delta: 0.0,
            strict_bounds: false,
            backbone_threshold: None,
            irwl1_delta: heuristics::DEFAULT_STABILITY_DELTA,
            irwl1_iters: heuristics::DEFAULT_IRWL1_ITERS,
            round: true,
            sos_max_n: sos::DEFAULT_MAX_N,
            progress_every: None,
        }
    }
}

pub const HEURISTIC_STATUS: &str = "Optimal-heuristic";

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub x: Option<SolutionVector>,
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
    pub status: String,
    pub runtime: Duration,
    pub nodes: Option<usize>,
    pub warnings: Vec<String>,
    pub certificate: Option<SosCertificate>,
    /// True when the method proved the instance infeasible.
    pub infeasible: bool,
}

impl MethodOutcome {
    fn new(method: Method, status: impl Into<String>, runtime: Duration) -> Self {
        Self {
            method,
            x: None,
            lower_bound: None,
            gap: None,
            status: status.into(),
            runtime,
            nodes: None,
            warnings: Vec::new(),
            certificate: None,
            infeasible: false,
        }
    }
}

/// Runs one method on one instance.
pub fn run_method<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    method: Method,
    opts: &MethodOptions,
) -> Result<MethodOutcome, Error> {
    let start = Instant::now();
    let heuristic = |x: SolutionVector, start: Instant| {
        let mut o = MethodOutcome::new(method, HEURISTIC_STATUS, start.elapsed());
        o.x = Some(x);
        o
    };
    match method {
        Method::Omp => Ok(heuristic(heuristics::omp(inst)?, start)),
        Method::Bpd => {
            let mut x = relaxations::solve_bpd(solver, inst)?;
            if opts.round {
                x = heuristics::sparsify(inst, &x.x)?;
            }
            Ok(heuristic(x, start))
        }
        Method::Irwl1 => {
            let mut x = heuristics::irwl1(solver, inst, opts.irwl1_delta, opts.irwl1_iters)?;
            if opts.round {
                x = heuristics::sparsify(inst, &x.x)?;
            }
            Ok(heuristic(x, start))
        }
        Method::SocBound => {
            let r = relaxations::solve_perspective_relaxation(solver, inst)?;
            let mut o = MethodOutcome::new(method, format!("{:?}", r.status), start.elapsed());
            o.lower_bound = Some(r.objective);
            o.x = Some(SolutionVector::new(r.x));
            Ok(o)
        }
        Method::SosBound => {
            let limit = opts.time_limit.map(|d| d.as_secs_f64());
            let r = sos::solve_sos_d1(solver, inst, limit, opts.sos_max_n)?;
            let mut o = MethodOutcome::new(method, format!("{:?}", r.status), start.elapsed());
            o.lower_bound = Some(r.bound);
            o.certificate = Some(r.certificate);
            Ok(o)
        }
        Method::Bnb => {
            let backbone = match opts.backbone_threshold {
                Some(t) => Some(bnb::compute_backbone(solver, inst, t)?),
                None => None,
            };
            let config = BnbConfig {
                delta: opts.delta,
                time_limit: opts.time_limit.map(|d| d.as_secs_f64()),
                backbone,
                strict_bounds: opts.strict_bounds,
                ..BnbConfig::default()
            };
            let every = opts.progress_every;
            let mut observer = |p: &bnb::Progress| {
                if let Some(k) = every {
                    if k > 0 && p.nodes.is_multiple_of(k) {
                        eprintln!("{p}");
                    }
                }
                true
            };
            let r = bnb::solve(solver, inst, &config, &WallClock::start(), &mut observer)?;
            let mut o = MethodOutcome::new(method, r.status.as_str(), start.elapsed());
            o.infeasible = r.status == BnbStatus::Infeasible;
            if !o.infeasible {
                o.x = Some(r.x_best);
                o.lower_bound = Some(r.lower);
                o.gap = Some(r.gap);
            }
            o.nodes = Some(r.nodes_explored);
            o.warnings = r.warnings;
            Ok(o)
        }
    }
}

/// Grid lists, seeds and methods of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub k: Vec<usize>,
    pub alpha: Vec<f64>,
    /// `null` entries (or an absent list) mean `sqrt(n)`.
    #[serde(default)]
    pub gamma: Vec<Option<f64>>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Per-method budgets such as `"60s"` or `"10m"`.
    #[serde(default)]
    pub time_budgets: BTreeMap<Method, String>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub delta: f64,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub gamma: Option<f64>,
}

impl SweepConfig {
    /// Cartesian product in the order n, m, k, alpha, gamma; points with
    /// `k > n` are skipped.
    pub fn grid(&self) -> Vec<GridPoint> {
        let gammas = if self.gamma.is_empty() {
            vec![None]
        } else {
            self.gamma.clone()
        };
        let mut out = Vec::new();
        for &n in &self.n {
            for &m in &self.m {
                for &k in &self.k {
                    for &alpha in &self.alpha {
                        for &gamma in &gammas {
                            if k <= n {
                                out.push(GridPoint { n, m, k, alpha, gamma });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn budget(&self, method: Method) -> Result<Option<Duration>, humantime::DurationError> {
        self.time_budgets
            .get(&method)
            .map(|s| humantime::parse_duration(s))
            .transpose()
    }
}

/// One CSV row; empty fields where a method has no point estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
    pub sparsity: Option<usize>,
    pub acc: Option<f64>,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub objective: Option<f64>,
    pub residual_sq: Option<f64>,
    pub runtime_ms: f64,
    pub status: String,
}

fn run_row<S: ConicSolver + ?Sized>(
    solver: &S,
    point: &GridPoint,
    seed: u64,
    sigma: f64,
    method: Method,
    opts: &MethodOptions,
) -> SweepRow {
    let spec = SyntheticSpec {
        n: point.n,
        m: point.m,
        k: point.k,
        sigma,
        alpha: point.alpha,
        seed,
    };
    let mut row = SweepRow {
        method: method.name().to_string(),
        n: point.n,
        m: point.m,
        k: point.k,
        alpha: point.alpha,
        gamma: point.gamma.unwrap_or_else(|| (point.n as f64).sqrt()),
        seed,
        sparsity: None,
        acc: None,
        tpr: None,
        tnr: None,
        objective: None,
        residual_sq: None,
        runtime_ms: 0.0,
        status: String::new(),
    };
    let generated = generate(&spec).and_then(|(inst, x)| match point.gamma {
        Some(g) => inst.with_gamma(g).map(|i| (i, x)),
        None => Ok((inst, x)),
    });
    let (inst, x_true) = match generated {
        Ok(v) => v,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    let start = Instant::now();
    match run_method(solver, &inst, method, opts) {
        Ok(o) => {
            row.runtime_ms = o.runtime.as_secs_f64() * 1e3;
            row.status = o.status;
            match (&o.x, method) {
                (Some(x), m) if m != Method::SocBound => {
                    let metrics = evaluate(&x_true, &x.x, DEFAULT_SUPPORT_THRESHOLD);
                    row.sparsity = Some(metrics.sparsity);
                    row.acc = Some(metrics.acc);
                    row.tpr = Some(metrics.tpr);
                    row.tnr = Some(metrics.tnr);
                    row.objective = Some(inst.objective(&x.x));
                    row.residual_sq = Some(inst.residual_sq(&x.x));
                }
                _ => row.objective = o.lower_bound,
            }
        }
        Err(e) => {
            row.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            row.status = format!("error: {e}");
        }
    }
    row
}

/// Runs every (grid point, seed, method) and writes rows to `out` as CSV,
/// flushing after each batch of `jobs` rows. Rows keep the sequential
/// order whatever `jobs` is.
pub fn run_sweep<S, W>(
    solver: &S,
    config: &SweepConfig,
    base: &MethodOptions,
    jobs: usize,
    out: W,
) -> anyhow::Result<Vec<SweepRow>>
where
    S: ConicSolver + Sync + ?Sized,
    W: Write,
{
    let mut tasks = Vec::new();
    for point in config.grid() {
        for &seed in &config.seeds {
            for &method in &config.methods {
                let mut opts = base.clone();
                if let Some(b) = config.budget(method)? {
                    opts.time_limit = Some(b);
                }
                opts.delta = config.delta;
                tasks.push((point, seed, method, opts));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let mut writer = csv::Writer::from_writer(out);
    let mut rows = Vec::with_capacity(tasks.len());
    if tasks.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    for chunk in tasks.chunks(jobs.max(1)) {
        let batch: Vec<SweepRow> = pool.install(|| {
            chunk
                .par_iter()
                .map(|(p, seed, method, opts)| run_row(solver, p, *seed, config.sigma, *method, opts))
                .collect()
        });
        for row in batch {
            writer.serialize(&row)?;
            rows.push(row);
        }
        writer.flush()?;
    }
    writer.flush()?;
    Ok(rows)
}

pub const CSV_HEADER: [&str; 15] = [
    "method",
    "n",
    "m",
    "k",
    "alpha",
    "gamma",
    "seed",
    "sparsity",
    "acc",
    "tpr",
    "tnr",
    "objective",
    "residual_sq",
    "runtime_ms",
    "status",
];

/// Mean sparsity, accuracy, objective and runtime per (method, grid point).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub rows: usize,
    pub mean_sparsity: Option<f64>,
    pub mean_acc: Option<f64>,
    pub mean_objective: Option<f64>,
    pub mean_runtime_ms: f64,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(SummaryRow, Vec<&SweepRow>)> = Vec::new();
    for r in rows {
        let key = |s: &SummaryRow| {
            s.method == r.method && s.n == r.n && s.m == r.m && s.k == r.k && s.alpha == r.alpha && s.gamma == r.gamma
        };
        match groups.iter_mut().find(|(s, _)| key(s)) {
            Some((_, v)) => v.push(r),
            None => groups.push((
                SummaryRow {
                    method: r.method.clone(),
                    n: r.n,
                    m: r.m,
                    k: r.k,
                    alpha: r.alpha,
                    gamma: r.gamma,
                    rows: 0,
                    mean_sparsity: None,
                    mean_acc: None,
                    mean_objective: None,
                    mean_runtime_ms: 0.0,
                },
                vec![r],
            )),
        }
    }
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    groups
        .into_iter()
        .map(|(mut s, v)| {
            s.rows = v.len();
            s.mean_sparsity = mean(v.iter().filter_map(|r| r.sparsity.map(|x| x as f64)).collect());
            s.mean_acc = mean(v.iter().filter_map(|r| r.acc).collect());
            s.mean_objective = mean(v.iter().filter_map(|r| r.objective).collect());
            s.mean_runtime_ms = mean(v.iter().map(|r| r.runtime_ms).collect()).unwrap_or(0.0);
            s
        })
        .collect()
}
