//! Monte Carlo verification of frequency claims: interval coverage over
//! hyperparameter grids, squared-error risk at fixed random-effect
//! configurations, boundary-collapse frequency, and the Baranchik
//! shrinkage-condition sweep.
//!
//! Determinism contract: every replication draws from a counter-based
//! stream keyed by `(seed, grid index, rep index)`, replications are
//! grouped into fixed blocks reduced in index order, and block sums are
//! combined by pairwise summation, so reports are bitwise identical for
//! any worker count.  The `SHRINK_THREADS` environment variable caps the
//! worker pool without changing results.

use rayon::prelude::*;

use crate::error::{Result, ShrinkError};
use crate::estimators::{adm_shp_fit, estimate_a_mle, james_stein_b};
use crate::likelihood::{equal_variance_loglik_grad, gls_beta};
use crate::model::{Dataset, GroupObservation};
use crate::numeric::{bisect_sign_change, normal_quantile, pairwise_sum};
use crate::posterior::{build_posterior, exact_theta_inference, exact_theta_points};
use crate::rng::SplitMix64;

/// Sampling variances of the simulated groups.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceSpec {
    Equal(f64),
    PerGroup(Vec<f64>),
}

impl VarianceSpec {
    fn expand(&self, k: usize) -> Result<Vec<f64>> {
        match self {
            VarianceSpec::Equal(v) => {
                if !(*v > 0.0) {
                    return Err(ShrinkError::InvalidSimSpec(format!(
                        "sampling variance must be positive, got {v}"
                    )));
                }
                Ok(vec![*v; k])
            }
            VarianceSpec::PerGroup(vs) => {
                if vs.len() != k {
                    return Err(ShrinkError::InvalidSimSpec(format!(
                        "variance vector has {} entries for k = {k}",
                        vs.len()
                    )));
                }
                if vs.iter().any(|v| !(*v > 0.0)) {
                    return Err(ShrinkError::InvalidSimSpec(
                        "sampling variances must be positive".into(),
                    ));
                }
                Ok(vs.clone())
            }
        }
    }
}

/// Interval/point procedures the harness can evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Procedure {
    /// Exact SHP posterior by quadrature.
    ExactShp,
    /// ADM Beta approximation of the SHP posterior (`q = 1`).
    AdmShp,
    /// Naive plug-in of the truncated REML/MLE estimate: conditional
    /// Normal moments at `A_hat`, no shrinkage-uncertainty term.
    MlePlugin,
    /// ADM with a likelihood power adjustment `A^q`, `0 < q <= 1`.
    AdmQ(f64),
    /// Positive-part James-Stein (equal variances, intercept designs).
    JsPlus,
    /// The unshrunk estimator `y_j` with its exact Normal interval.
    SampleMean,
}

impl Procedure {
    pub fn label(&self) -> String {
        match self {
            Procedure::ExactShp => "exact_shp".into(),
            Procedure::AdmShp => "adm_shp".into(),
            Procedure::MlePlugin => "mle_plugin".into(),
            Procedure::AdmQ(q) => format!("adm_q({q})"),
            Procedure::JsPlus => "js_plus".into(),
            Procedure::SampleMean => "sample_mean".into(),
        }
    }

    /// Parse a CLI token such as `adm_shp` or `adm_q:0.5`.
    pub fn parse(tok: &str) -> Result<Self> {
        let t = tok.trim().to_ascii_lowercase();
        match t.as_str() {
            "exact_shp" => Ok(Procedure::ExactShp),
            "adm_shp" => Ok(Procedure::AdmShp),
            "mle_plugin" => Ok(Procedure::MlePlugin),
            "js_plus" => Ok(Procedure::JsPlus),
            "sample_mean" => Ok(Procedure::SampleMean),
            _ => {
                if let Some(qs) = t.strip_prefix("adm_q:") {
                    let q: f64 = qs.parse().map_err(|_| {
                        ShrinkError::InvalidSimSpec(format!("bad q in procedure '{tok}'"))
                    })?;
                    if !(q > 0.0 && q <= 1.0) {
                        return Err(ShrinkError::InvalidSimSpec(format!(
                            "q must lie in (0,1], got {q}"
                        )));
                    }
                    Ok(Procedure::AdmQ(q))
                } else {
                    Err(ShrinkError::InvalidSimSpec(format!("unknown procedure '{tok}'")))
                }
            }
        }
    }
}

/// Full description of one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub k: usize,
    pub v: VarianceSpec,
    /// Fixed design matrix rows; `None` means intercept-only (`r = 1`).
    pub design: Option<Vec<Vec<f64>>>,
    /// Level-II coefficients used by the generator.
    pub beta: Vec<f64>,
    /// True `A` values for coverage runs.
    pub a_grid: Vec<f64>,
    /// Fixed random-effect vectors for risk runs.
    pub theta_configs: Vec<Vec<f64>>,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    pub procedures: Vec<Procedure>,
    /// Quadrature nodes for EXACT_SHP inside the simulation (default 256;
    /// 512 restores the standalone default).
    pub exact_nodes: usize,
}

impl SimSpec {
    /// Intercept-only spec with the usual defaults.
    pub fn new(k: usize, v: VarianceSpec) -> Self {
        Self {
            k,
            v,
            design: None,
            beta: vec![0.0],
            a_grid: vec![1.0],
            theta_configs: Vec::new(),
            reps: 1000,
            level: 0.95,
            seed: 1,
            procedures: vec![Procedure::AdmShp],
            exact_nodes: 256,
        }
    }

    fn design_rows(&self) -> Vec<Vec<f64>> {
        self.design
            .clone()
            .unwrap_or_else(|| vec![vec![1.0]; self.k])
    }

    fn validate(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if self.reps < 1 {
            return Err(ShrinkError::InvalidSimSpec("reps must be at least 1".into()));
        }
        if !(self.level > 0.5 && self.level < 1.0) {
            return Err(ShrinkError::BadLevel(self.level));
        }
        if self.procedures.is_empty() {
            return Err(ShrinkError::InvalidSimSpec("no procedures requested".into()));
        }
        let vs = self.v.expand(self.k)?;
        let design = self.design_rows();
        if design.len() != self.k {
            return Err(ShrinkError::InvalidSimSpec(format!(
                "design has {} rows for k = {}",
                design.len(),
                self.k
            )));
        }
        let r = design.first().map(|row| row.len()).unwrap_or(0);
        if self.beta.len() != r {
            return Err(ShrinkError::InvalidSimSpec(format!(
                "beta has {} entries for r = {r}",
                self.beta.len()
            )));
        }
        // A dry dataset validates variances, rank, and k >= r + 3 once.
        let groups: Vec<GroupObservation> = design
            .iter()
            .zip(&vs)
            .enumerate()
            .map(|(j, (x, &v))| GroupObservation::new(format!("g{j}"), 0.0, v, x.clone()))
            .collect();
        Dataset::new(groups, r)?;
        Ok((vs, design))
    }
}

/// One row of a coverage report: a procedure at one true-`A` grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub procedure: String,
    /// True level-II variance of this grid point.
    pub a: f64,
    pub coverage_per_group: Vec<f64>,
    /// Coverage averaged over groups.
    pub coverage: f64,
    /// `sqrt(p (1-p) / reps)`.
    pub coverage_mcse: f64,
    pub mean_width: f64,
    /// Monte Carlo estimate of the total squared-error risk.
    pub total_mse: f64,
    pub mse_mcse: f64,
    /// Fraction of replications with a full-shrinkage (boundary) fit.
    pub collapse_freq: f64,
    /// Replications where the fit errored (recorded, never dropped).
    pub failures: usize,
}

/// Paired same-data comparison of two procedures at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDiff {
    pub proc_a: String,
    pub proc_b: String,
    /// Grid identifier (true `A`, or the risk config spread).
    pub grid: f64,
    /// `coverage(a) - coverage(b)` with its paired-replication MCSE.
    pub coverage_diff: f64,
    pub coverage_diff_mcse: f64,
    /// `mse(a) - mse(b)` with its paired-replication MCSE.
    pub mse_diff: f64,
    pub mse_diff_mcse: f64,
    /// Replications where both procedures succeeded.
    pub n: usize,
}

/// Coverage tables over the `A` grid, plus paired contrasts.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub rows: Vec<CoverageRow>,
    pub paired: Vec<PairedDiff>,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
}

/// One row of a risk report: a procedure at one theta configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub procedure: String,
    pub config: usize,
    /// `sum_j (theta_j - theta_bar)^2` of the configuration.
    pub spread2: f64,
    pub total_mse: f64,
    pub mse_mcse: f64,
    pub failures: usize,
}

/// Risk tables over theta configurations, plus paired contrasts.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
    pub paired: Vec<PairedDiff>,
    pub reps: usize,
    pub seed: u64,
}

/// Result of one procedure on one simulated dataset.
struct ProcFit {
    lo: Vec<f64>,
    hi: Vec<f64>,
    theta: Vec<f64>,
    collapse: bool,
}

fn fit_procedure(
    proc_: Procedure,
    d: &Dataset,
    level: f64,
    z: f64,
    exact_nodes: usize,
    want_intervals: bool,
) -> Result<ProcFit> {
    match proc_ {
        Procedure::ExactShp => {
            let grid = build_posterior(d, exact_nodes)?;
            let k = d.k();
            if !want_intervals {
                let theta = exact_theta_points(&grid, d);
                return Ok(ProcFit { lo: theta.clone(), hi: theta.clone(), theta, collapse: false });
            }
            let mut lo = Vec::with_capacity(k);
            let mut hi = Vec::with_capacity(k);
            let mut theta = Vec::with_capacity(k);
            for j in 0..k {
                let inf = exact_theta_inference(&grid, d, j, level)?;
                lo.push(inf.lo);
                hi.push(inf.hi);
                theta.push(inf.theta_hat);
            }
            Ok(ProcFit { lo, hi, theta, collapse: false })
        }
        Procedure::AdmShp | Procedure::AdmQ(_) => {
            let q = if let Procedure::AdmQ(q) = proc_ { q } else { 1.0 };
            let fit = adm_shp_fit(d, q, level)?;
            Ok(ProcFit {
                lo: fit.per_group.iter().map(|g| g.lo).collect(),
                hi: fit.per_group.iter().map(|g| g.hi).collect(),
                theta: fit.per_group.iter().map(|g| g.theta_hat).collect(),
                collapse: fit.a.a_hat == 0.0,
            })
        }
        Procedure::MlePlugin => {
            let est = estimate_a_mle(d)?;
            let gls = gls_beta(est.a_hat, d)?;
            let k = d.k();
            let mut lo = Vec::with_capacity(k);
            let mut hi = Vec::with_capacity(k);
            let mut theta = Vec::with_capacity(k);
            for g in d.groups() {
                let b = g.v / (est.a_hat + g.v);
                let xb: f64 = g.x.iter().zip(&gls.beta).map(|(xi, bi)| xi * bi).sum();
                let m = g.y - b * (g.y - xb);
                let s2 = g.v * (1.0 - b) + b * b * gls.cov.quad_form(&g.x);
                let half = z * s2.sqrt();
                lo.push(m - half);
                hi.push(m + half);
                theta.push(m);
            }
            Ok(ProcFit { lo, hi, theta, collapse: est.a_hat == 0.0 })
        }
        Procedure::JsPlus => {
            let (_, b_plus) = james_stein_b(d, None)?;
            let k = d.k();
            let ybar: f64 = d.groups().iter().map(|g| g.y).sum::<f64>() / k as f64;
            let mut lo = Vec::with_capacity(k);
            let mut hi = Vec::with_capacity(k);
            let mut theta = Vec::with_capacity(k);
            for g in d.groups() {
                let m = g.y - b_plus * (g.y - ybar);
                let half = z * (g.v * (1.0 - b_plus)).sqrt();
                lo.push(m - half);
                hi.push(m + half);
                theta.push(m);
            }
            Ok(ProcFit { lo, hi, theta, collapse: b_plus >= 1.0 })
        }
        Procedure::SampleMean => {
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            let mut theta = Vec::new();
            for g in d.groups() {
                let half = z * g.v.sqrt();
                lo.push(g.y - half);
                hi.push(g.y + half);
                theta.push(g.y);
            }
            Ok(ProcFit { lo, hi, theta, collapse: false })
        }
    }
}

/// Per-procedure accumulator over one block of replications.
#[derive(Clone)]
struct ProcBlock {
    covered: Vec<u64>,
    width_sum: f64,
    mse_sum: f64,
    mse_sumsq: f64,
    collapse: u64,
    failures: u64,
    n_ok: u64,
}

impl ProcBlock {
    fn new(k: usize) -> Self {
        Self {
            covered: vec![0; k],
            width_sum: 0.0,
            mse_sum: 0.0,
            mse_sumsq: 0.0,
            collapse: 0,
            failures: 0,
            n_ok: 0,
        }
    }
}

/// Per-pair accumulator (same-data contrasts) over one block.
#[derive(Clone)]
struct PairBlock {
    n: u64,
    covd_sum: f64,
    covd_sumsq: f64,
    msed_sum: f64,
    msed_sumsq: f64,
}

impl PairBlock {
    fn new() -> Self {
        Self { n: 0, covd_sum: 0.0, covd_sumsq: 0.0, msed_sum: 0.0, msed_sumsq: 0.0 }
    }
}

struct Block {
    procs: Vec<ProcBlock>,
    pairs: Vec<PairBlock>,
}

const BLOCK: usize = 256;

/// Run `f` under the `SHRINK_THREADS` worker cap when set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match std::env::var("SHRINK_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        Some(n) if n >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

/// Outcomes of one replication, in procedure order.
struct RepOutcome {
    // (covered per group, width sum, T = total sq err, collapse) per
    // procedure, or None when the fit failed.
    per_proc: Vec<Option<(Vec<bool>, f64, f64, bool)>>,
}

fn run_blocks<G>(k: usize, n_procs: usize, n_pairs: usize, reps: usize, gen: G) -> Vec<Block>
where
    G: Fn(usize) -> RepOutcome + Sync,
{
    let n_blocks = reps.div_ceil(BLOCK);
    (0..n_blocks)
        .into_par_iter()
        .map(|bi| {
            let mut procs = vec![ProcBlock::new(k); n_procs];
            let mut pairs = vec![PairBlock::new(); n_pairs];
            let lo = bi * BLOCK;
            let hi = ((bi + 1) * BLOCK).min(reps);
            for rep in lo..hi {
                let out = gen(rep);
                for (pi, res) in out.per_proc.iter().enumerate() {
                    let pb = &mut procs[pi];
                    match res {
                        Some((cov, width, t, collapse)) => {
                            pb.n_ok += 1;
                            for (j, &c) in cov.iter().enumerate() {
                                if c {
                                    pb.covered[j] += 1;
                                }
                            }
                            pb.width_sum += width;
                            pb.mse_sum += t;
                            pb.mse_sumsq += t * t;
                            if *collapse {
                                pb.collapse += 1;
                            }
                        }
                        None => pb.failures += 1,
                    }
                }
                let mut pair_idx = 0;
                for a in 0..n_procs {
                    for b in (a + 1)..n_procs {
                        if let (Some((cov_a, _, ta, _)), Some((cov_b, _, tb, _))) =
                            (&out.per_proc[a], &out.per_proc[b])
                        {
                            let pb = &mut pairs[pair_idx];
                            pb.n += 1;
                            let ca = cov_a.iter().filter(|&&c| c).count() as f64;
                            let cb = cov_b.iter().filter(|&&c| c).count() as f64;
                            let dcov = (ca - cb) / k as f64;
                            pb.covd_sum += dcov;
                            pb.covd_sumsq += dcov * dcov;
                            let dt = ta - tb;
                            pb.msed_sum += dt;
                            pb.msed_sumsq += dt * dt;
                        }
                        pair_idx += 1;
                    }
                }
            }
            Block { procs, pairs }
        })
        .collect()
}

/// Reduce blocks (block order fixed, pairwise over the f64 fields).
fn reduce_proc(blocks: &[Block], pi: usize, k: usize) -> ProcBlock {
    let mut total = ProcBlock::new(k);
    for b in blocks {
        let pb = &b.procs[pi];
        for j in 0..k {
            total.covered[j] += pb.covered[j];
        }
        total.collapse += pb.collapse;
        total.failures += pb.failures;
        total.n_ok += pb.n_ok;
    }
    let col = |f: &dyn Fn(&ProcBlock) -> f64| -> f64 {
        let v: Vec<f64> = blocks.iter().map(|b| f(&b.procs[pi])).collect();
        pairwise_sum(&v)
    };
    total.width_sum = col(&|p| p.width_sum);
    total.mse_sum = col(&|p| p.mse_sum);
    total.mse_sumsq = col(&|p| p.mse_sumsq);
    total
}

fn reduce_pair(blocks: &[Block], qi: usize) -> PairBlock {
    let mut total = PairBlock::new();
    for b in blocks {
        total.n += b.pairs[qi].n;
    }
    let col = |f: &dyn Fn(&PairBlock) -> f64| -> f64 {
        let v: Vec<f64> = blocks.iter().map(|b| f(&b.pairs[qi])).collect();
        pairwise_sum(&v)
    };
    total.covd_sum = col(&|p| p.covd_sum);
    total.covd_sumsq = col(&|p| p.covd_sumsq);
    total.msed_sum = col(&|p| p.msed_sum);
    total.msed_sumsq = col(&|p| p.msed_sumsq);
    total
}

fn make_rows(
    blocks: &[Block],
    spec: &SimSpec,
    grid_value: f64,
    k: usize,
) -> (Vec<CoverageRow>, Vec<PairedDiff>) {
    let n_procs = spec.procedures.len();
    let mut rows = Vec::with_capacity(n_procs);
    for (pi, proc_) in spec.procedures.iter().enumerate() {
        let t = reduce_proc(blocks, pi, k);
        let n_ok = t.n_ok.max(1) as f64;
        let per_group: Vec<f64> = t.covered.iter().map(|&c| c as f64 / n_ok).collect();
        let coverage = t.covered.iter().sum::<u64>() as f64 / (n_ok * k as f64);
        let mse = t.mse_sum / n_ok;
        let mse_var = (t.mse_sumsq / n_ok - mse * mse).max(0.0);
        rows.push(CoverageRow {
            procedure: proc_.label(),
            a: grid_value,
            coverage_per_group: per_group,
            coverage,
            coverage_mcse: (coverage * (1.0 - coverage) / n_ok).max(0.0).sqrt(),
            mean_width: t.width_sum / (n_ok * k as f64),
            total_mse: mse,
            mse_mcse: (mse_var / n_ok).sqrt(),
            collapse_freq: t.collapse as f64 / n_ok,
            failures: t.failures as usize,
        });
    }
    let mut paired = Vec::new();
    let mut qi = 0;
    for a in 0..n_procs {
        for b in (a + 1)..n_procs {
            let t = reduce_pair(blocks, qi);
            let n = t.n.max(1) as f64;
            let cd = t.covd_sum / n;
            let cd_var = (t.covd_sumsq / n - cd * cd).max(0.0);
            let md = t.msed_sum / n;
            let md_var = (t.msed_sumsq / n - md * md).max(0.0);
            paired.push(PairedDiff {
                proc_a: spec.procedures[a].label(),
                proc_b: spec.procedures[b].label(),
                grid: grid_value,
                coverage_diff: cd,
                coverage_diff_mcse: (cd_var / n).sqrt(),
                mse_diff: md,
                mse_diff_mcse: (md_var / n).sqrt(),
                n: t.n as usize,
            });
            qi += 1;
        }
    }
    (rows, paired)
}

/// Frequency-coverage study: draw `theta ~ N(X beta, A)`, `y ~ N(theta, V)`
/// at every grid `A`, fit each procedure, and tally whether each interval
/// contains its own random effect.
pub fn simulate_coverage(spec: &SimSpec) -> Result<SimReport> {
    let (vs, design) = spec.validate()?;
    if spec.a_grid.is_empty() {
        return Err(ShrinkError::InvalidSimSpec("empty A grid".into()));
    }
    if spec.a_grid.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(ShrinkError::InvalidSimSpec("A grid entries must be >= 0".into()));
    }
    let k = spec.k;
    let z = normal_quantile(0.5 * (1.0 + spec.level));
    let n_procs = spec.procedures.len();
    let n_pairs = n_procs * (n_procs - 1) / 2;

    let xb: Vec<f64> = design
        .iter()
        .map(|row| row.iter().zip(&spec.beta).map(|(xi, bi)| xi * bi).sum())
        .collect();

    let mut rows = Vec::new();
    let mut paired = Vec::new();
    with_thread_cap(|| -> Result<()> {
        for (gi, &a_true) in spec.a_grid.iter().enumerate() {
            let sqrt_a = a_true.sqrt();
            let blocks = run_blocks(k, n_procs, n_pairs, spec.reps, |rep| {
                let mut rng = SplitMix64::from_counters(spec.seed, gi as u64, rep as u64);
                let mut theta = Vec::with_capacity(k);
                let mut groups = Vec::with_capacity(k);
                for j in 0..k {
                    theta.push(xb[j] + sqrt_a * rng.next_normal());
                }
                for j in 0..k {
                    let y = theta[j] + vs[j].sqrt() * rng.next_normal();
                    groups.push(GroupObservation::new(
                        format!("g{j}"),
                        y,
                        vs[j],
                        design[j].clone(),
                    ));
                }
                let d = Dataset::new(groups, spec.beta.len()).expect("generator dataset");
                let per_proc = spec
                    .procedures
                    .iter()
                    .map(|&p| {
                        fit_procedure(p, &d, spec.level, z, spec.exact_nodes, true).ok().map(|f| {
                            let cov: Vec<bool> = (0..k)
                                .map(|j| f.lo[j] <= theta[j] && theta[j] <= f.hi[j])
                                .collect();
                            let width: f64 =
                                (0..k).map(|j| f.hi[j] - f.lo[j]).sum();
                            let t: f64 = (0..k)
                                .map(|j| (f.theta[j] - theta[j]) * (f.theta[j] - theta[j]))
                                .sum();
                            (cov, width, t, f.collapse)
                        })
                    })
                    .collect();
                RepOutcome { per_proc }
            });
            let (mut r, mut p) = make_rows(&blocks, spec, a_true, k);
            rows.append(&mut r);
            paired.append(&mut p);
        }
        Ok(())
    })?;

    Ok(SimReport { rows, paired, reps: spec.reps, level: spec.level, seed: spec.seed })
}

/// Fixed-theta risk study: draw `y ~ N(theta, V)` and tally the total
/// squared error of each procedure's point estimates.
pub fn simulate_risk(spec: &SimSpec) -> Result<RiskReport> {
    let (vs, design) = spec.validate()?;
    if spec.theta_configs.is_empty() {
        return Err(ShrinkError::InvalidSimSpec("no theta configurations".into()));
    }
    for (ci, th) in spec.theta_configs.iter().enumerate() {
        if th.len() != spec.k {
            return Err(ShrinkError::InvalidSimSpec(format!(
                "theta config {ci} has {} entries for k = {}",
                th.len(),
                spec.k
            )));
        }
    }
    let k = spec.k;
    let z = normal_quantile(0.5 * (1.0 + spec.level));
    let n_procs = spec.procedures.len();
    let n_pairs = n_procs * (n_procs - 1) / 2;

    let mut rows = Vec::new();
    let mut paired = Vec::new();
    with_thread_cap(|| -> Result<()> {
        for (ci, theta) in spec.theta_configs.iter().enumerate() {
            let tbar: f64 = theta.iter().sum::<f64>() / k as f64;
            let spread2: f64 = theta.iter().map(|t| (t - tbar) * (t - tbar)).sum();
            let blocks = run_blocks(k, n_procs, n_pairs, spec.reps, |rep| {
                let mut rng = SplitMix64::from_counters(spec.seed, ci as u64, rep as u64);
                let mut groups = Vec::with_capacity(k);
                for j in 0..k {
                    let y = theta[j] + vs[j].sqrt() * rng.next_normal();
                    groups.push(GroupObservation::new(
                        format!("g{j}"),
                        y,
                        vs[j],
                        design[j].clone(),
                    ));
                }
                let d = Dataset::new(groups, spec.beta.len()).expect("generator dataset");
                let per_proc = spec
                    .procedures
                    .iter()
                    .map(|&p| {
                        fit_procedure(p, &d, spec.level, z, spec.exact_nodes, false).ok().map(|f| {
                            let t: f64 = (0..k)
                                .map(|j| (f.theta[j] - theta[j]) * (f.theta[j] - theta[j]))
                                .sum();
                            (Vec::new(), 0.0, t, f.collapse)
                        })
                    })
                    .collect();
                RepOutcome { per_proc }
            });
            for (pi, proc_) in spec.procedures.iter().enumerate() {
                let t = reduce_proc(&blocks, pi, k);
                let n_ok = t.n_ok.max(1) as f64;
                let mse = t.mse_sum / n_ok;
                let mse_var = (t.mse_sumsq / n_ok - mse * mse).max(0.0);
                rows.push(RiskRow {
                    procedure: proc_.label(),
                    config: ci,
                    spread2,
                    total_mse: mse,
                    mse_mcse: (mse_var / n_ok).sqrt(),
                    failures: t.failures as usize,
                });
            }
            let mut qi = 0;
            for a in 0..n_procs {
                for b in (a + 1)..n_procs {
                    let t = reduce_pair(&blocks, qi);
                    let n = t.n.max(1) as f64;
                    let md = t.msed_sum / n;
                    let md_var = (t.msed_sumsq / n - md * md).max(0.0);
                    paired.push(PairedDiff {
                        proc_a: spec.procedures[a].label(),
                        proc_b: spec.procedures[b].label(),
                        grid: spread2,
                        coverage_diff: 0.0,
                        coverage_diff_mcse: 0.0,
                        mse_diff: md,
                        mse_diff_mcse: (md_var / n).sqrt(),
                        n: t.n as usize,
                    });
                    qi += 1;
                }
            }
        }
        Ok(())
    })?;

    Ok(RiskReport { rows, paired, reps: spec.reps, seed: spec.seed })
}

/// Adjusted-maximum shrinkage for the equal-variance known-mean
/// configuration: `B_hat(S) = V / (A_hat + V)` with
/// `A_hat = argmax ln A - (k/2) ln(A+V) - S/(2(A+V))`.
pub fn adm_shrinkage_known_mean(k: usize, v: f64, s: f64) -> Result<f64> {
    if k < 3 {
        return Err(ShrinkError::TooFewGroups { k, required: 3 });
    }
    let dof = k as f64;
    let g = |a: f64| 1.0 / a + equal_variance_loglik_grad(a, dof, v, s);
    let mut lo = 1e-3 * v;
    let mut g_lo = g(lo);
    let mut guard = 0;
    while g_lo <= 0.0 {
        lo /= 16.0;
        g_lo = g(lo);
        guard += 1;
        if guard > 300 {
            return Err(ShrinkError::OptimizerFailure("known-mean lower anchor".into()));
        }
    }
    let mut hi = v.max(16.0 * lo);
    while g(hi) > 0.0 {
        hi *= 16.0;
        if hi > 1e15 * v {
            return Err(ShrinkError::OptimizerFailure(format!(
                "bracket expansion exceeded {:.3e}",
                1e15 * v
            )));
        }
    }
    let a_hat = bisect_sign_change(g, lo, hi, g_lo);
    Ok(v / (a_hat + v))
}

/// Report of the Baranchik sufficient-condition sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BaranchikReport {
    pub s: Vec<f64>,
    pub tau: Vec<f64>,
    pub min_adjacent_diff: f64,
    /// `tau` nondecreasing up to `-1e-10` tolerance.
    pub nondecreasing: bool,
    pub max_tau: f64,
    /// The minimax bound `2 (k - 2)`.
    pub bound: f64,
    pub bounded: bool,
    /// Both sufficient conditions hold.
    pub minimax_conditions_met: bool,
}

/// Sweep `tau(S) = S B_hat(S) / V` over an `S` grid for the known-mean
/// equal-variance configuration and check Baranchik's two sufficient
/// conditions for minimaxity: `tau` nondecreasing and `tau <= 2 (k-2)`.
pub fn baranchik_check(k: usize, v: f64, s_grid: &[f64]) -> Result<BaranchikReport> {
    if k < 3 {
        return Err(ShrinkError::TooFewGroups { k, required: 3 });
    }
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ShrinkError::InvalidSimSpec(
            "S grid must be nonempty and strictly increasing".into(),
        ));
    }
    if s_grid[0] <= 0.0 {
        return Err(ShrinkError::InvalidSimSpec("S values must be positive".into()));
    }
    let tau: Vec<f64> = with_thread_cap(|| {
        s_grid
            .par_iter()
            .map(|&s| adm_shrinkage_known_mean(k, v, s).map(|b| s * b / v))
            .collect::<Result<Vec<f64>>>()
    })?;
    let min_adjacent_diff = tau
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let max_tau = tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bound = 2.0 * (k as f64 - 2.0);
    let nondecreasing = min_adjacent_diff >= -1e-10;
    let bounded = max_tau <= bound;
    Ok(BaranchikReport {
        s: s_grid.to_vec(),
        tau,
        min_adjacent_diff,
        nondecreasing,
        max_tau,
        bound,
        bounded,
        minimax_conditions_met: nondecreasing && bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SimSpec {
        let mut spec = SimSpec::new(10, VarianceSpec::Equal(1.0));
        spec.reps = 400;
        spec.a_grid = vec![0.0, 1.0];
        spec.seed = 20240601;
        spec.procedures = vec![Procedure::AdmShp, Procedure::SampleMean];
        spec
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let spec = base_spec();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let r1 = pool1.install(|| simulate_coverage(&spec)).unwrap();
        let r8 = pool8.install(|| simulate_coverage(&spec)).unwrap();
        assert_eq!(r1, r8);
    }

    #[test]
    fn a_zero_grid_point_produces_constant_theta() {
        // At A = 0 the random effects equal the regression surface, so
        // the sample-mean interval covers theta at its nominal level and
        // the true theta never varies; verify via a tiny custom run where
        // sample-mean coverage must be ~ level for N(0,V) errors.
        let mut spec = base_spec();
        spec.a_grid = vec![0.0];
        spec.reps = 2000;
        spec.procedures = vec![Procedure::SampleMean];
        let rep = simulate_coverage(&spec).unwrap();
        let row = &rep.rows[0];
        assert!((row.coverage - 0.95).abs() < 0.02, "coverage {}", row.coverage);
        // MSE of the unshrunk estimator = k V.
        assert!((row.total_mse - 10.0).abs() < 3.0 * row.mse_mcse + 0.5);
    }

    #[test]
    fn sample_mean_risk_is_k_v() {
        let mut spec = base_spec();
        spec.reps = 4000;
        spec.theta_configs = vec![vec![0.0; 10], vec![5.0; 10]];
        spec.procedures = vec![Procedure::SampleMean];
        let rep = simulate_risk(&spec).unwrap();
        for row in &rep.rows {
            assert!(
                (row.total_mse - 10.0).abs() <= 3.0 * row.mse_mcse,
                "risk {} mcse {}",
                row.total_mse,
                row.mse_mcse
            );
            assert_eq!(row.failures, 0);
        }
    }

    #[test]
    fn procedure_parsing() {
        assert_eq!(Procedure::parse("exact_shp").unwrap(), Procedure::ExactShp);
        assert_eq!(Procedure::parse("ADM_SHP").unwrap(), Procedure::AdmShp);
        assert_eq!(Procedure::parse("adm_q:0.5").unwrap(), Procedure::AdmQ(0.5));
        assert!(Procedure::parse("adm_q:0").is_err());
        assert!(Procedure::parse("bogus").is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = base_spec();
        spec.reps = 0;
        assert!(matches!(
            simulate_coverage(&spec),
            Err(ShrinkError::InvalidSimSpec(_))
        ));
        let mut spec = base_spec();
        spec.a_grid = vec![-1.0];
        assert!(simulate_coverage(&spec).is_err());
        let mut spec = base_spec();
        spec.theta_configs = vec![vec![0.0; 3]];
        assert!(simulate_risk(&spec).is_err());
    }

    #[test]
    fn js_failures_counted_on_unequal_variances() {
        let mut spec = base_spec();
        spec.v = VarianceSpec::PerGroup((0..10).map(|j| 1.0 + j as f64).collect());
        spec.reps = 50;
        spec.a_grid = vec![1.0];
        spec.procedures = vec![Procedure::JsPlus, Procedure::SampleMean];
        let rep = simulate_coverage(&spec).unwrap();
        assert_eq!(rep.rows[0].failures, 50, "every JS rep must fail");
        assert_eq!(rep.rows[1].failures, 0);
    }

    #[test]
    fn known_mean_adm_matches_quadratic() {
        // (k-2) A^2 - (S + (4-k) V) A - 2 V^2 = 0, positive root.
        let (k, v) = (10usize, 1.0);
        for &s in &[2.0, 5.0, 18.0, 60.0, 300.0] {
            let b = s + (4.0 - k as f64) * v;
            let disc = (b * b + 8.0 * (k as f64 - 2.0) * v * v).sqrt();
            let a_oracle = if b >= 0.0 {
                (b + disc) / (2.0 * (k as f64 - 2.0))
            } else {
                // (k-2) A^2 - b A - 2 V^2 = 0, stable branch for b < 0.
                2.0 * (2.0 * v * v) / (disc - b)
            };
            let b_hat = adm_shrinkage_known_mean(k, v, s).unwrap();
            let b_expected = v / (a_oracle + v);
            assert!(
                (b_hat - b_expected).abs() < 1e-9,
                "S={s}: {b_hat} vs {b_expected}"
            );
        }
    }

    #[test]
    fn baranchik_sweep_small() {
        let s_grid: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        let rep = baranchik_check(10, 1.0, &s_grid).unwrap();
        assert!(rep.nondecreasing, "min diff {}", rep.min_adjacent_diff);
        assert!(rep.bounded, "max tau {} bound {}", rep.max_tau, rep.bound);
        assert!(rep.minimax_conditions_met);
        assert!(rep.max_tau <= 16.0);
        // tau(18) from the closed form: A = (12 + sqrt(208))/16.
        let a = (12.0 + 208.0f64.sqrt()) / 16.0;
        let idx = 17;
        assert!((rep.tau[idx] - 18.0 / (a + 1.0)).abs() < 1e-8);
    }

    #[test]
    fn baranchik_k3_edge_reports_honestly() {
        let s_grid: Vec<f64> = (1..=100).map(|i| 0.5 * i as f64).collect();
        let rep = baranchik_check(3, 1.0, &s_grid).unwrap();
        assert_eq!(rep.bound, 2.0);
        // tau tends to k - 2 = 1 from below for large S; just verify the
        // report is self-consistent.
        assert_eq!(rep.minimax_conditions_met, rep.nondecreasing && rep.bounded);
    }
}
