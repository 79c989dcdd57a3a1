//! The nine subcommands.

use kamforge_core::covering::{check_sigma_reversibility, lift_to_cover, project_point, push_forward_at, CoverPoint, CoveringData};
use kamforge_core::diophantine::{
    alpha_at, check_measure_inputs, detect_resonances, dioph_check, evaluate_point, sample_points, DiophantineSpec, MeasureEstimate,
    ParameterBox, SampleResult,
};
use kamforge_core::fourier::C64;
use kamforge_core::homological::{self, NormalLinear};
use kamforge_core::models::{
    kam_step, linspace, response_solve, FloquetKind, KamOptions, PerturbedField, ResponseOptions, ResponseProblem, SweepPoint,
};
use kamforge_core::nondegen::{bht_i, bht_ii, corollary_gate, Corollary, FamilyAtPoint};
use kamforge_core::poly::Poly;
use kamforge_core::revlin::{lcu_equivariant, transversality_within, LinearUnfolding, Parity, ReversingStructure, StructuredMatrix};
use kamforge_core::serde_rows::{mat, mats};
use kamforge_core::Tolerances;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::artifact::{csv_artifact, json_artifact, svg_artifact, Artifact, Stamp};
use crate::config::{Command, ExperimentConfig, Format};
use crate::error::{config_err, Result};
use crate::field::{FieldDef, Term, UnfoldingDoc};
use crate::plot;

/// Everything a run produced, before it is written anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub command: Command,
    pub digest: String,
    pub result: Value,
    pub files: Vec<Artifact>,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    stamp: Stamp,
    tol: Tolerances,
    check: f64,
    files: Vec<Artifact>,
}

impl Ctx<'_> {
    fn name(&self, ext: &str) -> String {
        format!("{}.{ext}", self.cfg.command)
    }

    /// Table as CSV, or as `rows` of the JSON result.
    fn table<R: Serialize>(&mut self, result: &mut Value, header: Vec<String>, rows: &[R]) -> Result<()> {
        match self.cfg.format {
            Format::Csv => {
                let a = csv_artifact(&self.stamp, &self.name("csv"), &header, rows)?;
                self.files.push(a);
            }
            Format::Json => {
                let rows: Vec<Value> = rows
                    .iter()
                    .map(|r| {
                        let cells = serde_json::to_value(r).expect("row");
                        match cells {
                            Value::Array(c) => Value::Object(header.iter().cloned().zip(c).collect()),
                            other => other,
                        }
                    })
                    .collect();
                result["rows"] = Value::Array(rows);
            }
        }
        Ok(())
    }

    fn svg(&mut self, p: &plot::Plot) {
        let a = svg_artifact(&self.stamp, &self.name("svg"), p);
        self.files.push(a);
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let digest = cfg.digest();
    let mut ctx = Ctx {
        cfg,
        stamp: Stamp {
            command: Some(cfg.command),
            digest: Some(digest.clone()),
        },
        tol: cfg.tolerances.library(),
        check: cfg.tolerances.check(),
        files: Vec::new(),
    };
    let result = match cfg.command {
        Command::Unfold => unfold(&mut ctx)?,
        Command::Nondegen => nondegen(&mut ctx)?,
        Command::Dioph => dioph(&mut ctx)?,
        Command::Measure => measure(&mut ctx)?,
        Command::Cover => cover(&mut ctx)?,
        Command::Homsolve => homsolve(&mut ctx)?,
        Command::Kamstep => kamstep(&mut ctx)?,
        Command::Response => response(&mut ctx)?,
        Command::Sweep => sweep(&mut ctx)?,
    };
    let main = json_artifact(&ctx.stamp, &ctx.name("json"), result.clone());
    let mut files = vec![main];
    files.append(&mut ctx.files);
    Ok(RunOutput {
        command: cfg.command,
        digest,
        result,
        files,
    })
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecParams {
    gamma: f64,
    tau: f64,
    k_max: usize,
}

impl SpecParams {
    fn spec(self) -> DiophantineSpec {
        DiophantineSpec::new(self.gamma, self.tau, self.k_max)
    }
}

fn field_of(v: &Value) -> Result<FieldDef> {
    FieldDef::from_value(v)
}

fn minus(m: &DMatrix<f64>, st: &ReversingStructure, tol: &Tolerances) -> Result<StructuredMatrix> {
    Ok(StructuredMatrix::new(m.clone(), Parity::Minus, st, tol)?)
}

// unfold

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UnfoldParams {
    #[serde(with = "mat")]
    matrix: DMatrix<f64>,
    symmetry: ReversingStructure,
    #[serde(default, with = "mats")]
    commuting: Vec<DMatrix<f64>>,
}

fn unfold(ctx: &mut Ctx) -> Result<Value> {
    let p: UnfoldParams = ctx.cfg.params()?;
    let om = minus(&p.matrix, &p.symmetry, &ctx.tol)?;
    let unf = lcu_equivariant(&om, &p.symmetry, &p.commuting, &ctx.tol)?;
    let rep = transversality_within(&unf, &p.symmetry, &p.commuting, &ctx.tol)?;
    Ok(json!({
        "unfolding": UnfoldingDoc::from_unfolding(&unf),
        "codimension": unf.codimension(),
        "transversality": rep,
    }))
}

// nondegen

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NondegenParams {
    /// Frequencies at the point.
    omega: Vec<f64>,
    #[serde(with = "mat")]
    matrix: DMatrix<f64>,
    symmetry: ReversingStructure,
    #[serde(default, with = "mats")]
    commuting: Vec<DMatrix<f64>>,
    /// Explicit family derivatives; without them the family is `(omega, mu)`
    /// over the unfolding.
    #[serde(default)]
    family: Option<FamilyParams>,
    #[serde(default)]
    unfolding: Option<UnfoldingDoc>,
    #[serde(default)]
    corollary: Option<Corollary>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyParams {
    #[serde(with = "mat")]
    d_omega: DMatrix<f64>,
    #[serde(with = "mats")]
    d_matrix: Vec<DMatrix<f64>>,
}

fn nondegen(ctx: &mut Ctx) -> Result<Value> {
    let p: NondegenParams = ctx.cfg.params()?;
    let tol = &ctx.tol;
    let om = minus(&p.matrix, &p.symmetry, tol)?;
    let omega0 = DVector::from_vec(p.omega.clone());
    let fam = match &p.family {
        Some(f) => {
            let dm = f.d_matrix.iter().map(|m| minus(m, &p.symmetry, tol)).collect::<Result<Vec<_>>>()?;
            FamilyAtPoint::new(omega0, om.clone(), f.d_omega.clone(), dm, p.symmetry.clone())?
        }
        None => {
            let unf = match &p.unfolding {
                Some(u) => u.to_unfolding(Some(&p.symmetry), tol)?,
                None => lcu_equivariant(&om, &p.symmetry, &p.commuting, tol)?,
            };
            if unf.base.entries != om.entries {
                return Err(config_err("unfolding base differs from matrix"));
            }
            FamilyAtPoint::from_unfolding(omega0, &unf, p.symmetry.clone())?
        }
    }
    .with_commuting(p.commuting.clone());
    let i = bht_i(&om, &p.symmetry, tol)?;
    let ii = bht_ii(&fam, tol)?;
    let gate = p.corollary.map(|c| corollary_gate(&fam, c, tol)).transpose()?;
    Ok(json!({
        "bht_i": i,
        "bht_ii": ii,
        "verdict": i.verdict.and(ii.verdict),
        "corollary": gate,
    }))
}

// dioph

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiophParams {
    omega: Vec<f64>,
    /// Normal frequencies; or give `unfolding` and `mu`.
    #[serde(default)]
    alpha: Option<Vec<f64>>,
    #[serde(default)]
    unfolding: Option<UnfoldingDoc>,
    #[serde(default)]
    mu: Vec<f64>,
    gamma: f64,
    tau: f64,
    k_max: usize,
    /// Report every combination with `|<k,omega> + <l,alpha>|` below this.
    #[serde(default)]
    resonance_tol: Option<f64>,
}

fn dioph(ctx: &mut Ctx) -> Result<Value> {
    let p: DiophParams = ctx.cfg.params()?;
    let alpha = match (&p.alpha, &p.unfolding) {
        (Some(_), Some(_)) => return Err(config_err("give alpha or an unfolding, not both")),
        (Some(a), None) => a.clone(),
        (None, Some(u)) => alpha_at(Some(&u.to_unfolding(None, &ctx.tol)?), &p.mu)?,
        (None, None) => Vec::new(),
    };
    let spec = DiophantineSpec::new(p.gamma, p.tau, p.k_max);
    spec.validate(p.omega.len())?;
    let v = dioph_check(&p.omega, &alpha, &spec)?;
    let res = match p.resonance_tol {
        Some(t) => Some(detect_resonances(&p.omega, &alpha, t, p.k_max)?),
        None => None,
    };
    Ok(json!({
        "omega": p.omega,
        "alpha": alpha,
        "spec": spec,
        "verdict": v,
        "resonances": res,
    }))
}

// measure

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureParams {
    /// Number of frequencies; the remaining box coordinates are `mu`.
    n: usize,
    #[serde(rename = "box")]
    bx: ParameterBox,
    samples: usize,
    gamma: f64,
    /// Further `gamma` values for the monotonicity table.
    #[serde(default)]
    gammas: Vec<f64>,
    tau: f64,
    k_max: usize,
    #[serde(default)]
    unfolding: Option<UnfoldingDoc>,
    /// Box coordinates shown in the slice plot.
    #[serde(default)]
    slice: Option<[usize; 2]>,
}

const PLOT_POINTS: usize = 2000;

fn ints(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

/// Parallel evaluation of the seeded sample; rows come back in sample order.
pub fn measure_rows(
    bx: &ParameterBox,
    n: usize,
    unfolding: Option<&LinearUnfolding>,
    spec: &DiophantineSpec,
    samples: usize,
    seed: u64,
) -> Result<Vec<SampleResult>> {
    check_measure_inputs(bx, n, unfolding, samples)?;
    spec.validate(n)?;
    let pts = sample_points(bx, samples, seed);
    Ok(pts.par_iter().map(|p| evaluate_point(p, n, unfolding, spec)).collect::<kamforge_core::Result<Vec<_>>>()?)
}

fn measure(ctx: &mut Ctx) -> Result<Value> {
    let p: MeasureParams = ctx.cfg.params()?;
    let unf = p.unfolding.as_ref().map(|u| u.to_unfolding(None, &ctx.tol)).transpose()?;
    let spec = DiophantineSpec::new(p.gamma, p.tau, p.k_max);
    let rows = measure_rows(&p.bx, p.n, unf.as_ref(), &spec, p.samples, ctx.cfg.seed)?;
    let mut gammas = vec![p.gamma];
    gammas.extend(p.gammas.iter().copied().filter(|g| *g != p.gamma));
    for g in &gammas {
        DiophantineSpec::new(*g, p.tau, p.k_max).validate(p.n)?;
    }
    gammas.sort_by(f64::total_cmp);
    let estimates: Vec<Value> = gammas
        .iter()
        .map(|&g| {
            let hits = rows.iter().filter(|r| r.margin >= g).count();
            let e = MeasureEstimate::from_counts(hits, rows.len());
            json!({ "gamma": g, "estimate": e })
        })
        .collect();
    let fractions: Vec<f64> = estimates.iter().map(|e| e["estimate"]["fraction"].as_f64().unwrap_or(0.0)).collect();
    let monotone = fractions.windows(2).all(|w| w[1] <= w[0]);
    let c = p.bx.lower.len() - p.n;
    let mut header: Vec<String> = (1..=p.n).map(|i| format!("omega{i}")).collect();
    header.extend((1..=c).map(|i| format!("mu{i}")));
    header.extend(["in_gamma", "worst_k", "worst_ell", "margin"].map(String::from));
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells: Vec<String> = r.omega.iter().chain(&r.mu).map(f64::to_string).collect();
            cells.push(r.in_gamma.to_string());
            cells.push(ints(&r.worst_k));
            cells.push(ints(&r.worst_ell));
            cells.push(r.margin.to_string());
            cells
        })
        .collect();
    let hits = rows.iter().filter(|r| r.in_gamma).count();
    let mut result = json!({
        "spec": spec,
        "samples": rows.len(),
        "seed": ctx.cfg.seed,
        "estimate": MeasureEstimate::from_counts(hits, rows.len()),
        "by_gamma": estimates,
        "monotone_in_gamma": monotone,
    });
    match ctx.cfg.format {
        Format::Csv => ctx.table(&mut result, header.clone(), &table)?,
        Format::Json => result["rows"] = serde_json::to_value(&rows)?,
    }

    let dims = p.bx.lower.len();
    let [a, b] = p.slice.unwrap_or(if dims >= 2 { [dims - 1, 0] } else { [0, 0] });
    if a >= dims || b >= dims {
        return Err(config_err(format!("slice indices must be below {dims}")));
    }
    let coord = |r: &SampleResult, i: usize| if i < p.n { r.omega[i] } else { r.mu[i - p.n] };
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for r in rows.iter().take(PLOT_POINTS) {
        let pt = (coord(r, a), coord(r, b));
        if r.in_gamma {
            inside.push(pt);
        } else {
            outside.push(pt);
        }
    }
    let title = format!("Diophantine set, gamma = {}, tau = {}", p.gamma, p.tau);
    ctx.svg(&plot::diophantine_slice(&title, inside, outside, &header[a], &header[b]));
    Ok(result)
}

// cover

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverParams {
    field: Value,
    covering: CoveringDoc,
    /// Random base points for the push-forward check.
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default)]
    include_field: bool,
}

fn default_points() -> usize {
    100
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoveringDoc {
    l: i64,
    j: Vec<usize>,
    k1: i64,
    #[serde(default)]
    sigma: Option<Vec<Vec<i64>>>,
}

/// Largest `|D Pi X_hat - X o Pi|` and `|Pi o F - Pi|` over random points and all sheets.
pub struct CoverChecks {
    pub push_forward: f64,
    pub deck: f64,
}

pub fn cover_checks(
    base: &kamforge_core::fourier::FourierField,
    lifted: &kamforge_core::fourier::FourierField,
    cov: &CoveringData,
    deck: &kamforge_core::covering::DeckMap,
    points: usize,
    seed: u64,
) -> CoverChecks {
    let (n, m, q) = (base.n, base.m, 2 * base.p);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut lower = vec![0.0; n];
    let mut upper = vec![two_pi; n];
    lower.extend(vec![-1.0; m + q]);
    upper.extend(vec![1.0; m + q]);
    let bx = ParameterBox { lower, upper };
    let pts = sample_points(&bx, points, seed);
    let mut push = 0.0f64;
    let mut dk = 0.0f64;
    for pt in &pts {
        let (x, rest) = pt.split_at(n);
        let (y, z) = rest.split_at(m);
        let (fx, fy, fz) = base.eval(x, y, z);
        for sheet in 0..cov.l {
            let (dx, dy, dz) = push_forward_at(lifted, cov, deck, sheet, x, y, z);
            push = push.max((dx - &fx).amax()).max((dy - &fy).amax()).max((dz - &fz).amax());
            let q = CoverPoint {
                sheet,
                x: x.to_vec(),
                y: y.to_vec(),
                zeta: z.to_vec(),
            };
            let a = project_point(cov, deck, &q);
            let b = project_point(cov, deck, &deck.apply(&q));
            let diff = a.2.iter().zip(&b.2).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            let same_base = a.0 == b.0 && a.1 == b.1;
            dk = dk.max(if same_base { diff } else { f64::INFINITY });
        }
    }
    CoverChecks { push_forward: push, deck: dk }
}

fn cover(ctx: &mut Ctx) -> Result<Value> {
    let p: CoverParams = ctx.cfg.params()?;
    let def = field_of(&p.field)?;
    let base = def.full_field()?;
    let mut cov = CoveringData::new(p.covering.l, p.covering.j.clone(), p.covering.k1, def.dims.n);
    if let Some(s) = &p.covering.sigma {
        cov.sigma = s.clone();
    }
    let (lifted, deck) = lift_to_cover(&base, &cov)?;
    let twisted = def.symmetry.clone().with_twist(deck.s.clone(), cov.l as usize)?;
    let sigma = check_sigma_reversibility(&lifted, &twisted, ctx.check)?;
    let checks = cover_checks(&base, &lifted, &cov, &deck, p.points, ctx.cfg.seed);
    let floquet = lifted.zero_mode().h_zeta.map(|c: C64| c.re);
    let mut result = json!({
        "covering": cov,
        "deck_matrix": mat_rows(&deck.s),
        "lifted_floquet": mat_rows(&floquet),
        "sigma_checks": sigma,
        "push_forward_error": checks.push_forward,
        "deck_invariance_error": checks.deck,
        "push_forward_ok": checks.push_forward <= ctx.check.max(1e-12),
        "points": p.points,
    });
    if p.include_field {
        result["lifted_field"] = serde_json::to_value(&lifted)?;
    }
    Ok(result)
}

fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

// homsolve

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HomsolveParams {
    field: Value,
    spec: SpecParams,
    /// Frequencies of the normal form; the field's by default.
    #[serde(default)]
    sigma: Option<Vec<f64>>,
    #[serde(default)]
    include_psi: bool,
}

fn normal_linear(def: &FieldDef, sigma: Option<Vec<f64>>, tol: &Tolerances) -> Result<NormalLinear> {
    let x = def.integrable_unfolded(tol)?;
    let dom = x.dominant_part();
    let om = minus(&dom.floquet, &x.structure, tol)?;
    let sigma = sigma.unwrap_or_else(|| dom.omega.as_slice().to_vec());
    let unf = x.unfolding.clone().expect("unfolded field");
    Ok(NormalLinear::new(sigma, om, unf, x.structure.clone())?.with_commuting(x.commuting.clone()))
}

fn homsolve(ctx: &mut Ctx) -> Result<Value> {
    let p: HomsolveParams = ctx.cfg.params()?;
    let def = field_of(&p.field)?;
    let nx = normal_linear(&def, p.sigma, &ctx.tol)?;
    let rhs = def.perturbation()?;
    let spec = p.spec.spec();
    let sol = homological::solve(&nx, &rhs, &spec, &ctx.tol)?;
    let norm = rhs.norm(0.0);
    let mut result = json!({
        "spec": spec,
        "lambda1": sol.lambda1,
        "lambda2": sol.lambda2,
        "residual": sol.residual,
        "rhs_norm": norm,
        "relative_residual": if norm > 0.0 { sol.residual / norm } else { 0.0 },
        "residual_ok": sol.residual <= ctx.check * norm.max(f64::MIN_POSITIVE),
        "min_divisor": sol.min_divisor,
        "psi_norm": sol.psi.norm(0.0),
        "psi_modes": sol.psi.modes.len(),
    });
    if p.include_psi {
        result["psi"] = serde_json::to_value(&sol.psi)?;
    }
    Ok(result)
}

// kamstep

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KamParams {
    field: Value,
    spec: SpecParams,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default = "default_k_out")]
    k_out: usize,
    #[serde(default)]
    rho: f64,
    /// Multipliers of the field's Fourier part.
    eps: Vec<f64>,
}

fn default_grid() -> usize {
    16
}

fn default_k_out() -> usize {
    8
}

/// Least-squares slope of `log after` against `log before`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(a, b)| *a > 0.0 && *b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Serialize)]
struct KamRow {
    eps: f64,
    before: f64,
    after: f64,
    contraction: f64,
    residual: f64,
    min_divisor: f64,
}

fn kamstep(ctx: &mut Ctx) -> Result<Value> {
    let p: KamParams = ctx.cfg.params()?;
    if p.eps.is_empty() {
        return Err(config_err("eps must list at least one value"));
    }
    let def = field_of(&p.field)?;
    let x = def.integrable_unfolded(&ctx.tol)?;
    let pert = def.perturbation()?;
    let spec = p.spec.spec();
    let opts = KamOptions {
        grid: p.grid,
        k_out: p.k_out,
        rho: p.rho,
    };
    let tol = ctx.tol;
    let steps = p
        .eps
        .par_iter()
        .map(|&e| {
            let z = PerturbedField::new(x.clone(), pert.scaled(C64::new(e, 0.0)))?;
            let (out, rep) = kam_step(&z, &spec, &opts, &tol)?;
            Ok((e, out.reversibility_defect(), rep))
        })
        .collect::<kamforge_core::Result<Vec<_>>>()?;
    let rows: Vec<KamRow> = steps
        .iter()
        .map(|(e, _, r)| KamRow {
            eps: *e,
            before: r.before,
            after: r.after,
            contraction: r.contraction,
            residual: r.residual,
            min_divisor: r.min_divisor,
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.before, r.after)).collect();
    let slope = loglog_slope(&pts);
    let reports: Vec<Value> = steps
        .iter()
        .map(|(e, d, r)| json!({ "eps": e, "reversibility_defect": d, "report": r }))
        .collect();
    let mut result = json!({
        "spec": spec,
        "options": opts,
        "slope": slope,
        "steps": reports,
    });
    let header = ["eps", "before", "after", "contraction", "residual", "min_divisor"].map(String::from).to_vec();
    let table: Vec<(f64, f64, f64, f64, f64, f64)> =
        rows.iter().map(|r| (r.eps, r.before, r.after, r.contraction, r.residual, r.min_divisor)).collect();
    ctx.table(&mut result, header, &table)?;
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    ctx.svg(&plot::remainder_loglog(&sorted));
    Ok(result)
}

// response and sweep

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Forcing {
    k: Vec<i64>,
    amplitude: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseParams {
    omega: f64,
    #[serde(default)]
    mu: Option<f64>,
    /// Terms of the nonlinearity in `(z1, z2)`.
    #[serde(default)]
    hbar: Vec<Term>,
    forcing: Vec<Forcing>,
    #[serde(default = "default_response_k")]
    k_max: usize,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default)]
    spec: Option<SpecParams>,
    #[serde(default)]
    mu_range: Option<[f64; 2]>,
    #[serde(default)]
    points: Option<usize>,
}

fn default_response_k() -> usize {
    12
}

fn default_max_iter() -> usize {
    50
}

impl ResponseParams {
    fn problem(&self, mu: f64) -> Result<ResponseProblem> {
        let mut hbar = Poly::zero(2);
        for t in &self.hbar {
            if t.exponent.len() != 2 {
                return Err(config_err("hbar exponents are [power of z1, power of z2]"));
            }
            hbar.add_term(&t.exponent, t.coeff);
        }
        Ok(ResponseProblem {
            omega: self.omega,
            mu,
            hbar,
            forcing: self.forcing.iter().map(|f| (f.k.clone(), f.amplitude)).collect(),
        })
    }

    fn options(&self, tol: f64) -> ResponseOptions {
        ResponseOptions {
            k_max: self.k_max,
            tol,
            max_iter: self.max_iter,
        }
    }
}

fn response(ctx: &mut Ctx) -> Result<Value> {
    let p: ResponseParams = ctx.cfg.params()?;
    if p.mu_range.is_some() || p.points.is_some() {
        return Err(config_err("mu_range and points belong to sweep"));
    }
    let mu = p.mu.ok_or_else(|| config_err("response needs mu"))?;
    let spec = p.spec.map(SpecParams::spec);
    let sol = response_solve(&p.problem(mu)?, &p.options(ctx.check), spec.as_ref())?;
    let mut result = json!({
        "mu": mu,
        "amplitude": sol.amplitude(),
        "solution": sol,
    });
    let table: Vec<(String, f64)> = sol.modes.iter().map(|(k, c)| (ints(k), *c)).collect();
    ctx.table(&mut result, vec!["k".into(), "coeff".into()], &table)?;
    Ok(result)
}

fn kind_name(k: FloquetKind) -> &'static str {
    match k {
        FloquetKind::Elliptic => "elliptic",
        FloquetKind::Hyperbolic => "hyperbolic",
        FloquetKind::Parabolic => "parabolic",
    }
}

/// Indices `i` where the Floquet type of point `i` differs from point `i - 1`.
pub fn type_changes(points: &[SweepPoint]) -> Vec<usize> {
    (1..points.len()).filter(|&i| points[i].kind != points[i - 1].kind).collect()
}

fn sweep(ctx: &mut Ctx) -> Result<Value> {
    let p: ResponseParams = ctx.cfg.params()?;
    if p.mu.is_some() {
        return Err(config_err("sweep takes mu_range, not mu"));
    }
    let [lo, hi] = p.mu_range.ok_or_else(|| config_err("sweep needs mu_range"))?;
    let count = p.points.unwrap_or(21);
    if count < 2 || !(hi > lo) {
        return Err(config_err("sweep needs points >= 2 and mu_range[1] > mu_range[0]"));
    }
    let spec = p.spec.map(SpecParams::spec);
    let opts = p.options(ctx.check);
    let mus = linspace(lo, hi, count);
    let pts = mus
        .par_iter()
        .map(|&mu| {
            let s = response_solve(&p.problem(mu)?, &opts, spec.as_ref())?;
            Ok(SweepPoint::from_solution(mu, &s))
        })
        .collect::<Result<Vec<_>>>()?;
    let changes: Vec<Value> = type_changes(&pts)
        .into_iter()
        .map(|i| json!({ "between": [pts[i - 1].mu, pts[i].mu], "from": pts[i - 1].kind, "to": pts[i].kind }))
        .collect();
    let mut result = json!({
        "mu_range": [lo, hi],
        "points": count,
        "type_changes": changes,
        "max_iterations": pts.iter().map(|s| s.iterations).max(),
        "max_residual": pts.iter().map(|s| s.residual).fold(0.0, f64::max),
    });
    let header = ["mu", "amplitude", "iterations", "residual", "eig1_re", "eig1_im", "eig2_re", "eig2_im", "kind"]
        .map(String::from)
        .to_vec();
    let table: Vec<(f64, f64, usize, f64, f64, f64, f64, f64, &str)> = pts
        .iter()
        .map(|s| {
            let [a, b] = s.eigenvalues;
            (s.mu, s.amplitude, s.iterations, s.residual, a.re, a.im, b.re, b.im, kind_name(s.kind))
        })
        .collect();
    ctx.table(&mut result, header, &table)?;
    let re: Vec<f64> = pts.iter().map(|s| s.eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)).collect();
    let im: Vec<f64> = pts.iter().map(|s| s.eigenvalues.iter().map(|e| e.im).fold(f64::NEG_INFINITY, f64::max)).collect();
    ctx.svg(&plot::floquet_sweep(&mus, &re, &im));
    Ok(result)
}
