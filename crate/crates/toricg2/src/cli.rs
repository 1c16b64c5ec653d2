//! Command-line surface: `toricg2 <command>` with JSON/CSV reports.
//!
//! Commands: `validate` (torsion-free residuals of a V field), `curvature`
//! (finite-difference curvature, holonomy span rank), `graph` (trivalent graph
//! export for the catalogued models), `models` (multi-moment-map and
//! Bryant-Salamon verification suite), `solve` (polynomial hierarchy families).
//! Reports carry "schema": 1 and are byte-identical for a fixed (config, seed).

use crate::ansatz::{
    self, Box4, ConnectionPotential, VField,
};
use crate::forms::coframe_d;
use crate::geometry::{curvature_in_g2, holonomy_span_rank, riemann, MetricSampler};
use crate::models::{
    self, BsDirection, FlatC3Point, FlatT2RC2Point, GraphR4, Quat, QuatPair, C64,
};
use crate::pde;
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "toricg2", about = "Build and verify toric G2-structures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a V field against the torsion-free system
    Validate(RunConfig),
    /// Sample curvature, Ricci and holonomy span rank of the induced metric
    Curvature(RunConfig),
    /// Emit the trivalent graph of a catalogued model (c3, t2rc2, bs)
    Graph(RunConfig),
    /// Run the multi-moment-map and Bryant-Salamon verification suite
    Models(RunConfig),
    /// Enumerate polynomial solutions of the diagonal elliptic hierarchy
    Solve(RunConfig),
}

#[derive(clap::Args, Debug, Clone)]
pub struct RunConfig {
    /// V field JSON path (validate/curvature)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Domain box, e.g. "nu1=-1:1,nu2=-1:1,nu3=-1:1,mu=0.5:2"
    #[arg(long = "box")]
    pub box_spec: Option<String>,
    /// Grid resolution per axis (>= 2)
    #[arg(long, default_value_t = 5)]
    pub res: usize,
    /// Pass/fail tolerance
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Bryant-Salamon parameter epsilon (graph/models)
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// PRNG seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Model name for `graph` (c3 | t2rc2 | bs)
    #[arg(long)]
    pub model: Option<String>,
    /// Max polynomial degree for `solve`
    #[arg(long, default_value_t = 5)]
    pub degree: u32,
    /// Output path for the JSON (or CSV) payload
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad --box: {0}")]
    BadBox(String),
    #[error("unknown model '{0}' (expected c3, t2rc2 or bs)")]
    UnknownModel(String),
    #[error("--input is required for this command")]
    MissingInput,
    #[error(transparent)]
    Ansatz(#[from] ansatz::AnsatzError),
    #[error(transparent)]
    Models(#[from] models::ModelsError),
}

pub fn parse_box(spec: &str) -> Result<Box4, CliError> {
    let mut lo = [f64::NAN; 4];
    let mut hi = [f64::NAN; 4];
    for part in spec.split(',') {
        let (name, range) = part
            .split_once('=')
            .ok_or_else(|| CliError::BadBox(part.to_string()))?;
        let idx = crate::poly::VAR_NAMES
            .iter()
            .position(|&v| v == name.trim())
            .ok_or_else(|| CliError::BadBox(name.to_string()))?;
        let (a, b) = range
            .split_once(':')
            .ok_or_else(|| CliError::BadBox(range.to_string()))?;
        lo[idx] = a.trim().parse().map_err(|_| CliError::BadBox(a.into()))?;
        hi[idx] = b.trim().parse().map_err(|_| CliError::BadBox(b.into()))?;
    }
    if lo.iter().chain(hi.iter()).any(|v| v.is_nan()) {
        return Err(CliError::BadBox(
            "all four of nu1, nu2, nu3, mu must be given".into(),
        ));
    }
    Ok(Box4 { lo, hi })
}

fn load_vfield(cfg: &RunConfig) -> Result<VField, CliError> {
    let path = cfg.input.as_ref().ok_or(CliError::MissingInput)?;
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let mut v = ansatz::vfield_from_json(&value)?;
    if let Some(spec) = &cfg.box_spec {
        v.domain = parse_box(spec)?;
    }
    Ok(v)
}

fn write_out(cfg: &RunConfig, payload: &str) -> Result<(), CliError> {
    if let Some(path) = &cfg.out {
        std::fs::write(path, payload)?;
    }
    Ok(())
}

fn report_header(cfg: &RunConfig, command: &str) -> Value {
    json!({
        "schema": 1,
        "command": command,
        "seed": cfg.seed,
        "res": cfg.res,
        "tol": cfg.tol,
    })
}

/// Torsion-free validation report for a V field on its box.
pub fn cmd_validate(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let v = load_vfield(cfg)?;
    let grid = v.domain.grid(cfg.res.max(2));
    let mut positive = true;
    let mut div_max = 0.0f64;
    let mut ell_max = 0.0f64;
    for x in &grid {
        if !v.is_positive_at(x) {
            positive = false;
            continue;
        }
        div_max = div_max.max(ansatz::div_residual(&v, x).amax());
        ell_max = ell_max.max(ansatz::elliptic_residual(&v, x).amax());
    }
    let center = v.domain.center();
    let cm = ansatz::curvature_matrices(&v, &center);
    let z_sample: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| cm.z[(i, j)]).collect())
        .collect();
    let w_sample: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| cm.w[(i, j)]).collect())
        .collect();
    let flat = {
        let mut is_flat = true;
        for x in grid.iter().step_by(7) {
            for a in 0..4 {
                if v.d1(x, a).amax() > 1e-14 {
                    is_flat = false;
                }
            }
        }
        is_flat
    };

    let mut torsion: Option<(f64, f64)> = None;
    if positive && div_max <= cfg.tol && ell_max <= cfg.tol && v.as_polynomial().is_some() {
        let a = ansatz::poincare_potential(&v, &center)?;
        torsion = Some(ansatz::torsion_residual(&v, &a, &grid)?);
    }
    let status = if !positive {
        "not positive definite"
    } else if div_max > cfg.tol {
        "not divergence-free"
    } else if ell_max > cfg.tol {
        "second-order system violated"
    } else if flat {
        "toric (flat)"
    } else {
        "toric"
    };
    let pass = positive && div_max <= cfg.tol && ell_max <= cfg.tol;
    let mut report = report_header(cfg, "validate");
    let obj = report.as_object_mut().unwrap();
    obj.insert("status".into(), json!(status));
    obj.insert("positive".into(), json!(positive));
    obj.insert("div_residual_max".into(), json!(div_max));
    obj.insert("elliptic_residual_max".into(), json!(ell_max));
    obj.insert("z_at_center".into(), json!(z_sample));
    obj.insert("w_at_center".into(), json!(w_sample));
    if let Some((dphi, dsphi)) = torsion {
        obj.insert("torsion_dphi_max".into(), json!(dphi));
        obj.insert("torsion_dstarphi_max".into(), json!(dsphi));
    }
    Ok((report, pass))
}

/// Curvature sampling report plus a CSV table (written to --out when given).
pub fn cmd_curvature(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let v = load_vfield(cfg)?;
    let a = if v.as_polynomial().is_some() {
        ansatz::poincare_potential(&v, &v.domain.center())?
    } else {
        ConnectionPotential::zero()
    };
    let sampler = MetricSampler::from_vfield(&v, &a);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_points = cfg.res.max(2);
    let mut csv = String::from(
        "nu1,nu2,nu3,mu,norm_r,norm_ricci,ricci_ratio,bianchi_rel,rank,gap,in_g2\n",
    );
    let mut pass = true;
    let mut rows = Vec::new();
    for _ in 0..n_points {
        // stay away from the faces so central differencing remains inside
        let u: [f64; 4] = [
            0.1 + 0.8 * rng.gen::<f64>(),
            0.1 + 0.8 * rng.gen::<f64>(),
            0.1 + 0.8 * rng.gen::<f64>(),
            0.1 + 0.8 * rng.gen::<f64>(),
        ];
        let x4 = v.domain.sample(&u);
        let x7 = [0.0, 0.0, 0.0, x4[0], x4[1], x4[2], x4[3]];
        let curv = riemann(&sampler, &x7, 1e-4)?;
        let (rank, gap) = holonomy_span_rank(&curv, 1e-6);
        let (phi, _, _) = ansatz::build_structure(&v, &a, &x4)?;
        let g2_defect = curvature_in_g2(&curv, &phi);
        let in_g2 = g2_defect < 1e-4;
        let ratio = if curv.norm_r > 0.0 {
            curv.norm_ricci / curv.norm_r
        } else {
            0.0
        };
        let bianchi = bianchi_residual(&curv);
        if curv.norm_r > 1e-8 && (ratio > 1e-4 || !in_g2) {
            pass = false;
        }
        csv.push_str(&format!(
            "{},{},{},{},{:e},{:e},{:e},{:e},{},{:e},{}\n",
            x4[0], x4[1], x4[2], x4[3], curv.norm_r, curv.norm_ricci, ratio, bianchi,
            rank, gap, in_g2
        ));
        rows.push(json!({
            "point": x4,
            "norm_r": curv.norm_r,
            "norm_ricci": curv.norm_ricci,
            "ricci_ratio": ratio,
            "bianchi_rel": bianchi,
            "rank": rank,
            "gap": gap,
            "in_g2": in_g2,
        }));
    }
    write_out(cfg, &csv)?;
    let mut report = report_header(cfg, "curvature");
    report
        .as_object_mut()
        .unwrap()
        .insert("samples".into(), json!(rows));
    Ok((report, pass))
}

/// Relative first-Bianchi residual max |Omega_{ij} e_k + cyclic| / |R|.
fn bianchi_residual(curv: &crate::geometry::CurvatureData) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..7 {
        for j in 0..7 {
            for k in 0..7 {
                for a in 0..7 {
                    let b = curv.omega[i][j][(a, k)]
                        + curv.omega[j][k][(a, i)]
                        + curv.omega[k][i][(a, j)];
                    worst = worst.max(b.abs());
                }
            }
        }
    }
    if curv.norm_r > 0.0 {
        worst / curv.norm_r
    } else {
        worst
    }
}

/// Emit the GraphR4 JSON for a catalogued model.
pub fn cmd_graph(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let name = cfg.model.as_deref().unwrap_or("bs");
    let graph: GraphR4 = match name {
        "c3" => models::flat_graph_c3(),
        "t2rc2" => models::flat_graph_t2rc2(),
        "bs" => models::bs_graph(cfg.eps),
        other => return Err(CliError::UnknownModel(other.to_string())),
    };
    let ok = graph.check_invariants().is_ok();
    let export = graph.to_json();
    write_out(cfg, &serde_json::to_string_pretty(&export)?)?;
    let mut report = report_header(cfg, "graph");
    let obj = report.as_object_mut().unwrap();
    obj.insert("model".into(), json!(name));
    obj.insert("invariants_ok".into(), json!(ok));
    obj.insert("graph".into(), export);
    Ok((report, ok))
}

fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quat {
    loop {
        let q = Quat::new(
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
        );
        let n = q.norm();
        if n > 1e-3 && n <= 1.0 {
            return q.normalize();
        }
    }
}

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
}

/// Model verification suite: flat-model roundtrips, invariant-ring relations,
/// nearly Kahler structure equations, Bryant-Salamon cross-checks.
pub fn cmd_models(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();
    let push = |checks: &mut Vec<Value>, name: &str, residual: f64, tol: f64| -> bool {
        let ok = residual <= tol;
        checks.push(json!({"name": name, "max_residual": residual, "tol": tol, "pass": ok}));
        ok
    };
    let mut all = true;

    // rho_inverse roundtrip on random targets in R^4
    let mut rt = 0.0f64;
    for _ in 0..1000 {
        let target: [f64; 4] = [
            rng.gen::<f64>() * 8.0 - 4.0,
            rng.gen::<f64>() * 8.0 - 4.0,
            rng.gen::<f64>() * 8.0 - 4.0,
            rng.gen::<f64>() * 8.0 - 4.0,
        ];
        let orbit = models::rho_inverse(&[target[0], target[1], target[2]], target[3]);
        let back = models::mmm_c3(&models::rho_representative(&orbit));
        for c in 0..4 {
            rt = rt.max((back[c] - target[c]).abs());
        }
    }
    all &= push(&mut checks, "rho_inverse_roundtrip", rt, 1e-9);

    // sphere-radius identity for the T^2 x R x C^2 model
    let mut sphere = 0.0f64;
    for _ in 0..1000 {
        let pt = FlatT2RC2Point {
            x: 0.0,
            y: 0.0,
            u: rng.gen::<f64>() * 2.0 - 1.0,
            z: random_c(&mut rng),
            w: random_c(&mut rng),
        };
        let m = models::mmm_t2rc2(&pt);
        let r2 = 0.25 * (pt.z.norm_sqr() + pt.w.norm_sqr()).powi(2);
        sphere = sphere.max((m[3] * m[3] + m[0] * m[0] + m[1] * m[1] - r2).abs());
    }
    all &= push(&mut checks, "t2rc2_sphere_identity", sphere, 1e-12);

    // invariant-ring relations
    let mut rel4 = 0.0f64;
    let mut rel6 = 0.0f64;
    for _ in 0..1000 {
        let (r, _) = models::sigma_relations_4d(random_c(&mut rng), random_c(&mut rng));
        rel4 = rel4.max(r.abs());
        let (r, _) = models::sigma_relations_6d(
            random_c(&mut rng),
            random_c(&mut rng),
            random_c(&mut rng),
        );
        rel6 = rel6.max(r.abs());
    }
    all &= push(&mut checks, "sigma_relation_4d", rel4, 1e-12);
    all &= push(&mut checks, "sigma_relation_6d", rel6, 1e-12);

    // nearly Kahler structure equations d sigma = 3 psi, d psi-hat = -2 sigma^2
    let sigma = models::nk_sigma();
    let nk1 = coframe_d(&sigma)
        .add(&models::nk_psi().scale(-3.0))
        .max_abs_at(1.0);
    let nk2 = coframe_d(&models::nk_psi_hat())
        .add(&sigma.wedge(&sigma).scale(2.0))
        .max_abs_at(1.0);
    all &= push(&mut checks, "nk_dsigma_eq_3psi", nk1, 1e-14);
    all &= push(&mut checks, "nk_dpsihat_eq_minus2sigma2", nk2, 1e-14);

    // Bryant-Salamon: closed-form V^{-1} vs the frame Gram matrix
    let mut bs_cross = 0.0f64;
    for _ in 0..20 {
        let r = (4.0 * cfg.eps).cbrt() + 0.2 + rng.gen::<f64>() * 2.0;
        let pt = QuatPair::new(
            random_unit_quat(&mut rng),
            random_unit_quat(&mut rng),
            r,
            cfg.eps,
        )?;
        let b = models::bs_frame_b(&pt)?;
        let vinv = models::bs_vinv(&pt)?;
        let scale = vinv.amax().max(b.amax());
        bs_cross = bs_cross.max((b - vinv).amax() / scale);
    }
    all &= push(&mut checks, "bs_vinv_vs_frame_gram", bs_cross, 1e-8);

    // Bryant-Salamon differential identities
    let mut bs_diff = 0.0f64;
    for _ in 0..10 {
        let r = (4.0 * cfg.eps).cbrt() + 0.2 + rng.gen::<f64>() * 2.0;
        let pt = QuatPair::new(
            random_unit_quat(&mut rng),
            random_unit_quat(&mut rng),
            r,
            cfg.eps,
        )?;
        for _ in 0..50 {
            let dir = BsDirection {
                dr: rng.gen::<f64>() * 2.0 - 1.0,
                dp: [
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                ],
                dq: [
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                ],
            };
            bs_diff = bs_diff.max(models::bs_mmm_differential_check(&pt, &dir));
        }
    }
    all &= push(&mut checks, "bs_mmm_differential", bs_diff, 1e-6);

    // cone consistency: bs_mmm at eps = 0 vs nearly Kahler multi-moment maps
    let mut cone = 0.0f64;
    for _ in 0..50 {
        let r = 0.5 + rng.gen::<f64>() * 2.0;
        let p = random_unit_quat(&mut rng);
        let q = random_unit_quat(&mut rng);
        let pt = QuatPair::new(p, q, r, 0.0)?;
        let got = models::cone_mmm(&pt);
        let (nt, mt) = models::nk_mmm_tilde(p, q);
        let r3 = r * r * r;
        let want = [r3 * nt[0], r3 * nt[1], r3 * nt[2], 0.5 * r3 * r * mt];
        for c in 0..4 {
            cone = cone.max((got[c] - want[c]).abs());
        }
    }
    all &= push(&mut checks, "cone_vs_nearly_kahler", cone, 1e-12);

    // graphs
    for (name, graph) in [
        ("c3", models::flat_graph_c3()),
        ("t2rc2", models::flat_graph_t2rc2()),
        ("bs", models::bs_graph(cfg.eps)),
    ] {
        let ok = graph.check_invariants().is_ok();
        checks.push(json!({"name": format!("graph_invariants_{name}"),
                            "max_residual": if ok { 0.0 } else { 1.0 },
                            "tol": 0.5, "pass": ok}));
        all &= ok;
    }

    // a couple of exact mmm oracles
    let one = C64::new(1.0, 0.0);
    let m = models::mmm_c3(&FlatC3Point {
        x: 0.0,
        z: [one, one, one],
    });
    let oracle = (m[0] + 1.0).abs().max(m[1].abs()).max(m[2].abs()).max(m[3].abs());
    all &= push(&mut checks, "mmm_c3_oracle_111", oracle, 1e-15);

    let mut report = report_header(cfg, "models");
    let obj = report.as_object_mut().unwrap();
    obj.insert("eps".into(), json!(cfg.eps));
    obj.insert("checks".into(), json!(checks));
    obj.insert("all_pass".into(), json!(all));
    Ok((report, all))
}

/// Hierarchy families up to --degree, exported in the V field JSON schema.
pub fn cmd_solve(cfg: &RunConfig) -> Result<(Value, bool), CliError> {
    let triples = pde::hierarchy_solve(cfg.degree.max(1));
    let domain = match &cfg.box_spec {
        Some(s) => parse_box(s)?,
        None => Box4 {
            lo: [-0.2, -0.2, -0.2, 1.0],
            hi: [0.2, 0.2, 0.2, 2.0],
        },
    };
    let grid = domain.grid(3);
    let mut worst = 0.0f64;
    let mut families = Vec::new();
    for t in &triples {
        let v = t.to_vfield(domain);
        for x in &grid {
            worst = worst.max(ansatz::div_residual(&v, x).amax());
            worst = worst.max(ansatz::elliptic_residual(&v, x).amax());
        }
        families.push(ansatz::vfield_to_json(&v)?);
    }
    let pass = worst <= cfg.tol.max(1e-10);
    let mut report = report_header(cfg, "solve");
    let obj = report.as_object_mut().unwrap();
    obj.insert("degree".into(), json!(cfg.degree));
    obj.insert("family_count".into(), json!(families.len()));
    obj.insert("max_residual_on_grid".into(), json!(worst));
    obj.insert("families".into(), json!(families));
    if let Some(path) = &cfg.out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok((report, pass))
}

/// Run a parsed command; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Validate(cfg) => cmd_validate(cfg).map(|r| (r, cfg)),
        Command::Curvature(cfg) => cmd_curvature(cfg).map(|r| (r, cfg)),
        Command::Graph(cfg) => cmd_graph(cfg).map(|r| (r, cfg)),
        Command::Models(cfg) => cmd_models(cfg).map(|r| (r, cfg)),
        Command::Solve(cfg) => cmd_solve(cfg).map(|r| (r, cfg)),
    };
    match result {
        Ok(((report, pass), cfg)) => {
            let text = serde_json::to_string_pretty(&report).expect("serializable");
            println!("{text}");
            // validate writes its JSON report to --out as well
            if matches!(cli.command, Command::Validate(_) | Command::Models(_)) {
                if let Some(path) = &cfg.out {
                    if std::fs::write(path, &text).is_err() {
                        eprintln!("warning: could not write {}", path.display());
                    }
                }
            }
            if pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
