//! Command-line front end: subcommand dispatch and output emission.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_config, RunConfig};
use crate::flow::{integrate_flow, FlowOptions, Sign};
use crate::hj::HjSolver;
use crate::model::{HamiltonianModel, PhasePoint};
use crate::scatmap::ScatteringPhase;
use crate::smatrix::{build_smatrix, build_surface};
use crate::verify::{run_conformance, write_bundle};
use crate::wavemaps::WaveMaps;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lrscat", version, about = "Classical long-range scattering toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate Hamilton trajectories.
    Flow,
    /// Evaluate the Hamilton–Jacobi phase φ(t,ξ).
    Hj,
    /// Evaluate asymptotic wave maps.
    Wavemap,
    /// Evaluate the scattering phase ψ(y,ξ) at its stationary point.
    Scatmap,
    /// Assemble the discretized S-matrix.
    Smatrix,
    /// Run the conformance checklist and write the report bundle.
    Verify,
}

type Fallible<T> = anyhow::Result<T>;

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}_{i}"))
}

/// CSV writer whose first line records the config hash.
fn csv_writer(path: &Path, hash: &str) -> Fallible<csv::Writer<BufWriter<fs::File>>> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# config_sha256={hash}")?;
    Ok(csv::Writer::from_writer(f))
}

fn run_flow(cfg: &RunConfig, model: &HamiltonianModel, out: &Path, hash: &str) -> Fallible<i32> {
    let d = model.dim();
    let opts = FlowOptions::default();
    for (i, p) in cfg.flow.data.iter().enumerate() {
        let traj = integrate_flow(model, &PhasePoint::new(p.x.clone(), p.xi.clone()), cfg.flow.t, &opts)?;
        let mut w = csv_writer(&out.join(format!("flow_{i}.csv")), hash)?;
        let mut h = vec!["t".to_string()];
        h.extend(header("x", d));
        h.extend(header("xi", d));
        h.push("energy_drift".into());
        w.write_record(&h)?;
        for ((t, s), e) in traj.times.iter().zip(&traj.states).zip(&traj.energy_drift) {
            let mut row = vec![f17(*t)];
            row.extend(s.x.iter().chain(&s.xi).map(|v| f17(*v)));
            row.push(f17(*e));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(EXIT_OK)
}

fn run_hj(cfg: &RunConfig, model: &HamiltonianModel, out: &Path, hash: &str) -> Fallible<i32> {
    let d = model.dim();
    let hj = HjSolver::new(model);
    let mut w = csv_writer(&out.join("hj.csv"), hash)?;
    let mut h = vec!["t".to_string()];
    h.extend(header("xi", d));
    h.extend(["phi".to_string(), "phi_minus_t_p0".to_string()]);
    h.extend(header("grad_phi", d));
    w.write_record(&h)?;
    for p in &cfg.hj.points {
        let mut row = vec![f17(p.t)];
        row.extend(p.xi.iter().map(|v| f17(*v)));
        row.push(f17(hj.phi(p.t, &p.xi)?));
        row.push(f17(hj.phi_remainder(p.t, &p.xi)?));
        row.extend(hj.grad_phi(p.t, &p.xi)?.iter().map(|v| f17(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn run_wavemap(cfg: &RunConfig, model: &HamiltonianModel, out: &Path, hash: &str) -> Fallible<i32> {
    let d = model.dim();
    let wm = WaveMaps::new(model);
    let sign: Sign = cfg.wavemap.sign.into();
    let mut w = csv_writer(&out.join("wavemap.csv"), hash)?;
    let mut h = vec!["sign".to_string()];
    h.extend(header("x0", d));
    h.extend(header("xi0", d));
    h.extend(header("x_lim", d));
    h.extend(header("xi_lim", d));
    h.extend(["action".to_string(), "tail_bound".to_string()]);
    w.write_record(&h)?;
    for p in &cfg.wavemap.data {
        let r = wm.wave_map(&p.x, &p.xi, sign)?;
        let mut row = vec![f17(sign.value())];
        row.extend(p.x.iter().chain(&p.xi).chain(&r.x_pm).chain(&r.xi_pm).map(|v| f17(*v)));
        row.extend([f17(r.action), f17(r.tail_bound)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn run_scatmap(cfg: &RunConfig, model: &HamiltonianModel, out: &Path, hash: &str) -> Fallible<i32> {
    let d = model.dim();
    let sp = ScatteringPhase::new(model);
    let mut w = csv_writer(&out.join("scatmap.csv"), hash)?;
    let mut h: Vec<String> = header("y", d).chain(header("xi", d)).collect();
    h.extend(["psi".to_string(), "theta".to_string()]);
    h.extend(header("x", d));
    h.extend(header("eta", d));
    h.push("residual".into());
    w.write_record(&h)?;
    for p in &cfg.scatmap.points {
        let s = sp.stationary_point(&p.y, &p.xi)?;
        let theta = sp.theta(&p.y, &p.xi)?;
        let mut row: Vec<String> = p.y.iter().chain(&p.xi).map(|v| f17(*v)).collect();
        row.extend([f17(s.psi()), f17(theta)]);
        row.extend(s.x.iter().chain(&s.eta).map(|v| f17(*v)));
        row.push(f17(s.residual()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn run_smatrix(cfg: &RunConfig, model: &HamiltonianModel, out: &Path, hash: &str) -> Fallible<i32> {
    let c = &cfg.smatrix;
    let phase = ScatteringPhase::new(model);
    let grid = build_surface(model, c.lambda, c.n)?;
    let s = build_smatrix(&phase, &grid, c.y_max, c.ny)?;
    let mut f = BufWriter::new(fs::File::create(out.join("smatrix.csv"))?);
    writeln!(f, "# config_sha256={hash}")?;
    s.write_csv(&mut f)?;
    f.flush()?;
    let mut meta = s.metadata();
    meta["config_hash"] = serde_json::Value::from(hash);
    let mut f = fs::File::create(out.join("smatrix.json"))?;
    serde_json::to_writer_pretty(&mut f, &meta)?;
    writeln!(f)?;
    if let Some(t) = &s.truncation {
        eprintln!("warning: window truncation, boundary ratio {:.3e} (max {:.3e})", t.ratio, t.max);
    }
    Ok(EXIT_OK)
}

fn run_verify(cfg: &RunConfig, model: &HamiltonianModel, out: &Path, hash: &str) -> Fallible<i32> {
    let mut reports = run_conformance(model, &cfg.verify);
    write_bundle(out, &mut reports, hash)?;
    let mut failed = 0;
    for r in &reports {
        eprintln!("{:<28} {:?}", r.id, r.status);
        failed += usize::from(!r.pass);
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn dispatch(cli: &Cli) -> Fallible<i32> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow::anyhow!("--config <path> is required"))?;
    let cfg = parse_config(path)?;
    let model = cfg.build_model()?;
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let hash = cfg.hash();
    match cli.command {
        Command::Flow => run_flow(&cfg, &model, &out, &hash),
        Command::Hj => run_hj(&cfg, &model, &out, &hash),
        Command::Wavemap => run_wavemap(&cfg, &model, &out, &hash),
        Command::Scatmap => run_scatmap(&cfg, &model, &out, &hash),
        Command::Smatrix => run_smatrix(&cfg, &model, &out, &hash),
        Command::Verify => run_verify(&cfg, &model, &out, &hash),
    }
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
