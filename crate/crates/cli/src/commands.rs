use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ambig_pricer::experiments::{run_bound_audit, run_convergence, run_equality_suite, ConvergenceReport};
use ambig_pricer::io;
use ambig_pricer::oracle::simulate_hedge_pnl;
use ambig_pricer::prelude::{query_price, solve_american, solve_european, ConstraintSpec, ExerciseStyle, Side};
use serde_json::json;

use crate::config::{Resolved, RunConfig};
use crate::error::CliError;
use crate::{Common, Part};

/// Files produced by a command, held in memory until everything succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, write: impl FnOnce(&mut Vec<u8>) -> ambig_pricer::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| CliError::Output(e.to_string()))?;
        self.files.push((path, buf));
        Ok(())
    }

    fn commit(self, command: &str, cfg: &RunConfig, hash: &str, meta_path: PathBuf, started: Instant) -> Result<(), CliError> {
        let names: Vec<String> = self.files.iter().map(|(p, _)| p.display().to_string()).collect();
        for (path, bytes) in &self.files {
            write_file(path, bytes)?;
        }
        let meta = json!({
            "command": command,
            "version": ambig_pricer::VERSION,
            "config_sha256": hash,
            "seed": cfg.oracle.seed,
            "threads": rayon::current_num_threads(),
            "wall_time_s": started.elapsed().as_secs_f64(),
            "files": names,
        });
        let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Output(e.to_string()))?;
        write_file(&meta_path, text.as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// `out` without a trailing `.csv`.
fn stem(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "csv") {
        out.with_extension("")
    } else {
        out.to_path_buf()
    }
}

fn suffixed(out: &Path, suffix: &str) -> PathBuf {
    let mut s = stem(out).into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn single(out: &Path) -> PathBuf {
    suffixed(out, ".csv")
}

fn load(common: &Common) -> Result<(RunConfig, Resolved, String, PathBuf), CliError> {
    let (cfg, resolved, hash) = RunConfig::load(&common.config, &common.overrides())?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.path.clone());
    Ok((cfg, resolved, hash, out))
}

pub fn price(common: &Common) -> Result<(), CliError> {
    let started = Instant::now();
    let (cfg, r, hash, out) = load(common)?;
    let sides = cfg.solver.side.sides();
    let mut outputs = Outputs::default();
    match r.claim.style {
        ExerciseStyle::European => {
            let surfaces = sides
                .iter()
                .map(|&side| solve_european(&r.model, &r.claim, &r.amb, &r.cons, &r.grid, side))
                .collect::<ambig_pricer::Result<Vec<_>>>()?;
            for surface in surfaces {
                let path = if sides.len() == 1 { single(&out) } else { suffixed(&out, &format!("_{}.csv", surface.side.as_str())) };
                outputs.add(path, |w| io::write_surface(w, &surface))?;
            }
        }
        ExerciseStyle::American => {
            let sol = solve_american(&r.model, &r.claim, &r.amb, &r.cons, &r.grid, &r.schedule)?;
            for side in &sides {
                let surface = if *side == Side::Bid { &sol.bid } else { &sol.ask };
                outputs.add(suffixed(&out, &format!("_{}.csv", side.as_str())), |w| io::write_surface(w, surface))?;
            }
            outputs.add(suffixed(&out, "_boundary.csv"), |w| io::write_boundary(w, &sol.region.boundary))?;
        }
    }
    outputs.commit("price", &cfg, &hash, suffixed(&out, ".meta.json"), started)
}

pub fn hedge(common: &Common) -> Result<(), CliError> {
    let started = Instant::now();
    let (cfg, r, hash, out) = load(common)?;
    if !r.amb.is_trivial() || r.cons != ConstraintSpec::Unconstrained || r.claim.style != ExerciseStyle::European {
        return Err(CliError::Config(
            "hedge simulation needs a European claim, zero ambiguity and no constraint".into(),
        ));
    }
    let o = &cfg.oracle;
    let surface = solve_european(&r.model, &r.claim, &r.amb, &r.cons, &r.grid, Side::Bid)?;
    let price = query_price(&surface, 0.0, o.spot)?;
    let est = simulate_hedge_pnl(&r.model, &surface, &r.claim, &r.amb, &r.cons, o.spot, o.paths, o.steps, o.seed)?;
    let mut text = String::from("spot,price,mean,stderr,std_dev,paths,steps,seed\n");
    let _ = writeln!(
        text,
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
        o.spot,
        price,
        est.mean,
        est.stderr,
        est.std_dev(),
        est.paths,
        o.steps,
        est.seed
    );
    let mut outputs = Outputs::default();
    outputs.add(single(&out), |w| {
        w.extend_from_slice(text.as_bytes());
        Ok(())
    })?;
    outputs.commit("hedge", &cfg, &hash, suffixed(&out, ".meta.json"), started)
}

fn sweep(cfg: &RunConfig, r: &Resolved) -> Result<ConvergenceReport, CliError> {
    let exp = cfg.experiment(r)?;
    if cfg.verify.kappas.len() < 4 {
        return Err(CliError::Config("verify.kappas needs at least 4 levels".into()));
    }
    Ok(run_convergence(&exp, &r.claim, &cfg.verify.kappas)?)
}

fn sweep_passes(cfg: &RunConfig, report: &ConvergenceReport) -> bool {
    let slope_ok = (cfg.verify.slope_min..=cfg.verify.slope_max).contains(&report.fitted_slope);
    slope_ok && report.errors_monotone(0.0)
}

pub fn verify(common: &Common, only: Option<Part>) -> Result<(), CliError> {
    let started = Instant::now();
    let (cfg, r, hash, out) = load(common)?;
    let exp = cfg.experiment(&r)?;
    let wants = |p: Part| only.is_none_or(|o| o == p);
    let mut outputs = Outputs::default();
    let mut failures = 0;
    if wants(Part::Equality) {
        let table = run_equality_suite(&exp)?;
        failures += table.rows.iter().filter(|row| !row.pass).count();
        outputs.add(out.join("equality.csv"), |w| io::write_table(w, &table))?;
    }
    if wants(Part::Bounds) {
        let audit = run_bound_audit(&exp)?;
        failures += audit.table.rows.iter().filter(|row| !row.pass).count();
        outputs.add(out.join("bounds.csv"), |w| io::write_table(w, &audit.table))?;
        let mut text = String::from("bound,t,S,excess\n");
        for v in &audit.worst {
            let _ = writeln!(text, "{},{:.16e},{:.16e},{:.16e}", v.bound, v.t, v.s, v.excess);
        }
        if only.is_none() {
            outputs.add(out.join("bound_violations.csv"), |w| {
                w.extend_from_slice(text.as_bytes());
                Ok(())
            })?;
        }
    }
    if wants(Part::Convergence) {
        let report = sweep(&cfg, &r)?;
        if !sweep_passes(&cfg, &report) {
            failures += 1;
        }
        outputs.add(out.join("convergence.csv"), |w| io::write_convergence(w, &report))?;
    }
    outputs.commit("verify", &cfg, &hash, out.join("verify.meta.json"), started)?;
    if failures > 0 {
        return Err(CliError::ChecksFailed(failures));
    }
    Ok(())
}

pub fn converge(common: &Common) -> Result<(), CliError> {
    let started = Instant::now();
    let (cfg, r, hash, out) = load(common)?;
    let report = sweep(&cfg, &r)?;
    let mut outputs = Outputs::default();
    outputs.add(single(&out), |w| io::write_convergence(w, &report))?;
    outputs.commit("converge", &cfg, &hash, suffixed(&out, ".meta.json"), started)
}
