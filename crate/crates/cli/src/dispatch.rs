//! Command routing and artifact emission.
//!
//! Every command resolves to a [`RunConfig`], produces a [`RunReport`] and
//! writes its numeric results to CSV/JSON artifacts. Artifacts are rendered
//! with shortest-round-trip float formatting, so a configuration and seed
//! determine every emitted byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use quasisure::deflator::{announce_lifetime, inverse_bessel_demo, simulate_absorbed_brownian};
use quasisure::models::sde::UncertaintySpec;
use quasisure::models::tree::TreeFamily;
use quasisure::na1::na1_check;
use quasisure::superhedge::{
    bsb_solve, dual_enumerate, extract_strategy_envelope,
    sublinear_price_tree, verify_superhedge_mc, verify_superhedge_tree, BsbGrid, BsbSurface,
    Claim, HedgeStrategy, Stepper, VolSelection,
};

use crate::config::{RunConfig, RunReport, Selection, StepperChoice};

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub exit_code: i32,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

fn input_error(message: impl Into<String>) -> CliError {
    CliError {
        message: message.into(),
        exit_code: 1,
    }
}

fn map_core(err: quasisure::Error) -> CliError {
    let exit_code = match &err {
        quasisure::Error::UnstableGrid(_) | quasisure::Error::TooLarge(_) => 2,
        _ => 1,
    };
    CliError {
        message: err.to_string(),
        exit_code,
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| input_error(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn load_tree(cfg: &RunConfig) -> Result<TreeFamily, CliError> {
    let path = cfg
        .model
        .as_ref()
        .ok_or_else(|| input_error("--model is required"))?;
    TreeFamily::from_json(&read_file(path)?).map_err(map_core)
}

fn load_claim(cfg: &RunConfig) -> Result<Claim, CliError> {
    if let Some(path) = &cfg.claim {
        return Claim::from_json(&read_file(path)?).map_err(map_core);
    }
    if let Some(payoff) = &cfg.payoff {
        return parse_payoff(payoff);
    }
    Err(input_error("--claim or --payoff is required"))
}

fn parse_payoff(text: &str) -> Result<Claim, CliError> {
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| input_error(format!("bad payoff {text:?}; expected e.g. call:100")))?;
    let value: f64 = arg
        .parse()
        .map_err(|_| input_error(format!("bad payoff parameter {arg:?}")))?;
    match kind {
        "call" => Ok(Claim::call(value)),
        "put" => Ok(Claim::put(value)),
        "const" => Ok(Claim::constant(value)),
        other => Err(input_error(format!("unknown payoff kind {other:?}"))),
    }
}

fn load_spec(cfg: &RunConfig) -> Result<UncertaintySpec, CliError> {
    let path = cfg
        .spec
        .as_ref()
        .ok_or_else(|| input_error("--spec is required"))?;
    let spec: UncertaintySpec =
        serde_json::from_str(&read_file(path)?).map_err(|e| input_error(e.to_string()))?;
    spec.validate().map_err(map_core)?;
    Ok(spec)
}

fn number(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

/// Routes one resolved configuration. Returns the report; the caller turns
/// its exit code into the process status.
pub fn dispatch(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut results = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut exit_code = 0;

    match cfg.command.as_str() {
        "na1" => {
            let fam = load_tree(cfg)?;
            let report = na1_check(&fam).map_err(map_core)?;
            exit_code = if report.holds { 0 } else { 3 };
            results.insert("holds".into(), serde_json::Value::Bool(report.holds));
            let artifact = na1_report_json(&fam, &report)?;
            if let Some(out) = &cfg.out {
                write_file(out, &artifact)?;
            } else {
                println!("{artifact}");
            }
        }
        "price-tree" => {
            let fam = load_tree(cfg)?;
            let claim = load_claim(cfg)?;
            let zp = sublinear_price_tree(&fam, &claim).map_err(map_core)?;
            if !zp.na1_holds {
                warnings.push("family fails the no-arbitrage check; prices are still the killed-class suprema".into());
            }
            for &node in &zp.degenerate_nodes {
                warnings.push(format!("node {node}: no martingale mixture, value forced to zero"));
            }
            let hedge = extract_strategy_envelope(&fam, &zp).map_err(map_core)?;
            results.insert("root_price".into(), number(zp.root_value()));
            results.insert("na1_holds".into(), serde_json::Value::Bool(zp.na1_holds));
            let csv = price_csv(&fam, &zp.values, &hedge);
            if let Some(out) = &cfg.out {
                write_file(out, &csv)?;
            } else {
                print!("{csv}");
            }
        }
        "price-bsb" => {
            let spec = load_spec(cfg)?;
            let claim = load_claim(cfg)?;
            let (n_t, n_s, s_max) = cfg
                .grid
                .unwrap_or((400, 400, 4.0 * spec.s0[0]));
            let stepper = match cfg.stepper {
                StepperChoice::Implicit => Stepper::ImplicitFrozen,
                StepperChoice::Explicit => Stepper::Explicit,
            };
            let surface = bsb_solve(
                &spec,
                &claim,
                BsbGrid { n_t, n_s, s_max },
                stepper,
            )
            .map_err(map_core)?;
            let price = surface.price_at(spec.s0[0]);
            results.insert("price".into(), number(price));
            results.insert("s0".into(), number(spec.s0[0]));
            let csv = surface.to_csv();
            if let Some(out) = &cfg.out {
                write_file(out, &csv)?;
            } else {
                print!("{csv}");
            }
        }
        "duality" => {
            let fam = load_tree(cfg)?;
            let claim = load_claim(cfg)?;
            let zp = sublinear_price_tree(&fam, &claim).map_err(map_core)?;
            let primal = zp.root_value();
            let dual = dual_enumerate(&fam, &claim, cfg.grid_step).map_err(map_core)?;
            let gap = primal - dual;
            println!("primal {primal}");
            println!("dual {dual}");
            println!("gap {gap}");
            results.insert("primal".into(), number(primal));
            results.insert("dual".into(), number(dual));
            results.insert("gap".into(), number(gap));
            results.insert("grid_step".into(), number(cfg.grid_step));
            if let Some(out) = &cfg.out {
                let artifact = serde_json::to_string_pretty(&results)
                    .map_err(|e| input_error(e.to_string()))?;
                write_file(out, &artifact)?;
            }
        }
        "verify-hedge" => {
            if cfg.surface.is_some() {
                let spec = load_spec(cfg)?;
                let claim = load_claim(cfg)?;
                let surface_path = cfg.surface.as_ref().unwrap();
                let (lo, hi) = spec.vol_bounds().map_err(map_core)?;
                let surface = parse_surface_csv(&read_file(surface_path)?, lo, hi)?;
                let selection = match cfg.selection {
                    Selection::Uniform => VolSelection::Uniform,
                    Selection::Adversarial => VolSelection::Adversarial,
                };
                let report = verify_superhedge_mc(
                    &surface,
                    &claim,
                    spec.s0[0],
                    selection,
                    cfg.samples,
                    cfg.seed,
                    cfg.tolerance,
                )
                .map_err(map_core)?;
                results.insert("paths".into(), serde_json::Value::from(report.paths));
                results.insert("violations".into(), serde_json::Value::from(report.violations));
                results.insert("violation_rate".into(), number(report.violation_rate));
                results.insert("min_slack".into(), number(report.min_slack));
                results.insert("epsilon".into(), number(report.epsilon));
                println!(
                    "paths {} violations {} min_slack {}",
                    report.paths, report.violations, report.min_slack
                );
            } else {
                let fam = load_tree(cfg)?;
                let claim = load_claim(cfg)?;
                let price_path = cfg
                    .price
                    .as_ref()
                    .ok_or_else(|| input_error("--price is required in tree mode"))?;
                let (x, hedge) = parse_price_csv(&read_file(price_path)?, &fam)?;
                let report =
                    verify_superhedge_tree(&fam, x, &hedge, &claim, None, cfg.tolerance)
                        .map_err(map_core)?;
                results.insert(
                    "terminal_nodes".into(),
                    serde_json::Value::from(report.terminal_nodes),
                );
                results.insert("violations".into(), serde_json::Value::from(report.violations));
                results.insert("min_slack".into(), number(report.min_slack));
                println!(
                    "terminals {} violations {} min_slack {}",
                    report.terminal_nodes, report.violations, report.min_slack
                );
            }
            if let Some(out) = &cfg.out {
                let artifact = serde_json::to_string_pretty(&results)
                    .map_err(|e| input_error(e.to_string()))?;
                write_file(out, &artifact)?;
            }
        }
        "follmer-demo" => {
            let report =
                inverse_bessel_demo(cfg.horizon, cfg.samples, cfg.seed).map_err(map_core)?;
            results.insert("estimate".into(), number(report.estimate));
            results.insert("oracle".into(), number(report.oracle));
            results.insert("std_error".into(), number(report.std_error));
            results.insert("z_score".into(), number(report.z_score));
            results.insert("cemetery_estimate".into(), number(report.cemetery_estimate));
            results.insert("cemetery_oracle".into(), number(report.cemetery_oracle));
            // Announcement of the lifetime on absorbed diffusion paths.
            let walk_paths = cfg.samples.clamp(1, 2000);
            let paths = simulate_absorbed_brownian(1.0, 2.0, 4096, walk_paths, cfg.seed)
                .map_err(map_core)?;
            let levels = [0.5, 0.25, 0.125];
            let announce = announce_lifetime(&paths, &levels).map_err(map_core)?;
            results.insert("walk_paths".into(), serde_json::Value::from(walk_paths));
            results.insert("walk_died".into(), serde_json::Value::from(announce.died));
            results.insert(
                "announce_violations".into(),
                serde_json::Value::from(announce.violations),
            );
            println!(
                "estimate {} oracle {} z {}",
                report.estimate, report.oracle, report.z_score
            );
            println!(
                "absorbed walks: {}/{} died, {} announcement violations",
                announce.died, walk_paths, announce.violations
            );
            if let Some(out) = &cfg.out {
                write_file(&out.join("report.csv"), &report.to_csv())?;
                let mut csv = String::from("level,hits,mean_hit_index\n");
                for (k, &level) in levels.iter().enumerate() {
                    let hits: Vec<usize> = announce
                        .times
                        .iter()
                        .filter_map(|per_path| per_path[k])
                        .collect();
                    let mean = if hits.is_empty() {
                        f64::NAN
                    } else {
                        hits.iter().sum::<usize>() as f64 / hits.len() as f64
                    };
                    let _ = writeln!(csv, "{},{},{}", level, hits.len(), mean);
                }
                write_file(&out.join("announcements.csv"), &csv)?;
            }
        }
        other => {
            return Err(input_error(format!("unknown command {other:?}")));
        }
    }

    let duration = started.elapsed();
    eprintln!(
        "{}: done in {:.3} s{}",
        cfg.command,
        duration.as_secs_f64(),
        if warnings.is_empty() {
            String::new()
        } else {
            format!(" ({} warnings)", warnings.len())
        }
    );
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(RunReport {
        command: cfg.command.clone(),
        config: cfg.clone(),
        results,
        warnings,
        exit_code,
    })
}

/// `node_id,time,s_0..s_{d-1},z,h_0..h_{d-1}`; hedges are blank at terminal
/// nodes. Row 0 carries the root price.
fn price_csv(fam: &TreeFamily, values: &[f64], hedge: &HedgeStrategy) -> String {
    let d = fam.dim();
    let mut out = String::from("node_id,time");
    for j in 0..d {
        let _ = write!(out, ",s_{j}");
    }
    out.push_str(",z");
    for j in 0..d {
        let _ = write!(out, ",h_{j}");
    }
    out.push('\n');
    for node in fam.nodes() {
        let _ = write!(out, "{},{}", node.id, fam.times()[node.level]);
        for x in &node.s {
            let _ = write!(out, ",{x}");
        }
        let _ = write!(out, ",{}", values[node.id]);
        match hedge.hedge(node.id) {
            Some(h) => {
                for x in h {
                    let _ = write!(out, ",{x}");
                }
            }
            None => {
                for _ in 0..d {
                    out.push(',');
                }
            }
        }
        out.push('\n');
    }
    out
}

fn parse_price_csv(text: &str, fam: &TreeFamily) -> Result<(f64, HedgeStrategy), CliError> {
    let d = fam.dim();
    let mut vectors: Vec<Option<Vec<f64>>> = vec![None; fam.nodes().len()];
    let mut root_price = None;
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 + 2 * d {
            return Err(input_error(format!(
                "price csv line {}: expected {} fields",
                lineno + 1,
                3 + 2 * d
            )));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| input_error(format!("bad node id {:?}", fields[0])))?;
        if id >= fam.nodes().len() {
            return Err(input_error(format!("node {id} not in the family")));
        }
        let z: f64 = fields[2 + d]
            .parse()
            .map_err(|_| input_error(format!("bad value {:?}", fields[2 + d])))?;
        if id == fam.root() {
            root_price = Some(z);
        }
        let h_fields = &fields[3 + d..];
        if h_fields.iter().all(|f| !f.trim().is_empty()) {
            let mut h = Vec::with_capacity(d);
            for f in h_fields {
                h.push(
                    f.parse()
                        .map_err(|_| input_error(format!("bad hedge entry {f:?}")))?,
                );
            }
            vectors[id] = Some(h);
        }
    }
    let x = root_price.ok_or_else(|| input_error("price csv lacks the root row"))?;
    Ok((x, HedgeStrategy { vectors }))
}

fn parse_surface_csv(text: &str, sigma_lo: f64, sigma_hi: f64) -> Result<BsbSurface, CliError> {
    let mut times: Vec<f64> = Vec::new();
    let mut s: Vec<f64> = Vec::new();
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(input_error(format!(
                "surface csv line {}: expected t,s,v,delta",
                lineno + 1
            )));
        }
        let parse = |f: &str| -> Result<f64, CliError> {
            f.parse()
                .map_err(|_| input_error(format!("bad number {f:?}")))
        };
        let row = (
            parse(fields[0])?,
            parse(fields[1])?,
            parse(fields[2])?,
            parse(fields[3])?,
        );
        if times.last() != Some(&row.0) {
            times.push(row.0);
        }
        if times.len() == 1 {
            s.push(row.1);
        }
        rows.push(row);
    }
    let n_s = s.len();
    if n_s < 2 || times.len() < 2 || rows.len() != n_s * times.len() {
        return Err(input_error("surface csv is not a full grid"));
    }
    let mut v = vec![vec![0.0; n_s]; times.len()];
    let mut delta = vec![vec![0.0; n_s]; times.len()];
    for (k, chunk) in rows.chunks(n_s).enumerate() {
        for (i, row) in chunk.iter().enumerate() {
            v[k][i] = row.2;
            delta[k][i] = row.3;
        }
    }
    Ok(BsbSurface {
        times,
        s,
        v,
        delta,
        sigma_lo,
        sigma_hi,
    })
}

fn na1_report_json(
    fam: &TreeFamily,
    report: &quasisure::na1::Na1Report,
) -> Result<String, CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert("holds".into(), serde_json::Value::Bool(report.holds));
    doc.insert(
        "records".into(),
        serde_json::to_value(&report.records).map_err(|e| input_error(e.to_string()))?,
    );
    let measures: Vec<serde_json::Value> = report
        .measures
        .iter()
        .enumerate()
        .map(|(model, q)| {
            let mut nodes = serde_json::Map::new();
            for node in fam.nodes() {
                if let Some(w) = q.node_weights(node.id) {
                    nodes.insert(
                        node.id.to_string(),
                        serde_json::json!({
                            "children": w.children,
                            "cemetery": w.cemetery,
                        }),
                    );
                }
            }
            serde_json::json!({ "model": model, "nodes": nodes })
        })
        .collect();
    doc.insert("measures".into(), serde_json::Value::Array(measures));
    doc.insert(
        "certificate".into(),
        serde_json::to_value(&report.certificate).map_err(|e| input_error(e.to_string()))?,
    );
    serde_json::to_string_pretty(&doc).map_err(|e| input_error(e.to_string()))
}

/// Emits the structured report next to the command's primary artifact when
/// an output location is known.
pub fn write_report(report: &RunReport) -> Result<(), CliError> {
    let Some(out) = &report.config.out else {
        return Ok(());
    };
    let path = if out.extension().is_none() {
        out.join("run_report.json")
    } else {
        out.with_extension("run.json")
    };
    let text =
        serde_json::to_string_pretty(report).map_err(|e| input_error(e.to_string()))?;
    write_file(&path, &text)
}
