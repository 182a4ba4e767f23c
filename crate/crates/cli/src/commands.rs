use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use splittree::branching::count_heavy_seeded;
use splittree::experiment::replicate;
use splittree::families::{describe_law, Family};
use splittree::renewal::{expected_heavy_count, solve_split_renewal, Grid};
use splittree::statistics::{aggregate, subtree_sums, summarize, MeanSe, ReplicationRecord};
use splittree::tree::build;
use splittree::FamilySpec;

use crate::config::ExperimentConfig;
use crate::output::{read_records, summary_json, write_grid, write_json, CsvSink, SubtreeSummary};
use crate::CliError;

fn runtime(e: splittree::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn family_spec(family: &Family) -> Result<FamilySpec, CliError> {
    family.spec().map_err(|e| CliError::Config(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn families() -> Result<(), CliError> {
    let examples = [
        "bst",
        "mary:3",
        "mary:4",
        "trie:0.5/0.5",
        "trie:0.3/0.7",
        "custom:b=4/s=3/s0=1/s1=0/dirichlet=1",
        "custom:b=2/s=4/s0=0/s1=2/dirichlet=1",
    ];
    let mut out = io::stdout().lock();
    writeln!(out, "presets: bst, mary (m), trie (p1/p2/...), custom (b=/s=/s0=/s1=/law)")?;
    writeln!(out, "{:<40} {:>12} {:>28} {:>10} {:>10} {:>10}  lattice_suspect", "label", "b,s,s0,s1", "law", "mu", "sigma2", "c")?;
    for label in examples {
        let family: Family = label.parse().map_err(|e: splittree::Error| CliError::Config(e.to_string()))?;
        let spec = family_spec(&family)?;
        let p = spec.params;
        writeln!(
            out,
            "{:<40} {:>12} {:>28} {:>10.6} {:>10.6} {:>10.6}  {}",
            label,
            format!("{},{},{},{}", p.b, p.s, p.s0, p.s1),
            describe_law(&spec.source),
            spec.constants.mu,
            spec.constants.sigma2,
            spec.constants.c,
            spec.lattice_suspect
        )?;
    }
    Ok(())
}

struct Replication {
    record: ReplicationRecord,
    subtree: Option<(u32, f64, f64, f64, f64)>,
}

pub fn simulate(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<(), CliError> {
    let spec = family_spec(&cfg.family)?;
    let label = cfg.family.to_string();
    let sink: Box<dyn Write> = match &cfg.out_csv {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut csv = CsvSink::new(sink)?;
    let json_out = cfg.out_json.as_deref().map(create).transpose()?;

    let mut summaries = Vec::new();
    for &n in &cfg.n_grid {
        let ln_ln = (n as f64).ln().ln();
        let with_subtrees = cfg.beta * ln_ln / f64::from(spec.params.b).ln() >= 1.0;
        let reps = replicate(cfg.base_seed, n, cfg.replications, workers, |rep, seed| {
            let tree = build(spec.params, &spec.source, n, seed, cfg.mode)?;
            let stats = summarize(&tree, &spec.constants, cfg.epsilon)?;
            let subtree = if with_subtrees {
                let s = subtree_sums(&tree, cfg.beta, &spec.constants, stats.vertices as f64 / n as f64)?;
                Some((s.depth, s.corollary_sum, s.corollary_prediction, s.upsilon_sum, s.upsilon_leading))
            } else {
                None
            };
            Ok(Replication { record: ReplicationRecord::from_stats(&stats, rep, seed, label.as_str()), subtree })
        })
        .map_err(runtime)?;
        for r in &reps {
            csv.row(&r.record)?;
        }
        let records: Vec<ReplicationRecord> = reps.iter().map(|r| r.record.clone()).collect();
        let summary = aggregate(&records, &spec.constants).map_err(runtime)?;
        let subtree = with_subtrees.then(|| {
            let col = |f: fn(&(u32, f64, f64, f64, f64)) -> f64| {
                MeanSe::of(&reps.iter().filter_map(|r| r.subtree.as_ref().map(f)).collect::<Vec<_>>())
            };
            let first = reps[0].subtree.expect("subtree sums computed");
            SubtreeSummary {
                beta: cfg.beta,
                depth: first.0,
                corollary_sum: col(|s| s.1),
                corollary_prediction: col(|s| s.2).mean,
                upsilon_sum: col(|s| s.3),
                upsilon_leading: col(|s| s.4),
            }
        });
        eprintln!(
            "n = {n}: N/n = {:.6}, q_hat = {:.6} (se {:.6}), bad fraction = {:.6}",
            summary.vertices_over_n.mean, summary.q_hat.mean, summary.q_hat.se, summary.bad_fraction.mean
        );
        summaries.push(summary_json(&summary, subtree.as_ref()));
    }
    csv.finish()?;
    if let Some(out) = json_out {
        write_json(out, &summaries)?;
    }
    Ok(())
}

fn renewal_gate(spec: &FamilySpec, family: &Family) -> Result<(), CliError> {
    if spec.lattice_suspect {
        return Err(CliError::Config(format!(
            "family {family} is lattice_suspect (-ln V lives on an arithmetic grid); renewal limits do not apply"
        )));
    }
    Ok(())
}

pub struct Dumps {
    pub u: Option<PathBuf>,
    pub u_hat: Option<PathBuf>,
    pub w: Option<PathBuf>,
}

pub fn renewal(cfg: &ExperimentConfig, dumps: Dumps) -> Result<(), CliError> {
    let spec = family_spec(&cfg.family)?;
    renewal_gate(&spec, &cfg.family)?;
    let grid = Grid::new(cfg.renewal_h, cfg.renewal_t_max).map_err(|e| CliError::Config(e.to_string()))?;
    let sol = solve_split_renewal(&spec.source, grid).map_err(runtime)?;
    let k = &spec.constants;
    let t_max = grid.t_max();
    let mut out = io::stdout().lock();
    writeln!(out, "family,{}", cfg.family)?;
    writeln!(out, "h,{}", cfg.renewal_h)?;
    writeln!(out, "t_max,{t_max}")?;
    writeln!(out, "mu,{}", k.mu)?;
    writeln!(out, "u_hat(t_max),{}", sol.u_hat.last().unwrap())?;
    writeln!(out, "1/mu,{}", 1.0 / k.mu)?;
    writeln!(out, "w(t_max),{}", sol.w.last().unwrap())?;
    writeln!(out, "w_limit,{}", (k.sigma2 - k.mu * k.mu) / (2.0 * k.mu * k.mu) - 1.0 / k.mu)?;
    writeln!(out, "tail_slope,{}", sol.diagnostics.tail_slope)?;
    writeln!(out, "omega_mass,{}", sol.diagnostics.omega_mass)?;
    for &n in &cfg.n_grid {
        if let Ok(count) = expected_heavy_count(&sol, n as f64, cfg.heavy_k) {
            writeln!(out, "expected_heavy_count(n={n};K={}),{count}", cfg.heavy_k)?;
        }
    }
    for (path, values) in [(&dumps.u, &sol.u), (&dumps.u_hat, &sol.u_hat), (&dumps.w, &sol.w)] {
        if let Some(path) = path {
            let mut file = create(path)?;
            write_grid(&mut file, grid.times(), values)?;
            file.flush()?;
        }
    }
    Ok(())
}

pub fn heavy(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<(), CliError> {
    let spec = family_spec(&cfg.family)?;
    let solution = if spec.lattice_suspect {
        None
    } else {
        let grid = Grid::new(cfg.renewal_h, cfg.renewal_t_max).map_err(|e| CliError::Config(e.to_string()))?;
        Some(solve_split_renewal(&spec.source, grid).map_err(runtime)?)
    };
    let mut out = io::stdout().lock();
    writeln!(out, "family,n,K,runs,mc_mean,mc_se,renewal,limit")?;
    for &n in &cfg.n_grid {
        let (nf, k) = (n as f64, cfg.heavy_k);
        let counts = replicate(cfg.base_seed, n, cfg.heavy_runs, workers, |_, seed| {
            Ok(count_heavy_seeded(&spec.source, nf, k, seed)?.count as f64)
        })
        .map_err(runtime)?;
        let mc = MeanSe::of(&counts);
        let renewal = match &solution {
            Some(sol) => expected_heavy_count(sol, nf, k).map(|v| v.to_string()).unwrap_or_default(),
            None => String::new(),
        };
        let limit = nf / k / spec.constants.mu;
        writeln!(out, "{},{n},{k},{},{},{},{renewal},{limit}", cfg.family, cfg.heavy_runs, mc.mean, mc.se)?;
    }
    Ok(())
}

pub fn report(csv: &Path, out_json: Option<&Path>) -> Result<(), CliError> {
    let file = File::open(csv).map_err(|e| CliError::Config(format!("cannot read {}: {e}", csv.display())))?;
    let records = read_records(file)?;
    if records.is_empty() {
        return Err(CliError::Config(format!("{} has no replication rows", csv.display())));
    }
    let mut groups: Vec<Vec<ReplicationRecord>> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|g| g[0].family == r.family && g[0].n == r.n && g[0].epsilon == r.epsilon) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let mut summaries = Vec::new();
    for mut g in groups {
        g.sort_by_key(|r| r.rep);
        let family: Family = g[0].family.parse().map_err(|e: splittree::Error| CliError::Config(e.to_string()))?;
        let spec = family_spec(&family)?;
        let summary = aggregate(&g, &spec.constants).map_err(|e| CliError::Config(e.to_string()))?;
        summaries.push(summary_json(&summary, None));
    }
    match out_json {
        Some(path) => write_json(create(path)?, &summaries),
        None => write_json(io::stdout().lock(), &summaries),
    }
}
