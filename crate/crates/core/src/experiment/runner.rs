use std::path::PathBuf;

use super::config::ExperimentConfig;
use super::presets::build_channel;
use super::table::{Cell, Table};
use crate::bounds::{compute_bounds, BoundInputs, BoundSet};
use crate::error::{Error, Result};
use crate::estimators::{convergence_sweep, picard_increments, Budget, Channel, EstimateReport, RunContext};
use crate::exec::Executor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Kl,
    Mi,
    Bounds,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Kl => "kl",
            Command::Mi => "mi",
            Command::Bounds => "bounds",
        }
    }
}

/// Command-line values that replace config entries when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub n_max: Option<usize>,
    pub outer: Option<usize>,
    pub inner: Option<usize>,
    pub steps: Option<usize>,
    pub strict: bool,
    pub json: bool,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(p) = &self.preset {
            cfg.preset = Some(p.clone());
            cfg.drift = None;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = self.n_max {
            cfg.budget.n_max = v;
        }
        if let Some(v) = self.outer {
            cfg.budget.n_outer = v;
        }
        if let Some(v) = self.inner {
            cfg.budget.n_inner = v;
        }
        if let Some(v) = self.steps {
            cfg.grid.steps = v;
        }
        cfg.strict |= self.strict;
        cfg.output.json |= self.json;
        if let Some(dir) = &self.out {
            cfg.output.dir = Some(dir.clone());
        }
        cfg.validate()
    }
}

/// A finished command: its table and how many rows broke an attached bound.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub table: Table,
    pub violations: usize,
}

fn metadata(table: &mut Table, cmd: Command, cfg: &ExperimentConfig, channel: &Channel) -> Result<()> {
    table.meta("tool", concat!("picard-entropy ", env!("CARGO_PKG_VERSION")));
    table.meta("command", cmd.name());
    table.meta("config_sha256", cfg.hash()?);
    table.meta("seed", cfg.seed);
    table.meta("workers", cfg.workers);
    if let Some(p) = &cfg.preset {
        table.meta("preset", p);
    }
    table.meta("drift", channel.drift.describe());
    table.meta("message", channel.law.label());
    table.meta("horizon", channel.grid.horizon());
    table.meta("steps", channel.grid.steps());
    table.meta("units", "nats");
    Ok(())
}

fn provenance(cfg: &ExperimentConfig, n_outer: usize, n_inner: usize) -> [Cell; 4] {
    [cfg.seed.into(), cfg.grid.steps.into(), n_outer.into(), n_inner.into()]
}

const PROVENANCE: [&str; 4] = ["seed", "steps", "n_outer", "n_inner"];

fn table(names: &[&str]) -> Table {
    let cols: Vec<String> = names.iter().chain(PROVENANCE.iter()).map(|s| s.to_string()).collect();
    Table {
        meta: Vec::new(),
        columns: cols,
        rows: Vec::new(),
    }
}

fn context(cfg: &ExperimentConfig) -> Result<RunContext> {
    let mut ctx = RunContext::new(cfg.seed, Executor::with_workers(cfg.workers)?);
    ctx.p = cfg.p;
    ctx.mi_multiplier = cfg.mi_multiplier;
    Ok(ctx)
}

fn bound_set(cfg: &ExperimentConfig, channel: &Channel) -> Result<BoundSet> {
    compute_bounds(BoundInputs {
        p: cfg.p,
        mi_multiplier: cfg.mi_multiplier,
        ..channel.bound_inputs()
    })
}

fn violated(r: &EstimateReport) -> bool {
    r.within_bound == Some(false)
}

fn solve(cfg: &ExperimentConfig, channel: &Channel) -> Result<(Table, usize)> {
    let ctx = context(cfg)?;
    let rows = picard_increments(channel, cfg.budget.n_max, cfg.budget.n_outer, &ctx)?;
    let mut t = table(&["n", "increment_sq", "stderr", "bound", "within_bound"]);
    for r in &rows {
        let n = match r.order {
            crate::picard::Order::Iterate(n) => n,
            crate::picard::Order::Limit => unreachable!(),
        };
        let mut row: Vec<Cell> = vec![
            n.into(),
            r.estimate.into(),
            r.stderr.into(),
            r.bound.into(),
            r.within_bound.into(),
        ];
        row.extend(provenance(cfg, r.n_outer, 0));
        t.push(row);
    }
    Ok((t, rows.iter().filter(|r| violated(r)).count()))
}

fn sweep_orders(cfg: &ExperimentConfig) -> Vec<usize> {
    (1..=cfg.budget.n_max).collect()
}

fn kl(cfg: &ExperimentConfig, channel: &Channel) -> Result<(Table, usize)> {
    let ctx = context(cfg)?;
    let budget = Budget::new(cfg.budget.n_outer, cfg.budget.n_inner);
    let s = convergence_sweep(channel, &sweep_orders(cfg), budget, &ctx)?;
    let mut t = table(&[
        "n",
        "kl_iterate_vs_limit",
        "kl_iterate_vs_limit_stderr",
        "kl_vs_wiener",
        "kl_vs_wiener_stderr",
        "kl_bound",
        "within_bound",
    ]);
    let mut violations = 0;
    for r in &s.rows {
        let kl = &r.kl_iterate_vs_limit;
        let w = &r.information.marginal;
        violations += usize::from(violated(kl));
        let mut row: Vec<Cell> = vec![
            r.n.into(),
            kl.estimate.into(),
            kl.stderr.into(),
            w.estimate.into(),
            w.stderr.into(),
            kl.bound.into(),
            kl.within_bound.into(),
        ];
        row.extend(provenance(cfg, budget.n_outer, budget.n_inner));
        t.push(row);
    }
    let w = &s.limit.marginal;
    let mut row: Vec<Cell> = vec![
        "limit".into(),
        Cell::Empty,
        Cell::Empty,
        w.estimate.into(),
        w.stderr.into(),
        Cell::Empty,
        Cell::Empty,
    ];
    row.extend(provenance(cfg, budget.n_outer, budget.n_inner));
    t.push(row);
    Ok((t, violations))
}

fn mi(cfg: &ExperimentConfig, channel: &Channel) -> Result<(Table, usize)> {
    let ctx = context(cfg)?;
    let budget = Budget::new(cfg.budget.n_outer, cfg.budget.n_inner);
    let s = convergence_sweep(channel, &sweep_orders(cfg), budget, &ctx)?;
    let mut t = table(&[
        "n",
        "mutual_information",
        "stderr",
        "mutual_information_bits",
        "limit",
        "limit_stderr",
        "gap",
        "gap_stderr",
        "mi_rate",
    ]);
    let lim = &s.limit.mutual;
    for r in &s.rows {
        let m = &r.information.mutual;
        let mut row: Vec<Cell> = vec![
            r.n.into(),
            m.estimate.into(),
            m.stderr.into(),
            m.bits().into(),
            lim.estimate.into(),
            lim.stderr.into(),
            r.gap.estimate.into(),
            r.gap.stderr.into(),
            r.gap.bound.into(),
        ];
        row.extend(provenance(cfg, budget.n_outer, budget.n_inner));
        t.push(row);
    }
    let mut row: Vec<Cell> = vec![
        "limit".into(),
        lim.estimate.into(),
        lim.stderr.into(),
        lim.bits().into(),
        lim.estimate.into(),
        lim.stderr.into(),
        0.0.into(),
        0.0.into(),
        Cell::Empty,
    ];
    row.extend(provenance(cfg, budget.n_outer, budget.n_inner));
    t.push(row);
    Ok((t, 0))
}

fn bounds(cfg: &ExperimentConfig, channel: &Channel) -> Result<(Table, usize)> {
    let b = bound_set(cfg, channel)?;
    let mut t = table(&["n", "picard_l2", "kl_rate", "mi_rate"]);
    t.meta("K", b.inputs.lipschitz);
    t.meta("L", b.inputs.growth);
    t.meta("xi_moment", b.inputs.xi_moment);
    t.meta("k1", b.k1);
    t.meta("k2", b.k2);
    t.meta("c1", b.c1);
    t.meta("c2", b.c2);
    t.meta("c3", b.c3);
    if let (Some(m), Some(c), Some(cap)) = (b.inputs.peak_power, b.c1_tilde, b.moment_cap) {
        t.meta("M", m);
        t.meta("c1_tilde", c);
        t.meta("p", b.inputs.p);
        t.meta("moment_cap", cap);
    }
    t.meta("first_n_kl_rate_below_0.01", b.first_n_below(1e-2)?);
    for n in 0..=cfg.budget.n_max {
        let kl = if n == 0 { Cell::Empty } else { b.kl_rate(n).into() };
        let mi = if n == 0 { Cell::Empty } else { b.mi_rate(n).into() };
        let mut row: Vec<Cell> = vec![n.into(), b.picard_l2(n).into(), kl, mi];
        row.extend(provenance(cfg, cfg.budget.n_outer, cfg.budget.n_inner));
        t.push(row);
    }
    Ok((t, 0))
}

/// Runs one command on a validated config.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let channel = build_channel(cfg)?;
    let (mut table, violations) = match cmd {
        Command::Solve => solve(cfg, &channel)?,
        Command::Kl => kl(cfg, &channel)?,
        Command::Mi => mi(cfg, &channel)?,
        Command::Bounds => bounds(cfg, &channel)?,
    };
    let mut head = Table::new(&[]);
    metadata(&mut head, cmd, cfg, &channel)?;
    head.meta.append(&mut table.meta);
    table.meta = head.meta;
    Ok(Outcome {
        command: cmd,
        table,
        violations,
    })
}

/// Writes `<dir>/<command>.csv` (and `.json` when asked) and returns the
/// paths written.
pub fn write_outputs(outcome: &Outcome, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let Some(dir) = &cfg.output.dir else {
        return Ok(Vec::new());
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let csv = dir.join(format!("{}.csv", outcome.command.name()));
    std::fs::write(&csv, outcome.table.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", csv.display())))?;
    written.push(csv);
    if cfg.output.json {
        let json = dir.join(format!("{}.json", outcome.command.name()));
        std::fs::write(&json, outcome.table.to_json()).map_err(|e| Error::Io(format!("{}: {e}", json.display())))?;
        written.push(json);
    }
    Ok(written)
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::InvalidGrid(_)
        | Error::Dimension { .. }
        | Error::MissingRegularityBound
        | Error::Io(_) => 2,
        Error::Evaluation { .. }
        | Error::Divergence { .. }
        | Error::Regularity { .. }
        | Error::Density { .. }
        | Error::DegenerateMixture { .. } => 4,
    }
}

pub const EXIT_BOUND_VIOLATION: i32 = 3;

#[cfg(test)]
mod tests {
    use super::*;

    fn small(preset: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(preset, 8);
        cfg.budget.n_outer = 40;
        cfg.budget.n_inner = 10;
        cfg.budget.n_max = 3;
        cfg
    }

    fn column(t: &Table, name: &str) -> Vec<Cell> {
        let k = t.column(name).unwrap();
        t.rows.iter().map(|r| r[k].clone()).collect()
    }

    #[test]
    fn zero_preset_tables_are_zero() {
        for (cmd, names) in [
            (Command::Solve, vec!["increment_sq", "stderr"]),
            (Command::Kl, vec!["kl_iterate_vs_limit", "kl_vs_wiener"]),
            (Command::Mi, vec!["mutual_information", "gap"]),
        ] {
            let out = run_command(cmd, &small("zero")).unwrap();
            assert_eq!(out.violations, 0);
            let skip = usize::from(cmd == Command::Solve);
            for name in names {
                for c in column(&out.table, name).into_iter().skip(skip) {
                    assert!(
                        matches!(c, Cell::Num(v) if v == 0.0) || c == Cell::Empty,
                        "{cmd:?} {name}: {c:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn every_row_has_provenance() {
        for cmd in [Command::Solve, Command::Kl, Command::Mi, Command::Bounds] {
            let out = run_command(cmd, &small("linear-feedback")).unwrap();
            for name in PROVENANCE {
                assert!(
                    column(&out.table, name).iter().all(|c| *c != Cell::Empty),
                    "{cmd:?} {name}"
                );
            }
            let csv = out.table.to_csv();
            assert!(csv.contains("# config_sha256: "));
            assert!(csv.contains(&format!("# command: {}", cmd.name())));
        }
    }

    #[test]
    fn message_only_kl_rows_vanish() {
        let out = run_command(Command::Kl, &small("message-only")).unwrap();
        for c in column(&out.table, "kl_iterate_vs_limit").iter().take(3) {
            assert_eq!(*c, Cell::Num(0.0));
        }
    }

    #[test]
    fn linear_solve_rows_within_bound() {
        let out = run_command(Command::Solve, &small("linear-feedback")).unwrap();
        assert_eq!(out.violations, 0);
        assert!(column(&out.table, "within_bound")
            .iter()
            .all(|c| *c == Cell::Text("true".into())));
    }

    #[test]
    fn bounds_metadata() {
        let mut cfg = small("bounded-truncated");
        cfg.constants = Some(super::super::config::ConstantsSpec {
            lipschitz: 1.0,
            growth: 1.0,
            peak_power: None,
        });
        let out = run_command(Command::Bounds, &cfg).unwrap();
        let meta: std::collections::HashMap<_, _> = out.table.meta.iter().cloned().collect();
        assert_eq!(meta["k1"], "20");
        assert_eq!(meta["c2"], "10");
        assert_eq!(meta["moment_cap"], 3f64.exp().to_string());
    }

    #[test]
    fn overrides_replace_entries() {
        let mut cfg = small("zero");
        Overrides {
            preset: Some("linear-feedback".into()),
            seed: Some(9),
            steps: Some(5),
            inner: Some(3),
            strict: true,
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        assert_eq!(cfg.preset.as_deref(), Some("linear-feedback"));
        assert_eq!(
            (cfg.seed, cfg.grid.steps, cfg.budget.n_inner, cfg.strict),
            (9, 5, 3, true)
        );
        assert!(Overrides {
            outer: Some(1),
            ..Default::default()
        }
        .apply(&mut cfg)
        .is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Domain("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Divergence {
                knot: 1,
                value: f64::NAN
            }),
            4
        );
    }
}
