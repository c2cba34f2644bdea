//! Command line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::calibration::{estimate_rates, fit_zipf, load_histogram, load_series, AnchorConditions};
use crate::config::RunConfig;
use crate::curves::{CurveMode, DemandSide, SupplySide};
use crate::dynamics::{simulate, sweep, SweepSpec, Trajectory};
use crate::equilibrium::{classify_regime, solve_equilibrium, SlopeMode, SolveOptions};
use crate::error::{Error, ErrorKind};
use crate::model::ModelParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Number of price samples in `fig2.csv`.
const FIG2_POINTS: usize = 251;

#[derive(Debug, Parser)]
#[command(name = "offshore-market", version, about = "Consulting market model with labor displacement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate market rates from yearly records and write a config file.
    Calibrate {
        #[arg(long)]
        series: PathBuf,
        /// Provider size histogram (`size,provider_count`).
        #[arg(long)]
        sizes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Clear the market at one point in time.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Write demand and supply over a price grid.
        #[arg(long)]
        fig2: Option<PathBuf>,
        /// Evaluate curves by quadrature of sampled densities.
        #[arg(long)]
        numeric: bool,
    },
    /// Report whether the market is emerging or mature.
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate the price path and write the trajectory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<SlopeMode>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write `t,price,required_share,exits`.
        #[arg(long)]
        fig3: Option<PathBuf>,
    },
    /// Simulate over a grid of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `name=lo:hi:step`
        #[arg(long)]
        vary: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

/// Runs the command line with `argv` (program name first) and returns the
/// process exit code.
pub fn run<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric => EXIT_NUMERIC,
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Calibrate { series, sizes, out: cfg_path } => {
            calibrate(&series, sizes.as_deref(), &cfg_path, out)
        }
        Command::Solve { config, t, fig2, numeric } => {
            let cfg = RunConfig::load(&config)?;
            let fig2 = fig2.or(cfg.io.fig2.clone());
            solve(&cfg, t, numeric, fig2.as_deref(), out)
        }
        Command::Classify { config } => classify(&RunConfig::load(&config)?, out),
        Command::Simulate {
            config,
            mode,
            mu,
            horizon,
            dt,
            out: path,
            fig3,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(mu) = mu {
                cfg.params.mu = mu;
            }
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if let Some(dt) = dt {
                cfg.dt = dt;
            }
            let path = path
                .or(cfg.io.out.clone())
                .ok_or_else(|| Failure::Usage("simulate needs --out <csv> or [io] out".into()))?;
            let fig3 = fig3.or(cfg.io.fig3.clone());
            run_simulation(&cfg, &path, fig3.as_deref(), out)
        }
        Command::Sweep { config, vary, out: path } => {
            let cfg = RunConfig::load(&config)?;
            let spec: SweepSpec = vary.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let path = path
                .or(cfg.io.out.clone())
                .ok_or_else(|| Failure::Usage("sweep needs --out <csv> or [io] out".into()))?;
            run_sweep(&cfg, &spec, &path, out)
        }
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), Failure> {
    match writeln!(out, "{}", line.as_ref()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Model(Error::Io {
            path: "<stdout>".into(),
            source: e,
        })),
        _ => Ok(()),
    }
}

fn calibrate(series: &Path, sizes: Option<&Path>, cfg_path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let data = load_series(series)?;
    let rates = estimate_rates(&data)?;
    let fit = sizes.map(|p| load_histogram(p).and_then(|h| fit_zipf(&h))).transpose()?;
    let params = ModelParams {
        psi: rates.psi,
        alpha: rates.alpha,
        r_m: rates.r_m,
        ..ModelParams::german_baseline()
    };
    let cfg = RunConfig {
        params,
        anchors: Some(AnchorConditions::german()),
        mode: SlopeMode::CapacityBalance,
        horizon: crate::dynamics::DEFAULT_HORIZON,
        dt: crate::dynamics::DEFAULT_DT,
        io: Default::default(),
    };
    cfg.scenario().effective_params()?;
    let mut text = format!(
        "# estimated from {} ({} yearly records)\n",
        series.display(),
        data.records().len()
    );
    if let Some(f) = &fit {
        text.push_str(&format!(
            "# provider size fit: g0 = {} (rms log residual {:.4}); [anchors] re-derive g0 when present\n",
            f.g0, f.residual
        ));
    }
    text.push_str(&cfg.to_ini());
    write_atomic(cfg_path, text.as_bytes())?;
    say(
        out,
        format!(
            "psi={:.4} alpha={:.4} r_m={:.2}{} -> {}",
            rates.psi,
            rates.alpha,
            rates.r_m,
            fit.map(|f| format!(" g0={:.4}", f.g0)).unwrap_or_default(),
            cfg_path.display()
        ),
    )
}

fn sides(params: ModelParams<f64>, numeric: bool) -> Result<(DemandSide<f64>, SupplySide<f64>), Error> {
    if numeric {
        Ok((DemandSide::gridded(params)?, SupplySide::gridded(params)?))
    } else {
        Ok((DemandSide::new(params)?, SupplySide::new(params)?))
    }
}

fn solve(cfg: &RunConfig, t: f64, numeric: bool, fig2: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Failure::Usage(format!("--t must be a non-negative number of years, got {t}")));
    }
    let params = cfg.scenario().effective_params()?;
    let (demand, supply) = sides(params, numeric)?;
    let opts = SolveOptions {
        curve_mode: if numeric { CurveMode::Numeric } else { CurveMode::Closed },
        slope_mode: cfg.mode,
        ..SolveOptions::default()
    };
    let eq = solve_equilibrium(&demand, &supply, t, &opts)?;
    say(out, format!("price={:.2}", eq.price))?;
    say(out, format!("regime={}", eq.regime.tag))?;
    say(out, format!("served={:.4}", eq.served))?;
    say(out, format!("required_share={:.4}", eq.required_share))?;
    say(out, format!("share_complement={:.4}", 1.0 - eq.required_share))?;
    say(out, format!("marginal_size={:.2}", eq.marginal_size))?;
    say(out, format!("price_slope={:.2}", eq.price_slope))?;
    if let Some(k) = eq.entry_rate {
        say(out, format!("entry_rate={k:.4}"))?;
    }
    if let Some(k) = eq.exit_rate {
        say(out, format!("exit_rate={k:.4}"))?;
    }
    say(out, format!("F0={:.6}", params.f0))?;
    say(out, format!("g0={:.4}", params.g0))?;
    if let Some(path) = fig2 {
        let (closed_d, closed_s) = sides(params, false)?;
        let bytes = fig2_csv(&closed_d, &closed_s, t)?;
        write_atomic(path, &bytes)?;
    }
    Ok(())
}

fn fig2_csv(demand: &DemandSide<f64>, supply: &SupplySide<f64>, t: f64) -> Result<Vec<u8>, Error> {
    let p = supply.params();
    let (floor, top) = (p.cost_floor(), p.local_cost());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut rows = vec![["price".to_string(), "demand".into(), "supply".into()]];
    for i in 1..=FIG2_POINTS {
        let price = floor + (top - floor) * i as f64 / FIG2_POINTS as f64;
        rows.push([
            format!("{price:.2}"),
            format!("{:.4}", demand.demand_at(t, price, CurveMode::Closed)?),
            format!("{:.4}", supply.supply_at(t, price, CurveMode::Closed)?),
        ]);
    }
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    Ok(w.into_inner().expect("in-memory flush"))
}

fn classify(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), Failure> {
    let params = cfg.scenario().effective_params()?;
    let (demand, supply) = sides(params, false)?;
    let eq = solve_equilibrium(&demand, &supply, 0.0, &SolveOptions::default())?;
    let label = classify_regime(&demand, &supply, 0.0, eq.price, CurveMode::Closed)?;
    say(out, format!("regime={}", label.tag))?;
    say(out, format!("margin={:.4}", label.margin))?;
    say(out, format!("test_price={:.2}", eq.price))?;
    say(out, format!("mu={:.4} threshold_mu={:.4}", params.mu, params.alpha - params.psi))
}

fn opt(x: Option<f64>, decimals: usize) -> String {
    x.map(|v| format!("{v:.decimals$}")).unwrap_or_default()
}

pub const TRAJECTORY_HEADER: [&str; 10] = [
    "t",
    "price",
    "price_slope",
    "required_share",
    "marginal_size",
    "demand",
    "supply",
    "entry_rate",
    "exit_rate",
    "profit_frontier",
];

/// Trajectory as CSV bytes with fixed decimals: 2 for currency and sizes,
/// 4 for times, fractions, counts and rates.
pub fn trajectory_csv(traj: &Trajectory<f64>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER).expect("in-memory write");
    for p in &traj.points {
        w.write_record([
            format!("{:.4}", p.t),
            format!("{:.2}", p.price),
            format!("{:.2}", p.price_slope),
            format!("{:.4}", p.required_share),
            format!("{:.2}", p.marginal_size),
            format!("{:.4}", p.demand),
            format!("{:.4}", p.supply),
            opt(p.entry_rate, 4),
            opt(p.exit_rate, 4),
            opt(p.profit_frontier, 2),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn fig3_csv(traj: &Trajectory<f64>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "price", "required_share", "exits"]).expect("in-memory write");
    for p in &traj.points {
        w.write_record([
            format!("{:.4}", p.t),
            format!("{:.2}", p.price),
            format!("{:.4}", p.required_share),
            format!("{:.4}", p.exit_rate.unwrap_or(0.0)),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn run_simulation(cfg: &RunConfig, path: &Path, fig3: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let traj = simulate(&cfg.scenario())?;
    write_atomic(path, &trajectory_csv(&traj))?;
    if let Some(f) = fig3 {
        write_atomic(f, &fig3_csv(&traj))?;
    }
    let last = traj.points.last().expect("trajectory has a starting point");
    let tail = match (traj.floor_reached, traj.summary()) {
        (Some(t), _) => format!("cost floor reached at t={t:.4}"),
        (None, Some(s)) => format!(
            "drift={:.4}%/year share_gain={:.4}pp/year exits={:.4}",
            s.price_drift_pct, s.share_gain_pp, s.total_exits
        ),
        (None, None) => String::new(),
    };
    say(
        out,
        format!(
            "wrote {} rows to {}; final_price={:.2} {tail}",
            traj.points.len(),
            path.display(),
            last.price
        ),
    )
}

fn run_sweep(cfg: &RunConfig, spec: &SweepSpec, path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let rows = sweep(&cfg.scenario(), spec)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        spec.name.as_str(),
        "price0",
        "required_share0",
        "marginal_size0",
        "final_price",
        "price_drift_pct",
        "share_gain_pp",
        "total_exits",
        "status",
    ])
    .expect("in-memory write");
    let mut failed = 0;
    for r in &rows {
        let mut rec = vec![trim_decimal(r.value)];
        match &r.outcome {
            Ok(s) => {
                rec.extend([
                    format!("{:.2}", s.price0),
                    format!("{:.4}", s.required_share0),
                    format!("{:.2}", s.marginal_size0),
                    format!("{:.2}", s.final_price),
                    format!("{:.4}", s.price_drift_pct),
                    format!("{:.4}", s.share_gain_pp),
                    format!("{:.4}", s.total_exits),
                    "ok".to_string(),
                ]);
            }
            Err(msg) => {
                failed += 1;
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push(msg.clone());
            }
        }
        w.write_record(&rec).expect("in-memory write");
    }
    write_atomic(path, &w.into_inner().expect("in-memory flush"))?;
    say(
        out,
        format!(
            "swept {} over {} points ({} failed) -> {}",
            spec.name,
            rows.len(),
            failed,
            path.display()
        ),
    )
}

/// Grid value with float noise from `lo + i * step` rounded away.
fn trim_decimal(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_string()
}

/// Writes through a sibling temporary file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io_err(e)
    })
}

impl clap::ValueEnum for SlopeMode {
    fn value_variants<'a>() -> &'a [Self] {
        &[SlopeMode::CapacityBalance, SlopeMode::Literal]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            SlopeMode::CapacityBalance => "capacity",
            SlopeMode::Literal => "literal",
        }))
    }
}

