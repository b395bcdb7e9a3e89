//! Command-line front end: synthetic data generation, calibration,
//! quasiprobability estimation, and width scans.

// `!(x > 0)` deliberately rejects NaN together with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aqqp::calibration::{
    self, fit_noise_scaling, fit_zeta, group_variances, CalibrationModel,
};
use aqqp::error::AqqpError;
use aqqp::estimator::{
    default_scan_widths, estimate_aqqp, scan_width_auto, significance, table_range,
    QuadratureDataset, ScanSettings,
};
use aqqp::filters::make_filter;
use aqqp::io::{
    read_calibration, read_dataset, read_records, settings_hash, write_calibration, write_dataset,
    write_estimate, write_records, write_scan,
};
use aqqp::pattern::{self, build_pattern_table, PatternTable};
use aqqp::states::{analytic_aqqp, sample_quadratures, simulate_records, MeasurementModel, StateModel};

#[derive(Parser)]
#[command(name = "aqqp", version, about = "Quadrature quasiprobability certification of nonclassical spin states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic two-pulse measurement records
    Simulate(SimulateArgs),
    /// Fit the noise-scaling model and prediction gain from records
    Calibrate(CalibrateArgs),
    /// Estimate the quasiprobability on a quadrature grid
    Estimate(EstimateArgs),
    /// Scan the filter width for the most significant negativity
    Scan(ScanArgs),
    /// Print analytic quasiprobability values for a reference state
    Oracle(OracleArgs),
    /// Draw normalized quadrature samples from a reference state
    Sample(SampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SimMode {
    /// Coherent-reference sweep over atom numbers (calibration input)
    Sweep,
    /// Squeezed ensemble at a single atom number
    Squeezed,
}

#[derive(Args)]
struct SimulateArgs {
    /// sweep (calibration input) or squeezed (estimation input)
    #[arg(long, value_enum)]
    mode: SimMode,
    /// Normalized quadrature variance for squeezed mode (default: -1.67 dB)
    #[arg(long)]
    variance: Option<f64>,
    /// Atom number for squeezed mode
    #[arg(long, default_value_t = 290_000)]
    n_atoms: u64,
    /// Records per atom-number group (sweep) or total records (squeezed)
    #[arg(long, default_value_t = 4841)]
    records: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Records CSV containing a coherent-reference atom-number sweep
    #[arg(long)]
    input: PathBuf,
    /// Decoherence per photon (independently measured)
    #[arg(long, default_value_t = 1.02e-8)]
    epsilon: f64,
    /// Photons in the conditioning pulse
    #[arg(long, default_value_t = 4.1e7)]
    n1_photons: f64,
    /// Verification-to-conditioning photon ratio
    #[arg(long, default_value_t = 1.5)]
    photon_ratio: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = -6.0, allow_negative_numbers = true)]
    phi_min: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    phi_max: f64,
    #[arg(long, default_value_t = 0.05)]
    phi_step: f64,
}

#[derive(Args)]
struct InputArgs {
    /// Records CSV (needs --calibration) or normalized jbar CSV
    #[arg(long)]
    input: PathBuf,
    /// Calibration JSON; required when --input holds raw records
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Minimum effective detection efficiency for conversion
    #[arg(long, default_value_t = calibration::DEFAULT_EFFICIENCY_THRESHOLD)]
    efficiency_threshold: f64,
    /// Convert records even below the efficiency threshold
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Filter width
    #[arg(long, default_value_t = 1.1)]
    width: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Output CSV (j_phi,p,se); summary always goes to stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated widths (default: 30 log-spaced over [0.4, 3.0])
    #[arg(long, value_delimiter = ',')]
    widths: Vec<f64>,
    /// Base grid half-range (widened to 4.5/w for small widths)
    #[arg(long, default_value_t = 6.0)]
    phi_half_range: f64,
    #[arg(long, default_value_t = 0.05)]
    phi_step: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StateKind {
    Gaussian,
    SingleExcitation,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value_t = StateKind::Gaussian)]
    state: StateKind,
    /// Quadrature variance (gaussian state)
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    /// Quadrature mean (gaussian state)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mean: f64,
    #[arg(long, default_value_t = 1.1)]
    width: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum, default_value_t = StateKind::Gaussian)]
    state: StateKind,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mean: f64,
    #[arg(long, default_value_t = 100_000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Sample(a) => cmd_sample(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &AqqpError) -> u8 {
    match e {
        AqqpError::InvalidArgument(_)
        | AqqpError::DegenerateInput(_)
        | AqqpError::CalibrationInconsistent(_)
        | AqqpError::DisplacementOutOfRange { .. }
        | AqqpError::EfficiencyBelowThreshold { .. } => 2,
        AqqpError::InsufficientData(_) => 3,
        AqqpError::Convergence(_) => 4,
        AqqpError::Io { .. } | AqqpError::Parse { .. } => 5,
    }
}

type Result<T> = std::result::Result<T, AqqpError>;

/// -1.67 dB of squeezing relative to the coherent reference.
fn default_squeezed_variance() -> f64 {
    10f64.powf(-1.67 / 10.0)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let model: MeasurementModel<f64> = MeasurementModel::paper_preset();
    let mut records = Vec::new();
    let hash;
    match a.mode {
        SimMode::Sweep => {
            let atom_numbers: Vec<u64> =
                (0..=7).map(|i| (i as f64 * 0.4e5).round() as u64).collect();
            hash = settings_hash(&[
                ("command", "simulate".into()),
                ("mode", "sweep".into()),
                ("records", a.records.to_string()),
                ("seed", a.seed.to_string()),
            ]);
            let mut cycle = 0u64;
            for (gi, &n_atoms) in atom_numbers.iter().enumerate() {
                let mut group =
                    simulate_records(&model, 1.0, n_atoms, a.records, a.seed.wrapping_add(gi as u64))?;
                for r in &mut group {
                    r.cycle_id = cycle;
                    cycle += 1;
                }
                records.extend(group);
            }
        }
        SimMode::Squeezed => {
            let variance = a.variance.unwrap_or_else(default_squeezed_variance);
            hash = settings_hash(&[
                ("command", "simulate".into()),
                ("mode", "squeezed".into()),
                ("variance", variance.to_string()),
                ("n_atoms", a.n_atoms.to_string()),
                ("records", a.records.to_string()),
                ("seed", a.seed.to_string()),
            ]);
            records = simulate_records(&model, variance, a.n_atoms, a.records, a.seed)?;
        }
    }
    write_records(
        &a.output,
        &records,
        &[format!("settings_hash = {hash}")],
    )?;
    println!("wrote {} records to {}", records.len(), a.output.display());
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    let records = read_records::<f64>(&a.input)?;
    let groups = group_variances(&records);
    let (coeffs, cov) = fit_noise_scaling(&groups)?;
    // zeta from the highest-atom-number group, where the estimation data live
    let n_max = records.iter().map(|r| r.n_atoms).max().unwrap_or(0);
    let top: Vec<_> = records
        .iter()
        .filter(|r| r.n_atoms == n_max)
        .cloned()
        .collect();
    let zeta = fit_zeta(&top)?;
    let model = CalibrationModel::new(coeffs, cov, zeta, a.epsilon, a.n1_photons, a.photon_ratio)?;
    let hash = settings_hash(&[
        ("command", "calibrate".into()),
        ("input", a.input.display().to_string()),
        ("epsilon", a.epsilon.to_string()),
        ("n1_photons", a.n1_photons.to_string()),
        ("photon_ratio", a.photon_ratio.to_string()),
    ]);
    write_calibration(&a.output, &model, Some(hash))?;
    println!(
        "a0 = {:.4e}  a1 = {:.4e}  a2 = {:.4e}  zeta = {:.4}  eta = {:.4}  efficiency({}) = {:.4}",
        model.a0,
        model.a1,
        model.a2,
        model.zeta,
        model.eta,
        n_max,
        calibration::efficiency(&model, n_max)
    );
    Ok(())
}

/// Loads either a normalized jbar CSV or a raw records CSV (+ calibration).
fn load_dataset(a: &InputArgs) -> Result<QuadratureDataset<f64>> {
    let looks_like_records = {
        use std::io::BufRead;
        let file = std::fs::File::open(&a.input).map_err(|e| AqqpError::Io {
            path: a.input.display().to_string(),
            source: e,
        })?;
        BufReader::new(file)
            .lines()
            .map_while(|l| l.ok())
            .map(|l| l.trim().to_string())
            .find(|l| !l.is_empty() && !l.starts_with('#'))
            .is_some_and(|l| l.starts_with("cycle_id"))
    };
    if looks_like_records {
        let cal_path = a.calibration.as_ref().ok_or_else(|| {
            AqqpError::InvalidArgument(
                "--input holds raw records; pass --calibration to normalize them".into(),
            )
        })?;
        let records = read_records::<f64>(&a.input)?;
        let model = read_calibration::<f64>(cal_path)?;
        calibration::normalize(&records, &model, a.efficiency_threshold, a.force)
    } else {
        read_dataset(&a.input)
    }
}

/// Builds a pattern table, caching it under `AQQP_CACHE_DIR` if set.
fn table_with_cache(width: f64, x_max: f64, spacing: f64) -> Result<PatternTable<f64>> {
    let rel_tol = 1e-9;
    let cache_dir = std::env::var_os("AQQP_CACHE_DIR").map(PathBuf::from);
    let cache_path = cache_dir.as_ref().map(|dir| {
        let key = settings_hash(&[
            ("kernel", "quartic".into()),
            ("w", width.to_string()),
            ("x_max", x_max.to_string()),
            ("spacing", spacing.to_string()),
            ("rel_tol", rel_tol.to_string()),
        ]);
        dir.join(format!("pattern-{}.csv", &key[..16]))
    });
    if let Some(path) = &cache_path {
        if let Ok(file) = std::fs::File::open(path) {
            if let Ok(table) = pattern::read_cache::<f64, _>(BufReader::new(file), rel_tol) {
                return Ok(table);
            }
        }
    }
    let filter = make_filter(width, rel_tol)?;
    let table = build_pattern_table(&filter, x_max, spacing)?;
    if let Some(path) = &cache_path {
        if let Some(dir) = path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        if let Ok(file) = std::fs::File::create(path) {
            let _ = pattern::write_cache(&table, std::io::BufWriter::new(file));
        }
    }
    Ok(table)
}

fn make_grid(g: &GridArgs) -> Result<Vec<f64>> {
    if !(g.phi_step > 0.0) || !(g.phi_max > g.phi_min) {
        return Err(AqqpError::InvalidArgument(
            "need phi_step > 0 and phi_max > phi_min".into(),
        ));
    }
    let n = ((g.phi_max - g.phi_min) / g.phi_step).round() as usize;
    Ok((0..=n).map(|i| g.phi_min + i as f64 * g.phi_step).collect())
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    if !(0.1..=3.0).contains(&a.width) {
        return Err(AqqpError::InvalidArgument(format!(
            "width must lie in [0.1, 3.0], got {}",
            a.width
        )));
    }
    let data = load_dataset(&a.input)?;
    let grid = make_grid(&a.grid)?;
    let reach = grid.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let table = table_with_cache(
        a.width,
        table_range(reach, data.max_abs_sample()),
        pattern::DEFAULT_SPACING,
    )?;
    let est = estimate_aqqp(&data, &table, &grid)?;
    let (sigma, at) = significance(&est);
    let hash = settings_hash(&[
        ("command", "estimate".into()),
        ("input", a.input.input.display().to_string()),
        ("width", a.width.to_string()),
        ("phi_min", a.grid.phi_min.to_string()),
        ("phi_max", a.grid.phi_max.to_string()),
        ("phi_step", a.grid.phi_step.to_string()),
    ]);
    println!(
        "w = {}  n = {}  sigma = {:.3} at j = {:.3}",
        a.width, est.n_samples, sigma, at
    );
    if let Some(out) = &a.output {
        write_estimate(
            out,
            &est,
            &[
                format!("settings_hash = {hash}"),
                format!("sigma = {sigma} at_phi = {at}"),
            ],
        )?;
    }
    Ok(())
}

fn cmd_scan(a: ScanArgs) -> Result<()> {
    let data = load_dataset(&a.input)?;
    let widths = if a.widths.is_empty() {
        default_scan_widths()
    } else {
        a.widths.clone()
    };
    let settings = ScanSettings {
        phi_half_range: a.phi_half_range,
        phi_step: a.phi_step,
        ..ScanSettings::default()
    };
    let scan = scan_width_auto(&data, &widths, &settings)?;
    let mut best = 0usize;
    for i in 1..scan.sigma.len() {
        if scan.sigma[i] < scan.sigma[best] {
            best = i;
        }
    }
    println!(
        "best width {} with sigma = {:.3} at j = {:.3}",
        scan.widths[best], scan.sigma[best], scan.argmin_phi[best]
    );
    if let Some(out) = &a.output {
        let hash = settings_hash(&[
            ("command", "scan".into()),
            ("input", a.input.input.display().to_string()),
            (
                "widths",
                widths
                    .iter()
                    .map(|w| w.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("phi_half_range", a.phi_half_range.to_string()),
            ("phi_step", a.phi_step.to_string()),
        ]);
        write_scan(out, &scan, &[format!("settings_hash = {hash}")])?;
    }
    Ok(())
}

fn make_state(kind: StateKind, variance: f64, mean: f64) -> Result<StateModel<f64>> {
    match kind {
        StateKind::Gaussian => StateModel::gaussian_with_mean(variance, mean),
        StateKind::SingleExcitation => Ok(StateModel::SingleExcitation),
    }
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let state = make_state(a.state, a.variance, a.mean)?;
    let filter = make_filter(a.width, 1e-9)?;
    let grid = make_grid(&a.grid)?;
    let values = analytic_aqqp(&state, &filter, &grid)?;
    let mut text = String::from("j_phi,p\n");
    for (phi, v) in grid.iter().zip(&values) {
        text.push_str(&format!("{phi},{v}\n"));
    }
    match &a.output {
        Some(path) => std::fs::write(path, text).map_err(|e| AqqpError::Io {
            path: path.display().to_string(),
            source: e,
        })?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let state = make_state(a.state, a.variance, a.mean)?;
    let data = sample_quadratures(&state, a.count, a.seed)?;
    write_dataset(&a.output, &data, &[])?;
    println!("wrote {} samples to {}", data.len(), a.output.display());
    Ok(())
}
