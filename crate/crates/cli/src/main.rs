//! `lensguide` — optical constants, lens synthesis and sensor simulation from the
//! command line.
//!
//! Exit codes: 0 success, 1 validation or parse error, 2 I/O error,
//! 3 numerical/domain error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use lensguide::config::{LensChoice, LensDesign, SceneConfig};
use lensguide::experiment::{
    compare_with_without_lens, crop_and_fold, focus_sweep, rotation_sweep, synthesize_protocol, FirstDirection,
};
use lensguide::io::{self, fmt_sig};
use lensguide::lensdesign::{export_profile, solve_profile, LensSpec};
use lensguide::material::{compute_constants, fit_working_curve, SlabSample};
use lensguide::raytrace::{tally, trace_fan};
use lensguide::report::{self, emit};
use lensguide::scene::build_sensor;
use lensguide::{Error, Execution, Result};

#[derive(Parser, Debug)]
#[command(name = "lensguide", version, about = "Material-to-optics pipeline for lens-integrated soft waveguide sensors")]
struct Cli {
    /// Worker threads for the data-parallel loops (0 = all cores). Results do
    /// not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Refractive index per wavelength from a single-layer T/A spectrum.
    MaterialIndex(MaterialIndexArgs),
    /// Cartesian-oval lens profile for a given emitter/focus geometry.
    LensProfile(LensProfileArgs),
    /// Ray-traced rotation sweep, rotation protocol or lens/no-lens comparison.
    Simulate(SimulateArgs),
    /// Penetration depth and critical energy from cure-depth measurements.
    WorkingCurve(WorkingCurveArgs),
}

#[derive(Args, Debug)]
struct MaterialIndexArgs {
    /// CSV with header `wavelength_nm,T,A` (fractions).
    #[arg(long)]
    spectrum: PathBuf,
    /// Layer thickness in mm.
    #[arg(long, default_value_t = 0.025)]
    thickness_mm: f64,
    /// Output CSV `wavelength_nm,R,R_F,n`.
    #[arg(long)]
    output: PathBuf,
    /// Also print the interpolated index at these wavelengths (nm).
    #[arg(long = "at-nm", value_delimiter = ',', allow_hyphen_values = true)]
    at_nm: Vec<f64>,
}

#[derive(Args, Debug)]
struct LensProfileArgs {
    /// Ambient index on the emitter side (air).
    #[arg(long, default_value_t = 1.0)]
    n1: f64,
    /// Lens material index at the emitter wavelength.
    #[arg(long, default_value_t = 1.44)]
    n2: f64,
    /// Emitter-to-apex distance in mm.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Apex-to-focus distance in mm.
    #[arg(long = "s-prime", default_value_t = 20.0)]
    s_prime: f64,
    /// Half aperture in mm (half of the 4 mm minor base).
    #[arg(long = "half-aperture", default_value_t = 2.0)]
    half_aperture: f64,
    /// Number of samples; must be odd so x = 0 is sampled.
    #[arg(long, default_value_t = 2001)]
    samples: usize,
    /// Output CSV `x_mm,z_mm`.
    #[arg(long)]
    output: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Sweep,
    Protocol,
    Compare,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Negative,
    Positive,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scene TOML; omitted sections take the built-in defaults.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Sweep)]
    mode: Mode,
    /// Directory for CSV, SVG and the effective configuration.
    #[arg(long)]
    output_dir: PathBuf,
    /// Rotation angles in degrees, strictly increasing [scene default: -3,0,3].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    thetas: Option<Vec<f64>>,
    /// Replace the scene's lens with a flat face.
    #[arg(long)]
    no_lens: bool,
    /// Lens design index [scene default: 1.44].
    #[arg(long)]
    design_index: Option<f64>,
    /// Lens focal distance in mm [scene default: 20].
    #[arg(long)]
    focal_distance_mm: Option<f64>,
    /// Fan ray count [scene default: 100].
    #[arg(long)]
    rays: Option<usize>,
    /// Fan full aperture in degrees [scene default: 120].
    #[arg(long)]
    aperture_deg: Option<f64>,
    /// Protocol amplitude in degrees [scene default: 3].
    #[arg(long)]
    amplitude_deg: Option<f64>,
    /// Protocol rotation speed in deg/s [scene default: 15].
    #[arg(long)]
    speed_deg_s: Option<f64>,
    /// Protocol hold time in s [scene default: 0.8].
    #[arg(long)]
    hold_s: Option<f64>,
    /// Protocol cycle count [scene default: 6].
    #[arg(long)]
    cycles: Option<usize>,
    /// Protocol sample rate in Hz [scene default: 100].
    #[arg(long)]
    sample_rate_hz: Option<f64>,
    /// Leading cycles dropped before folding [scene default: 1].
    #[arg(long)]
    discard_cycles: Option<usize>,
    /// Rotation direction of the first half-cycle [scene default: negative].
    #[arg(long, value_enum)]
    first_direction: Option<Direction>,
    /// Also dump ray paths and the receiver tally at this angle (sweep mode).
    #[arg(long, allow_hyphen_values = true)]
    dump_paths_at: Option<f64>,
}

#[derive(Args, Debug)]
struct WorkingCurveArgs {
    /// CSV with header `energy_mJ_cm2,cure_depth_um`.
    #[arg(long)]
    points: PathBuf,
    /// Output CSV `Dp_um,Ec_mJ_cm2,residual_rms_um`.
    #[arg(long)]
    output: PathBuf,
    /// Exposure at which the fitted cure depth is also reported, mJ/cm².
    #[arg(long, default_value_t = 40.0)]
    evaluate_at: f64,
}

fn material_index(args: &MaterialIndexArgs) -> Result<()> {
    let spectrum = io::read_spectrum(&args.spectrum)?;
    let sample = SlabSample::new(spectrum, args.thickness_mm)?;
    let constants = compute_constants(&sample);
    io::write_text(&args.output, &io::constants_to_string(&constants))?;
    info!("wrote {} rows to {}", constants.rows.len(), args.output.display());
    let constants = constants.into_result()?;
    for &nm in &args.at_nm {
        println!("n({}) = {}", fmt_sig(nm), fmt_sig(constants.index_at_wavelength(nm)?));
    }
    println!("{} rows written to {}", constants.rows.len(), args.output.display());
    Ok(())
}

fn lens_profile(args: &LensProfileArgs, exec: Execution) -> Result<()> {
    let spec = LensSpec {
        n1: args.n1,
        n2: args.n2,
        s_mm: args.s,
        s_prime_mm: args.s_prime,
        half_aperture_mm: args.half_aperture,
        sample_count: args.samples,
    };
    let profile = solve_profile(&spec, exec)?;
    export_profile(&profile, &args.output)?;
    println!("design optical path  {} mm", fmt_sig(spec.design_path_length()));
    println!("max |OPL - design|   {:e} mm", profile.max_path_deviation());
    println!("max asymmetry        {:e} mm", profile.max_asymmetry());
    println!("apex z               {} mm", fmt_sig(profile.apex().z_mm));
    println!("edge sag             {} mm", fmt_sig(profile.edge_sag_mm()));
    Ok(())
}

fn working_curve(args: &WorkingCurveArgs) -> Result<()> {
    let points = io::read_working_curve(&args.points)?;
    let fit = fit_working_curve(&points)?;
    io::write_text(&args.output, &io::working_curve_fit_to_string(&fit))?;
    println!("Dp = {} um", fmt_sig(fit.penetration_um));
    println!("Ec = {} mJ/cm2", fmt_sig(fit.critical_energy_mj_cm2));
    println!("residual RMS = {} um", fmt_sig(fit.residual_rms_um));
    println!(
        "Dc({}) = {} um",
        fmt_sig(args.evaluate_at),
        fmt_sig(fit.cure_depth_um(args.evaluate_at))
    );
    Ok(())
}

/// Scene file values overridden by any flag given on the command line.
fn effective_config(args: &SimulateArgs) -> Result<SceneConfig> {
    let mut cfg = match &args.scene {
        Some(path) => SceneConfig::load(path)?,
        None => SceneConfig::default(),
    };
    if args.no_lens {
        cfg.lens = LensChoice::Keyword("none".into());
    }
    if args.design_index.is_some() || args.focal_distance_mm.is_some() {
        let mut design = cfg.lens.design().copied().unwrap_or_else(LensDesign::default);
        if let Some(v) = args.design_index {
            design.design_index = v;
        }
        if let Some(v) = args.focal_distance_mm {
            design.focal_distance_mm = v;
        }
        if args.no_lens {
            return Err(Error::validation("--no-lens conflicts with lens design flags"));
        }
        cfg.lens = LensChoice::Design(design);
    }
    if let Some(t) = &args.thetas {
        cfg.sweep.thetas_deg = t.clone();
    }
    if let Some(v) = args.rays {
        cfg.fan.count = v;
    }
    if let Some(v) = args.aperture_deg {
        cfg.fan.aperture_deg = v;
    }
    let p = &mut cfg.protocol;
    if let Some(v) = args.amplitude_deg {
        p.amplitude_deg = v;
    }
    if let Some(v) = args.speed_deg_s {
        p.speed_deg_s = v;
    }
    if let Some(v) = args.hold_s {
        p.hold_s = v;
    }
    if let Some(v) = args.cycles {
        p.cycles = v;
    }
    if let Some(v) = args.sample_rate_hz {
        p.sample_rate_hz = v;
    }
    if let Some(d) = args.first_direction {
        p.first_direction = match d {
            Direction::Negative => FirstDirection::Negative,
            Direction::Positive => FirstDirection::Positive,
        };
    }
    if let Some(v) = args.discard_cycles {
        cfg.fold.discard_cycles = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_differentials(label: &str, rows: impl Iterator<Item = (f64, Option<f64>)>) {
    for (theta, d) in rows {
        let d = d.map_or_else(|| "undefined".to_string(), fmt_sig);
        let label = if label.is_empty() { String::new() } else { format!("{label} ") };
        println!("{label}D({}) = {d}", fmt_sig(theta));
    }
}

fn simulate(args: &SimulateArgs, exec: Execution) -> Result<()> {
    let cfg = effective_config(args)?;
    let dir = args.output_dir.as_path();
    let lens = cfg.lens_spec();
    emit(dir, "effective_config.toml", &cfg.to_toml_string())?;

    match args.mode {
        Mode::Sweep => {
            let scene = build_sensor(&cfg.sensor, lens.as_ref(), exec)?;
            let sweep = rotation_sweep(&scene, &cfg.sweep.thetas_deg, &cfg.fan, &cfg.trace, exec)?;
            emit(dir, "sweep.csv", &report::sweep_csv(&sweep)?)?;
            emit(dir, "sweep.svg", &report::sweep_svg(&sweep, "detected power vs rotation angle")?)?;
            print_differentials("", sweep.rows.iter().map(|r| (r.theta_deg, r.differential())));
            if scene.has_lens() {
                let focus = focus_sweep(&scene, &cfg.sweep.thetas_deg, &cfg.fan, exec)?;
                emit(dir, "focus.csv", &report::focus_csv(&focus)?)?;
                for f in &focus {
                    println!(
                        "focus({}) depth {} mm, radius {} mm",
                        fmt_sig(f.theta_deg),
                        fmt_sig(f.spot.depth_mm),
                        fmt_sig(f.spot.radius_mm)
                    );
                }
            }
            if let Some(theta) = args.dump_paths_at {
                dump_paths(dir, &scene, theta, &cfg, exec)?;
            }
        }
        Mode::Protocol => {
            let scene = build_sensor(&cfg.sensor, lens.as_ref(), exec)?;
            let trace = synthesize_protocol(&scene, &cfg.readout, &cfg.protocol, &cfg.fan, &cfg.trace, exec)?;
            let folded = crop_and_fold(&trace, cfg.fold.discard_cycles)?;
            emit(dir, "protocol.csv", &report::protocol_csv(&trace)?)?;
            emit(dir, "protocol.svg", &report::protocol_svg(&trace)?)?;
            emit(dir, "folded.csv", &report::folded_csv(&folded)?)?;
            emit(dir, "folded.svg", &report::folded_svg(&folded)?)?;
            println!(
                "{} samples over {} s, {} cycles; folded {} angles over {} cycles",
                trace.samples.len(),
                fmt_sig(cfg.protocol.duration_s()),
                trace.cycle_count,
                folded.rows.len(),
                folded.cycles_used
            );
            let amp = cfg.protocol.amplitude_deg;
            for theta in [-amp, amp] {
                if let Some(r) = folded.at(theta) {
                    println!(
                        "V({}) left {} V, right {} V",
                        fmt_sig(theta),
                        fmt_sig(r.left_mean),
                        fmt_sig(r.right_mean)
                    );
                }
            }
        }
        Mode::Compare => {
            let lens = lens.ok_or_else(|| Error::validation("compare mode needs a lens design in the scene"))?;
            let report = compare_with_without_lens(&cfg.sensor, &lens, &cfg.sweep.thetas_deg, &cfg.fan, &cfg.trace, exec)?;
            emit(dir, "sweep_with_lens.csv", &report::sweep_csv(&report.with_lens)?)?;
            emit(dir, "sweep_without_lens.csv", &report::sweep_csv(&report.without_lens)?)?;
            emit(dir, "comparison.csv", &report::comparison_csv(&report)?)?;
            emit(dir, "comparison.svg", &report::comparison_svg(&report)?)?;
            print_differentials("with lens", report.rows.iter().map(|r| (r.theta_deg, r.with_lens)));
            print_differentials("flat face", report.rows.iter().map(|r| (r.theta_deg, r.without_lens)));
            match report.headline_ratio() {
                Some(r) => println!("|D_with| / |D_without| at max |theta| = {}", fmt_sig(r)),
                None => println!("|D_with| / |D_without| undefined"),
            }
        }
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

fn dump_paths(dir: &Path, scene: &lensguide::scene::SensorGeometry, theta: f64, cfg: &SceneConfig, exec: Execution) -> Result<()> {
    let posed = scene.posed(theta)?;
    let outcomes = trace_fan(&posed, &cfg.fan, &cfg.trace, exec);
    emit(dir, "paths.csv", &report::path_csv(&outcomes)?)?;
    emit(dir, "tally.csv", &report::tally_csv(&tally(&outcomes)))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let exec = Execution::Parallel;
    match &cli.command {
        Command::MaterialIndex(a) => material_index(a),
        Command::LensProfile(a) => lens_profile(a, exec),
        Command::Simulate(a) => simulate(a, exec),
        Command::WorkingCurve(a) => working_curve(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match lensguide::exec::with_threads(cli.threads, || run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
