use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};

use xlafdm::harness::{emit_csv, parse_config, preset, run_experiment, snr_range, ExperimentConfig, Preset};

/// Runs an XL-MIMO AFDM precoding sweep and writes CSV results.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
struct Args {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in setup: fig3 or fig4.
    #[arg(long)]
    preset: Option<String>,
    /// Divide the preset's antenna and user counts by this factor.
    #[arg(long, default_value_t = 1, requires = "preset")]
    scale: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    snr_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_max: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &Args) -> Result<ExperimentConfig, String> {
    let mut cfg = if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
    } else {
        let name = args.preset.as_deref().unwrap_or_default();
        let which = Preset::parse(name).ok_or_else(|| format!("unknown preset `{name}` (expected fig3 or fig4)"))?;
        preset(which, args.scale).map_err(|e| e.to_string())?
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.trials {
        if t == 0 {
            return Err("--trials must be positive".into());
        }
        cfg.trials = t;
    }
    if args.snr_min.is_some() || args.snr_max.is_some() || args.snr_step.is_some() {
        let lo = args.snr_min.unwrap_or(cfg.snr_grid[0]);
        let hi = args.snr_max.unwrap_or(*cfg.snr_grid.last().expect("non-empty grid"));
        let step = args.snr_step.unwrap_or(5.0);
        if !(step > 0.0) || hi < lo || !lo.is_finite() || !hi.is_finite() {
            return Err(format!("invalid SNR range {lo}..{hi} step {step}"));
        }
        cfg.snr_grid = snr_range(lo, hi, step);
    }
    Ok(cfg)
}

/// Some system OpenBLAS builds do not recognise recent x86 cores and fall
/// back to generic kernels, which makes complex GEMM several times slower.
/// The core type is fixed when the library loads, so the only remedy is to
/// restart with `OPENBLAS_CORETYPE` set.
#[cfg(all(target_arch = "x86_64", unix))]
fn tune_openblas() {
    use std::ffi::CStr;
    use std::os::unix::process::CommandExt;

    extern "C" {
        fn openblas_get_corename() -> *const std::os::raw::c_char;
    }

    if std::env::var_os("OPENBLAS_CORETYPE").is_some() {
        return;
    }
    // SAFETY: OpenBLAS returns a pointer to a static NUL-terminated string.
    let name = unsafe { CStr::from_ptr(openblas_get_corename()) }.to_string_lossy().to_ascii_lowercase();
    if name != "prescott" {
        return;
    }
    let core = if is_x86_feature_detected!("avx512f") && is_x86_feature_detected!("avx512dq") {
        "SkylakeX"
    } else if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
        "Haswell"
    } else {
        return;
    };
    if let Ok(exe) = std::env::current_exe() {
        // Only returns on failure, in which case we carry on as we are.
        let _ = std::process::Command::new(exe)
            .args(std::env::args_os().skip(1))
            .env("OPENBLAS_CORETYPE", core)
            .exec();
    }
}

#[cfg(not(all(target_arch = "x86_64", unix)))]
fn tune_openblas() {}

fn main() -> ExitCode {
    tune_openblas();
    let args = Args::parse();
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    let rows = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("runtime error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &args.out {
        Some(path) => fs::File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            emit_csv(&rows, &mut w)?;
            w.flush()
        }),
        None => {
            let mut w = io::stdout().lock();
            emit_csv(&rows, &mut w).and_then(|_| w.flush())
        }
    };
    if let Err(e) = written {
        eprintln!("runtime error: writing output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
