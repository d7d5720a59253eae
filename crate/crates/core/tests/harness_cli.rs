//! Configuration, CSV and the `simulate` binary.

use std::path::Path;
use std::process::Command;

use xlafdm::harness::{emit_csv, parse_config, parse_csv, preset, run_experiment, run_trial, Metric, Preset, Waveform, HEADER};
use xlafdm::precoding::PrecoderKind;

fn simulate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simulate")).args(args).output().unwrap()
}

fn small(extra: &str) -> String {
    format!(
        "n_carriers = 8\nn_tx = 16\nsubarrays = 2\nusers = 4\nprecoder = zf, rka\nwaveform = afdm, ofdm\n\
         iterations = 100\ntrials = 2\nsnr_db = 0, 10, 20\n{extra}"
    )
}

#[test]
fn empty_config_is_desk_scale() {
    let c = parse_config("").unwrap();
    assert_eq!(c.n_carriers, 64);
    assert_eq!((c.layout.n_tx(), c.layout.n_sub(), c.layout.n_users(), c.layout.n_rx_per_user()), (64, 4, 8, 1));
    assert_eq!(c.snr_grid, vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
    assert_eq!(c.trials, 200);
    assert_eq!(c.iterations, 200);
}

#[test]
fn paper_layout_and_errors() {
    let c = parse_config("n_tx = 256\nsubarrays = 4\nusers = 32").unwrap();
    assert_eq!((c.layout.n_ts(), c.layout.k_s()), (64, 8));

    let e = parse_config("n_tx = 256\nsubarrays = 5").unwrap_err();
    assert_eq!(e.line, Some(2));
    assert!(e.message.contains("subarrays") && e.message.contains("n_tx"), "{e}");

    let e = parse_config("# comment\n\nbogus = 1").unwrap_err();
    assert_eq!(e.line, Some(3));
    assert!(e.to_string().contains("bogus"));

    let e = parse_config("trials = many").unwrap_err();
    assert_eq!(e.line, Some(1));
    assert!(parse_config("snr_db = 10, 0").is_err());
    assert!(parse_config("precoder = mmse").is_err());
}

#[test]
fn ofdm_has_no_chirp() {
    let c = parse_config("waveform = afdm, ofdm\nalpha_max = 2").unwrap();
    assert!(c.afdm_params(Waveform::Ofdm).is_ofdm());
    assert!(!c.afdm_params(Waveform::Afdm).is_ofdm());
    assert_eq!(c.afdm_params(Waveform::Afdm).c1(), 5.0 / 128.0);
}

#[test]
fn table_flops_at_paper_geometry() {
    let mut c = preset(Preset::Fig3, 1).unwrap();
    c.metrics = vec![Metric::Flops];
    c.trials = 1;
    let rows = run_experiment(&c).unwrap();
    let n2s = 64.0 * 64.0 * 4.0;
    for r in &rows {
        let want = match r.precoder {
            PrecoderKind::Rka => 12800.0,
            PrecoderKind::SworRka => 12800.0 + 2.0 * 64.0 * 8.0,
            PrecoderKind::Zf => 2.0 * 8.0 * 8.0 * 64.0,
            PrecoderKind::Rzf => unreachable!(),
        } * n2s;
        assert_eq!(r.value, want);
    }
}

#[test]
fn csv_round_trip() {
    let c = parse_config(&small("metric = sum_rate, ber, flops")).unwrap();
    let rows = run_experiment(&c).unwrap();
    let mut out = Vec::new();
    emit_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out.clone()).unwrap();
    assert!(text.starts_with(HEADER));
    assert!(!text.contains('\r'));
    let back = parse_csv(&text).unwrap();
    assert_eq!(back.len(), rows.len());
    let mut again = Vec::new();
    emit_csv(&back, &mut again).unwrap();
    assert_eq!(out, again);
    // Rows come out ordered by precoder, waveform, SNR.
    let keys: Vec<_> = rows.iter().map(|r| (r.precoder.name(), r.waveform.name(), r.snr_db)).collect();
    assert!(keys.windows(2).all(|w| w[0].0 < w[1].0 || (w[0].0 == w[1].0 && (w[0].1, w[0].2) <= (w[1].1, w[1].2))));
}

#[test]
fn per_trial_results_ignore_trial_count() {
    let a = parse_config(&small("metric = sum_rate, ber")).unwrap();
    let mut b = a.clone();
    b.trials = 4;
    for t in 0..2 {
        assert_eq!(run_trial(&a, t).unwrap(), run_trial(&b, t).unwrap());
    }
    assert_ne!(run_trial(&a, 0).unwrap(), run_trial(&a, 1).unwrap());
}

#[test]
fn cli_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    std::fs::write(&cfg, small("metric = ber\nseed = 9")).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = simulate(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let rows = parse_csv(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
    assert!(rows.iter().all(|r| r.seed == 9 && r.trials == 2));
}

#[test]
fn cli_overrides_and_stdout() {
    let o = simulate(&["--preset", "fig4", "--scale", "8", "--trials", "1", "--seed", "3", "--snr-min", "-5", "--snr-max", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_csv(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    let snrs: Vec<f64> = rows.iter().filter(|r| r.precoder == PrecoderKind::Zf && r.waveform == Waveform::Afdm).map(|r| r.snr_db).collect();
    assert_eq!(snrs, vec![-5.0, 0.0, 5.0]);
    assert!(rows.iter().all(|r| r.seed == 3 && r.trials == 1 && r.experiment_id == "fig4"));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(simulate(&["--preset", "fig5"]).status.code(), Some(1));
    assert_eq!(simulate(&["--config", "/definitely/not/here.txt"]).status.code(), Some(1));
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "n_tx = 256\nsubarrays = 5\n").unwrap();
    let o = simulate(&["--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(simulate(&["--preset", "fig4", "--trials", "0"]).status.code(), Some(1));
    // Neither a config nor a preset: usage error, not success.
    assert_ne!(simulate(&[]).status.code(), Some(0));

    let good = dir.path().join("good.txt");
    std::fs::write(&good, small("trials = 1")).unwrap();
    let unwritable = Path::new("/definitely/not/here/out.csv");
    let o = simulate(&["--config", good.to_str().unwrap(), "--out", unwritable.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
