//! End-to-end runs of the `ldpc-bench` binary: flag surface, exit codes,
//! output files, and the multi-process transport.

use std::process::Command;

fn bench_cmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ldpc-bench"))
}

/// Small, fast argument set shared by the happy-path tests.
fn tiny_args() -> Vec<&'static str> {
    vec![
        "--n", "48", "--wr", "6", "--rates", "0.5", "--iters", "3", "--vectors", "8", "--workers",
        "1,2", "--sigma", "0.7", "--seed", "5",
    ]
}

#[test]
fn help_lists_the_flag_surface() {
    let out = bench_cmd().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in [
        "--n", "--wr", "--rates", "--iters", "--vectors", "--workers", "--mode", "--phase",
        "--sigma", "--seed", "--transport", "--servers", "--inter-server-latency-us", "--h-file",
        "--out", "--plot", "--early-exit",
    ] {
        assert!(text.contains(flag), "help is missing {flag}");
    }
}

#[test]
fn batch_decode_run_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let dat = dir.path().join("r.dat");
    let out = bench_cmd()
        .args(tiny_args())
        .args(["--mode", "batch", "--phase", "decode"])
        .arg("--out")
        .arg(&csv)
        .arg("--plot")
        .arg(&dat)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("mode,phase,design_rate,realized_rate,n,workers,servers,total_s,per_vector_s,ber"));
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_text.lines().count(), 3, "header plus one row per worker count");
    let dat_text = std::fs::read_to_string(&dat).unwrap();
    assert!(dat_text.starts_with("# mode=batch phase=decode design_rate=0.5000"));
}

#[test]
fn stream_encode_run_succeeds() {
    let out = bench_cmd()
        .args(tiny_args())
        .args(["--mode", "stream", "--phase", "encode"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().count() >= 3);
    // Encode runs measure no BER: trailing field empty.
    assert!(stdout.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn procs_transport_spawns_worker_processes() {
    let out = bench_cmd()
        .args(tiny_args())
        .args(["--mode", "batch", "--phase", "decode", "--transport", "procs", "--workers", "3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Same data as the threads transport: compare the ber column.
    let threads = bench_cmd()
        .args(tiny_args())
        .args(["--mode", "batch", "--phase", "decode", "--workers", "3"])
        .output()
        .unwrap();
    assert!(threads.status.success());
    let ber_of = |bytes: &[u8]| {
        String::from_utf8_lossy(bytes).lines().nth(1).unwrap().split(',').nth(9).unwrap().to_string()
    };
    assert_eq!(ber_of(&out.stdout), ber_of(&threads.stdout));
}

#[test]
fn latency_flags_are_accepted() {
    let out = bench_cmd()
        .args(tiny_args())
        .args(["--servers", "2", "--inter-server-latency-us", "50"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row = stdout.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(6).unwrap(), "2", "servers column");
}

#[test]
fn h_file_round_trips_through_the_cli() {
    use ldpc_mp::alist::write_alist_file;
    use ldpc_mp::gf2::{gallager_construct, CodeParams};

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.alist");
    let h = gallager_construct(CodeParams::new(48, 6, 3).unwrap(), 17);
    write_alist_file(&h, &path).unwrap();

    let out = bench_cmd()
        .args(["--n", "48", "--wr", "6", "--vectors", "4", "--iters", "2", "--workers", "1"])
        .arg("--h-file")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Mismatched n must be rejected with a diagnostic.
    let bad = bench_cmd()
        .args(["--n", "96", "--vectors", "4", "--workers", "1"])
        .arg("--h-file")
        .arg(&path)
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("n=48"));
}

#[test]
fn invalid_configs_exit_nonzero_with_diagnostics() {
    // Rate that yields a fractional column weight.
    let out = bench_cmd().args(["--rates", "0.33", "--vectors", "2", "--workers", "1"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ldpc-bench"));

    // Early exit is a batch-only option.
    let out = bench_cmd()
        .args(tiny_args())
        .args(["--mode", "stream", "--early-exit"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("early exit"));

    // Unknown flag.
    let out = bench_cmd().arg("--frobnicate").output().unwrap();
    assert!(!out.status.success());
}
