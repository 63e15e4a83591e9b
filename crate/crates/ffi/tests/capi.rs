use std::ffi::{c_char, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use spdc_lab_ffi::*;

const TICKS_PER_NS: u64 = 1_000_000;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { spdc_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn source(rate: f64, dt: f64) -> *mut SpdcSource {
    let mut s = ptr::null_mut();
    let st = unsafe { spdc_source_new(rate, dt, SpdcShape::Box, &mut s) };
    assert_eq!(st, SpdcStatus::Ok);
    s
}

fn stream(ch: SpdcChannel, ts: &[u64], duration: u64) -> *mut SpdcStream {
    let mut s = ptr::null_mut();
    let st = unsafe { spdc_stream_new(ch, ts.as_ptr(), ts.len(), duration, &mut s) };
    assert_eq!(st, SpdcStatus::Ok, "{}", last_error());
    s
}

#[test]
fn model_values_match_the_rust_api() {
    let s = source(2e7, 1e-9);
    let params = spdc_lab::SourceParams::new(2e7, 1e-9, spdc_lab::Shape::Box).unwrap();
    unsafe {
        assert_eq!(spdc_g2_si(s, 0.0), spdc_lab::model::g2_si(&params, 0.0));
        assert_eq!(spdc_g2_si(s, 1e-8), 1.0);
        assert_eq!(spdc_g2_ss(s, 0.0), 2.0);
        assert!((spdc_source_mean_pairs(s) - 0.02).abs() < 1e-15);
        assert_eq!(
            spdc_g2_c(s, 0.0, 0.0, 0.0),
            spdc_lab::model::g2_c(&params, 0.0, 0.0, 0.0)
        );
        assert!(spdc_p_ssi(s, 0.0, 0.0, 0.0) > 0.0);

        let (mut h, mut u) = (0.0, 0.0);
        assert_eq!(spdc_limit_ratios(s, 0.0, &mut h, &mut u), SpdcStatus::Ok);
        assert!((h - spdc_g2_si(s, 0.0)).abs() < 1e-9 * h);
        assert!((u - 2.0).abs() < 1e-9);

        assert!(spdc_g2_si(ptr::null(), 0.0).is_nan());
        spdc_source_free(s);
        spdc_source_free(ptr::null_mut());
    }
}

#[test]
fn plateaus_through_a_kernel() {
    let s = source(2e7, 1e-9);
    let mut k = ptr::null_mut();
    let mut p = SpdcPlateaus::default();
    unsafe {
        assert_eq!(spdc_kernel_new(5e-9, 1e-9, 2.5e-11, &mut k), SpdcStatus::Ok);
        assert_eq!(spdc_predict_plateaus(s, k, &mut p), SpdcStatus::Ok);
        spdc_kernel_free(k);
        spdc_source_free(s);
    }
    // p = 1 / (2 · 5 ns), X = p / R.
    let x = 1e8 / 2e7;
    assert!((p.x - x).abs() < 1e-12);
    assert!((p.g2si_plateau - (1.0 + x)).abs() < 1e-12);
    assert!((p.gbar2c_short - (1.0 + 2.0 * x) / (1.0 + x).powi(2)).abs() < 1e-12);
}

#[test]
fn errors_carry_status_and_message() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            spdc_source_new(-1.0, 1e-9, SpdcShape::Box, &mut s),
            SpdcStatus::InvalidArgument
        );
        assert!(s.is_null());
        assert!(last_error().contains("invalid parameter"));

        assert_eq!(
            spdc_source_new(2e9, 1e-9, SpdcShape::Box, &mut s),
            SpdcStatus::Ok
        );
        let mut outs = [ptr::null_mut(); 3];
        let [a, b, c] = &mut outs;
        assert_eq!(
            spdc_simulate(s, SpdcModel::Thermal, 1.0, 1.0, 0.5, 0.0, 1e-6, 1, a, b, c),
            SpdcStatus::Regime
        );
        assert!(outs.iter().all(|p| p.is_null()));
        spdc_source_free(s);
        assert_eq!(
            spdc_source_new(2e7, 1e-9, SpdcShape::Box, ptr::null_mut()),
            SpdcStatus::NullPointer
        );

        let ts = [5u64, 3];
        let mut st = ptr::null_mut();
        assert_eq!(
            spdc_stream_new(SpdcChannel::Idler, ts.as_ptr(), 2, 10, &mut st),
            SpdcStatus::Unsorted
        );
        assert_eq!(
            spdc_stream_new(SpdcChannel::Idler, ptr::null(), 3, 10, &mut st),
            SpdcStatus::NullPointer
        );

        let a = stream(SpdcChannel::Idler, &[], 0);
        let mut h = ptr::null_mut();
        assert_eq!(
            spdc_pair_histogram(a, a, 0, 1, 1, 1e-9, SpdcWindowMode::Centered, &mut h),
            SpdcStatus::EmptyDuration
        );
        spdc_stream_free(a);

        let missing = CString::new("/nonexistent/dir/run.evt").unwrap();
        let mut f = ptr::null_mut();
        assert_ne!(spdc_events_read(missing.as_ptr(), &mut f), SpdcStatus::Ok);
        assert!(f.is_null());
    }
}

#[test]
fn histograms_count_hand_built_coincidences() {
    let d = 1000 * TICKS_PER_NS;
    let idler = stream(
        SpdcChannel::Idler,
        &[100 * TICKS_PER_NS, 500 * TICKS_PER_NS],
        d,
    );
    let s1 = stream(
        SpdcChannel::Signal1,
        &[101 * TICKS_PER_NS, 500 * TICKS_PER_NS],
        d,
    );
    let s2 = stream(SpdcChannel::Signal2, &[110 * TICKS_PER_NS], d);
    unsafe {
        let mut h = ptr::null_mut();
        // Delays -2, 0, 2 ns of s1 relative to the idler, window ±1 ns.
        let st = spdc_pair_histogram(
            s1,
            idler,
            -2 * TICKS_PER_NS as i64,
            2 * TICKS_PER_NS as i64,
            3,
            1e-9,
            SpdcWindowMode::Centered,
            &mut h,
        );
        assert_eq!(st, SpdcStatus::Ok, "{}", last_error());
        assert_eq!(spdc_histogram_len(h), 3);
        let counts = std::slice::from_raw_parts(spdc_histogram_counts(h), 3);
        assert_eq!(counts, &[0, 2, 1]);
        spdc_histogram_free(h);

        let mut t = ptr::null_mut();
        let st = spdc_triple_histogram(
            idler,
            s1,
            s2,
            0,
            10 * TICKS_PER_NS as i64,
            2,
            1e-9,
            SpdcWindowMode::Centered,
            &mut t,
        );
        assert_eq!(st, SpdcStatus::Ok, "{}", last_error());
        let counts = std::slice::from_raw_parts(spdc_histogram_counts(t), 2);
        assert_eq!(counts, &[0, 1]);
        spdc_histogram_free(t);

        spdc_stream_free(idler);
        spdc_stream_free(s1);
        spdc_stream_free(s2);
    }
}

fn simulate(seed: u64) -> [*mut SpdcStream; 3] {
    let s = source(1e7, 1e-9);
    let mut out = [ptr::null_mut(); 3];
    let [a, b, c] = &mut out;
    let st = unsafe {
        spdc_simulate(
            s,
            SpdcModel::Thermal,
            0.5,
            0.5,
            0.5,
            1e-9,
            1e-3,
            seed,
            a,
            b,
            c,
        )
    };
    assert_eq!(st, SpdcStatus::Ok, "{}", last_error());
    unsafe { spdc_source_free(s) };
    out
}

fn timestamps(s: *const SpdcStream) -> Vec<u64> {
    unsafe {
        let n = spdc_stream_len(s);
        if n == 0 {
            return Vec::new();
        }
        std::slice::from_raw_parts(spdc_stream_timestamps(s), n).to_vec()
    }
}

#[test]
fn simulation_is_reproducible_and_round_trips_through_evt() {
    let first = simulate(9);
    let second = simulate(9);
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(timestamps(*a), timestamps(*b));
    }
    // 1e7 pairs/s · 1 ms · ηi = 0.5
    let n = unsafe { spdc_stream_len(first[0]) } as f64;
    assert!((n - 5000.0).abs() < 5.0 * 5000f64.sqrt(), "{n}");

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("run.evt").to_str().unwrap()).unwrap();
    let handles: Vec<*const SpdcStream> = first.iter().map(|&p| p as *const _).collect();
    unsafe {
        assert_eq!(
            spdc_events_write(path.as_ptr(), handles.as_ptr(), 3),
            SpdcStatus::Ok
        );
        let mut f = ptr::null_mut();
        assert_eq!(spdc_events_read(path.as_ptr(), &mut f), SpdcStatus::Ok);
        assert_eq!(spdc_events_count(f), 3);
        for (i, &orig) in first.iter().enumerate() {
            let mut s = ptr::null_mut();
            assert_eq!(spdc_events_get(f, i, &mut s), SpdcStatus::Ok);
            assert_eq!(timestamps(s), timestamps(orig));
            assert_eq!(
                spdc_stream_duration_ticks(s),
                spdc_stream_duration_ticks(orig)
            );
            spdc_stream_free(s);
        }
        let mut s = ptr::null_mut();
        assert_eq!(spdc_events_get(f, 3, &mut s), SpdcStatus::InvalidArgument);
        spdc_events_free(f);
        for p in first.into_iter().chain(second) {
            spdc_stream_free(p);
        }
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "spdc_lab.h"

int main(void) {
    SpdcSource *src = NULL;
    if (spdc_source_new(2e7, 1e-9, SPDC_SHAPE_BOX, &src) != SPDC_STATUS_OK) return 1;
    double g = spdc_g2_si(src, 0.0);
    SpdcKernel *k = NULL;
    SpdcPlateaus p;
    if (spdc_kernel_new(5e-9, 1e-9, 2.5e-11, &k) != SPDC_STATUS_OK) return 2;
    if (spdc_predict_plateaus(src, k, &p) != SPDC_STATUS_OK) return 3;
    SpdcSource *bad = NULL;
    SpdcStatus st = spdc_source_new(-1.0, 1e-9, SPDC_SHAPE_TRIANGLE, &bad);
    char msg[128];
    spdc_last_error_message(msg, sizeof msg);
    printf("%.6f %.6f %d %s\n", g, p.g2si_plateau, (int)st, msg);
    spdc_kernel_free(k);
    spdc_source_free(src);
    return 0;
}
"#;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

fn compile_c(dir: &Path, extra: &[&str]) -> std::process::Output {
    let src = dir.join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&src)
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn generated_header_is_valid_c() {
    let header = std::fs::read_to_string(crate_dir().join("include/spdc_lab.h")).unwrap();
    for name in [
        "spdc_source_new",
        "spdc_simulate",
        "spdc_pair_histogram",
        "spdc_events_read",
        "SPDC_STATUS_PANIC",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    if !have_cc() {
        eprintln!("cc not found; header syntax check skipped");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = compile_c(dir.path(), &["-fsyntax-only"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn c_program_links_against_the_shared_library() {
    // Integration test binaries live in target/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libspdc_lab_ffi.so");
    if !have_cc() || !lib.exists() {
        eprintln!("cc or {} missing; link check skipped", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe_out = dir.path().join("capi");
    let out = compile_c(
        dir.path(),
        &[
            "-o",
            exe_out.to_str().unwrap(),
            "-L",
            profile_dir.to_str().unwrap(),
            "-lspdc_lab_ffi",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe_out)
        .env("LD_LIBRARY_PATH", profile_dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "exit {:?}", run.status);
    let stdout = String::from_utf8(run.stdout).unwrap();
    let fields: Vec<&str> = stdout.split_whitespace().collect();
    // 1 + 1/(RΔt) = 51; 1 + X with X = 5.
    assert_eq!(fields[0], "51.000000");
    assert_eq!(fields[1], "6.000000");
    assert_eq!(fields[2], (SpdcStatus::InvalidArgument as i32).to_string());
    assert_eq!(fields[3], "invalid");
}
