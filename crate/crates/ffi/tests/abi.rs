use std::ffi::{CStr, CString};
use std::ptr;

use windpost::data::{generate_synthetic, write_cases, SyntheticSpec};
use windpost::dists::TruncatedNormal;
use windpost::scoring::crps;
use windpost_ffi::*;

fn last_error() -> String {
    let p = wp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scores_match_the_library() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(wp_dist_tn_new(0.0, 1.0, &mut d), WpStatus::Ok);
        let mut v = 0.0;
        assert_eq!(wp_crps(d, 1.0, &mut v), WpStatus::Ok);
        let lib = crps(&TruncatedNormal::new(0.0, 1.0).unwrap().into(), 1.0).unwrap();
        assert_eq!(v.to_bits(), lib.to_bits());
        assert_eq!(wp_twcrps_indicator(d, 1.0, 0.0, &mut v), WpStatus::Ok);
        assert!((v - lib).abs() < 1e-9);
        assert_eq!(wp_pit(d, 1.0, &mut v), WpStatus::Ok);
        assert!((v - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert_eq!(wp_dist_quantile(d, 0.5, &mut v), WpStatus::Ok);
        assert!((v - 0.674_489_750_196_081_7).abs() < 1e-9);
        wp_dist_free(d);

        let members = [0.0, 2.0];
        let mut e = ptr::null_mut();
        assert_eq!(wp_dist_ensemble_new(members.as_ptr(), 2, &mut e), WpStatus::Ok);
        assert_eq!(wp_crps(e, 1.0, &mut v), WpStatus::Ok);
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(wp_log_score(e, 1.0, &mut v), WpStatus::InvalidArgument);
        wp_dist_free(e);

        let mut g = ptr::null_mut();
        assert_eq!(wp_dist_gev_new(0.0, 1.0, 0.0, &mut g), WpStatus::Ok);
        assert_eq!(wp_log_score(g, 0.0, &mut v), WpStatus::Ok);
        assert!((v - 1.0).abs() < 1e-15);
        wp_dist_free(g);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(wp_dist_tn_new(0.0, -1.0, &mut d), WpStatus::InvalidArgument);
        assert!(d.is_null());
        assert!(last_error().contains("sigma"), "{}", last_error());
        assert_eq!(wp_dist_tn_new(0.0, 1.0, ptr::null_mut()), WpStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(wp_crps(ptr::null(), 1.0, &mut v), WpStatus::NullPointer);
        assert_eq!(wp_dist_ensemble_new(ptr::null(), 3, &mut d), WpStatus::NullPointer);
        assert_eq!(wp_dist_ensemble_new(ptr::null(), 0, &mut d), WpStatus::InvalidArgument);
        wp_dist_free(ptr::null_mut());
        assert_eq!(wp_dist_tn_new(0.0, 1.0, &mut d), WpStatus::Ok);
        assert!(wp_last_error_message().is_null());
        assert_eq!(wp_twcrps_gaussian(d, 1.0, 0.0, 0.0, &mut v), WpStatus::InvalidArgument);
        wp_dist_free(d);
    }
}

#[test]
fn fits_recover_an_identity_map() {
    unsafe {
        let mut set = ptr::null_mut();
        assert_eq!(wp_training_new(3, &mut set), WpStatus::Ok);
        let mut coef = [0.0; 4];
        assert_eq!(
            wp_fit_tn(set, 10, 1, coef.as_mut_ptr(), ptr::null_mut()),
            WpStatus::Data
        );
        for i in 0..200 {
            let x = 2.0 + (i % 40) as f64 * 0.25;
            let members = [x - 0.5, x, x + 0.5];
            assert_eq!(wp_training_push_members(set, members.as_ptr(), 3, x), WpStatus::Ok);
        }
        let mut n = 0;
        assert_eq!(wp_training_len(set, &mut n), WpStatus::Ok);
        assert_eq!(n, 200);
        let mut info = WpFitInfo::default();
        assert_eq!(wp_fit_tn(set, 100, 1, coef.as_mut_ptr(), &mut info), WpStatus::Ok);
        let (a, b) = (coef[0], coef[1]);
        assert!((a + b * 5.0 - 5.0).abs() < 0.05, "{coef:?}");
        assert!(info.evaluations > 0 && info.objective < 0.1);
        let mut g = [0.0; 5];
        assert_eq!(wp_fit_gev(set, 100, 1, g.as_mut_ptr(), &mut info), WpStatus::Ok);
        assert!(g.iter().all(|c| c.is_finite()));
        assert_eq!(
            wp_training_push_members(set, [1.0].as_ptr(), 1, 1.0),
            WpStatus::InvalidArgument
        );
        wp_training_free(set);
    }
}

#[test]
fn runs_a_dataset_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        n_stations: 3,
        n_days: 45,
        k: 10,
        ..SyntheticSpec::default()
    };
    let path = tmp.path().join("cases.csv");
    write_cases(&generate_synthetic(&spec).unwrap().dataset, &path).unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let config = CString::new("n_min = 60\n").unwrap();
    let bad = CString::new("window_days = 0\n").unwrap();
    let out_dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(wp_dataset_read(c_path.as_ptr(), &mut data), WpStatus::Ok);
        let mut n = 0;
        assert_eq!(wp_dataset_len(data, &mut n), WpStatus::Ok);
        assert_eq!(n, 135);

        let mut run = ptr::null_mut();
        assert_eq!(wp_run(data, bad.as_ptr(), &mut run), WpStatus::Config);
        assert_eq!(wp_run(data, ptr::null(), &mut run), WpStatus::Data);
        assert_eq!(wp_run(data, config.as_ptr(), &mut run), WpStatus::Ok);

        let mut needed = 0;
        assert_eq!(
            wp_run_scores_csv(run, ptr::null_mut(), 0, &mut needed),
            WpStatus::BufferTooSmall
        );
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(
            wp_run_scores_csv(run, buf.as_mut_ptr(), needed, &mut needed),
            WpStatus::Ok
        );
        let csv = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("forecaster,crps,"));

        assert_eq!(
            wp_run_records_csv(run, ptr::null_mut(), 0, &mut needed),
            WpStatus::BufferTooSmall
        );
        assert!(needed > 1000);
        assert_eq!(wp_run_write_report(run, out_dir.as_ptr()), WpStatus::Ok);
        assert!(tmp.path().join("scores.csv").exists());
        wp_run_free(run);
        wp_dataset_free(data);

        let missing = CString::new("/nonexistent/cases.csv").unwrap();
        assert_eq!(wp_dataset_read(missing.as_ptr(), &mut data), WpStatus::Io);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(wp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
