use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use met_dgldpc_ffi::*;

const SPC_PAIR: &str = r#"{"edge_types":1,
    "vn_types":[{"name":"v","generator":[[1,1]],"socket_types":[1,1],"count":3}],
    "cn_types":[{"name":"c","parity_check":[[1,1,1]],"socket_types":[1,1,1],"count":2}]}"#;

const REGULAR_3_6: &str = r#"{"edge_types":1,
    "vn_types":[{"name":"v","generator":[[1,1,1]],"socket_types":[1,1,1],"count":2}],
    "cn_types":[{"name":"c","parity_check":[[1,1,1,1,1,1]],"socket_types":[1,1,1,1,1,1],"count":1}]}"#;

fn last_error() -> String {
    unsafe {
        let n = met_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0 as c_char; n];
        assert_eq!(met_last_error_message(buf.as_mut_ptr(), n), n);
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

struct Handle(*mut MetEnsemble);

impl Handle {
    fn new(json: &str) -> Result<Handle, (MetStatus, String)> {
        let text = CString::new(json).unwrap();
        let mut h = ptr::null_mut();
        match unsafe { met_ensemble_from_json(text.as_ptr(), &mut h) } {
            MetStatus::Ok => Ok(Handle(h)),
            status => {
                assert!(h.is_null());
                Err((status, last_error()))
            }
        }
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { met_ensemble_free(self.0) }
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(met_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn handle_basics() {
    let h = Handle::new(SPC_PAIR).unwrap();
    let mut n = 0usize;
    assert_eq!(
        unsafe { met_ensemble_num_edge_types(h.0, &mut n) },
        MetStatus::Ok
    );
    assert_eq!(n, 1);
    let (mut len, mut dim) = (0u64, 0i64);
    assert_eq!(
        unsafe { met_ensemble_size(h.0, &mut len, &mut dim) },
        MetStatus::Ok
    );
    // one information bit per VN, one constraint per CN
    assert_eq!((len, dim), (3, 1));
    assert_eq!(last_error(), "");
}

#[test]
fn digest_buffer_protocol() {
    let h = Handle::new(SPC_PAIR).unwrap();
    let mut needed = 0usize;
    let status = unsafe { met_ensemble_digest(h.0, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(status, MetStatus::BufferTooSmall);
    assert_eq!(needed, 65);
    let mut small = [1 as c_char; 10];
    let status = unsafe { met_ensemble_digest(h.0, small.as_mut_ptr(), small.len(), &mut needed) };
    assert_eq!(status, MetStatus::BufferTooSmall);
    assert!(small.iter().all(|&c| c == 1));
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(
        unsafe { met_ensemble_digest(h.0, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) },
        MetStatus::Ok
    );
    let digest = unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_str()
        .unwrap()
        .to_string();
    let spec = met_dgldpc::parse_spec(SPC_PAIR).unwrap();
    assert_eq!(digest, spec.digest());
}

#[test]
fn exit_map_and_threshold() {
    let h = Handle::new(REGULAR_3_6).unwrap();
    let eps = 0.4;
    let x = [0.3];
    let mut y = [0.0];
    assert_eq!(
        unsafe { met_exit_map(h.0, x.as_ptr(), 1, eps, y.as_mut_ptr()) },
        MetStatus::Ok
    );
    // repetition-3 VN and SPC-6 CN in information form
    let want = 1.0 - eps * (1.0 - x[0].powi(5)).powi(2);
    assert!((y[0] - want).abs() < 1e-12, "{} vs {want}", y[0]);

    let status = unsafe { met_exit_map(h.0, x.as_ptr(), 2, eps, y.as_mut_ptr()) };
    assert_eq!(status, MetStatus::Validation);
    assert!(last_error().contains("edge types"));

    let mut thr = 0.0;
    assert_eq!(unsafe { met_threshold(h.0, 0.0, &mut thr) }, MetStatus::Ok);
    assert!((thr - 0.42944).abs() < 1e-4, "{thr}");
}

#[test]
fn stability_entry_points() {
    let h = Handle::new(SPC_PAIR).unwrap();
    let mut sigma = 0.0;
    assert_eq!(
        unsafe { met_stability_sigma(h.0, 0.25, &mut sigma) },
        MetStatus::Ok
    );
    assert!((sigma - 0.5).abs() < 1e-12);
    let (mut bound, mut unbounded) = (0.0, true);
    assert_eq!(
        unsafe { met_stability_bound(h.0, 0.0, &mut bound, &mut unbounded) },
        MetStatus::Ok
    );
    assert!(!unbounded);
    assert!((bound - 0.5).abs() < 1e-9);
}

#[test]
fn unbounded_stability() {
    // q = 3 repetition VNs have no weight-2 codewords, so P vanishes
    let doc = r#"{"edge_types":1,
        "vn_types":[{"name":"v","generator":[[1,1,1]],"socket_types":[1,1,1],"count":2}],
        "cn_types":[{"name":"c","parity_check":[[1,1,1]],"socket_types":[1,1,1],"count":2}]}"#;
    let h = Handle::new(doc).unwrap();
    let (mut bound, mut unbounded) = (0.0, false);
    assert_eq!(
        unsafe { met_stability_bound(h.0, 0.0, &mut bound, &mut unbounded) },
        MetStatus::Ok
    );
    assert!(unbounded);
    assert_eq!(bound, 1.0);
}

#[test]
fn simulate_is_deterministic() {
    let h = Handle::new(REGULAR_3_6).unwrap();
    let run = || {
        let (mut f, mut ber) = (0u64, 0.0);
        assert_eq!(
            unsafe { met_simulate_point(h.0, 0.3, 200, 10, 7, &mut f, &mut ber) },
            MetStatus::Ok
        );
        (f, ber)
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.0, 0);
    let (mut f, mut ber) = (0u64, 0.0);
    let status = unsafe { met_simulate_point(h.0, 0.3, 10, 0, 7, &mut f, &mut ber) };
    assert_eq!(status, MetStatus::Validation);
}

#[test]
fn error_codes() {
    let (status, msg) = Handle::new("{").err().unwrap();
    assert_eq!(status, MetStatus::Validation);
    assert!(msg.contains("EOF"), "{msg}");

    let punctured = r#"{"edge_types":1,
        "vn_types":[{"name":"v","generator":[[1,0,1],[0,1,1]],"puncture":[1,0],"socket_types":[1,1,1],"count":2}],
        "cn_types":[{"name":"c","parity_check":[[1,1,1]],"socket_types":[1,1,1],"count":2}]}"#;
    let h = Handle::new(punctured).unwrap();
    let mut sigma = 0.0;
    assert_eq!(
        unsafe { met_stability_sigma(h.0, 0.3, &mut sigma) },
        MetStatus::Hypothesis
    );
    assert!(last_error().contains("punctur"));

    let ones = vec!["1"; 25].join(",");
    let big = format!(
        r#"{{"edge_types":1,
            "vn_types":[{{"name":"v","generator":[[1]],"socket_types":[1],"count":25}}],
            "cn_types":[{{"name":"c","parity_check":[[{ones}]],"socket_types":[{ones}],"count":1}}]}}"#
    );
    assert_eq!(Handle::new(&big).err().unwrap().0, MetStatus::Capacity);

    let bad_utf8 = [0xffu8, 0];
    let mut raw = ptr::null_mut();
    let status = unsafe { met_ensemble_from_json(bad_utf8.as_ptr().cast(), &mut raw) };
    assert_eq!(status, MetStatus::InvalidUtf8);
}

#[test]
fn null_arguments_are_rejected() {
    let h = Handle::new(SPC_PAIR).unwrap();
    let mut n = 0usize;
    unsafe {
        assert_eq!(
            met_ensemble_num_edge_types(ptr::null(), &mut n),
            MetStatus::NullPointer
        );
        assert_eq!(
            met_ensemble_num_edge_types(h.0, ptr::null_mut()),
            MetStatus::NullPointer
        );
        let mut raw = ptr::null_mut();
        assert_eq!(
            met_ensemble_from_json(ptr::null(), &mut raw),
            MetStatus::NullPointer
        );
        let text = CString::new(SPC_PAIR).unwrap();
        assert_eq!(
            met_ensemble_from_json(text.as_ptr(), ptr::null_mut()),
            MetStatus::NullPointer
        );
        let mut y = [0.0];
        assert_eq!(
            met_exit_map(h.0, ptr::null(), 1, 0.3, y.as_mut_ptr()),
            MetStatus::NullPointer
        );
        let mut t = 0.0;
        assert_eq!(
            met_threshold(ptr::null(), 0.0, &mut t),
            MetStatus::NullPointer
        );
        met_ensemble_free(ptr::null_mut());
    }
    assert!(last_error().contains("null"));
}

#[test]
fn errors_are_per_thread() {
    let _ = Handle::new("{");
    let here = last_error();
    let there = std::thread::spawn(last_error).join().unwrap();
    assert!(!here.is_empty());
    assert_eq!(there, "");
}

#[test]
fn header_is_valid_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/met_dgldpc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "met_ensemble_from_json",
        "met_ensemble_free",
        "met_exit_map",
        "met_threshold",
        "met_stability_sigma",
        "met_stability_bound",
        "met_simulate_point",
        "met_last_error_message",
        "typedef struct MetEnsemble MetEnsemble;",
        "MET_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(cc) = which_cc() else { return };
    let src = std::env::temp_dir().join(format!("met_dgldpc_hdr_{}.c", std::process::id()));
    std::fs::write(
        &src,
        "#include \"met_dgldpc.h\"\nint main(void) { MetEnsemble *h = 0; return (int)met_ensemble_from_json(\"{}\", &h); }\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .unwrap();
    std::fs::remove_file(&src).ok();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            std::process::Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
