use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use emofeat::nn::Tensor;
use emofeat::samplecnn::{
    build_model, pool_features, save_checkpoint, Checkpoint, SampleCnnConfig,
};
use emofeat::svm::{save_svm_model, train_ovr, Standardizer, SvmConfig, SvmModel};
use emofeat_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = emofeat_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn fixtures(dir: &Path) -> (PathBuf, PathBuf, SvmModel) {
    let mut model = build_model::<f32>(&SampleCnnConfig::reduced(8, vec![8, 16], 729), 4).unwrap();
    model.reset_running_stats();
    let ckpt = dir.join("m.ckpt");
    save_checkpoint(&Checkpoint::new(model), &ckpt).unwrap();

    let x: Vec<Vec<f64>> = (0..24)
        .map(|i| {
            (0..4)
                .map(|j| ((i * 7 + j * 3) % 11) as f64 / 3.0 + (i % 3) as f64 * (j as f64 - 1.5))
                .collect()
        })
        .collect();
    let y: Vec<usize> = (0..24).map(|i| i % 3).collect();
    let std = Standardizer::fit(&x).unwrap();
    let linear = train_ovr(
        &std.apply_rows(&x).unwrap(),
        &y,
        3,
        &SvmConfig {
            c: 0.5,
            ..Default::default()
        },
    )
    .unwrap();
    let svm = SvmModel::new(
        vec!["low".into(), "medium".into(), "high".into()],
        0.5,
        true,
        std,
        linear,
    );
    let svm_path = dir.join("svm.json");
    save_svm_model(&svm, &svm_path).unwrap();
    (ckpt, svm_path, svm)
}

#[test]
fn features_match_core() {
    let dir = tempfile::tempdir().unwrap();
    let (ckpt, _, _) = fixtures(dir.path());
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { emofeat_model_load(cstr(&ckpt).as_ptr(), &mut handle) },
        EmofeatStatus::Ok
    );
    assert!(emofeat_last_error().is_null());
    let len = unsafe { emofeat_model_input_len(handle) };
    let dim = unsafe { emofeat_model_pooled_dim(handle) };
    assert_eq!((len, dim), (729, 1536));

    let samples: Vec<f32> = (0..2 * len)
        .map(|i| ((i * 31 % 97) as f32 - 48.0) / 60.0)
        .collect();
    let mut out = vec![0.0f32; 2 * dim];
    let status = unsafe {
        emofeat_model_features(
            handle,
            samples.as_ptr(),
            samples.len(),
            2,
            out.as_mut_ptr(),
            out.len(),
        )
    };
    assert_eq!(status, EmofeatStatus::Ok);

    let core = emofeat::samplecnn::load_checkpoint(&ckpt).unwrap().model;
    let mut normalized = Vec::new();
    for c in samples.chunks(len) {
        let mean = c.iter().map(|&v| f64::from(v)).sum::<f64>() / len as f64;
        normalized.extend(c.iter().map(|&v| (f64::from(v) - mean) as f32));
    }
    let expected = pool_features(
        &core
            .features(&Tensor::new(vec![2, len, 1], normalized).unwrap())
            .unwrap(),
    )
    .unwrap();
    assert_eq!(out, expected.data());

    let mut short = vec![0.0f32; dim];
    let status = unsafe {
        emofeat_model_features(
            handle,
            samples.as_ptr(),
            samples.len(),
            2,
            short.as_mut_ptr(),
            short.len(),
        )
    };
    assert_eq!(status, EmofeatStatus::InvalidArgument);
    assert!(last_error().contains("out"));
    unsafe { emofeat_model_free(handle) };
}

#[test]
fn svm_scores_and_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let (_, svm_path, svm) = fixtures(dir.path());
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { emofeat_svm_load(cstr(&svm_path).as_ptr(), &mut handle) },
        EmofeatStatus::Ok
    );
    assert_eq!(
        unsafe { (emofeat_svm_num_classes(handle), emofeat_svm_dim(handle)) },
        (3, 4)
    );
    let x = [0.3, 1.2, -0.7, 2.5];
    let mut scores = [0.0; 3];
    let mut class = usize::MAX;
    unsafe {
        assert_eq!(
            emofeat_svm_decision(handle, x.as_ptr(), 4, scores.as_mut_ptr(), 3),
            EmofeatStatus::Ok
        );
        assert_eq!(
            emofeat_svm_predict(handle, x.as_ptr(), 4, &mut class),
            EmofeatStatus::Ok
        );
    }
    assert_eq!(scores.to_vec(), svm.decision(&x).unwrap());
    assert_eq!(class, svm.predict(&x).unwrap());
    unsafe {
        assert_eq!(
            emofeat_svm_decision(handle, x.as_ptr(), 3, scores.as_mut_ptr(), 3),
            EmofeatStatus::InvalidArgument
        );
        emofeat_svm_free(handle);
    }
}

#[test]
fn pooling_and_uar() {
    let fmap = [1.0f32, -2.0, 3.0, 4.0, 5.0, 0.0];
    let mut out = [0.0f32; 4];
    assert_eq!(
        unsafe { emofeat_pool(fmap.as_ptr(), 3, 2, out.as_mut_ptr(), 4) },
        EmofeatStatus::Ok
    );
    assert_eq!(out, [3.0, 2.0 / 3.0, 5.0, 4.0]);

    let counts: [u64; 9] = [2, 0, 0, 0, 1, 1, 0, 0, 2];
    let mut u = 0.0;
    assert_eq!(
        unsafe { emofeat_uar(counts.as_ptr(), 3, 0, &mut u) },
        EmofeatStatus::Ok
    );
    assert!((u - 5.0 / 6.0).abs() < 1e-12);
    let missing: [u64; 4] = [3, 0, 0, 0];
    unsafe {
        assert_eq!(
            emofeat_uar(missing.as_ptr(), 2, 0, &mut u),
            EmofeatStatus::Ok
        );
        assert_eq!(u, 1.0);
        assert_eq!(
            emofeat_uar(missing.as_ptr(), 2, 1, &mut u),
            EmofeatStatus::Ok
        );
        assert_eq!(u, 0.5);
        assert_eq!(
            emofeat_uar([0u64; 4].as_ptr(), 2, 0, &mut u),
            EmofeatStatus::Data
        );
    }
}

#[test]
fn errors_are_reported() {
    let mut handle = ptr::null_mut();
    let missing = CString::new("/nonexistent/model.ckpt").unwrap();
    assert_eq!(
        unsafe { emofeat_model_load(missing.as_ptr(), &mut handle) },
        EmofeatStatus::Io
    );
    assert!(last_error().contains("/nonexistent/model.ckpt"));
    assert!(handle.is_null());
    assert_eq!(
        unsafe { emofeat_model_load(ptr::null(), &mut handle) },
        EmofeatStatus::NullPointer
    );

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    assert_eq!(
        unsafe { emofeat_model_load(cstr(&junk).as_ptr(), &mut handle) },
        EmofeatStatus::Format
    );
    let mut svm = ptr::null_mut();
    assert_eq!(
        unsafe { emofeat_svm_load(cstr(&junk).as_ptr(), &mut svm) },
        EmofeatStatus::Format
    );
    unsafe {
        emofeat_model_free(ptr::null_mut());
        emofeat_svm_free(ptr::null_mut());
        assert_eq!(emofeat_model_input_len(ptr::null()), 0);
    }
    let version = unsafe { CStr::from_ptr(emofeat_version()) }
        .to_str()
        .unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

/// Compiles the C smoke program against the generated header and the
/// static library, then checks its output against the Rust side.
#[test]
fn c_program_links_and_runs() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let target = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = target.join("libemofeat_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available as `cc`");
    assert!(status.success());

    let (ckpt, svm_path, svm) = fixtures(dir.path());
    let out = Command::new(&exe)
        .arg(&ckpt)
        .arg(&svm_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    let fields: Vec<&str> = lines.next().unwrap().split(' ').collect();
    let x = [0.5, -1.0, 0.25, 2.0];
    assert_eq!(
        fields[0].parse::<usize>().unwrap(),
        svm.predict(&x).unwrap()
    );
    let scores: Vec<f64> = fields[1..].iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(scores, svm.decision(&x).unwrap());
    let u: f64 = lines.next().unwrap().parse().unwrap();
    assert!((u - 5.0 / 6.0).abs() < 1e-12);
}
