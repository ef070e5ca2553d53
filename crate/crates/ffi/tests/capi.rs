use std::ffi::CStr;
use std::ptr;

use ctxmatch::blob::{blob_match, BlobConfig};
use ctxmatch::dtm::{dtm, DtmConfig};
use ctxmatch::model::{one_sac, ModelKind};
use ctxmatch::synth::{synth, SynthConfig, SynthPair};
use ctxmatch_ffi::*;

struct Handles {
    d: *mut CtxDistanceMatrix,
    ctx: *mut CtxPairContext,
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            ctxmatch_distance_matrix_free(self.d);
            ctxmatch_pair_context_free(self.ctx);
        }
    }
}

fn handles(pair: &SynthPair) -> Handles {
    let xy = |k: &[ctxmatch::Keypoint]| k.iter().flat_map(|p| [p.x, p.y]).collect::<Vec<_>>();
    let abc = |k: &[ctxmatch::Keypoint]| {
        k.iter()
            .flat_map(|p| {
                let e = p.ellipse.unwrap();
                [e.a, e.b, e.c]
            })
            .collect::<Vec<_>>()
    };
    let c = &pair.ctx;
    let mut h = Handles {
        d: ptr::null_mut(),
        ctx: ptr::null_mut(),
    };
    unsafe {
        let dm = &pair.distances;
        assert_eq!(
            ctxmatch_distance_matrix_new(dm.rows(), dm.cols(), dm.values().as_ptr(), &mut h.d),
            CtxStatus::Ok
        );
        let (x1, x2) = (xy(&c.keypoints1), xy(&c.keypoints2));
        assert_eq!(
            ctxmatch_pair_context_new(
                x1.as_ptr(),
                c.keypoints1.len(),
                x2.as_ptr(),
                c.keypoints2.len(),
                c.width1,
                c.height1,
                c.width2,
                c.height2,
                &mut h.ctx
            ),
            CtxStatus::Ok
        );
        for (image, kps) in [(1, &c.keypoints1), (2, &c.keypoints2)] {
            let v = abc(kps);
            assert_eq!(
                ctxmatch_pair_context_set_ellipses(h.ctx, image, v.as_ptr(), kps.len()),
                CtxStatus::Ok
            );
        }
    }
    h
}

fn collect(set: *const CtxMatchSet) -> Vec<(usize, usize, f64)> {
    unsafe {
        (0..ctxmatch_match_set_len(set))
            .map(|k| {
                let (mut i, mut j, mut s) = (0, 0, 0.0);
                assert_eq!(ctxmatch_match_set_get(set, k, &mut i, &mut j, &mut s), CtxStatus::Ok);
                (i, j, s)
            })
            .collect()
    }
}

fn rust(set: &ctxmatch::MatchSet) -> Vec<(usize, usize, f64)> {
    set.iter().map(|m| (m.i, m.j, m.score)).collect()
}

fn last_error() -> String {
    let p = ctxmatch_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn stages_match_the_library() {
    let pair = synth(&SynthConfig {
        n_inliers: 80,
        n_outliers: 60,
        seed: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    let h = handles(&pair);
    unsafe {
        let cfg = ctxmatch_blob_config_best();
        let mut blob = ptr::null_mut();
        assert_eq!(ctxmatch_blob_match(h.d, h.ctx, &cfg, &mut blob), CtxStatus::Ok);
        let expected_blob = blob_match(&pair.distances, &pair.ctx, &BlobConfig::best()).unwrap();
        assert_eq!(collect(blob), rust(&expected_blob));

        let mut filtered = ptr::null_mut();
        assert_eq!(
            ctxmatch_dtm(blob, h.ctx, CtxBoundaryMode::Alpha, false, &mut filtered),
            CtxStatus::Ok
        );
        let expected_filtered = dtm(&expected_blob, &pair.ctx, &DtmConfig::default()).unwrap();
        assert_eq!(collect(filtered), rust(&expected_filtered));

        let mut fitted = ptr::null_mut();
        let mut model = [0.0; 9];
        let mut failed = true;
        assert_eq!(
            ctxmatch_one_sac(
                filtered,
                h.ctx,
                CtxModelKind::Homography,
                15.0,
                &mut fitted,
                model.as_mut_ptr(),
                &mut failed
            ),
            CtxStatus::Ok
        );
        let expected = one_sac(&expected_filtered, ModelKind::Homography, &pair.ctx, 15.0).unwrap();
        assert_eq!(failed, expected.failed);
        assert_eq!(collect(fitted), rust(&expected.matches));
        assert_eq!(model, expected.model.unwrap().to_array());

        for s in [blob, filtered, fitted] {
            ctxmatch_match_set_free(s);
        }
    }
}

#[test]
fn config_round_trips() {
    let best = ctxmatch_blob_config_best();
    let base = ctxmatch_blob_config_baseline();
    assert_eq!(best.f, 10);
    assert!(best.f_union);
    assert_eq!(best.combiner, CtxCombiner::Harmonic);
    assert_eq!(base.f, 0);
    assert_eq!(base.f_prime, 1);
    assert_eq!(base.fginn, CtxFginn::None);
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(
            ctxmatch_distance_matrix_new(2, 2, ptr::null(), &mut d),
            CtxStatus::NullPointer
        );
        assert!(last_error().contains("values"));
        assert!(d.is_null());

        let v = [1.0, f64::NAN, 2.0, 3.0];
        assert_eq!(ctxmatch_distance_matrix_new(2, 2, v.as_ptr(), &mut d), CtxStatus::InvalidInput);

        let xy = [1.0, 1.0, 5.0, 5.0];
        let mut ctx = ptr::null_mut();
        assert_eq!(
            ctxmatch_pair_context_new(xy.as_ptr(), 2, xy.as_ptr(), 2, 10.0, 10.0, 10.0, 10.0, &mut ctx),
            CtxStatus::Ok
        );
        let abc = [1.0, 1.0, 0.0];
        assert_eq!(
            ctxmatch_pair_context_set_ellipses(ctx, 1, abc.as_ptr(), 1),
            CtxStatus::DimensionMismatch
        );
        assert_eq!(
            ctxmatch_pair_context_set_ellipses(ctx, 3, abc.as_ptr(), 2),
            CtxStatus::InvalidInput
        );

        let (i, j, s) = ([0usize], [7usize], [0.1]);
        let mut set = ptr::null_mut();
        assert_eq!(
            ctxmatch_match_set_new(i.as_ptr(), j.as_ptr(), s.as_ptr(), 1, &mut set),
            CtxStatus::Ok
        );
        assert_eq!(
            ctxmatch_match_set_get(set, 1, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            CtxStatus::OutOfRange
        );
        let mut out = ptr::null_mut();
        assert_ne!(ctxmatch_dtm(set, ctx, CtxBoundaryMode::Alpha, false, &mut out), CtxStatus::Ok);
        assert!(out.is_null());

        let mut buf = [0 as std::ffi::c_char; 8];
        let full = ctxmatch_last_error_copy(buf.as_mut_ptr(), buf.len());
        assert!(full > 7);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 7);

        assert_eq!(ctxmatch_match_set_len(ptr::null()), 0);
        ctxmatch_match_set_free(set);
        ctxmatch_pair_context_free(ctx);
        ctxmatch_distance_matrix_free(ptr::null_mut());
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ctxmatch_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
