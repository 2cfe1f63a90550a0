//! Exercises the C ABI exactly as a foreign caller would: through raw
//! pointers and status codes.

use std::ptr;

use kms_capi::*;

fn options(k: u32) -> KmsOptions {
    KmsOptions {
        k,
        se: KmsSeKind::B1,
        boundary: KmsBoundary::Clamp,
        engine: KmsEngine::Sequential,
        delta_max: 0,
    }
}

#[test]
fn points_pipeline_through_the_abi() {
    // The 1x4 two-cell line: k = 1 merges at delta 3.
    let xs = [0.0f64, 3.0];
    let ys = [0.0f64, 0.0];
    let mut grid: *mut KmsGrid = ptr::null_mut();
    unsafe {
        assert!(kms_grid_from_points(xs.as_ptr(), ys.as_ptr(), 2, 1.0, &mut grid) == KmsStatus::Ok);
        assert_eq!(kms_grid_width(grid), 4);
        assert_eq!(kms_grid_height(grid), 1);
        assert_eq!(kms_grid_foreground_count(grid), 2);

        let mut intrinsic = 0u32;
        assert!(
            kms_grid_intrinsic_max_clusters(grid, KmsSeKind::B1, KmsBoundary::Clamp, &mut intrinsic)
                == KmsStatus::Ok
        );
        assert_eq!(intrinsic, 2);

        let mut clustering: *mut KmsClustering = ptr::null_mut();
        assert!(kms_cluster_run(grid, &options(1), &mut clustering) == KmsStatus::Ok);
        assert!(kms_clustering_converged(clustering));
        assert_eq!(kms_clustering_cluster_count(clustering), 1);
        assert_eq!(kms_clustering_passes(clustering), 4);

        let mut history = vec![0u32; kms_clustering_delta_history_len(clustering)];
        assert!(
            kms_clustering_copy_delta_history(clustering, history.as_mut_ptr(), history.len())
                == KmsStatus::Ok
        );
        assert_eq!(history, vec![1, 2, 3, 1]);

        let len = (kms_clustering_width(clustering) * kms_clustering_height(clustering)) as usize;
        let mut labels = vec![0i32; len];
        assert!(
            kms_clustering_copy_labels(clustering, labels.as_mut_ptr(), len) == KmsStatus::Ok
        );
        assert_eq!(labels, vec![3, -1, -1, 3]);

        kms_clustering_free(clustering);
        kms_grid_free(grid);
    }
}

#[test]
fn pixel_grids_and_noise_removal() {
    // 8x4 image: a 2x3 dark block and one lone dark pixel.
    let mut pixels = [255u8; 32];
    for row in 0..2 {
        for col in 0..3 {
            pixels[row * 8 + col] = 0;
        }
    }
    pixels[3 * 8 + 6] = 0;

    let mut grid: *mut KmsGrid = ptr::null_mut();
    unsafe {
        assert!(kms_grid_from_pixels(pixels.as_ptr(), 8, 4, 128, &mut grid) == KmsStatus::Ok);
        assert_eq!(kms_grid_foreground_count(grid), 7);

        let mut clustering: *mut KmsClustering = ptr::null_mut();
        assert!(kms_cluster_run(grid, &options(5), &mut clustering) == KmsStatus::Ok);
        assert_eq!(kms_clustering_cluster_count(clustering), 2);

        let mut removed = 0u64;
        assert!(kms_clustering_remove_small(clustering, 1, &mut removed) == KmsStatus::Ok);
        assert_eq!(removed, 1, "the lone pixel is erased at tau = 1");
        assert_eq!(kms_clustering_cluster_count(clustering), 1);

        kms_clustering_free(clustering);
        kms_grid_free(grid);
    }
}

#[test]
fn random_grids_and_custom_elements() {
    let mut grid: *mut KmsGrid = ptr::null_mut();
    unsafe {
        assert!(kms_grid_random(32, 32, 100, 7, &mut grid) == KmsStatus::Ok);
        assert_eq!(kms_grid_foreground_count(grid), 100);

        // Same element as B1, passed as raw offset pairs.
        let offsets: Vec<i32> = [
            (0, 0),
            (0, 1),
            (0, -1),
            (1, 0),
            (-1, 0),
            (-1, -1),
            (1, -1),
            (-1, 1),
            (1, 1),
        ]
        .iter()
        .flat_map(|&(dy, dx)| [dy, dx])
        .collect();

        let mut custom: *mut KmsClustering = ptr::null_mut();
        assert!(
            kms_cluster_run_custom(grid, &options(10), offsets.as_ptr(), 9, &mut custom)
                == KmsStatus::Ok
        );
        let mut builtin: *mut KmsClustering = ptr::null_mut();
        assert!(kms_cluster_run(grid, &options(10), &mut builtin) == KmsStatus::Ok);
        assert_eq!(
            kms_clustering_cluster_count(custom),
            kms_clustering_cluster_count(builtin)
        );

        kms_clustering_free(custom);
        kms_clustering_free(builtin);
        kms_grid_free(grid);
    }
}

#[test]
fn status_codes_cover_misuse() {
    unsafe {
        let mut grid: *mut KmsGrid = ptr::null_mut();
        assert!(
            kms_grid_from_points(ptr::null(), ptr::null(), 0, 1.0, &mut grid)
                == KmsStatus::NullPointer
        );

        // Empty point set is invalid input.
        let xs: [f64; 0] = [];
        let ys: [f64; 0] = [];
        assert!(
            kms_grid_from_points(xs.as_ptr(), ys.as_ptr(), 0, 1.0, &mut grid)
                == KmsStatus::InvalidInput
        );

        // k = 0 is rejected.
        let xs = [0.0f64];
        let ys = [0.0f64];
        assert!(kms_grid_from_points(xs.as_ptr(), ys.as_ptr(), 1, 1.0, &mut grid) == KmsStatus::Ok);
        let mut clustering: *mut KmsClustering = ptr::null_mut();
        assert!(kms_cluster_run(grid, &options(0), &mut clustering) == KmsStatus::InvalidInput);

        // An element without all four directions is rejected.
        let offsets = [0i32, 0, 0, 1];
        assert!(
            kms_cluster_run_custom(grid, &options(1), offsets.as_ptr(), 2, &mut clustering)
                == KmsStatus::InvalidInput
        );

        // Wrong buffer lengths are reported, not written past.
        assert!(kms_cluster_run(grid, &options(1), &mut clustering) == KmsStatus::Ok);
        let mut tiny = [0i32; 0];
        assert!(
            kms_clustering_copy_labels(clustering, tiny.as_mut_ptr(), 0) == KmsStatus::BufferSize
        );

        // Null handles degrade to zeros and status codes, never crashes.
        assert_eq!(kms_clustering_cluster_count(ptr::null()), 0);
        assert_eq!(kms_grid_width(ptr::null()), 0);
        assert!(!kms_clustering_converged(ptr::null()));

        // Free is null-safe.
        kms_clustering_free(ptr::null_mut());
        kms_grid_free(ptr::null_mut());

        kms_clustering_free(clustering);
        kms_grid_free(grid);

        // Status messages are readable C strings.
        let msg = std::ffi::CStr::from_ptr(kms_status_message(KmsStatus::InvalidInput));
        assert_eq!(msg.to_str().unwrap(), "invalid input");
    }
}
