//! Checks against the real MNIST files; set `BIOLCNET_DATA_DIR` if they are
//! not under `data/mnist` at the workspace root.

use std::path::{Path, PathBuf};

use biolcnet::data::{build_xor_mnist, center_crop, filter_classes, load_mnist, XOR_CANVAS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mnist_dir() -> PathBuf {
    let dir = std::env::var_os("BIOLCNET_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    assert!(
        dir.join("train-images-idx3-ubyte").exists(),
        "MNIST IDX files not found in {}; set BIOLCNET_DATA_DIR",
        dir.display()
    );
    dir
}

#[test]
fn split_sizes_and_binary_subset() {
    let train = load_mnist(&mnist_dir(), true).unwrap();
    let test = load_mnist(&mnist_dir(), false).unwrap();
    assert_eq!((train.len(), train.height(), train.width()), (60000, 28, 28));
    assert_eq!(test.len(), 10000);
    assert_eq!(train.class_count(), 10);
    let zero_one = filter_classes(&train, &[0, 1], true).unwrap();
    assert_eq!(zero_one.len(), 12665);
    assert_eq!(filter_classes(&test, &[0, 1], true).unwrap().len(), 2115);
    assert!(zero_one.labels().iter().all(|&l| l < 2));
}

#[test]
fn center_crop_keeps_almost_all_ink() {
    let test = load_mnist(&mnist_dir(), false).unwrap();
    let cropped = center_crop(&test, 22).unwrap();
    let ink = |d: &biolcnet::Dataset| -> u64 {
        (0..d.len())
            .map(|i| d.image(i).iter().map(|&p| p as u64).sum::<u64>())
            .sum()
    };
    let kept = ink(&cropped) as f64 / ink(&test) as f64;
    assert!(kept >= 0.99, "crop kept {kept:.4} of the intensity");
}

#[test]
fn xor_mnist_is_balanced_and_labelled_by_parity() {
    let test = load_mnist(&mnist_dir(), false).unwrap();
    let xor = build_xor_mnist(&test, 400, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!((xor.len(), xor.height(), xor.width()), (400, XOR_CANVAS, XOR_CANVAS));
    let ones = xor.labels().iter().filter(|&&l| l == 1).count();
    assert_eq!(ones, 200);
    let patterns = xor.patterns().unwrap();
    for (&label, &(a, b)) in xor.labels().iter().zip(patterns) {
        assert_eq!(label, a ^ b);
    }
}
