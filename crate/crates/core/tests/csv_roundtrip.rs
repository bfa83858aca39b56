use nudging::harness::{emit_csv, read_csv, ExperimentConfig, Preset};
use nudging::{harness, Record};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wild(rng: &mut ChaCha8Rng) -> f64 {
    let mant: f64 = rng.random_range(-1.0..1.0);
    let exp: i32 = rng.random_range(-300..300);
    mant * 10f64.powi(exp)
}

fn random_record(rng: &mut ChaCha8Rng, step: usize) -> Record {
    Record {
        step,
        t: step as f64 * 1e-3,
        chi: wild(rng).abs(),
        err_l2: wild(rng).abs(),
        rel_err: wild(rng).abs(),
        proj_err: wild(rng).abs(),
        rel_proj_err: wild(rng).abs(),
        grad_v_sq: wild(rng).abs(),
        repeats: rng.random_range(0..30),
    }
}

#[test]
fn ten_thousand_records_reserialize_bit_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let records: Vec<Record> = (1..=10_000).map(|i| random_record(&mut rng, i)).collect();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    emit_csv(&records, &a).unwrap();
    let back = read_csv(&a).unwrap();
    assert_eq!(back.len(), records.len());
    for (x, y) in records.iter().zip(&back) {
        assert_eq!(x.chi.to_bits(), y.chi.to_bits());
        assert_eq!(x.err_l2.to_bits(), y.err_l2.to_bits());
        assert_eq!(x.grad_v_sq.to_bits(), y.grad_v_sq.to_bits());
        assert_eq!(x, y);
    }
    emit_csv(&back, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn simulated_run_csv_is_deterministic() {
    let cfg = ExperimentConfig::from_toml_over(
        &Preset::Saturate.config(),
        "grid_n = 16\nt_final = 0.2\n[truth]\nkind = \"dns\"\ngrid_n_fine = 32\nsubsteps = 2\n",
    )
    .unwrap();
    cfg.validate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["one.csv", "two.csv"] {
        let out = harness::run_twin(&cfg).unwrap();
        let path = dir.path().join(name);
        emit_csv(&out.records, &path).unwrap();
        files.push(std::fs::read(path).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_finite_record_survives_a_round_trip(
        step in 0usize..1_000_000,
        vals in prop::array::uniform7(prop::num::f64::POSITIVE | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL),
        repeats in 0usize..100,
    ) {
        let r = Record {
            step,
            t: vals[0],
            chi: vals[1],
            err_l2: vals[2],
            rel_err: vals[3],
            proj_err: vals[4],
            rel_proj_err: vals[5],
            grad_v_sq: vals[6],
            repeats,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        emit_csv(std::slice::from_ref(&r), &path).unwrap();
        let back = read_csv(&path).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0], &r);
    }
}
