mod common;

use proptest::prelude::*;
use qpattern::grid::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_grid(n: u32, m: u32, seed: u64) -> CellGrid {
    generate_grid(Dims::new(n, m), None, &BackgroundSpec::new(0.5, seed)).unwrap()
}

#[test]
fn half_filled_padded_array() {
    let dims = Dims::new(5, 5);
    let g = generate_grid(dims, None, &BackgroundSpec::new(0.5, 20)).unwrap();
    let padded = CellGrid::from_fn(dims, |x, y| y < 20 && g.get(x, y).unwrap());
    let used = padded.point_count() as f64 / (32.0 * 20.0);
    assert!((used - 0.5).abs() < 0.05, "{used}");
    assert!((g.rho() - 0.5).abs() < 0.05);
}

#[test]
fn period_four_column_excess() {
    let dims = Dims::new(5, 5);
    let spec = LinePatternSpec {
        spacing: 4.0,
        theta: 0.0,
        region: Region::whole(dims),
        delta_rho: 0.5,
        z0: 0,
        line_width: None,
    };
    let g = generate_grid(dims, Some(&spec), &BackgroundSpec::new(0.5, 7)).unwrap();
    let cols = g.column_counts();
    for (x, &c) in cols.iter().enumerate() {
        if x % 4 == 0 || x % 4 == 3 {
            assert_eq!(c, 32, "on-line column {x}");
        } else {
            assert_eq!(c, 0, "off-line column {x}");
        }
    }
    let spec = LinePatternSpec {
        delta_rho: 0.25,
        ..spec
    };
    let g = generate_grid(
        Dims::new(6, 8),
        Some(&LinePatternSpec {
            region: Region::whole(Dims::new(6, 8)),
            ..spec
        }),
        &BackgroundSpec::new(0.5, 3),
    )
    .unwrap();
    let cols = g.column_counts();
    let on: f64 = cols
        .iter()
        .enumerate()
        .filter(|(x, _)| x % 4 == 0 || x % 4 == 3)
        .map(|(_, &c)| c as f64)
        .sum::<f64>()
        / 32.0;
    let off: f64 = cols
        .iter()
        .enumerate()
        .filter(|(x, _)| x % 4 == 1 || x % 4 == 2)
        .map(|(_, &c)| c as f64)
        .sum::<f64>()
        / 32.0;
    assert!(
        (on / 256.0 - 0.75).abs() < 0.03 && (off / 256.0 - 0.25).abs() < 0.03,
        "{on} {off}"
    );
}

#[test]
fn density_over_seeds_within_binomial_bound() {
    let dims = Dims::new(5, 5);
    let sigma = (0.3 * 0.7 / dims.len() as f64).sqrt();
    let rhos: Vec<f64> = (0..100)
        .map(|seed| {
            generate_grid(dims, None, &BackgroundSpec::new(0.3, seed))
                .unwrap()
                .rho()
        })
        .collect();
    let outliers = rhos
        .iter()
        .filter(|r| (*r - 0.3).abs() >= 3.0 * sigma)
        .count();
    assert!(outliers <= 2, "{outliers} seeds outside 3 sigma");
    let mean = rhos.iter().sum::<f64>() / 100.0;
    assert!((mean - 0.3).abs() < 3.0 * sigma / 10.0, "{mean}");
}

#[test]
fn pattern_region_keeps_mean_density() {
    let dims = Dims::new(7, 7);
    let spec = LinePatternSpec {
        spacing: 8.0,
        theta: 0.3,
        region: Region::new(10, 20, 64, 64),
        delta_rho: 0.25,
        z0: 5,
        line_width: None,
    };
    let mean: f64 = (0..40)
        .map(|seed| {
            let g = generate_grid(dims, Some(&spec), &BackgroundSpec::new(0.5, seed)).unwrap();
            g.subgrid(&Region::new(0, 0, 128, 128)).unwrap().rho()
        })
        .sum::<f64>()
        / 40.0;
    assert!((mean - 0.5).abs() < 0.005, "{mean}");
}

#[test]
fn generation_is_deterministic() {
    let a = random_grid(4, 3, 99);
    assert_eq!(a, random_grid(4, 3, 99));
    assert_ne!(a, random_grid(4, 3, 100));
}

#[test]
fn quadrant_partition_conserves_points() {
    let g = random_grid(5, 5, 4);
    let total: usize = Region::whole(g.dims())
        .quadrants()
        .iter()
        .map(|q| g.subgrid(q).unwrap().point_count())
        .sum();
    assert_eq!(total, g.point_count());
}

#[test]
fn vertical_lines_transpose_to_horizontal() {
    let g = CellGrid::from_fn(Dims::new(4, 3), |x, _| x % 4 == 0);
    let t = g.transpose();
    assert_eq!(g.column_counts(), t.row_counts());
    assert!(t
        .row_counts()
        .iter()
        .enumerate()
        .all(|(y, &c)| (c > 0) == (y % 4 == 0)));
}

#[test]
fn random_grid_point_list_length() {
    let g = random_grid(4, 4, 12);
    let pop = g.cells().iter().filter(|&&c| c).count();
    assert_eq!(g.point_list().len(), pop);
}

#[test]
fn exact_count_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = CellGrid::random_with_count(Dims::new(4, 4), 128, &mut rng).unwrap();
    assert_eq!(g.point_count(), 128);
    assert_eq!(g.rho(), 0.5);
}

#[test]
fn grid_file_round_trip() {
    let g = random_grid(3, 4, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    std::fs::write(&path, g.to_text(&["note".into()])).unwrap();
    let back = CellGrid::from_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, g);
}

proptest! {
    #[test]
    fn transpose_is_involution(n in 0u32..6, m in 0u32..6, seed: u64) {
        let g = random_grid(n, m, seed);
        prop_assert_eq!(g.transpose().transpose(), g.clone());
        prop_assert_eq!(g.transpose().point_count(), g.point_count());
    }

    #[test]
    fn flatten_is_bijective(n in 0u32..7, m in 0u32..7, z in 0usize..1 << 14) {
        let d = Dims::new(n, m);
        let z = z % d.len();
        let (x, y) = d.unflatten(z).unwrap();
        prop_assert_eq!(d.flatten(x, y).unwrap(), z);
        prop_assert_eq!(z, x + d.width() * y);
    }

    #[test]
    fn point_list_strictly_increasing(n in 0u32..6, m in 0u32..6, seed: u64) {
        let g = random_grid(n, m, seed);
        let pts = g.point_list();
        prop_assert!(pts.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(pts.len(), g.point_count());
        prop_assert!(pts.iter().all(|&z| z < g.len()));
        prop_assert_eq!(g.rho(), pts.len() as f64 / g.len() as f64);
    }

    #[test]
    fn subgrid_partitions_conserve(n in 1u32..6, m in 1u32..6, seed: u64, depth in 1u32..3) {
        let g = random_grid(n, m, seed);
        let mut regions = vec![Region::whole(g.dims())];
        for _ in 0..depth {
            regions = regions.iter().flat_map(|r| r.quadrants()).collect();
        }
        let total: usize = regions.iter().map(|r| g.subgrid(r).unwrap().point_count()).sum();
        prop_assert_eq!(total, g.point_count());
    }

    #[test]
    fn text_round_trip(n in 0u32..6, m in 0u32..6, seed: u64) {
        let g = random_grid(n, m, seed);
        prop_assert_eq!(CellGrid::from_text(&g.to_text(&[])).unwrap(), g);
    }

    #[test]
    fn padding_adds_only_black(w in 1usize..40, h in 1usize..40, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits: Vec<bool> = (0..w * h).map(|_| rand::Rng::gen(&mut rng)).collect();
        let g = CellGrid::from_rows_padded(w, h, &bits).unwrap();
        prop_assert!(g.width().is_power_of_two() && g.width() >= w && g.width() < 2 * w.max(1) + 1);
        prop_assert_eq!(g.point_count(), bits.iter().filter(|&&b| b).count());
    }
}
