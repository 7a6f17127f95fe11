use court_trace::phases::{bd_td_curve, kmeans, select_k, FeatureMatrix, KMeansOptions};
use proptest::prelude::*;

fn rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..5).prop_flat_map(|dim| prop::collection::vec(prop::collection::vec(-20.0f64..20.0, dim), 2..40))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn opts(seed: u64) -> KMeansOptions {
    KMeansOptions {
        seed,
        max_iter: 300,
        n_restarts: 3,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_and_monotone_objective(rows in rows(), k in 1usize..6, seed in any::<u64>()) {
        let k = k.min(rows.len());
        let m = kmeans(&FeatureMatrix::from_rows(rows.clone()), k, &opts(seed)).unwrap();
        let td = m.total_deviance;
        prop_assert!((m.between_deviance + m.within_deviance - td).abs() <= 1e-9 * td.max(1e-12));
        prop_assert!(m.objective_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12));
        prop_assert_eq!(m.sizes.iter().sum::<usize>(), rows.len());
        prop_assert!(m.sizes.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(m.sizes.iter().all(|&s| s > 0));
        prop_assert!((0.0..=1.0).contains(&m.bd_td));
        let ids = m.cluster_ids();
        for (c, size) in m.sizes.iter().enumerate() {
            prop_assert_eq!(ids.iter().filter(|&&i| i == c + 1).count(), *size);
        }
        if m.iterations < 300 {
            for (row, &c) in rows.iter().zip(&ids) {
                let own = dist2(row, &m.centroids[c - 1]);
                prop_assert!(m.centroids.iter().all(|other| own <= dist2(row, other) + 1e-9));
            }
        }
    }

    #[test]
    fn same_seed_same_model(rows in rows(), k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(rows.len());
        let f = FeatureMatrix::from_rows(rows);
        prop_assert_eq!(kmeans(&f, k, &opts(seed)).unwrap(), kmeans(&f, k, &opts(seed)).unwrap());
    }

    #[test]
    fn row_order_only_permutes_clusters(rows in rows(), seed in any::<u64>()) {
        // with a single cluster the content is the whole set whatever the order
        let mut rev = rows.clone();
        rev.reverse();
        let a = kmeans(&FeatureMatrix::from_rows(rows), 1, &opts(seed)).unwrap();
        let b = kmeans(&FeatureMatrix::from_rows(rev), 1, &opts(seed)).unwrap();
        prop_assert_eq!(a.sizes, b.sizes);
        prop_assert!((a.total_deviance - b.total_deviance).abs() <= 1e-9 * a.total_deviance.max(1.0));
    }

    #[test]
    fn selected_k_lies_on_curve(rows in rows(), gain in 0.0f64..0.5) {
        let f = FeatureMatrix::from_rows(rows.clone());
        let curve = bd_td_curve(&f, 1..=rows.len().min(5), &opts(1)).unwrap();
        let k = select_k(&curve, gain).unwrap();
        prop_assert!(curve.iter().any(|&(kk, _)| kk == k));
        prop_assert_eq!(curve[0].1, 0.0);
    }
}

#[test]
fn relabeling_is_a_permutation_of_contents() {
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            let c = [0.0, 10.0, 25.0][i % 3];
            vec![c + (i as f64 * 0.37).sin(), c + (i as f64 * 0.91).cos()]
        })
        .collect();
    let m = kmeans(&FeatureMatrix::from_rows(rows.clone()), 3, &opts(5)).unwrap();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); 3];
    for (i, c) in m.cluster_ids().into_iter().enumerate() {
        groups[c - 1].push(i);
    }
    let mut got: Vec<Vec<usize>> = groups;
    got.sort();
    let mut want: Vec<Vec<usize>> = (0..3).map(|r| (0..30).filter(|i| i % 3 == r).collect()).collect();
    want.sort();
    assert_eq!(got, want);
}
