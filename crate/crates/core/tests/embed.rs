mod common;

use common::{random_rows, two_clusters, two_means_agreement};
use spectral_bench::embed::{joint_probabilities, tsne_embed, TsneConfig, PERPLEXITY_TOL};
use spectral_bench::Rng;

#[test]
fn separated_clusters_are_recovered() {
    let (rows, ids) = two_clusters(20, 5, 10.0, 3);
    let out = tsne_embed(&rows, &TsneConfig { perplexity: 10.0, ..TsneConfig::default() }).unwrap();
    assert!(two_means_agreement(&out.coords, &ids) >= 0.95);
}

#[test]
fn kl_decreases_on_random_data() {
    let rows = random_rows(60, 8, &mut Rng::new(4));
    let out = tsne_embed(&rows, &TsneConfig { perplexity: 15.0, ..TsneConfig::default() }).unwrap();
    let first = out.kl_trace.first().unwrap().kl;
    let last = out.kl_trace.last().unwrap().kl;
    assert!(last < first, "{first} -> {last}");
    assert_eq!(out.kl_trace.last().unwrap().iteration, 1000);
}

#[test]
fn perplexity_is_matched_per_point() {
    let rows = random_rows(80, 6, &mut Rng::new(5));
    for perp in [5.0, 20.0, 50.0] {
        let a = joint_probabilities(&rows, perp).unwrap();
        assert!(a.log_perplexity_error.iter().all(|&e| e <= PERPLEXITY_TOL));
        assert!((a.p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn permuting_rows_permutes_the_embedding() {
    let rows = random_rows(25, 4, &mut Rng::new(6));
    let perm = Rng::new(7).permutation(rows.len());
    let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
    let cfg = TsneConfig { perplexity: 6.0, iterations: 200, ..TsneConfig::default() };
    let a = tsne_embed(&rows, &cfg).unwrap();
    let b = tsne_embed(&permuted, &cfg).unwrap();
    for (pos, &orig) in perm.iter().enumerate() {
        assert_eq!(b.coords[pos], a.coords[orig]);
    }
    assert_eq!(a.kl_trace, b.kl_trace);
}

#[test]
fn perplexity_must_be_below_n() {
    let rows = random_rows(10, 3, &mut Rng::new(1));
    assert!(tsne_embed(&rows, &TsneConfig { perplexity: 10.0, ..TsneConfig::default() }).is_err());
}
