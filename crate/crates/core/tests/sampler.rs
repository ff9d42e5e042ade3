use colltest::dist::{seeded_rng, AliasTable};
use colltest::{make_family, Distribution, Family};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DRAWS: u64 = 1_000_000;
const ALPHA: f64 = 1e-6;

fn chi_square_p_value(d: &Distribution, seed: u64) -> f64 {
    let table = AliasTable::new(d);
    let h = table.sample_histogram(DRAWS, &mut seeded_rng(seed, 0));
    let support: Vec<usize> = (0..d.n()).filter(|&i| d.prob(i) > 0.0).collect();
    for i in (0..d.n()).filter(|&i| d.prob(i) == 0.0) {
        assert_eq!(h.counts()[i], 0, "zero-mass element {i} was drawn");
    }
    let stat: f64 = support
        .iter()
        .map(|&i| {
            let e = DRAWS as f64 * d.prob(i);
            let o = h.counts()[i] as f64;
            (o - e) * (o - e) / e
        })
        .sum();
    let df = (support.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn alias_sampler_fits_uniform() {
    let p = chi_square_p_value(&Distribution::uniform(100).unwrap(), 11);
    assert!(p > ALPHA, "p-value {p}");
}

#[test]
fn alias_sampler_fits_zipf() {
    let p = chi_square_p_value(&make_family(Family::Zipf, 50, 1.1).unwrap(), 12);
    assert!(p > ALPHA, "p-value {p}");
}

#[test]
fn alias_sampler_fits_skewed_with_zeros() {
    let d = Distribution::new(&[0.0, 0.5, 0.0, 0.25, 0.125, 0.0625, 0.0625, 0.0]).unwrap();
    let p = chi_square_p_value(&d, 13);
    assert!(p > ALPHA, "p-value {p}");
}

#[test]
fn alias_sampler_fits_pm_perturbation() {
    let p = chi_square_p_value(&make_family(Family::PmPerturbation, 64, 0.3).unwrap(), 14);
    assert!(p > ALPHA, "p-value {p}");
}
