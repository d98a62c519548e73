use causal_measure::analytic::vacuum_projector_expectation;
use causal_measure::fock::{bin_partition, build_basis, field_operator, spectral_family, vacuum_density};
use causal_measure::lattice::{build_mode_table, vacuum_variance, LatticeSpec, Profile, SmearingFunction};
use causal_measure::rules::cutoff_residual;

fn main() {
    let spec = LatticeSpec::new(32, 0.25, 1.0).unwrap();
    let modes = build_mode_table(&spec, false).unwrap().restricted(&[1]).unwrap();
    let f = SmearingFunction::from_profile("f", &Profile::Bump { center: -0.5, width: 2.0 }, -1.5, 0.5, &spec).unwrap();
    let sigma = vacuum_variance(&f, &modes).unwrap().sqrt();
    let bins = bin_partition(3.0 * sigma, 12).unwrap();

    let exact: Vec<f64> = (0..bins.n_bins)
        .map(|i| {
            let (lo, hi) = bins.interval(i);
            vacuum_projector_expectation(&f, lo, hi, &modes).unwrap()
        })
        .collect();
    println!("sigma = {sigma:.5}");
    println!("{:>5} {:>10} {:>10}", "n_max", "max error", "KS bound");
    for n_max in [2, 4, 8, 16, 32] {
        let basis = build_basis(&modes, &[1], n_max, 1 << 12).unwrap();
        let phi = field_operator(&basis, &modes, &f, 0.3, 1.0).unwrap().operator.matrix;
        let vac = vacuum_density(&basis);
        let err = spectral_family(&phi, &bins)
            .iter()
            .zip(&exact)
            .map(|(p, e)| (vac.expectation(p).re - e).abs())
            .fold(0.0, f64::max);
        println!("{n_max:>5} {err:>10.4} {:>10.4}", 2.0 * cutoff_residual(n_max));
    }
}
