use causal_measure::analytic::OneParticleDensity;
use causal_measure::fock::{bin_partition, build_basis, excitation_state, field_operator, spectral_family};
use causal_measure::lattice::{build_mode_table, LatticeSpec, Profile, SmearingFunction};
use causal_measure::Complex64;

fn main() {
    let spec = LatticeSpec::new(32, 0.25, 1.0).unwrap();
    let all = build_mode_table(&spec, false).unwrap();
    let f = SmearingFunction::from_profile("f", &Profile::Bump { center: 0.0, width: 3.0 }, -1.5, 1.5, &spec).unwrap();

    // two modes: the excited one carries only part of the variance
    let modes = all.restricted(&[0, 1]).unwrap();
    let d = OneParticleDensity::new(&f, 1, &modes).unwrap();
    println!("sigma {:.4}, excited share r {:.4}, <Phi^2> {:.5}", d.sigma, d.r, d.second_moment());

    let bins = bin_partition(3.0 * d.sigma, 10).unwrap();
    let basis = build_basis(&modes, &[0, 1], 10, 1 << 12).unwrap();
    let state = excitation_state(&basis, &[vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]]).unwrap();
    let phi = field_operator(&basis, &modes, &f, 0.0, 1.0).unwrap().operator.matrix;
    println!("{:>16} {:>9} {:>9}", "bin", "analytic", "fock");
    for (i, p) in spectral_family(&phi, &bins).iter().enumerate() {
        let (lo, hi) = bins.interval(i);
        println!("[{lo:>6.3}, {hi:>6.3}) {:>9.4} {:>9.4}", d.mass(lo, hi), state.expectation(p).re);
    }
}
