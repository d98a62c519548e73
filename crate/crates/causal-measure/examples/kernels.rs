use causal_measure::analytic::{gaussian_mass, kernel_vacuum_mass, kernels};

fn main() {
    println!("{:>6} {:>6} {:>12} {:>12} {:>10}", "omega", "t", "A", "B", "B^2-A^2");
    for (omega, t) in [(1.0, 0.5), (1.0, 1.5), (2.5, 0.2), (0.7, 3.0)] {
        let k = kernels(omega, t).unwrap();
        println!("{omega:>6} {t:>6} {:>12.6} {:>12.6} {:>10.6}", k.a, k.b, k.b * k.b - k.a * k.a);
    }
    match kernels(1.0, std::f64::consts::PI) {
        Err(e) => println!("t = pi: {e}"),
        Ok(_) => unreachable!(),
    }

    // propagating the oscillator vacuum with the kernel leaves it unchanged
    let omega: f64 = 1.3;
    let stationary = gaussian_mass((0.5 / omega).sqrt(), -0.2, 0.6);
    for t in [0.3, 1.0, 2.0] {
        let m = kernel_vacuum_mass(omega, t, -0.2, 0.6, 400).unwrap();
        println!("t={t}: mass {m:.10} vs {stationary:.10}");
    }
}
