use causal_measure::lattice::{build_mode_table, pauli_jordan, LatticeSpec, Profile, SmearingFunction};

fn bump(spec: &LatticeSpec, center: f64) -> SmearingFunction {
    let profile = Profile::Bump { center, width: 1.0 };
    SmearingFunction::from_profile("f", &profile, center - 0.5, center + 0.5, spec).unwrap()
}

fn main() {
    // supports 2 apart, times 1 apart: spacelike; the same support one unit later: timelike
    println!("{:>6} {:>12} {:>12}", "N", "spacelike", "timelike");
    for n in [32, 64, 128, 256] {
        let spec = LatticeSpec::new(n, 16.0 / n as f64, 1.0).unwrap();
        let modes = build_mode_table(&spec, false).unwrap();
        let (f, g) = (bump(&spec, -1.5), bump(&spec, 1.5));
        let space = pauli_jordan(&f, 0.0, &g, 1.0, &modes).unwrap();
        let time = pauli_jordan(&f, 0.0, &f, 1.0, &modes).unwrap();
        println!("{n:>6} {:>12.3e} {:>12.3e}", space.abs(), time.abs());
    }
}
