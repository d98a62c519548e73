use causal_measure::geometry::{layer_parts, precedes, split_devices, validate_arrangement, Region};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let regions = vec![
        Region::new("A", 0.0, -4.0, -3.0)?,
        Region::new("B", 2.0, -2.0, 2.0)?,
        Region::new("C", 3.0, 2.5, 3.5)?,
    ];
    println!("A -> B: {:?}, B -> C: {:?}, A -> C: {:?}", precedes(&regions[0], &regions[1]), precedes(&regions[1], &regions[2]), precedes(&regions[0], &regions[2]));

    let parts = split_devices(&regions)?;
    for p in &parts {
        let lo = if p.span.lo_closed { '[' } else { '(' };
        let hi = if p.span.hi_closed { ']' } else { ')' };
        println!("{:>3} t={} {lo}{}, {}{hi} after {:?}", p.part_id, p.t, p.x_lo(), p.x_hi(), p.predecessors);
    }

    let layers = layer_parts(&parts)?;
    for (i, layer) in layers.layers.iter().enumerate() {
        println!("S^{} = {{{}}}", i + 1, layer.join(", "));
    }
    assert!(validate_arrangement(&regions, 32.0).is_empty());
    Ok(())
}
