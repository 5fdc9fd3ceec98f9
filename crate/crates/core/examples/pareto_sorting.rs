//! Non-dominated sorting, crowding distance and environmental selection on a
//! handful of two-objective points.

use cpdp_bilevel::search::{crowding_distance, environmental_select, non_dominated_sort, objectives_from_loss};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let points = vec![
        vec![0.10, 0.90],
        vec![0.20, 0.50],
        vec![0.40, 0.30],
        vec![0.80, 0.10],
        vec![0.30, 0.60],
        vec![0.50, 0.50],
        vec![0.90, 0.80],
    ];
    for (rank, front) in non_dominated_sort(&points)?.iter().enumerate() {
        let members: Vec<Vec<f64>> = front.iter().map(|&i| points[i].clone()).collect();
        let crowd = crowding_distance(&members);
        println!("front {}: {front:?} crowding {crowd:?}", rank + 1);
    }
    println!("keep 4: {:?}", environmental_select(&points, 4)?);

    println!("\nobjective map for a few lower-level losses:");
    for loss in [0.0, 0.1, 0.25, 0.5] {
        println!("  loss {loss:.2} -> {:?}", objectives_from_loss(loss)?);
    }
    Ok(())
}
