//! A reduced shift sweep through the harness, written as curve and aggregate CSV.
use oorl::harness::{
    run_spec, write_aggregate, write_csv, BonusScale, BonusScales, ExperimentSpec, SweepAxis,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ExperimentSpec {
        episodes: 200,
        repeats: 4,
        bonus: BonusScale::Fixed(BonusScales::uniform(0.07)),
        ..ExperimentSpec::standard(SweepAxis::Delta(vec![0.0, 0.2, 1.0]))
    };
    print!("{}", spec.to_text());
    let result = run_spec(&spec)?;
    for row in &result.aggregates {
        println!(
            "{:<12} delta {:<4} mean {:>8.3}  std {:>7.3}",
            row.algorithm, row.axis_value, row.mean_final, row.std_final
        );
    }
    let dir = std::env::temp_dir();
    write_csv(&result.curves, &dir.join("oorl_sweep.csv"), Some(&spec))?;
    write_aggregate(
        &result.aggregates,
        &dir.join("oorl_sweep_agg.csv"),
        Some(&spec),
    )?;
    println!("csv written to {}", dir.display());
    Ok(())
}
