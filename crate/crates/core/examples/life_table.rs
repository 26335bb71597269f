// Abridged period life table from a Gompertz-like schedule.

use smokecast::data::AgeGrid;
use smokecast::lifetable::{life_table, AxRule};

pub fn run_example() -> smokecast::Result<()> {
    let grid = AgeGrid::default();
    let rates: Vec<f64> = grid
        .iter()
        .map(|g| match g.lower {
            0 => 0.006,
            1 => 0.0003,
            x => 0.0002 + 0.00003 * (0.095 * x as f64).exp(),
        })
        .collect();
    let table = life_table(&grid, &rates, AxRule::default())?;
    println!("age      mx        qx        lx       ex");
    for i in 0..table.ages.len() {
        println!(
            "{:>3} {:>9.6} {:>9.6} {:>9.1} {:>8.2}",
            table.ages[i], table.mx[i], table.qx[i], table.lx[i], table.ex[i]
        );
    }
    println!("e0 = {:.3}", table.e0());
    Ok(())
}

#[allow(dead_code)]
fn main() -> smokecast::Result<()> {
    run_example()
}
