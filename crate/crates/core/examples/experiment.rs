//! Drive the simulate → train → evaluate pipeline from code with a reduced
//! Burgers' configuration, then print the result tables.

use ep_opinf::harness::{builtin_config, run_all, EvalScope, Layout, Problem, Profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = builtin_config(Problem::Burgers, Profile::Desk);
    cfg.output_dir = std::env::temp_dir().join("ep-opinf-experiment");
    cfg.r_max = 6;
    cfg.r_list = (1..=6).collect();
    for set in &mut cfg.test_ics {
        set.count = 5;
    }
    cfg.validate()?;

    run_all(&cfg, &EvalScope::default())?;

    let layout = Layout::new(&cfg.output_dir);
    for table in ["violation", "state_error_train", "state_error_test1", "state_error_test2"] {
        println!("== {table}");
        print!("{}", std::fs::read_to_string(layout.table(table))?);
    }
    println!("\noutputs and manifest in {}", cfg.output_dir.display());
    Ok(())
}
