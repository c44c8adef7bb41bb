//! Runs every acceptance criterion at its stated scale and tolerance,
//! printing one PASS/FAIL line per criterion and the failing measurements.

use rwre_cli::checks::CRITERIA;

fn main() {
    let mut failed = Vec::new();
    for c in CRITERIA.iter() {
        let r = c.run();
        println!("{}", r.summary_line());
        for m in r.measurements.iter().filter(|m| !m.pass) {
            println!(
                "    {}: measured {} target {} tolerance {}{}",
                m.label,
                m.measured,
                m.target,
                m.tolerance,
                m.std_error.map(|s| format!(" (s.e. {s})")).unwrap_or_default()
            );
        }
        if !r.pass {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", CRITERIA.len());
    } else {
        println!("acceptance: {} of {} criteria failed: {}", failed.len(), CRITERIA.len(), failed.join(", "));
        std::process::exit(1);
    }
}
