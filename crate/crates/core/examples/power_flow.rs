//! Solves the 9-bus base case and its high-loss variant.
//!
//! Usage: `cargo run --example power_flow`

use freqasym::grid::solve_power_flow;
use freqasym::grid::sysfile::wscc9;

fn main() -> anyhow::Result<()> {
    let base = wscc9();
    for (label, sys) in [("base case", base.clone()), ("resistances x10", base.scale_branch_resistances(10.0)?)] {
        let pf = solve_power_flow(&sys)?;
        println!("{label}: {} Newton iterations, residual {:.1e}", pf.iterations, pf.residual);
        println!("  bus      V (pu)   angle (deg)   P inj (pu)   Q inj (pu)");
        for (k, bus) in sys.buses.iter().enumerate() {
            println!(
                "  {:>3} {:>11.4} {:>13.3} {:>12.4} {:>12.4}",
                bus.id,
                pf.v[k],
                pf.theta[k].to_degrees(),
                pf.p_inj[k],
                pf.q_inj[k]
            );
        }
        println!("  P_loss {:.4} pu, Q_loss {:.4} pu\n", pf.p_loss, pf.q_loss);
    }
    Ok(())
}
