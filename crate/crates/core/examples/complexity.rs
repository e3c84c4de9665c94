//! Closed-form flop counts and the per-task ledger behind them.

use mbf::complexity::{flop_ledger, flops_total, Algorithm, Dims, MpfDims};

fn main() -> mbf::Result<()> {
    let dims = Dims::clg(3, 2, 2, 100, 1);
    for alg in [Algorithm::Ekf, Algorithm::Rbpf, Algorithm::Dbf, Algorithm::Sdbf] {
        println!("{alg:?}: {:.2} flops per recursion", flops_total(alg, &dims)?);
    }
    let ratio = flops_total(Algorithm::Dbf, &dims)? / flops_total(Algorithm::Rbpf, &dims)?;
    println!("DBF/RBPF = {ratio:.4}");

    let ledger = flop_ledger(Algorithm::Dbf, &dims)?;
    println!("\nDBF ledger, total {:.0}:", ledger.total);
    for (task, flops) in &ledger.items {
        println!("  {task:<32} {flops:>10.1}");
    }
    ledger.write_csv(std::io::stdout())?;

    let mpf = Dims { mpf: Some(MpfDims { n: 5, m: 100, l: 33, d_y: 25, d_x_i: 4 }), ..Dims::default() };
    println!("\nMPF, 5 filters of 100 particles: {:.3e} flops", flops_total(Algorithm::Mpf, &mpf)?);
    Ok(())
}
