//! Event scoring on hand-made decision sequences, with and without the
//! continuous filter.

use madcnn::eval::{compute_report, continuous_filter, ScoringRules};

fn ones(seq: &mut [u8], from: usize, to: usize) {
    seq[from..to].fill(1);
}

fn main() -> madcnn::Result<()> {
    let n = 3000;
    let mut labels = vec![0u8; n];
    ones(&mut labels, 200, 250);
    ones(&mut labels, 1200, 1280);
    ones(&mut labels, 2400, 2440);

    let mut raw = vec![0u8; n];
    ones(&mut raw, 212, 260); // detected after 12 ms
    ones(&mut raw, 1203, 1205); // short blip, then a solid detection
    ones(&mut raw, 1230, 1290);
    ones(&mut raw, 700, 702); // two close false alarms
    ones(&mut raw, 706, 707);
    ones(&mut raw, 1800, 1830); // a long false alarm

    let rules = ScoringRules::default();
    println!("cf_ms  DFn   DD(ms)   FPn");
    for cf in [0, 1, 5, 15, 27] {
        let s = compute_report(&continuous_filter(&raw, cf), &labels, &rules)?;
        println!("{cf:>5}  {:<4} {:>7.2}  {:>4}", s.dfn_ratio(), s.dd_mean(), s.fpn);
    }
    Ok(())
}
