//! Ready-to-run gnuplot scripts for the CSV outputs.

use std::fmt::Write;

const PREAMBLE: &str = "set datafile separator ','\nset key off\n";

pub fn trajectory(csv: &str) -> String {
    format!(
        "{PREAMBLE}set xlabel 'x'\nset ylabel 'y'\nset zlabel 'z'\n\
         splot '{csv}' every ::1 using 2:3:4 with lines lw 0.5\npause -1\n"
    )
}

pub fn signature(csv: &str) -> String {
    format!(
        "{PREAMBLE}set xlabel 'kappa~'\nset ylabel 'kappa~_s'\nset zlabel 'tau~'\n\
         splot '{csv}' every ::1 using 3:4:5 with lines lw 0.5\npause -1\n"
    )
}

pub fn segmentation(csv: &str) -> String {
    format!(
        "{PREAMBLE}set xlabel 'x'\nset ylabel 'y'\nset zlabel 'z'\n\
         splot '{csv}' every ::1 using 3:4:5:($10 eq \"true\" ? 1 : 2) with points pt 7 ps 0.4 lc variable\n\
         pause -1\n"
    )
}

pub fn orbits(names: &[String]) -> String {
    let mut s = format!("{PREAMBLE}set key on\nset xlabel 'x'\nset ylabel 'y'\nset zlabel 'z'\n");
    let parts: Vec<String> = names
        .iter()
        .map(|n| format!("'orbits/{n}.csv' every ::1 using 2:3:4 with lines title '{n}'"))
        .collect();
    let _ = writeln!(s, "splot {}", parts.join(", \\\n      "));
    s.push_str("pause -1\n");
    s
}
