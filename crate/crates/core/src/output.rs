//! CSV conventions shared by every emitted table: RFC 4180 with CRLF record
//! terminators, `.` decimal separator, 17 significant digits.

use std::io::Write;

pub fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out)
}

/// Scientific notation with 17 significant digits (round-trips any `f64`).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_roundtrip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }
}
