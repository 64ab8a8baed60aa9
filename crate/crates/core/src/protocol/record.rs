use std::io::{self, Write};

use super::{NetworkState, StepOutcome};

/// Digits after the point in `{:e}` formatting: 17 significant digits,
/// enough for a bit-exact reload of any `f64`.
pub const CSV_FLOAT_DIGITS: usize = 16;

/// Per-instant simulation record.
///
/// The quantizer arguments are those of the transmission attempted at
/// instant `k` (zero at `k = 0` and under DoS).
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: u64,
    pub dos_active: bool,
    pub x: Vec<f64>,
    pub err_ne: f64,
    pub theta: f64,
    pub max_qarg_x: f64,
    pub max_qarg_y: f64,
    pub saturated: bool,
}

impl StepRecord {
    pub(crate) fn new(k: u64, dos_active: bool, state: &NetworkState, err_ne: f64, out: StepOutcome) -> Self {
        Self {
            k,
            dos_active,
            x: state.x.clone(),
            err_ne,
            theta: state.scaling.theta,
            max_qarg_x: out.max_qarg_x,
            max_qarg_y: out.max_qarg_y,
            saturated: out.saturated,
        }
    }
}

/// Writes `k,dos,x_1..x_N,theta,err_ne,max_qarg_x,max_qarg_y,saturated`.
pub fn write_csv<W: Write>(mut w: W, n: usize, records: &[StepRecord]) -> io::Result<()> {
    write!(w, "k,dos")?;
    for i in 1..=n {
        write!(w, ",x_{i}")?;
    }
    writeln!(w, ",theta,err_ne,max_qarg_x,max_qarg_y,saturated")?;
    let p = CSV_FLOAT_DIGITS;
    for r in records {
        write!(w, "{},{}", r.k, u8::from(r.dos_active))?;
        for v in &r.x {
            write!(w, ",{v:.p$e}")?;
        }
        writeln!(
            w,
            ",{:.p$e},{:.p$e},{:.p$e},{:.p$e},{}",
            r.theta,
            r.err_ne,
            r.max_qarg_x,
            r.max_qarg_y,
            u8::from(r.saturated)
        )?;
    }
    Ok(())
}
