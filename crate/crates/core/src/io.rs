//! CSV output. Numbers are printed with 17 significant digits so a re-run
//! reproduces files byte for byte.

use std::io::Write;

use crate::covariance::{upper_triangle_labels, CovarianceSeries};
use crate::error::Result;
use crate::meanfield::TrajectorySeries;
use crate::metrics::PhaseRecord;
use crate::stochastic::EnsembleEstimate;

/// `{:.16e}`, with `nan`, `inf` and `-inf` for non-finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn write_row<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let row: Vec<String> = values.into_iter().map(fmt_f64).collect();
    writeln!(w, "{}", row.join(","))?;
    Ok(())
}

pub const TRAJECTORY_HEADER: &str = "t,q_c,p_c,q_m,p_m,q_d,p_d";

pub fn write_trajectory<W: Write>(w: &mut W, series: &TrajectorySeries) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in &series.states {
        write_row(w, [s.t, s.q_c, s.p_c, s.q_m, s.p_m, s.q_d, s.p_d])?;
    }
    Ok(())
}

pub fn covariance_header() -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend(upper_triangle_labels("V"));
    cols.join(",")
}

pub fn write_covariance<W: Write>(w: &mut W, series: &CovarianceSeries) -> Result<()> {
    writeln!(w, "{}", covariance_header())?;
    for s in &series.samples {
        write_row(w, std::iter::once(s.t).chain(s.v.upper_triangle()))?;
    }
    Ok(())
}

pub fn ensemble_header() -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend(upper_triangle_labels("V"));
    cols.extend(upper_triangle_labels("SE"));
    cols.join(",")
}

pub fn write_ensemble<W: Write>(w: &mut W, estimates: &[EnsembleEstimate]) -> Result<()> {
    writeln!(w, "{}", ensemble_header())?;
    for e in estimates {
        let mut se = Vec::with_capacity(21);
        for i in 0..6 {
            for j in i..6 {
                se.push(e.std_error[(i, j)]);
            }
        }
        write_row(
            w,
            std::iter::once(e.t)
                .chain(e.covariance.upper_triangle())
                .chain(se),
        )?;
    }
    Ok(())
}

/// A phase record plus the covariance-based quantities at that time, if known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRow {
    pub record: PhaseRecord,
    pub var_phase_sum: Option<f64>,
    pub s_p: Option<f64>,
    pub s_a: Option<f64>,
}

pub const PHASES_HEADER: &str =
    "t,phi_m,phi_d,sum,diff,sin_sum,sin_diff,n_m,n_d,var_phase_sum,S_p,S_a";

pub fn write_phases<W: Write>(w: &mut W, rows: &[PhaseRow]) -> Result<()> {
    writeln!(w, "{PHASES_HEADER}")?;
    for r in rows {
        let p = &r.record;
        write_row(
            w,
            [
                p.t,
                p.phi_m,
                p.phi_d,
                p.sum,
                p.diff,
                p.sum.sin(),
                p.diff.sin(),
                p.n_m,
                p.n_d,
                r.var_phase_sum.unwrap_or(f64::NAN),
                r.s_p.unwrap_or(f64::NAN),
                r.s_a.unwrap_or(f64::NAN),
            ],
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eta: f64,
    pub locked_phase_sum: f64,
    pub discord: f64,
    pub s_p: f64,
    pub s_a: f64,
    pub var_phase_sum: f64,
    /// `ok`, or the failure for this grid point.
    pub status: String,
}

pub const SWEEP_HEADER: &str = "eta,locked_phase_sum,D_G,S_p,S_a,var_phase_sum,status";

pub fn write_sweep<W: Write>(w: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        let nums: Vec<String> = [
            r.eta,
            r.locked_phase_sum,
            r.discord,
            r.s_p,
            r.s_a,
            r.var_phase_sum,
        ]
        .into_iter()
        .map(fmt_f64)
        .collect();
        let status: String = r
            .status
            .chars()
            .map(|c| if c == ',' || c == '\n' { ';' } else { c })
            .collect();
        writeln!(w, "{},{status}", nums.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{check_physicality, initial_covariance, CovSample};

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.1), "-1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn covariance_csv_shape() {
        let v = initial_covariance(0.0).unwrap();
        let series = CovarianceSeries {
            samples: vec![CovSample {
                t: 0.0,
                v,
                physicality: check_physicality(&v),
            }],
        };
        let mut buf = Vec::new();
        write_covariance(&mut buf, &series).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("t,V_qm_qm,V_qm_pm,"));
        assert!(lines[0].ends_with("V_pc_pc"));
        assert_eq!(lines[0].split(',').count(), 22);
        assert_eq!(lines[1].split(',').count(), 22);
    }

    #[test]
    fn ensemble_header_width() {
        assert_eq!(ensemble_header().split(',').count(), 43);
    }
}
