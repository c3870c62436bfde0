//! CSV emission. Numbers carry 9 significant digits; lines end in LF.

use std::io::Write;

use crate::dqn::CurvePoint;
use crate::engine::{EpisodeResult, SchemeId, Summary};
use crate::Error;

pub const TRAJECTORY_HEADER: [&str; 11] = [
    "episode", "tti", "sample_j", "t_s", "px", "py", "pz", "gx", "gy", "gz", "err_m",
];
pub const SUMMARY_HEADER: [&str; 8] = [
    "scheme",
    "k_max",
    "t_rep",
    "episodes",
    "mse_mean",
    "mse_std",
    "tx_mean",
    "decode_rate",
];
pub const LEARNING_HEADER: [&str; 3] = ["episode", "cum_reward", "epsilon"];

/// `%.9g`: 9 significant digits, trailing zeros dropped, exponent form outside `[1e-4, 1e9)`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    const DIGITS: i32 = 9;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub scheme: SchemeId,
    pub k_max: u32,
    pub t_rep_s: f64,
    pub summary: Summary,
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), Error> {
    let mut out = writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let s = &r.summary;
        out.write_record([
            r.scheme.name().to_string(),
            r.k_max.to_string(),
            fmt_num(r.t_rep_s),
            s.episodes.to_string(),
            fmt_num(s.mse_mean),
            fmt_num(s.mse_std),
            fmt_num(s.tx_mean),
            fmt_num(s.decode_rate),
        ])?;
    }
    out.flush().map_err(|e| Error::io("summary csv", e))?;
    Ok(())
}

pub fn write_trajectory<'a, W: Write>(
    w: W,
    episodes: impl IntoIterator<Item = (usize, &'a EpisodeResult)>,
) -> Result<(), Error> {
    let mut out = writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for (episode, r) in episodes {
        for s in &r.samples {
            out.write_record([
                episode.to_string(),
                s.tti.to_string(),
                s.j.to_string(),
                fmt_num(s.t),
                fmt_num(s.actual.x),
                fmt_num(s.actual.y),
                fmt_num(s.actual.z),
                fmt_num(s.target.x),
                fmt_num(s.target.y),
                fmt_num(s.target.z),
                fmt_num(s.error),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("trajectory csv", e))?;
    Ok(())
}

pub fn write_learning<W: Write>(w: W, curve: &[CurvePoint]) -> Result<(), Error> {
    let mut out = writer(w);
    out.write_record(LEARNING_HEADER)?;
    for p in curve {
        out.write_record([p.episode.to_string(), fmt_num(p.cum_reward), fmt_num(p.epsilon)])?;
    }
    out.flush().map_err(|e| Error::io("learning csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(123456789.4), "123456789");
        assert_eq!(fmt_num(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_num(5e-5), "5e-05");
        assert_eq!(fmt_num(1e-4), "0.0001");
        assert_eq!(fmt_num(0.000123456789123), "0.000123456789");
        assert_eq!(fmt_num(99.99999999999), "100");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn summary_layout() {
        let row = SummaryRow {
            scheme: SchemeId::Gsrc,
            k_max: 3,
            t_rep_s: 5e-5,
            summary: Summary {
                episodes: 2,
                mse_mean: 0.5,
                mse_std: 0.25,
                tx_mean: 1.125,
                decode_rate: 1.0,
            },
        };
        let mut buf = Vec::new();
        write_summary(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "scheme,k_max,t_rep,episodes,mse_mean,mse_std,tx_mean,decode_rate\nGSRC,3,5e-05,2,0.5,0.25,1.125,1\n"
        );
    }

    #[test]
    fn learning_layout() {
        let mut buf = Vec::new();
        write_learning(
            &mut buf,
            &[CurvePoint {
                episode: 0,
                cum_reward: -12.5,
                epsilon: 1.0,
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "episode,cum_reward,epsilon\n0,-12.5,1\n");
    }
}
