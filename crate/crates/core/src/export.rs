//! Plain CSV writers. Every float is written with 17 significant digits so
//! that files round-trip exactly.

use crate::bounds::{BoundPair, ResidualReport, INEQUALITY_NAMES};
use crate::profile::{PiecewiseProfile, Side};
use crate::wave::WaveSolution;
use std::io::{self, Write};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(out: &mut impl Write, values: &[f64]) -> io::Result<()> {
    let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
    writeln!(out, "{}", cells.join(","))
}

/// `z,phi1,phi2,phi3`
pub fn write_wave_csv(wave: &WaveSolution, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "z,phi1,phi2,phi3")?;
    for (i, z) in wave.grid.positions.iter().enumerate() {
        row(out, &[*z, wave.phi[0][i], wave.phi[1][i], wave.phi[2][i]])?;
    }
    Ok(())
}

/// `z,value,first,second`; derivatives are right-sided at breakpoints.
pub fn write_profile_csv(
    profile: &PiecewiseProfile,
    grid: &[f64],
    out: &mut impl Write,
) -> io::Result<()> {
    writeln!(out, "z,value,first,second")?;
    for &z in grid {
        let [v, d1, d2] = profile.eval3_side(z, Side::Right);
        row(out, &[z, v, d1, d2])?;
    }
    Ok(())
}

/// File stems for the six profiles of a pair, in upper-then-lower order.
pub const PROFILE_NAMES: [&str; 6] = ["upper1", "upper2", "upper3", "lower1", "lower2", "lower3"];

/// The six profiles of a pair, in the order of [`PROFILE_NAMES`].
pub fn pair_profiles(pair: &BoundPair) -> [&PiecewiseProfile; 6] {
    [
        &pair.upper[0],
        &pair.upper[1],
        &pair.upper[2],
        &pair.lower[0],
        &pair.lower[1],
        &pair.lower[2],
    ]
}

/// `z,U1,U2,U3,L1,L2,L3`
pub fn write_residual_csv(report: &ResidualReport, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "z,{}", INEQUALITY_NAMES.join(","))?;
    for (z, v) in report.grid.iter().zip(&report.values) {
        let mut cells = vec![*z];
        cells.extend_from_slice(v);
        row(out, &cells)?;
    }
    Ok(())
}

/// `z,u,v,w`
pub fn write_snapshot_csv(z: &[f64], u: &[Vec<f64>; 3], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "z,u,v,w")?;
    for (i, zi) in z.iter().enumerate() {
        row(out, &[*zi, u[0][i], u[1][i], u[2][i]])?;
    }
    Ok(())
}

/// `index,t,file`
pub fn write_snapshot_index(
    times: &[f64],
    files: &[String],
    out: &mut impl Write,
) -> io::Result<()> {
    writeln!(out, "index,t,file")?;
    for (i, (t, f)) in times.iter().zip(files).enumerate() {
        writeln!(out, "{i},{},{f}", fmt_f64(*t))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.345_208_2e-17, 8.8032, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn profile_csv_layout() {
        let p = PiecewiseProfile::constant(2.0);
        let mut buf = Vec::new();
        write_profile_csv(&p, &[0.0, 1.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "z,value,first,second");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.0000000000000000e0,2.0000000000000000e0"));
    }
}
