//! Plain-text output formats: trajectory/result CSV, `key = value` metric
//! files, and matrix dump blocks. All numbers are written with 17 significant
//! digits so doubles round-trip losslessly; lines end with LF.

use crate::error::{Error, Result};
use crate::experiment::ExperimentResult;
use crate::linalg::{Mat, Vector};
use crate::model::Trajectory;

/// Lossless decimal rendering of a double (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trajectory CSV. One row per time index t = 0..=T; the control column is
/// empty on the final row (no control is applied after x_T) and the
/// observation columns are empty on row zero (y_t measures x_t, and there is
/// no observation of the initial state).
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let n = traj.states[0].dim();
    let k = traj.controls[0].dim();
    let m = traj.observations[0].dim();
    let mut out = String::new();
    out.push('t');
    for i in 0..n {
        out.push_str(&format!(",x_{i}"));
    }
    for i in 0..k {
        out.push_str(&format!(",u_{i}"));
    }
    for i in 0..m {
        out.push_str(&format!(",y_{i}"));
    }
    out.push('\n');
    for t in 0..traj.states.len() {
        out.push_str(&t.to_string());
        for v in traj.states[t].as_slice() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        for i in 0..k {
            out.push(',');
            if t < traj.controls.len() {
                out.push_str(&fmt_f64(traj.controls[t].get(i)));
            }
        }
        for i in 0..m {
            out.push(',');
            if t >= 1 {
                out.push_str(&fmt_f64(traj.observations[t - 1].get(i)));
            }
        }
        out.push('\n');
    }
    out
}

fn bad_csv(reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        op: "trajectory_from_csv",
        reason: reason.into(),
    }
}

/// Inverse of `trajectory_to_csv`. The seed is not part of the CSV; the
/// caller may restore it from the run manifest.
pub fn trajectory_from_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad_csv("empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") {
        return Err(bad_csv("header must start with column 't'"));
    }
    let n = cols.iter().filter(|c| c.starts_with("x_")).count();
    let k = cols.iter().filter(|c| c.starts_with("u_")).count();
    let m = cols.iter().filter(|c| c.starts_with("y_")).count();
    if n == 0 || k == 0 || m == 0 || cols.len() != 1 + n + k + m {
        return Err(bad_csv(format!("unrecognized header: {header}")));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| bad_csv(format!("bad number: {s:?}")))
    };
    let mut states = Vec::new();
    let mut controls = Vec::new();
    let mut observations = Vec::new();
    for (row_idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(bad_csv(format!("row {row_idx} has {} fields", fields.len())));
        }
        let mut x = Vec::with_capacity(n);
        for f in &fields[1..1 + n] {
            x.push(parse(f)?);
        }
        states.push(Vector::new(x)?);
        let u_fields = &fields[1 + n..1 + n + k];
        if u_fields.iter().any(|f| !f.is_empty()) {
            let mut u = Vec::with_capacity(k);
            for f in u_fields {
                u.push(parse(f)?);
            }
            controls.push(Vector::new(u)?);
        }
        let y_fields = &fields[1 + n + k..];
        if y_fields.iter().any(|f| !f.is_empty()) {
            let mut y = Vec::with_capacity(m);
            for f in y_fields {
                y.push(parse(f)?);
            }
            observations.push(Vector::new(y)?);
        }
    }
    if states.len() < 2
        || controls.len() != states.len() - 1
        || observations.len() != states.len() - 1
    {
        return Err(bad_csv(format!(
            "inconsistent lengths: {} states, {} controls, {} observations",
            states.len(),
            controls.len(),
            observations.len()
        )));
    }
    Ok(Trajectory {
        states,
        controls,
        observations,
        seed: 0,
    })
}

/// Per-timestep result CSV: truth, observation, both filter means, loss.
pub fn result_to_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    let n = result.records[0].x_true.dim();
    let m = result.records[0].y.dim();
    out.push('t');
    for i in 0..n {
        out.push_str(&format!(",x_true_{i}"));
    }
    for i in 0..m {
        out.push_str(&format!(",y_{i}"));
    }
    for i in 0..n {
        out.push_str(&format!(",mu_kf_{i}"));
    }
    for i in 0..n {
        out.push_str(&format!(",mu_gkf_{i}"));
    }
    out.push_str(",loss\n");
    for rec in &result.records {
        out.push_str(&rec.t.to_string());
        for v in rec
            .x_true
            .as_slice()
            .iter()
            .chain(rec.y.as_slice())
            .chain(rec.mu_kf.as_slice())
            .chain(rec.mu_gkf.as_slice())
        {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        out.push_str(&fmt_f64(rec.loss));
        out.push('\n');
    }
    out
}

/// One `name, rows, cols, row-major values` block per matrix.
pub fn matrix_block(name: &str, m: &Mat) -> String {
    let mut out = format!("matrix {name}\nrows {}\ncols {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| fmt_f64(m.get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.push('\n');
    out
}

/// Flat `key = value` lines for machine diffing; keys are written in the
/// order given.
pub fn kv_block(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{control_schedule, kinematic_model, CMode};

    #[test]
    fn f64_formatting_round_trips() {
        for x in [
            0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1e-300,
            -3.123456789012345e17,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn trajectory_csv_round_trips() {
        let model = kinematic_model(0.01, 1.0, 1.0, CMode::Identity).unwrap();
        let controls = control_schedule(10.0, 0.05, 25).unwrap();
        let traj = model.simulate(&Vector::zeros(3), &controls, 5).unwrap();
        let csv = trajectory_to_csv(&traj);
        assert!(csv.starts_with("t,x_0,x_1,x_2,u_0,y_0,y_1,y_2\n"));
        let back = trajectory_from_csv(&csv).unwrap();
        assert_eq!(back.states, traj.states);
        assert_eq!(back.controls, traj.controls);
        assert_eq!(back.observations, traj.observations);
    }

    #[test]
    fn trajectory_csv_rejects_garbage() {
        assert!(trajectory_from_csv("").is_err());
        assert!(trajectory_from_csv("a,b,c\n1,2,3\n").is_err());
        assert!(trajectory_from_csv("t,x_0,u_0,y_0\n0,abc,1,2\n").is_err());
    }

    #[test]
    fn matrix_block_layout() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let block = matrix_block("A_hat", &m);
        let mut lines = block.lines();
        assert_eq!(lines.next(), Some("matrix A_hat"));
        assert_eq!(lines.next(), Some("rows 2"));
        assert_eq!(lines.next(), Some("cols 2"));
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(' ')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(row, vec![1.0, 2.0]);
    }

    #[test]
    fn kv_block_layout() {
        let block = kv_block(&[
            ("alpha".into(), "1".into()),
            ("beta".into(), "two".into()),
        ]);
        assert_eq!(block, "alpha = 1\nbeta = two\n");
    }
}
