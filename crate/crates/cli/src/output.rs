//! CSV and JSON writers. Floats are written with 17 significant digits so
//! files round-trip to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use phdae::diagnostics::{OrderEstimate, Table1};
use phdae::Trajectory;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_header(n: usize) -> String {
    let mut h = String::from("t");
    for i in 0..n {
        write!(h, ",z{i}").unwrap();
    }
    h.push_str(",H,supply,dissipation");
    h
}

/// One row per stored state. Supply and dissipation on row `k` belong to the
/// step that ended there; the first row carries zeros.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.partition.n();
    let mut out = trajectory_header(n);
    out.push('\n');
    for (k, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let (supply, dissipation) = match k.checked_sub(1).and_then(|j| traj.audits.get(j)) {
            Some(a) => (a.supply, a.dissipation),
            None => (0.0, 0.0),
        };
        out.push_str(&num(*t));
        for v in s.as_slice() {
            out.push(',');
            out.push_str(&num(*v));
        }
        for v in [traj.energies[k], supply, dissipation] {
            out.push(',');
            out.push_str(&num(v));
        }
        out.push('\n');
    }
    out
}

pub const AUDIT_HEADER: &str =
    "step,t,tau,energy_before,energy_after,supply,dissipation,skew_defect,balance_defect,newton_iters,newton_residual";

pub fn audit_csv(traj: &Trajectory) -> String {
    let mut out = String::from(AUDIT_HEADER);
    out.push('\n');
    for (k, a) in traj.audits.iter().enumerate() {
        let fields = [
            a.t,
            a.tau,
            a.energy_before,
            a.energy_after,
            a.supply,
            a.dissipation,
            a.skew_defect,
            a.balance_defect(),
        ];
        out.push_str(&k.to_string());
        for v in fields {
            out.push(',');
            out.push_str(&num(v));
        }
        writeln!(out, ",{},{}", a.newton_iters, num(a.newton_residual)).unwrap();
    }
    out
}

pub fn order_csv(est: &OrderEstimate) -> String {
    let mut out = String::from("scheme,tau,error,observed_order\n");
    for (k, (tau, err)) in est.taus.iter().zip(&est.errors).enumerate() {
        let order = if k == 0 { String::new() } else { num(est.pairwise[k - 1]) };
        writeln!(out, "{},{},{},{}", est.scheme, num(*tau), num(*err), order).unwrap();
    }
    out
}

pub const TABLE1_HEADER: &str = "tau,scheme,completed_steps,energy_balance_error,energy_error_vs_reference,max_probability_violation,max_negative_entropy_increment,failure";

pub fn table1_csv(tables: &[Table1]) -> String {
    let mut out = String::from(TABLE1_HEADER);
    out.push('\n');
    for t in tables {
        for r in &t.rows {
            let failure = r.failure.as_deref().unwrap_or("").replace(['"', '\n'], " ");
            writeln!(
                out,
                "{},{},{},{},{},{},{},\"{}\"",
                num(t.tau),
                r.scheme,
                r.completed_steps,
                num(r.energy_balance_error),
                num(r.energy_error_vs_reference),
                num(r.max_probability_violation),
                num(r.max_negative_entropy_increment),
                failure
            )
            .unwrap();
        }
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)
}

/// `orders.csv` with scheme `midpoint` becomes `orders_midpoint.csv`.
pub fn per_scheme_name(base: &str, scheme: &str) -> String {
    match base.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_{scheme}.{ext}"),
        None => format!("{base}_{scheme}"),
    }
}
