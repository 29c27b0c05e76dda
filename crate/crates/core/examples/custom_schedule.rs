//! Verifies a schedule and certificate loaded from JSON files.
//!
//!     cargo run --example custom_schedule -- schedule.json cert.json
//!
//! With no arguments both files are generated for OGM with n = 6 and read back.

use peplift::certificates::{ogm_func_certificate, verify_func_identity, verify_grad_identity, CertificateFile, Metric};
use peplift::schedules::{load_schedule, ogm_stepsize_matrix, ScheduleFile};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (sched_path, cert_path) = match args.as_slice() {
        [s, c] => (PathBuf::from(s), PathBuf::from(c)),
        _ => {
            let dir = std::env::temp_dir();
            let s = dir.join("peplift_schedule.json");
            let c = dir.join("peplift_cert.json");
            let h = ogm_stepsize_matrix(6)?;
            std::fs::write(&s, serde_json::to_string_pretty(&ScheduleFile::from_stepsize_matrix(&h))?)?;
            std::fs::write(&c, CertificateFile::from(&ogm_func_certificate(6)?).to_json()?)?;
            (s, c)
        }
    };

    let h = load_schedule(&sched_path)?;
    let file = CertificateFile::load(&cert_path)?;
    let report = match file.metric {
        Metric::Func => verify_func_identity(&h, &file.into_func()?)?,
        Metric::Grad => verify_grad_identity(&h, &file.into_grad()?)?,
    };
    let r = report.residuals;
    println!("n = {}  quad {:.2e}  lin_f {:.2e}  lin_h {:.2e}", h.n(), r.quad, r.lin_f, r.lin_h);
    println!("{}", if report.pass { "certificate verified" } else { "certificate rejected" });
    Ok(())
}
