use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use qcollide::Result;
use serde::Serialize;

use crate::config::{Format, RunConfig};

pub const UNITS: &str = "lengths in w, momenta in hbar/w, energies as p^2 (hbar = m = 1), times as t/m";

/// Provenance echoed at the top of every output.
pub struct Header<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
}

impl Header<'_> {
    pub fn preamble(&self) -> String {
        let json = serde_json::to_string(self.config).expect("config serialises");
        format!(
            "# qcollide {} {}\n# units: {UNITS}\n# config_hash: {}\n# quad_hash: {}\n# config: {json}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config.hash(),
            self.config.quadrature.hash(),
        )
    }
}

fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Writes `rows` as CSV (with a `#` preamble) or as a JSON document; `notes` go last.
pub fn emit<T: Serialize>(header: &Header<'_>, rows: &[T], notes: &[String], format: Format, path: Option<&Path>) -> Result<()> {
    let mut out = open(path)?;
    match format {
        Format::Csv => {
            out.write_all(header.preamble().as_bytes())?;
            {
                let mut w = csv::Writer::from_writer(&mut out);
                for row in rows {
                    w.serialize(row)?;
                }
                w.flush()?;
            }
            for n in notes {
                writeln!(out, "# {n}")?;
            }
        }
        Format::Json => {
            let doc = serde_json::json!({
                "qcollide": env!("CARGO_PKG_VERSION"),
                "command": header.command,
                "units": UNITS,
                "config_hash": header.config.hash(),
                "quad_hash": header.config.quadrature.hash(),
                "config": header.config,
                "records": rows,
                "notes": notes,
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}
