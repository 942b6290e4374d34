//! Runs a small layer x scheme sweep through the experiment layer, then extracts plot data
//! from the finished runs. Everything lands under the given output directory.
//!
//! ```text
//! cargo run --release --example sweep -- [out-dir]
//! ```

use std::path::PathBuf;

use lightgcn::experiment::{cmd_plotdata, cmd_sweep, ExperimentSpec, PlotKind, Settings};
use lightgcn::synthetic::{community_dataset, CommunityConfig};
use lightgcn::Format;

fn main() -> lightgcn::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sweep-out".into()));
    let data = out.join("data");
    community_dataset(&CommunityConfig { num_interactions: 3000, ..Default::default() }, 0.2)?
        .save_dir(&data, Format::AdjacencyList)?;

    let config = format!(
        "dataset = {}\nlayers = 1,2,3\nscheme = lightgcn,l1-r\nepochs = 20\ndim = 16\nlr = 0.005\nlambda = 1e-8\neval_every = 5\nout = {}\n",
        data.display(),
        out.display()
    );
    let spec = ExperimentSpec::from_settings(&Settings::parse(&config, &out.join("sweep.conf"))?)?;
    let sweep = cmd_sweep(&spec)?;
    print!("{}", std::fs::read_to_string(&sweep.table).map_err(|e| lightgcn::Error::io(&sweep.table, e))?);

    let dirs: Vec<PathBuf> = sweep.records.iter().map(|r| r.run_dir.clone()).collect();
    for kind in [PlotKind::Curves, PlotKind::FairnessBars, PlotKind::DiversityBars] {
        println!("{}", cmd_plotdata(&dirs, kind, None, &out.join("plots"))?.display());
    }
    Ok(())
}
