use std::fs;
use std::path::{Path, PathBuf};

use lfgp::datasets::{generate_dataset, write_csv, Dataset};

use crate::args::GenerateArgs;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, temp_path};

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes the CSV and its sidecar under temporary names, then renames both.
fn write_dataset(data: &Dataset, path: &Path) -> CliResult<()> {
    ensure_dir(path.parent().unwrap_or(Path::new("")))?;
    let tmp = temp_path(path);
    let rename = |from: &Path, to: &Path| fs::rename(from, to).map_err(|source| CliError::Io { path: to.into(), source });
    let result = write_csv(data, &tmp)
        .map_err(CliError::from)
        .and_then(|()| rename(&sidecar(&tmp), &sidecar(path)))
        .and_then(|()| rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
        let _ = fs::remove_file(sidecar(&tmp));
    }
    result
}

pub fn cmd_generate(args: &GenerateArgs) -> CliResult<Dataset> {
    let data = generate_dataset(args.kind, args.n, args.seed)?;
    write_dataset(&data, &args.out)?;
    eprintln!("wrote {} {} rows to {}", data.len(), args.kind, args.out.display());
    Ok(data)
}
