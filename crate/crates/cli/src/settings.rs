//! `--config FILE` support: settings become flags inserted right after the
//! subcommand name, so anything given on the command line overrides them.

use std::path::Path;

use cawe::config::load_kv;

use crate::commands::Failure;

/// Value of `--config` among the subcommand's arguments, if any.
fn config_path(args: &[String]) -> Option<&str> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().map(String::as_str);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v);
        }
    }
    None
}

pub fn expand(argv: Vec<String>, cli: &clap::Command) -> Result<Vec<String>, Failure> {
    let Some(name) = argv.get(1) else {
        return Ok(argv);
    };
    let Some(sub) = cli.find_subcommand(name) else {
        return Ok(argv);
    };
    let Some(path) = config_path(&argv[2..]) else {
        return Ok(argv);
    };
    let settings = load_kv(Path::new(path)).map_err(|e| Failure::from(e.with_path(path)))?;
    let mut flags = Vec::new();
    for s in &settings {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(s.key.as_str()) && s.key != "config")
            .ok_or_else(|| {
                Failure::data(format!(
                    "{path}:{}: unknown setting {:?} for {name}",
                    s.line, s.key
                ))
            })?;
        if arg.get_action().takes_values() {
            flags.push(format!("--{}={}", s.key, s.value));
        } else {
            match s.value.as_str() {
                "true" => flags.push(format!("--{}", s.key)),
                "false" => {}
                other => {
                    return Err(Failure::data(format!(
                        "{path}:{}: {} expects true or false, got {other:?}",
                        s.line, s.key
                    )))
                }
            }
        }
    }
    let mut out = argv[..2].to_vec();
    out.extend(flags);
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}
