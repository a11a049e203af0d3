//! `--config FILE` support: `key = value` lines become `--key value` flags
//! placed before the user's own flags, so explicit flags win.

use std::fmt;

#[derive(Debug)]
pub struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parses config text into flag arguments.
pub fn flags_from_text(text: &str) -> Result<Vec<String>, ConfigError> {
    let mut flags = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "config line {}: expected key = value, got {:?}",
                n + 1,
                line
            )));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key.starts_with('-') || key == "config" {
            return Err(ConfigError(format!("config line {}: invalid key", n + 1)));
        }
        match value {
            "true" => flags.push(format!("--{}", key)),
            "false" => {}
            _ => {
                flags.push(format!("--{}", key));
                flags.push(value.to_string());
            }
        }
    }
    Ok(flags)
}

/// Removes `--config FILE` from `argv` and splices the file's flags in
/// directly after the subcommand name.
pub fn inject(argv: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut iter = argv.into_iter();
    rest.extend(iter.next());
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            match iter.next() {
                Some(p) => path = Some(p),
                None => return Err(ConfigError("--config requires a file".into())),
            }
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {}", path, e)))?;
    let flags = flags_from_text(&text)?;
    let Some(sub) = rest.iter().skip(1).position(|a| !a.starts_with('-')) else {
        return Ok(rest);
    };
    let at = sub + 2;
    rest.splice(at..at, flags);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_lines() {
        let flags =
            flags_from_text("# c\nseed = 7\n\nmechanism=I\nstandardize = true\nx_y = false\n")
                .unwrap();
        assert_eq!(flags, args("--seed 7 --mechanism I --standardize"));
        assert!(flags_from_text("seed 7").is_err());
    }

    #[test]
    fn splices_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "seed = 3\n").unwrap();
        let argv = vec![
            "csps".to_string(),
            "--config".into(),
            path.display().to_string(),
            "simulate".into(),
            "--seed".into(),
            "9".into(),
        ];
        assert_eq!(
            inject(argv).unwrap(),
            args("csps simulate --seed 3 --seed 9")
        );
        assert_eq!(inject(args("csps example")).unwrap(), args("csps example"));
    }
}
