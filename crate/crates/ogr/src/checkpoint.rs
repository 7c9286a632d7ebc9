//! Policy checkpoints as structured text. Floats are stored as the hex of
//! their bit patterns so a save/load cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ogr_core::rl::{Mlp, PolicyParams};
use thiserror::Error;

const MAGIC: &str = "ogr-checkpoint 1";
const PER_LINE: usize = 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("checkpoint was trained under config {found}, expected {expected}")]
    ConfigMismatch { found: String, expected: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage: u32,
    pub branch: usize,
    /// Hash of the training configuration the parameters belong to.
    pub config_hash: String,
    pub params: PolicyParams,
}

fn write_mlp(s: &mut String, name: &str, m: &Mlp) {
    let sizes: Vec<String> = m.sizes.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(s, "mlp {name} {}", sizes.join(" "));
    for chunk in m.params.chunks(PER_LINE) {
        let words: Vec<String> = chunk.iter().map(|x| format!("{:016x}", x.to_bits())).collect();
        s.push_str(&words.join(" "));
        s.push('\n');
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "config {}", self.config_hash);
        let _ = writeln!(s, "stage {}", self.stage);
        let _ = writeln!(s, "branch {}", self.branch);
        write_mlp(&mut s, "actor", &self.params.actor);
        write_mlp(&mut s, "critic", &self.params.critic);
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let fail = |line, message: &str| CheckpointError::Format { line, message: message.to_string() };
        let mut next = |what: &str| lines.next().ok_or_else(|| fail(0, &format!("truncated before {what}")));
        let (n, l) = next("header")?;
        if l != MAGIC {
            return Err(fail(n, "not a checkpoint"));
        }
        let mut field = |key: &str| -> Result<(usize, String), CheckpointError> {
            let (n, l) = next(key)?;
            let v = l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')).ok_or_else(|| fail(n, &format!("expected `{key}`")))?;
            Ok((n, v.to_string()))
        };
        let (_, config_hash) = field("config")?;
        let (n, stage) = field("stage")?;
        let stage = stage.parse().map_err(|_| fail(n, "bad stage"))?;
        let (n, branch) = field("branch")?;
        let branch = branch.parse().map_err(|_| fail(n, "bad branch"))?;
        let actor = read_mlp(&mut lines, "actor")?;
        let critic = read_mlp(&mut lines, "critic")?;
        match lines.next() {
            Some((_, "end")) => {}
            Some((n, _)) => return Err(fail(n, "expected `end`")),
            None => return Err(fail(0, "missing `end`")),
        }
        Ok(Self { stage, branch, config_hash, params: PolicyParams { actor, critic } })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_text())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    /// Loads and checks the configuration hash.
    pub fn load_for(path: &Path, config_hash: &str) -> Result<Self, CheckpointError> {
        let c = Self::load(path)?;
        if c.config_hash != config_hash {
            return Err(CheckpointError::ConfigMismatch { found: c.config_hash, expected: config_hash.into() });
        }
        Ok(c)
    }
}

fn read_mlp<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, name: &str) -> Result<Mlp, CheckpointError> {
    let fail = |line, message: &str| CheckpointError::Format { line, message: message.to_string() };
    let (n, head) = lines.next().ok_or_else(|| fail(0, "missing network"))?;
    let mut words = head.split(' ');
    if words.next() != Some("mlp") || words.next() != Some(name) {
        return Err(fail(n, &format!("expected `mlp {name}`")));
    }
    let sizes: Vec<usize> = words.map(|w| w.parse().map_err(|_| fail(n, "bad layer size"))).collect::<Result<_, _>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(fail(n, "need at least two positive layer sizes"));
    }
    let want = Mlp::n_params(&sizes);
    let mut params = Vec::with_capacity(want);
    while params.len() < want {
        let (n, l) = lines.next().ok_or_else(|| fail(0, "truncated parameters"))?;
        for w in l.split(' ') {
            let bits = u64::from_str_radix(w, 16).map_err(|_| fail(n, "bad parameter word"))?;
            params.push(f64::from_bits(bits));
        }
    }
    if params.len() != want {
        return Err(fail(0, "parameter count does not match the layer sizes"));
    }
    Ok(Mlp { sizes, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip_is_exact() {
        let mut params = PolicyParams::new(&[6, 5], 3);
        params.actor.params[0] = f64::MIN_POSITIVE;
        params.critic.params[1] = -0.0;
        let c = Checkpoint { stage: 2, branch: 1, config_hash: "abc".into(), params };
        let text = c.to_text();
        let back = Checkpoint::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.params.critic.params[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_damage() {
        let c = Checkpoint { stage: 1, branch: 0, config_hash: "h".into(), params: PolicyParams::new(&[4], 1) };
        let text = c.to_text();
        let cut = &text[..text.len() / 2];
        assert!(Checkpoint::from_text(cut).is_err());
        assert!(Checkpoint::from_text(&text.replace("mlp critic", "mlp critter")).is_err());
        assert!(Checkpoint::from_text("hello").is_err());
    }
}
