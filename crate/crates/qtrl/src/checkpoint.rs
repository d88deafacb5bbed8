//! Model persistence: a single text header line followed by little-endian
//! 64-bit floats.
//!
//! Header: `QTRL-CKPT v1 mode=<m> n=<n> L=<L> k=<k> obs=<o> hidden=<h>
//! actions=<a> map_hidden=<w> act=<tanh|relu> seed=<s>` — dimensions are
//! validated against the topology before any array is accepted, and the
//! save → load round trip is bit-exact. Circuit angles are reduced to
//! [0, 2π) at save time (probabilities are invariant under the reduction).

use std::collections::HashMap;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mapper::{self, MappingParams};
use crate::policy::{Activation, PolicyParams, PolicyTopology};
use crate::qsim::QuantumParams;
use crate::qtgen::{self, GlobalModel};

const MAGIC: &str = "QTRL-CKPT";
const VERSION: &str = "v1";

/// A persisted model: either the quantum-train parameterization or the
/// classical baseline's flat policy.
#[derive(Debug, Clone)]
pub enum Checkpoint {
    Quantum { model: GlobalModel, seed: u64 },
    Classical { params: PolicyParams, seed: u64 },
}

impl Checkpoint {
    pub fn seed(&self) -> u64 {
        match self {
            Checkpoint::Quantum { seed, .. } | Checkpoint::Classical { seed, .. } => *seed,
        }
    }

    /// Policy parameters for evaluation (generated for the quantum case).
    pub fn policy_params(&self) -> Result<PolicyParams> {
        match self {
            Checkpoint::Quantum { model, .. } => {
                PolicyParams::new(model.policy_topology(), qtgen::generate_theta(model))
            }
            Checkpoint::Classical { params, .. } => Ok(params.clone()),
        }
    }
}

fn activation_str(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Relu => "relu",
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        other => Err(Error::Checkpoint(format!("unknown activation `{other}`"))),
    }
}

pub fn save(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    match checkpoint {
        Checkpoint::Quantum { model, seed } => {
            let t = model.policy_topology();
            writeln!(
                out,
                "{MAGIC} {VERSION} mode=qtrl n={} L={} k={} obs={} hidden={} actions={} map_hidden={} act={} seed={seed}",
                model.qubits(),
                model.blocks(),
                model.k(),
                t.obs_dim,
                t.hidden_dim,
                t.actions,
                mapper::HIDDEN,
                activation_str(t.activation),
            )?;
            write_f64s(&mut out, model.phi.wrapped().angles())?;
            write_f64s(&mut out, model.beta.values())?;
        }
        Checkpoint::Classical { params, seed } => {
            let t = params.topology();
            writeln!(
                out,
                "{MAGIC} {VERSION} mode=classical n=0 L=0 k={} obs={} hidden={} actions={} map_hidden=0 act={} seed={seed}",
                t.param_count(),
                t.obs_dim,
                t.hidden_dim,
                t.actions,
                activation_str(t.activation),
            )?;
            write_f64s(&mut out, params.theta())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    let body = &bytes[newline + 1..];

    let mut words = header.split_whitespace();
    if words.next() != Some(MAGIC) {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    if words.next() != Some(VERSION) {
        return Err(Error::Checkpoint("unsupported format version".into()));
    }
    let mut fields = HashMap::new();
    for word in words {
        let (key, value) = word
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("malformed header field `{word}`")))?;
        fields.insert(key.to_string(), value.to_string());
    }
    let get = |key: &str| -> Result<&String> {
        fields
            .get(key)
            .ok_or_else(|| Error::Checkpoint(format!("missing header field `{key}`")))
    };
    let get_usize = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("non-numeric header field `{key}`")))
    };

    let mode = get("mode")?.clone();
    let k = get_usize("k")?;
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| Error::Checkpoint("non-numeric seed".into()))?;
    let topology = PolicyTopology {
        obs_dim: get_usize("obs")?,
        hidden_dim: get_usize("hidden")?,
        actions: get_usize("actions")?,
        activation: parse_activation(get("act")?)?,
    };
    if topology.param_count() != k {
        return Err(Error::Checkpoint(format!(
            "header k={k} disagrees with topology count {}",
            topology.param_count()
        )));
    }

    match mode.as_str() {
        "qtrl" => {
            let n = get_usize("n")?;
            let layers = get_usize("L")?;
            if n != qtgen::required_qubits(k) {
                return Err(Error::Checkpoint(format!(
                    "header n={n} disagrees with ceil(log2 {k})"
                )));
            }
            if get_usize("map_hidden")? != mapper::HIDDEN {
                return Err(Error::Checkpoint("unsupported mapping width".into()));
            }
            let m = 3 * n * layers;
            let l = mapper::param_count(n + 1);
            let values = read_f64s(body, m + l)?;
            let phi = QuantumParams::new(n, layers, values[..m].to_vec())?;
            let beta = MappingParams::new(n + 1, values[m..].to_vec())?;
            let model = GlobalModel::new(phi, beta, topology)?;
            Ok(Checkpoint::Quantum { model, seed })
        }
        "classical" => {
            let theta = read_f64s(body, k)?;
            let params = PolicyParams::new(topology, theta)?;
            Ok(Checkpoint::Classical { params, seed })
        }
        other => Err(Error::Checkpoint(format!("unknown mode `{other}`"))),
    }
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(body: &[u8], expected: usize) -> Result<Vec<f64>> {
    if body.len() != expected * 8 {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, header implies {}",
            body.len(),
            expected * 8
        )));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn roundtrip_dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn quantum_round_trip_is_bit_exact() {
        let dir = roundtrip_dir();
        let path = dir.path().join("model.ckpt");
        let model = ExperimentConfig::default().build_quantum_model().unwrap();
        save(&path, &Checkpoint::Quantum { model: model.clone(), seed: 42 }).unwrap();
        let first = std::fs::read(&path).unwrap();

        let loaded = load(&path).unwrap();
        let Checkpoint::Quantum { model: reloaded, seed } = &loaded else {
            panic!("wrong checkpoint kind");
        };
        assert_eq!(*seed, 42);
        // Angles were wrapped at save time; probabilities must agree.
        let p0 = crate::qsim::probabilities(&crate::qsim::run_ansatz(&model.phi));
        let p1 = crate::qsim::probabilities(&crate::qsim::run_ansatz(&reloaded.phi));
        for (a, b) in p0.as_slice().iter().zip(p1.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(reloaded.beta, model.beta);

        save(&path, &loaded).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second, "save→load→save must be byte-stable");
    }

    #[test]
    fn classical_round_trip() {
        let dir = roundtrip_dir();
        let path = dir.path().join("model.ckpt");
        let params = ExperimentConfig::default().build_classical_params();
        save(&path, &Checkpoint::Classical { params: params.clone(), seed: 7 }).unwrap();
        let Checkpoint::Classical { params: reloaded, seed } = load(&path).unwrap() else {
            panic!("wrong checkpoint kind");
        };
        assert_eq!(seed, 7);
        assert_eq!(reloaded, params);
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = roundtrip_dir();
        let path = dir.path().join("model.ckpt");
        let model = ExperimentConfig::default().build_quantum_model().unwrap();
        save(&path, &Checkpoint::Quantum { model, seed: 1 }).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn inconsistent_header_rejected() {
        let dir = roundtrip_dir();
        let path = dir.path().join("model.ckpt");
        let model = ExperimentConfig::default().build_quantum_model().unwrap();
        save(&path, &Checkpoint::Quantum { model, seed: 1 }).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_end = bytes.iter().position(|b| *b == b'\n').unwrap();
        let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
        let mut rebuilt = header.replace("k=909", "k=910").into_bytes();
        rebuilt.extend_from_slice(&bytes[header_end..]);
        std::fs::write(&path, rebuilt).unwrap();
        assert!(load(&path).is_err());
    }
}
