//! Binary snapshot of a network.
//!
//! Layout: 8-byte magic, u64 LE manifest length, JSON manifest, raw f64 LE
//! payload (node tensors in node order, then Schmidt values when bond-gauged),
//! u64 LE checksum (leading 8 bytes of the payload's SHA-256).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::topology::{Bond, Layout, TreeTopology};
use super::tree::{leg_labels, Gauge, TreeNetwork};
use crate::error::{Error, Result};
use crate::models::LatticeGeometry;
use crate::tensor::DenseTensor;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"TTNSNAP1";
const FORMAT_VERSION: u32 = 1;

/// Free-form metadata stored with a snapshot (model parameters, energies).
pub type SnapshotMeta = serde_json::Value;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    geometry: LatticeGeometry,
    layout: Layout,
    max_bond: usize,
    nodes: Vec<NodeEntry>,
    gauge: GaugeEntry,
    meta: SnapshotMeta,
}

#[derive(Serialize, Deserialize)]
struct NodeEntry {
    legs: Vec<String>,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum GaugeEntry {
    None,
    Node { node: usize },
    Bond { bond: usize, extent: usize },
}

fn checksum(payload: &[u8]) -> u64 {
    let digest = Sha256::digest(payload);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn encode_snapshot(net: &TreeNetwork, meta: &SnapshotMeta) -> Result<Vec<u8>> {
    let topo = net.topology();
    let gauge = match net.gauge() {
        Gauge::None => GaugeEntry::None,
        Gauge::Node(u) => GaugeEntry::Node { node: *u },
        Gauge::Bond { bond, lambda } => GaugeEntry::Bond { bond: bond.0, extent: lambda.len() },
    };
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        geometry: *topo.geometry(),
        layout: topo.layout(),
        max_bond: net.max_bond(),
        nodes: net
            .tensors()
            .iter()
            .map(|t| NodeEntry {
                legs: t.legs().iter().map(|l| l.as_str().to_owned()).collect(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        gauge,
        meta: meta.clone(),
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::Internal(format!("manifest encoding: {e}")))?;
    let mut payload = Vec::new();
    for t in net.tensors() {
        for x in t.data() {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    if let Gauge::Bond { lambda, .. } = net.gauge() {
        for x in lambda {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(24 + json.len() + payload.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&checksum(&payload).to_le_bytes());
    Ok(out)
}

pub fn save_snapshot(net: &TreeNetwork, path: &Path, meta: &SnapshotMeta) -> Result<()> {
    let bytes = encode_snapshot(net, meta)?;
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, reason: reason.into() }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(TreeNetwork, SnapshotMeta)> {
    if bytes.len() < 8 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(format_err(0, "missing snapshot magic"));
    }
    if bytes.len() < 16 {
        return Err(format_err(8, "truncated manifest length"));
    }
    let mlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let mend = 16usize.checked_add(mlen).filter(|&e| e <= bytes.len()).ok_or_else(|| {
        format_err(8, format!("manifest length {mlen} exceeds the file"))
    })?;
    let manifest: Manifest = serde_json::from_slice(&bytes[16..mend])
        .map_err(|e| format_err(16 + e.column().saturating_sub(1), format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(format_err(16, format!("unsupported format version {}", manifest.format_version)));
    }
    let topology = TreeTopology::build(manifest.geometry, manifest.layout)
        .map_err(|e| format_err(16, format!("topology: {e}")))?;
    if manifest.nodes.len() != topology.n_nodes() {
        return Err(format_err(16, "node count does not match the topology"));
    }
    let lambda_len = match manifest.gauge {
        GaugeEntry::Bond { extent, .. } => extent,
        _ => 0,
    };
    let scalars: usize = manifest.nodes.iter().map(|n| n.shape.iter().product::<usize>()).sum::<usize>() + lambda_len;
    let pend = mend + 8 * scalars;
    if bytes.len() < pend + 8 {
        return Err(format_err(bytes.len(), format!("payload truncated: expected {} bytes", pend + 8)));
    }
    if bytes.len() > pend + 8 {
        return Err(format_err(pend + 8, "trailing bytes after checksum"));
    }
    let stored = u64::from_le_bytes(bytes[pend..pend + 8].try_into().expect("8 bytes"));
    if stored != checksum(&bytes[mend..pend]) {
        return Err(format_err(pend, "payload checksum mismatch"));
    }
    let mut cursor = mend;
    let read = |cursor: &mut usize, n: usize| -> Vec<f64> {
        let v = bytes[*cursor..*cursor + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        *cursor += 8 * n;
        v
    };
    let mut tensors = Vec::with_capacity(manifest.nodes.len());
    for (u, entry) in manifest.nodes.iter().enumerate() {
        let start = cursor;
        let data = read(&mut cursor, entry.shape.iter().product());
        let expected = leg_labels(&topology, u);
        if entry.legs.iter().map(String::as_str).ne(expected.iter().map(String::as_str)) {
            return Err(format_err(16, format!("node {u} leg labels do not match the topology")));
        }
        let t = DenseTensor::new(entry.legs.clone(), entry.shape.clone(), data)
            .map_err(|e| format_err(start, format!("node {u}: {e}")))?;
        tensors.push(t);
    }
    let gauge = match manifest.gauge {
        GaugeEntry::None => Gauge::None,
        GaugeEntry::Node { node } => Gauge::Node(node),
        GaugeEntry::Bond { bond, extent } => Gauge::Bond { bond: Bond(bond), lambda: read(&mut cursor, extent) },
    };
    let net = TreeNetwork::from_parts(topology, manifest.max_bond, tensors, gauge)
        .map_err(|e| format_err(16, format!("inconsistent network: {e}")))?;
    Ok((net, manifest.meta))
}

pub fn load_snapshot(path: &Path) -> Result<(TreeNetwork, SnapshotMeta)> {
    decode_snapshot(&fs::read(path)?)
}
