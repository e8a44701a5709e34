//! Text serialization of trained networks.
//!
//! The format is line-oriented: a version header, one line per node, the
//! output node id, and one parameter per line. Floats are written with
//! Rust's shortest-roundtrip formatting, so save/load reproduces parameters
//! bit for bit.

use std::fs;
use std::path::Path;

use super::layer::{LayerKind, Mode};
use super::network::{LossKind, Network, NetworkBuilder, NodeId, NodeKind};
use super::transfer::Transfer;
use super::NnError;

const FORMAT: &str = "promissing-net.v1";

fn kind_name(kind: &LayerKind) -> &'static str {
    match kind {
        LayerKind::Dense => "dense",
        LayerKind::NanDense(Mode::Promissing) => "promissing",
        LayerKind::NanDense(Mode::MPromissing) => "m_promissing",
    }
}

fn kind_from_name(name: &str) -> Option<LayerKind> {
    Some(match name {
        "dense" => LayerKind::Dense,
        "promissing" => LayerKind::NanDense(Mode::Promissing),
        "m_promissing" => LayerKind::NanDense(Mode::MPromissing),
        _ => return None,
    })
}

pub fn network_to_string(net: &Network) -> String {
    let mut out = String::new();
    out.push_str(&format!("format={FORMAT}\n"));
    out.push_str(&format!("nodes={}\n", net.nodes().len()));
    for node in net.nodes() {
        let ins = node
            .inputs
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let line = match &node.kind {
            NodeKind::Input { width } => format!("node input width={width}"),
            NodeKind::Layer { kind, units, transfer } => format!(
                "node layer kind={} units={units} transfer={} in={ins}",
                kind_name(kind),
                transfer.name()
            ),
            NodeKind::Concat => format!("node concat in={ins}"),
            NodeKind::Dropout { rate } => format!("node dropout rate={rate:?} in={ins}"),
            NodeKind::LossHead { loss, weight } => {
                format!("node loss loss={} weight={weight:?} in={ins}", loss.name())
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&format!("output={}\n", net.output_node()));
    out.push_str(&format!("params={}\n", net.n_params()));
    for p in net.params() {
        out.push_str(&format!("{p:?}\n"));
    }
    out
}

struct Fields<'a> {
    line_no: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn parse(line: &'a str, line_no: usize) -> Result<(&'a str, Self), NnError> {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("node") {
            return Err(bad(line_no, "expected a node line"));
        }
        let node_type = tokens
            .next()
            .ok_or_else(|| bad(line_no, "node line missing its type"))?;
        let mut pairs = Vec::new();
        for token in tokens {
            let (k, v) = token
                .split_once('=')
                .ok_or_else(|| bad(line_no, &format!("malformed field `{token}`")))?;
            pairs.push((k, v));
        }
        Ok((node_type, Self { line_no, pairs }))
    }

    fn get(&self, key: &str) -> Result<&'a str, NnError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| bad(self.line_no, &format!("missing field `{key}`")))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T, NnError> {
        self.get(key)?
            .parse()
            .map_err(|_| bad(self.line_no, &format!("field `{key}` is not a number")))
    }

    fn id_list(&self, key: &str) -> Result<Vec<NodeId>, NnError> {
        self.get(key)?
            .split(',')
            .map(|t| {
                t.parse()
                    .map_err(|_| bad(self.line_no, &format!("bad node id `{t}`")))
            })
            .collect()
    }
}

fn bad(line_no: usize, what: &str) -> NnError {
    NnError::Serialize(format!("line {line_no}: {what}"))
}

fn expect_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, &'a str), NnError> {
    let (line_no, line) = lines
        .next()
        .ok_or_else(|| NnError::Serialize(format!("unexpected end of input, wanted {key}=")))?;
    let value = line
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| bad(line_no, &format!("expected `{key}=...`")))?;
    Ok((line_no, value))
}

pub fn network_from_str(text: &str) -> Result<Network, NnError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, format) = expect_header(&mut lines, "format")?;
    if format != FORMAT {
        return Err(bad(line_no, &format!("unsupported format `{format}`")));
    }
    let (line_no, n_nodes) = expect_header(&mut lines, "nodes")?;
    let n_nodes: usize = n_nodes
        .parse()
        .map_err(|_| bad(line_no, "node count is not a number"))?;

    let mut builder = NetworkBuilder::new();
    for _ in 0..n_nodes {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| NnError::Serialize("unexpected end of node list".into()))?;
        let (node_type, fields) = Fields::parse(line, line_no)?;
        match node_type {
            "input" => {
                builder.input(fields.number("width")?);
            }
            "layer" => {
                let name = fields.get("kind")?;
                let kind = kind_from_name(name)
                    .ok_or_else(|| bad(line_no, &format!("unknown layer kind `{name}`")))?;
                let name = fields.get("transfer")?;
                let transfer = Transfer::from_name(name)
                    .ok_or_else(|| bad(line_no, &format!("unknown transfer `{name}`")))?;
                let ins = fields.id_list("in")?;
                if ins.len() != 1 {
                    return Err(bad(line_no, "layer takes exactly one input"));
                }
                builder.layer(ins[0], kind, fields.number("units")?, transfer)?;
            }
            "concat" => {
                builder.concat(&fields.id_list("in")?)?;
            }
            "dropout" => {
                let ins = fields.id_list("in")?;
                if ins.len() != 1 {
                    return Err(bad(line_no, "dropout takes exactly one input"));
                }
                builder.dropout(ins[0], fields.number("rate")?)?;
            }
            "loss" => {
                let name = fields.get("loss")?;
                let loss = LossKind::from_name(name)
                    .ok_or_else(|| bad(line_no, &format!("unknown loss `{name}`")))?;
                let ins = fields.id_list("in")?;
                if ins.len() != 1 {
                    return Err(bad(line_no, "loss takes exactly one input"));
                }
                builder.loss(ins[0], loss, fields.number("weight")?)?;
            }
            other => return Err(bad(line_no, &format!("unknown node type `{other}`"))),
        }
    }

    let (line_no, output) = expect_header(&mut lines, "output")?;
    let output: NodeId = output
        .parse()
        .map_err(|_| bad(line_no, "output id is not a number"))?;
    builder.output(output);
    let mut net = builder.build()?;

    let (line_no, n_params) = expect_header(&mut lines, "params")?;
    let n_params: usize = n_params
        .parse()
        .map_err(|_| bad(line_no, "param count is not a number"))?;
    if n_params != net.n_params() {
        return Err(bad(
            line_no,
            &format!(
                "file declares {n_params} params but the graph needs {}",
                net.n_params()
            ),
        ));
    }
    for i in 0..n_params {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| NnError::Serialize(format!("missing parameter {i}")))?;
        net.params_mut()[i] = line
            .trim()
            .parse()
            .map_err(|_| bad(line_no, &format!("bad parameter value `{line}`")))?;
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(bad(line_no, "trailing content after parameters"));
    }
    Ok(net)
}

pub fn save_network(net: &Network, path: &Path) -> Result<(), NnError> {
    fs::write(path, network_to_string(net))
        .map_err(|e| NnError::Serialize(format!("writing {}: {e}", path.display())))
}

pub fn load_network(path: &Path) -> Result<Network, NnError> {
    let text = fs::read_to_string(path)
        .map_err(|e| NnError::Serialize(format!("reading {}: {e}", path.display())))?;
    network_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masked::MaskedMatrix;
    use crate::nn::network::{fusion_network, xor_network, FirstLayer};
    use ndarray::array;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut net = xor_network(FirstLayer::MPromissing);
        net.init_params(42);
        // Make a parameter deliberately awkward to print.
        net.params_mut()[0] = 0.1 + 0.2;
        let text = network_to_string(&net);
        let loaded = network_from_str(&text).unwrap();
        assert_eq!(net.params(), loaded.params());
        assert_eq!(net.nodes(), loaded.nodes());
        assert_eq!(net.output_node(), loaded.output_node());
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let mut net = fusion_network(&[3, 2], &[2, 2], FirstLayer::Promissing, 0.3).unwrap();
        net.init_params(7);
        let loaded = network_from_str(&network_to_string(&net)).unwrap();
        let m1 = MaskedMatrix::new(
            array![[0.1, f64::NAN, -0.4]],
            array![[false, true, false]],
        );
        let m2 = MaskedMatrix::from_dense(array![[1.0, 2.0]]);
        let a = net.predict(&[&m1, &m2]).unwrap();
        let b = loaded.predict(&[&m1, &m2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let mut net = xor_network(FirstLayer::Promissing);
        net.init_params(3);
        let path = std::env::temp_dir().join(format!(
            "promissing-serialize-test-{}.net",
            std::process::id()
        ));
        save_network(&net, &path).unwrap();
        let loaded = load_network(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(net.params(), loaded.params());
    }

    #[test]
    fn wrong_format_header_is_rejected() {
        let err = network_from_str("format=promissing-net.v2\nnodes=0\n");
        assert!(matches!(err, Err(NnError::Serialize(_))));
    }

    #[test]
    fn param_count_mismatch_is_rejected() {
        let mut net = xor_network(FirstLayer::Dense);
        net.init_params(1);
        let text = network_to_string(&net).replace("params=17", "params=3");
        assert!(matches!(network_from_str(&text), Err(NnError::Serialize(_))));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let net = xor_network(FirstLayer::Dense);
        let text = network_to_string(&net);
        let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(network_from_str(&cut).is_err());
    }
}
