//! Text call lists: buffer declarations, calls and `go` commands.
//!
//! ```text
//! dmalloc A 1000000
//! dgemm N N 1000 1000 1000 1 A 1000 A+1000 1000 1 [1000000] 1000
//! go
//! ```
//!
//! Data arguments are a declared buffer name, optionally `+offset`, or an
//! ad-hoc buffer `[len]`. Info arguments take no token. Calls after the last
//! `go` form a final batch.

use crate::error::{Error, Result};
use crate::kernels::{flag_value, Arg, ArgKind, BufferStore, Call, Kernel, Operand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parsed call list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Script {
    /// Declared and ad-hoc buffers with their lengths, in order of appearance.
    pub buffers: Vec<(String, usize)>,
    /// Calls grouped by `go` commands.
    pub batches: Vec<Vec<Call>>,
    /// Ignored directives.
    pub warnings: Vec<String>,
}

impl Script {
    /// Allocates every buffer with seeded values in `[0, 1)`.
    pub fn allocate(&self, store: &mut BufferStore, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, len) in &self.buffers {
            store.insert(name.clone(), (0..*len).map(|_| rng.random::<f64>()).collect());
        }
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected {what}, got `{tok}`"),
    })
}

pub fn parse_call_list(text: &str) -> Result<Script> {
    let mut script = Script::default();
    let mut batch = Vec::new();
    let mut adhoc = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let toks: Vec<&str> = content.split_whitespace().collect();
        let Some(&head) = toks.first() else { continue };
        match head {
            "dmalloc" => {
                if toks.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        msg: "usage: dmalloc NAME LEN".into(),
                    });
                }
                let len = parse_num(toks[2], line, "buffer length")?;
                script.buffers.retain(|(n, _)| n != toks[1]);
                script.buffers.push((toks[1].to_string(), len));
            }
            "set_counters" => script
                .warnings
                .push(format!("line {line}: hardware counters are not supported")),
            "go" => script.batches.push(std::mem::take(&mut batch)),
            name => {
                let kernel = Kernel::from_name(name).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                let desc = kernel.descriptor();
                let specs: Vec<_> = desc
                    .args
                    .iter()
                    .filter(|a| a.kind != ArgKind::Info)
                    .collect();
                if specs.len() != toks.len() - 1 {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "{name} takes {} arguments, got {}",
                            specs.len(),
                            toks.len() - 1
                        ),
                    });
                }
                let mut tokens = toks[1..].iter();
                let mut args = Vec::with_capacity(desc.args.len());
                for spec in desc.args {
                    if spec.kind == ArgKind::Info {
                        args.push(Arg::Info);
                        continue;
                    }
                    let tok = *tokens.next().expect("token count checked");
                    let arg = match spec.kind {
                        ArgKind::Flag(_) => Arg::Flag(flag_value(spec.kind, &tok.to_ascii_uppercase())),
                        ArgKind::Size => Arg::Size(parse_num(tok, line, spec.name)?),
                        ArgKind::Ld(_) => Arg::Ld(parse_num(tok, line, spec.name)?),
                        ArgKind::Inc(_) => Arg::Inc(parse_num(tok, line, spec.name)?),
                        ArgKind::Scalar => Arg::Scalar(parse_num(tok, line, spec.name)?),
                        ArgKind::Data(_) => {
                            if let Some(inner) = tok.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                                let len = parse_num(inner, line, "ad-hoc buffer length")?;
                                let name = format!("_adhoc{adhoc}");
                                adhoc += 1;
                                script.buffers.push((name.clone(), len));
                                Arg::Data(Operand::new(name, 0))
                            } else {
                                let (buf, off) = match tok.split_once('+') {
                                    Some((b, o)) => (b, parse_num(o, line, "offset")?),
                                    None => (tok, 0),
                                };
                                if !script.buffers.iter().any(|(n, _)| n == buf) {
                                    return Err(Error::Parse {
                                        line,
                                        msg: format!("undeclared buffer `{buf}`"),
                                    });
                                }
                                Arg::Data(Operand::new(buf.to_string(), off))
                            }
                        }
                        ArgKind::Info => unreachable!(),
                    };
                    args.push(arg);
                }
                let call = Call { kernel, args };
                call.check_kinds().map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
                batch.push(call);
            }
        }
    }
    if !batch.is_empty() {
        script.batches.push(batch);
    }
    Ok(script)
}
