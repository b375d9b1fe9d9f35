//! Line-oriented input format for handle words:
//!
//! ```text
//! rank R
//! degree D
//! start genus G
//! up | down alpha K | down beta K | cyl
//! ```
//!
//! One directive or move per line, header before moves. Blank lines and
//! anything after '#' are ignored. Every error carries the 1-based line
//! it was found on, including down moves whose index does not exist at
//! the genus reached by that point of the file.

use thiserror::Error;

use crate::bordism::{CerfWord, HandleMove, Slot, SurfaceLabel};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct DslError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> DslError {
    DslError {
        line,
        message: message.into(),
    }
}

pub fn parse(src: &str) -> Result<CerfWord, DslError> {
    let mut rank: Option<(usize, usize)> = None;
    let mut degree: Option<(i64, usize)> = None;
    let mut start_genus: Option<(usize, usize)> = None;
    let mut moves: Vec<HandleMove> = Vec::new();
    let mut genus = 0usize;
    let mut saw_move = false;
    let mut last_line = 0usize;

    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();

        let parse_num = |v: &str, what: &str| -> Result<i64, DslError> {
            v.parse::<i64>()
                .map_err(|_| err(line_no, format!("{what} wants an integer, got '{v}'")))
        };
        let header_directive = |saw_move: bool, what: &str| -> Result<(), DslError> {
            if saw_move {
                return Err(err(line_no, format!("{what} must precede the moves")));
            }
            Ok(())
        };

        match words.as_slice() {
            ["rank", v] => {
                header_directive(saw_move, "rank")?;
                if rank.is_some() {
                    return Err(err(line_no, "duplicate rank directive"));
                }
                let r = parse_num(v, "rank")?;
                if r < 2 {
                    return Err(err(line_no, format!("rank must be at least 2, got {r}")));
                }
                rank = Some((r as usize, line_no));
            }
            ["degree", v] => {
                header_directive(saw_move, "degree")?;
                if degree.is_some() {
                    return Err(err(line_no, "duplicate degree directive"));
                }
                degree = Some((parse_num(v, "degree")?, line_no));
            }
            ["start", "genus", v] => {
                header_directive(saw_move, "start genus")?;
                if start_genus.is_some() {
                    return Err(err(line_no, "duplicate start genus directive"));
                }
                let g = parse_num(v, "start genus")?;
                if g < 0 {
                    return Err(err(line_no, "start genus cannot be negative"));
                }
                start_genus = Some((g as usize, line_no));
                genus = g as usize;
            }
            ["up"] | ["cyl"] | ["down", ..] => {
                if start_genus.is_none() {
                    return Err(err(line_no, "moves must follow the start genus directive"));
                }
                saw_move = true;
                match words.as_slice() {
                    ["up"] => {
                        moves.push(HandleMove::Up);
                        genus += 1;
                    }
                    ["cyl"] => moves.push(HandleMove::Cyl),
                    ["down", slot_word, v] => {
                        let slot = match *slot_word {
                            "alpha" => Slot::Alpha,
                            "beta" => Slot::Beta,
                            other => {
                                return Err(err(
                                    line_no,
                                    format!("down wants alpha or beta, got '{other}'"),
                                ))
                            }
                        };
                        let k = parse_num(v, "down index")?;
                        if k < 1 || k as usize > genus {
                            return Err(err(
                                line_no,
                                format!("down index {k} invalid at genus {genus}"),
                            ));
                        }
                        moves.push(HandleMove::Down {
                            slot,
                            index: k as usize,
                        });
                        genus -= 1;
                    }
                    _ => return Err(err(line_no, "down wants a slot and an index")),
                }
            }
            _ => {
                return Err(err(
                    line_no,
                    format!("unrecognized directive '{}'", words.join(" ")),
                ))
            }
        }
    }

    let (r, r_line) = rank.ok_or_else(|| err(last_line, "missing rank directive"))?;
    let (d, d_line) = degree.ok_or_else(|| err(last_line, "missing degree directive"))?;
    let (g, _) = start_genus.ok_or_else(|| err(last_line, "missing start genus directive"))?;
    let start =
        SurfaceLabel::new(g, r, d).map_err(|e| err(r_line.max(d_line), e.to_string()))?;
    Ok(CerfWord::new(start, moves))
}

/// Inverse of `parse` up to comments and blank lines.
pub fn to_dsl(w: &CerfWord) -> String {
    let mut out = format!(
        "rank {}\ndegree {}\nstart genus {}\n",
        w.start.rank, w.start.degree, w.start.genus
    );
    for m in &w.moves {
        out.push_str(&m.to_string());
        out.push('\n');
    }
    out
}

/// Comma-separated pin labels, e.g. "a1,b2" or "alpha1,beta2".
pub fn parse_labels(s: &str) -> Result<Vec<(Slot, usize)>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|tok| {
            let (slot, rest) = if let Some(r) = tok.strip_prefix("alpha") {
                (Slot::Alpha, r)
            } else if let Some(r) = tok.strip_prefix("beta") {
                (Slot::Beta, r)
            } else if let Some(r) = tok.strip_prefix('a') {
                (Slot::Alpha, r)
            } else if let Some(r) = tok.strip_prefix('b') {
                (Slot::Beta, r)
            } else {
                return Err(format!("label '{tok}' wants an alpha/beta prefix"));
            };
            let k: usize = rest
                .parse()
                .map_err(|_| format!("label '{tok}' wants a pair index"))?;
            if k == 0 {
                return Err(format!("label '{tok}' uses 1-based pair indices"));
            }
            Ok((slot, k))
        })
        .collect()
}
