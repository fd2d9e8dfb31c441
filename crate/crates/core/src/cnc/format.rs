//! Plain-text jet files.
//!
//! ```text
//! # comment
//! flag conformal-normal
//! R0 1 2 1 2 = -1/3
//! R1 1 2 1 2 3 = 2
//! R2 1 2 1 2 3 4 = 0
//! ```
//!
//! Indices run over `1..=4`. Entries implied by the curvature symmetries of
//! the first four indices are filled in; a line contradicting an implied
//! value is an error. Omitted entries are zero. `R2` is present as soon as
//! one `R2` line appears.

use num_traits::Zero;

use super::{indices, symmetric_images, CncError, CurvatureJet, RTensor, Q};

fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: num_bigint::BigInt = n.trim().parse().ok()?;
        let d: num_bigint::BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Q::new(n, d))
    } else if let Ok(n) = s.parse::<num_bigint::BigInt>() {
        Some(Q::from_integer(n))
    } else {
        let v: f64 = s.parse().ok()?;
        Q::from_float(v)
    }
}

struct Filler {
    tensor: RTensor,
    set: Vec<bool>,
}

impl Filler {
    fn new(rank: usize) -> Self {
        Filler {
            tensor: RTensor::zeros(rank),
            set: vec![false; 4usize.pow(rank as u32)],
        }
    }

    fn offset(idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * 4 + i)
    }

    fn put(&mut self, idx: &[usize], v: &Q, line: usize) -> Result<(), CncError> {
        let tail = &idx[4..];
        for (img, sign) in symmetric_images(idx[0], idx[1], idx[2], idx[3]) {
            let mut full = img.to_vec();
            full.extend_from_slice(tail);
            let val = if sign > 0 { v.clone() } else { -v.clone() };
            let o = Self::offset(&full);
            if (img[0] == img[1] || img[2] == img[3])
                && !v.is_zero() {
                    return Err(CncError::Parse {
                        line,
                        message: "antisymmetric slots carry equal indices but the value is nonzero".into(),
                    });
                }
            if self.set[o] && *self.tensor.get(&full) != val {
                return Err(CncError::ConflictingEntry { line });
            }
            self.tensor.set(&full, val);
            self.set[o] = true;
        }
        Ok(())
    }
}

/// Parse a jet file and validate the result.
pub fn parse_jet(text: &str) -> Result<CurvatureJet, CncError> {
    let mut r0 = Filler::new(4);
    let mut r1 = Filler::new(5);
    let mut r2 = Filler::new(6);
    let mut have_r2 = false;
    let mut flag = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let head = words.next().unwrap_or("");
        if head == "flag" {
            match words.next() {
                Some("conformal-normal") => flag = true,
                other => {
                    return Err(CncError::Parse {
                        line,
                        message: format!("unknown flag {other:?}"),
                    })
                }
            }
            continue;
        }
        let (rank, target) = match head {
            "R0" => (4, &mut r0),
            "R1" => (5, &mut r1),
            "R2" => {
                have_r2 = true;
                (6, &mut r2)
            }
            _ => {
                return Err(CncError::Parse {
                    line,
                    message: format!("unknown record '{head}'"),
                })
            }
        };
        let (lhs, rhs) = content.split_once('=').ok_or(CncError::Parse {
            line,
            message: "missing '='".into(),
        })?;
        let idx: Vec<usize> = lhs
            .split_whitespace()
            .skip(1)
            .map(|w| match w.parse::<usize>() {
                Ok(v) if (1..=4).contains(&v) => Ok(v - 1),
                _ => Err(CncError::Parse {
                    line,
                    message: format!("bad index '{w}'"),
                }),
            })
            .collect::<Result<_, _>>()?;
        if idx.len() != rank {
            return Err(CncError::Parse {
                line,
                message: format!("{head} needs {rank} indices, found {}", idx.len()),
            });
        }
        let v = parse_q(rhs).ok_or(CncError::Parse {
            line,
            message: format!("bad value '{}'", rhs.trim()),
        })?;
        target.put(&idx, &v, line)?;
    }
    CurvatureJet::new(r0.tensor, r1.tensor, have_r2.then_some(r2.tensor), flag)
}

fn canonical(idx: &[usize]) -> bool {
    let (a, b, c, d) = (idx[0], idx[1], idx[2], idx[3]);
    a < b && c < d && (a, b) <= (c, d)
}

/// Render a jet in the file format; output is deterministic.
pub fn write_jet(jet: &CurvatureJet) -> String {
    let mut s = String::new();
    if jet.conformal_normal {
        s.push_str("flag conformal-normal\n");
    }
    let mut emit = |name: &str, t: &RTensor| {
        for idx in indices(t.rank()) {
            let v = t.get(&idx);
            if v.is_zero() || !canonical(&idx) {
                continue;
            }
            let ids: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
            s.push_str(&format!("{name} {} = {v}\n", ids.join(" ")));
        }
    };
    emit("R0", &jet.r0);
    emit("R1", &jet.r1);
    if let Some(r2) = &jet.r2 {
        emit("R2", r2);
        if r2.is_zero() {
            s.push_str("R2 1 2 1 2 1 1 = 0\n");
        }
    }
    s
}
