use std::fmt::Write as _;
use std::path::Path;

use super::Mesh;
use crate::error::{Error, Result};

/// Read an ASCII OFF triangle mesh.
pub fn load_off(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_off(&text, &path.display().to_string())
}

/// Parse OFF text. `origin` names the source in error messages.
pub fn parse_off(text: &str, origin: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let err = |line: usize, msg: String| Error::parse(origin, line, msg);

    let (magic_line, magic) = lines.next().ok_or_else(|| err(1, "missing OFF magic".into()))?;
    let mut tokens = magic.split_whitespace();
    if tokens.next() != Some("OFF") {
        return Err(err(magic_line, "missing OFF magic".into()));
    }
    // counts may share the magic line
    let rest: Vec<&str> = tokens.collect();
    let (count_line, counts) = if rest.is_empty() {
        let (n, l) = lines
            .next()
            .ok_or_else(|| err(magic_line, "missing counts line".into()))?;
        (n, l.split_whitespace().collect::<Vec<_>>())
    } else {
        (magic_line, rest)
    };
    if counts.len() < 2 {
        return Err(err(count_line, "counts line needs 'nv nf ne'".into()));
    }
    let parse_count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| err(count_line, format!("bad count '{s}'")))
    };
    let nv = parse_count(counts[0])?;
    let nf = parse_count(counts[1])?;

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let Some((ln, l)) = lines.next() else {
            return Err(err(
                count_line,
                format!("vertex count mismatch: header declares {nv}, found {k}"),
            ));
        };
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(err(
                ln,
                format!("vertex count mismatch: header declares {nv}, found {k}"),
            ));
        }
        let mut v = [0.0; 3];
        for (d, t) in toks.iter().enumerate() {
            v[d] = t
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(ln, format!("bad coordinate '{t}'")))?;
        }
        vertices.push(v);
    }

    let mut faces = Vec::with_capacity(nf);
    for k in 0..nf {
        let Some((ln, l)) = lines.next() else {
            return Err(err(
                count_line,
                format!("face count mismatch: header declares {nf}, found {k}"),
            ));
        };
        let toks: Vec<&str> = l.split_whitespace().collect();
        let arity: usize = toks[0]
            .parse()
            .map_err(|_| err(ln, format!("bad face arity '{}'", toks[0])))?;
        if arity != 3 {
            return Err(err(ln, format!("non-triangular face ({arity} vertices)")));
        }
        if toks.len() < 4 {
            return Err(err(ln, "face line has fewer than 3 indices".into()));
        }
        let mut f = [0usize; 3];
        for d in 0..3 {
            let t = toks[d + 1];
            let idx: usize = t
                .parse()
                .map_err(|_| err(ln, format!("bad vertex index '{t}'")))?;
            if idx >= nv {
                return Err(err(ln, format!("vertex index {idx} out of range (nv = {nv})")));
            }
            f[d] = idx;
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(err(ln, "face repeats a vertex index".into()));
        }
        faces.push(f);
    }

    if let Some((ln, _)) = lines.next() {
        return Err(err(
            ln,
            format!("face count mismatch: data beyond the {nf} declared faces"),
        ));
    }

    Mesh::new(vertices, faces)
}

/// Serialize to the OFF layout written by [`save_off`].
pub fn write_off(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("OFF\n");
    let _ = writeln!(s, "{} {} 0", mesh.vertex_count(), mesh.faces().len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", fmt_sig9(v[0]), fmt_sig9(v[1]), fmt_sig9(v[2]));
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn save_off(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_off(mesh)).map_err(|e| Error::io(path, e))
}

/// `%.9g`: 9 significant digits, trailing zeros stripped.
pub(crate) fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        strip_zeros(&fixed)
    } else {
        format!("{}e{exp}", strip_zeros(mantissa))
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
