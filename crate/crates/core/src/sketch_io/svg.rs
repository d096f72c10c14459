//! Import of stroke SVGs: one `path` element per stroke, document order is
//! drawing order. Path data may use `M`, `L` and `C` in absolute or relative
//! form.

use super::{Point, Sketch, SketchError, Stroke};

/// Uniform parameter samples taken along each cubic segment.
pub const CUBIC_SAMPLES: usize = 16;

/// Converts an SVG document into a sketch. The sketch id is left empty; callers
/// loading from disk fill it from the file name.
///
/// Points that stray slightly outside the declared width/height are clamped
/// onto the extent, and a path with a single point becomes a zero-length stroke.
pub fn import_svg(text: &str, category: &str) -> Result<Sketch, SketchError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| SketchError::Malformed(e.to_string()))?;
    let root = doc.root_element();
    let dim = |name: &str| root.attribute(name).and_then(parse_length);
    let (width, height) = match (dim("width"), dim("height")) {
        (Some(w), Some(h)) if w > 0.0 && h > 0.0 => (w, h),
        _ => return Err(SketchError::MissingDimensions),
    };

    let mut strokes = Vec::new();
    for node in root.descendants().filter(|n| n.has_tag_name("path")) {
        let d = node.attribute("d").unwrap_or("");
        let mut points = flatten_path(d)?;
        if points.is_empty() {
            continue;
        }
        for p in &mut points {
            p.x = p.x.clamp(0.0, width);
            p.y = p.y.clamp(0.0, height);
        }
        if points.len() == 1 {
            points.push(points[0]);
        }
        strokes.push(Stroke { points });
    }
    if strokes.is_empty() {
        return Err(SketchError::NoPaths);
    }
    Sketch::new(String::new(), category, (width, height), strokes)
}

fn parse_length(s: &str) -> Option<f64> {
    let s = s.trim();
    let s = s.strip_suffix("px").unwrap_or(s);
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, PartialEq)]
enum Token {
    Command(char),
    Number(f64),
}

fn tokenize(d: &str) -> Result<Vec<Token>, SketchError> {
    let bytes = d.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() || c == ',' {
            i += 1;
        } else if c.is_ascii_alphabetic() && c != 'e' && c != 'E' {
            tokens.push(Token::Command(c));
            i += 1;
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            if c == '-' || c == '+' {
                i += 1;
            }
            let mut seen_dot = false;
            while i < bytes.len() {
                let ch = bytes[i] as char;
                if ch.is_ascii_digit() {
                    i += 1;
                } else if ch == '.' && !seen_dot {
                    seen_dot = true;
                    i += 1;
                } else {
                    break;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'-' || bytes[j] == b'+') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit = &d[start..i];
            let v = lit
                .parse::<f64>()
                .map_err(|_| SketchError::BadPathData(format!("bad number `{lit}`")))?;
            tokens.push(Token::Number(v));
        } else {
            return Err(SketchError::BadPathData(format!("unexpected character `{c}`")));
        }
    }
    Ok(tokens)
}

fn cubic(p0: Point, p1: Point, p2: Point, p3: Point, t: f64) -> Point {
    let u = 1.0 - t;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    Point::new(
        a * p0.x + b * p1.x + c * p2.x + d * p3.x,
        a * p0.y + b * p1.y + c * p2.y + d * p3.y,
    )
}

/// Flattens path data into a single polyline. A later moveto continues the
/// same polyline.
fn flatten_path(d: &str) -> Result<Vec<Point>, SketchError> {
    let tokens = tokenize(d)?;
    let mut out: Vec<Point> = Vec::new();
    let mut cur = Point::new(0.0, 0.0);
    let mut cmd: Option<char> = None;
    let mut i = 0;

    let take = |i: &mut usize, n: usize| -> Result<Vec<f64>, SketchError> {
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            match tokens.get(*i) {
                Some(Token::Number(v)) => vals.push(*v),
                _ => {
                    return Err(SketchError::BadPathData(format!(
                        "expected {n} coordinates"
                    )))
                }
            }
            *i += 1;
        }
        Ok(vals)
    };

    while i < tokens.len() {
        let c = match tokens[i] {
            Token::Command(c) => {
                i += 1;
                c
            }
            // Implicit repetition; extra pairs after a moveto are linetos.
            Token::Number(_) => match cmd {
                Some('M') => 'L',
                Some('m') => 'l',
                Some(c) => c,
                None => return Err(SketchError::BadPathData("path must start with a command".into())),
            },
        };
        let relative = c.is_ascii_lowercase();
        let offset = |p: Point, cur: Point| {
            if relative {
                Point::new(p.x + cur.x, p.y + cur.y)
            } else {
                p
            }
        };
        match c.to_ascii_uppercase() {
            'M' | 'L' => {
                let v = take(&mut i, 2)?;
                cur = offset(Point::new(v[0], v[1]), cur);
                out.push(cur);
            }
            'C' => {
                let v = take(&mut i, 6)?;
                let p1 = offset(Point::new(v[0], v[1]), cur);
                let p2 = offset(Point::new(v[2], v[3]), cur);
                let p3 = offset(Point::new(v[4], v[5]), cur);
                if out.is_empty() {
                    out.push(cur);
                }
                for k in 1..=CUBIC_SAMPLES {
                    let t = k as f64 / CUBIC_SAMPLES as f64;
                    out.push(cubic(cur, p1, p2, p3, t));
                }
                cur = p3;
            }
            _ => return Err(SketchError::UnsupportedCommand(c)),
        }
        cmd = Some(c);
    }
    Ok(out)
}
