use crate::error::{Error, Result};
use crate::Rat;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// One exact rational value per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Field {
    values: Vec<Rat>,
}

impl Field {
    pub fn new(values: Vec<Rat>) -> Field {
        Field { values }
    }

    pub fn value(&self, v: usize) -> &Rat {
        &self.values[v]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn negated(&self) -> Field {
        Field {
            values: self.values.iter().map(|x| -x.clone()).collect(),
        }
    }
}

/// Exact rational from "p/q", an integer, or a finite decimal.
pub fn parse_rat(tok: &str) -> Result<Rat> {
    let t = tok.trim();
    let bad = || Error::Parse(format!("bad rational {:?}", tok));
    if let Some((p, q)) = t.split_once('/') {
        let num: BigInt = p.trim().parse().map_err(|_| bad())?;
        let den: BigInt = q.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Rat::new(num, den));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        let neg = whole.starts_with('-');
        let w: BigInt = if whole == "-" || whole.is_empty() {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let f: BigInt = frac.parse().map_err(|_| bad())?;
        let mut den = BigInt::one();
        for _ in 0..frac.len() {
            den *= 10;
        }
        let mag = Rat::new(w.abs() * &den + f, den);
        return Ok(if neg || w < BigInt::zero() { -mag } else { mag });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Rat::from_integer(n))
}

pub fn format_rat(x: &Rat) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// CSV with a `vertex_id,value` header; every vertex exactly once.
pub fn parse_field_csv(text: &str, n_vertices: usize) -> Result<Field> {
    let mut values: Vec<Option<Rat>> = vec![None; n_vertices];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (id_tok, val_tok) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected id,value", lineno + 1)))?;
        if lineno == 0 && id_tok.trim().parse::<usize>().is_err() {
            continue; // header
        }
        let id: usize = id_tok
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad vertex id {:?}", lineno + 1, id_tok)))?;
        if id >= n_vertices {
            return Err(Error::Parse(format!(
                "line {}: vertex {} out of range",
                lineno + 1,
                id
            )));
        }
        if values[id].is_some() {
            return Err(Error::Parse(format!("vertex {} listed twice", id)));
        }
        values[id] = Some(parse_rat(val_tok)?);
    }
    let mut out = Vec::with_capacity(n_vertices);
    for (v, val) in values.into_iter().enumerate() {
        out.push(val.ok_or_else(|| Error::Parse(format!("vertex {} has no value", v)))?);
    }
    Ok(Field::new(out))
}

pub fn field_to_csv(field: &Field) -> String {
    let mut out = String::from("vertex_id,value\n");
    for v in 0..field.len() {
        out.push_str(&format!("{},{}\n", v, format_rat(field.value(v))));
    }
    out
}

/// A total order on vertices. Ties in the raw values are broken by vertex id,
/// which realizes an arbitrarily small symbolic perturbation; `perturbed`
/// records whether any tie actually occurred.
#[derive(Clone, Debug)]
pub struct VertexOrder {
    /// rank[v] = position of v from the bottom (0 = lowest).
    pub rank: Vec<usize>,
    pub perturbed: bool,
}

impl VertexOrder {
    pub fn below(&self, a: usize, b: usize) -> bool {
        self.rank[a] < self.rank[b]
    }

    /// Vertices from lowest to highest.
    pub fn ascending(&self) -> Vec<usize> {
        let mut vs: Vec<usize> = (0..self.rank.len()).collect();
        vs.sort_unstable_by_key(|&v| self.rank[v]);
        vs
    }
}

/// Total order induced by the field, with id tie-breaking.
pub fn ensure_generic(field: &Field) -> VertexOrder {
    let mut vs: Vec<usize> = (0..field.len()).collect();
    vs.sort_by(|&a, &b| field.value(a).cmp(field.value(b)).then(a.cmp(&b)));
    let mut rank = vec![0usize; field.len()];
    for (pos, &v) in vs.iter().enumerate() {
        rank[v] = pos;
    }
    let perturbed = vs.windows(2).any(|w| field.value(w[0]) == field.value(w[1]));
    VertexOrder { rank, perturbed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rat("3/4").unwrap(), Rat::new(3.into(), 4.into()));
        assert_eq!(parse_rat("-7").unwrap(), Rat::from_integer((-7).into()));
        assert_eq!(parse_rat("0.25").unwrap(), Rat::new(1.into(), 4.into()));
        assert_eq!(parse_rat("-1.5").unwrap(), Rat::new((-3).into(), 2.into()));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("abc").is_err());
        assert!(parse_rat("1.2.3").is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let f = Field::new(vec![
            Rat::new(1.into(), 2.into()),
            Rat::from_integer(3.into()),
            Rat::new((-5).into(), 7.into()),
        ]);
        let s = field_to_csv(&f);
        let p = parse_field_csv(&s, 3).unwrap();
        assert_eq!(p, f);
    }

    #[test]
    fn csv_rejects_missing_and_duplicate() {
        assert!(parse_field_csv("vertex_id,value\n0,1\n", 2).is_err());
        assert!(parse_field_csv("0,1\n0,2\n", 1).is_err());
    }

    #[test]
    fn generic_order_breaks_ties_by_id() {
        let f = Field::new(vec![
            Rat::from_integer(5.into()),
            Rat::from_integer(1.into()),
            Rat::from_integer(5.into()),
        ]);
        let o = ensure_generic(&f);
        assert!(o.perturbed);
        assert_eq!(o.ascending(), vec![1, 0, 2]);
        assert!(o.below(1, 0) && o.below(0, 2));
    }
}
