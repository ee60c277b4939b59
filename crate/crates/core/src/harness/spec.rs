//! Compact model specifications such as `brownian:a=1,s2=4`.
//!
//! ```text
//! brownian:a=<drift>,s2=<variance>
//! cp:a=<drift>,rate=<λ>,jumps=<law>[,law params]
//! bcp:a=<drift>,s2=<variance>,rate=<λ>,jumps=<law>[,law params]
//! stable:alpha=<α>,c=<scale>
//! ```
//!
//! Jump laws: `exp_up,mean=m`, `exp_down,mean=m`,
//! `two_sided,up=m,down=m,p_up=p`, `points,values=v1;v2,weights=w1;w2`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::levy::{JumpLaw, LevyFamily, LevyModel};

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}

struct Fields<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn parse(body: &'a str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
            if map.insert(k.trim(), v.trim()).is_some() {
                return Err(bad(format!("duplicate key `{}`", k.trim())));
            }
        }
        Ok(Fields { map })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.map.remove(key)
    }

    fn num(&mut self, key: &str) -> Result<f64> {
        let v = self.take(key).ok_or_else(|| bad(format!("missing `{key}`")))?;
        v.parse().map_err(|_| bad(format!("`{key}` = `{v}` is not a number")))
    }

    fn num_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.map.contains_key(key) {
            true => self.num(key),
            false => Ok(default),
        }
    }

    fn list(&mut self, key: &str) -> Result<Vec<f64>> {
        let v = self.take(key).ok_or_else(|| bad(format!("missing `{key}`")))?;
        v.split(';')
            .map(|x| x.trim().parse().map_err(|_| bad(format!("`{key}` entry `{x}` is not a number"))))
            .collect()
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(bad(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn jumps(f: &mut Fields) -> Result<JumpLaw> {
    let kind = f.take("jumps").ok_or_else(|| bad("missing `jumps`"))?;
    Ok(match kind {
        "exp_up" => JumpLaw::ExponentialUp { mean: f.num("mean")? },
        "exp_down" => JumpLaw::ExponentialDown { mean: f.num("mean")? },
        "two_sided" => JumpLaw::TwoSidedExponential { mean_up: f.num("up")?, mean_down: f.num("down")?, p_up: f.num("p_up")? },
        "points" => JumpLaw::PointMassMixture { values: f.list("values")?, weights: f.list("weights")? },
        other => return Err(bad(format!("unknown jump law `{other}`"))),
    })
}

/// Parses a model specification.
pub fn parse_model(spec: &str) -> Result<LevyModel> {
    let (family, body) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
    let mut f = Fields::parse(body)?;
    let fam = match family {
        "brownian" => LevyFamily::BrownianDrift { drift: f.num_or("a", 0.0)?, sigma2: f.num_or("s2", 1.0)? },
        "cp" => {
            let drift = f.num_or("a", 0.0)?;
            let rate = f.num("rate")?;
            LevyFamily::CompoundPoissonDrift { drift, rate, jumps: jumps(&mut f)? }
        }
        "bcp" => {
            let drift = f.num_or("a", 0.0)?;
            let sigma2 = f.num_or("s2", 1.0)?;
            let rate = f.num("rate")?;
            LevyFamily::BrownianPlusCompoundPoisson { drift, sigma2, rate, jumps: jumps(&mut f)? }
        }
        "stable" => LevyFamily::SpectrallyPositiveStable { alpha: f.num("alpha")?, scale: f.num_or("c", 1.0)? },
        other => return Err(bad(format!("unknown family `{other}` (brownian, cp, bcp, stable)"))),
    };
    f.finish()?;
    LevyModel::new(fam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families() {
        assert_eq!(parse_model("brownian:a=1,s2=4").unwrap(), LevyModel::brownian(1.0, 4.0).unwrap());
        assert_eq!(parse_model("stable:alpha=1.5").unwrap(), LevyModel::stable(1.5, 1.0).unwrap());
        let m = parse_model("cp:a=0.5, rate=2, jumps=exp_down, mean=1").unwrap();
        assert_eq!(m, LevyModel::compound_poisson(0.5, 2.0, JumpLaw::ExponentialDown { mean: 1.0 }).unwrap());
        let m = parse_model("bcp:a=1,s2=1,rate=1,jumps=points,values=1;-2,weights=0.5;0.5").unwrap();
        assert!(m.has_positive_jumps() && m.has_negative_jumps());
    }

    #[test]
    fn errors() {
        assert!(parse_model("levy:a=1").is_err());
        assert!(parse_model("brownian:a=x").is_err());
        assert!(parse_model("brownian:a=1,b=2").is_err());
        assert!(parse_model("brownian:a=1,s2=0").is_err());
        assert!(parse_model("cp:rate=1").is_err());
        assert!(parse_model("stable:alpha=1").is_err());
    }
}
