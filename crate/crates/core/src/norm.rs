use serde::{Deserialize, Serialize};

/// Matrix norm applied to an inequity state (flattened entries).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSpec {
    #[default]
    MeanAbsolute,
    MaxAbsolute,
    RootMeanSquare,
}

impl NormSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let n = x.len() as f64;
        match self {
            NormSpec::MeanAbsolute => x.iter().map(|v| v.abs()).sum::<f64>() / n,
            NormSpec::MaxAbsolute => x.iter().map(|v| v.abs()).fold(0.0, f64::max),
            NormSpec::RootMeanSquare => (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
        }
    }

    /// A subgradient of the norm at `x`; zero components get zero weight.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let sign = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
        match self {
            NormSpec::MeanAbsolute => x.iter().map(|&v| sign(v) / n).collect(),
            NormSpec::MaxAbsolute => {
                let mut g = vec![0.0; x.len()];
                if let Some((i, v)) = x
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                {
                    g[i] = sign(*v);
                }
                g
            }
            NormSpec::RootMeanSquare => {
                let mu = self.eval(x);
                if mu == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    x.iter().map(|v| v / (n * mu)).collect()
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NormSpec::MeanAbsolute => "mean-absolute",
            NormSpec::MaxAbsolute => "max-absolute",
            NormSpec::RootMeanSquare => "root-mean-square",
        }
    }
}
