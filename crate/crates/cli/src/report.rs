use serde::{Deserialize, Serialize};
use signcov::asymptotics::AsymptoticsBundle;
use signcov::linalg::Matrix;
use signcov::location::LocationResult;
use signcov::scatter::{CoincidenceReport, ScatterMatrix};

/// Row-major matrix with explicit dimensions, the on-disk form of every
/// matrix the CLI prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dims: [usize; 2],
    pub data: Vec<f64>,
}

impl From<&Matrix> for MatrixJson {
    fn from(m: &Matrix) -> Self {
        MatrixJson {
            dims: [m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        }
    }
}

impl MatrixJson {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dims[1] + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterJson {
    pub variant: String,
    pub matrix: MatrixJson,
    pub n_effective: usize,
    pub trace: f64,
}

impl From<&ScatterMatrix> for ScatterJson {
    fn from(s: &ScatterMatrix) -> Self {
        ScatterJson {
            variant: serde_json::to_value(s.variant)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            matrix: (&s.matrix).into(),
            n_effective: s.n_effective,
            trace: s.trace(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsJson {
    pub w: MatrixJson,
    pub b: MatrixJson,
    pub xi: MatrixJson,
    pub a: MatrixJson,
    pub sandwich: MatrixJson,
    pub n_used: usize,
    pub max_marginal_kurtosis: f64,
}

impl From<&AsymptoticsBundle> for AsymptoticsJson {
    fn from(b: &AsymptoticsBundle) -> Self {
        AsymptoticsJson {
            w: (&b.w).into(),
            b: (&b.b).into(),
            xi: (&b.xi).into(),
            a: (&b.a).into(),
            sandwich: (&b.sandwich).into(),
            n_used: b.n_used,
            max_marginal_kurtosis: b.max_marginal_kurtosis,
        }
    }
}

/// Output of `signcov estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n: usize,
    pub p: usize,
    pub location: LocationResult,
    pub sscm: ScatterJson,
    pub starred: Option<ScatterJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetrized: Option<ScatterJson>,
    pub coincidence: CoincidenceReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticsJson>,
}

impl EstimateReport {
    /// Long format: `quantity,row,col,value`; vectors leave `col` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,row,col,value\n");
        for (i, v) in self.location.estimate.iter().enumerate() {
            out += &format!("location,{i},,{v}\n");
        }
        out += &format!("n,,,{}\nn_star,,,{}\n", self.n, self.coincidence.n_star);
        let mut matrix = |name: &str, m: &MatrixJson| {
            for i in 0..m.dims[0] {
                for j in 0..m.dims[1] {
                    out += &format!("{name},{i},{j},{}\n", m.get(i, j));
                }
            }
        };
        matrix("sscm", &self.sscm.matrix);
        if let Some(s) = &self.starred {
            matrix("starred", &s.matrix);
        }
        if let Some(s) = &self.symmetrized {
            matrix("symmetrized", &s.matrix);
        }
        if let Some(a) = &self.asymptotics {
            matrix("w", &a.w);
            matrix("b", &a.b);
            matrix("xi", &a.xi);
            matrix("sandwich", &a.sandwich);
        }
        out
    }
}

/// Output of `signcov oracle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub method: String,
    pub p: usize,
    pub matrix: MatrixJson,
    pub standard_errors: Option<MatrixJson>,
    pub draws: Option<usize>,
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_json_is_row_major() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let j = MatrixJson::from(&m);
        assert_eq!(j.dims, [2, 3]);
        assert_eq!(j.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(j.get(1, 0), 4.0);
        let s = serde_json::to_string(&j).unwrap();
        assert_eq!(s, r#"{"dims":[2,3],"data":[1.0,2.0,3.0,4.0,5.0,6.0]}"#);
    }

    #[test]
    fn floats_survive_the_text_round_trip() {
        let m = Matrix::from_rows(&[vec![0.1 + 0.2, 1.0 / 3.0], vec![std::f64::consts::PI, 1e-300]]).unwrap();
        let j = MatrixJson::from(&m);
        let back: MatrixJson = serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap();
        assert_eq!(back, j);
    }
}
