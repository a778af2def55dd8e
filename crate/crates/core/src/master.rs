//! Classical master equations `dP_i/dt = sum_j (R_ij P_j - R_ji P_i)`.
//!
//! Index convention: `R[i][j]` is the rate of the transition **j -> i**, so
//! column `j` of a rate matrix lists the ways out of state `j`. The master
//! operator has `M[i][j] = R[i][j]` off the diagonal and
//! `M[j][j] = -sum_{i != j} R[i][j]`, hence every column sums to zero and
//! total probability is conserved.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::probability::{shannon_entropy, ProbabilityVector};

pub const COLUMN_SUM_TOL: f64 = 1e-10;
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Nonnegative transition rates with zero diagonal; `R[i][j]` = rate j -> i.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    rates: DMatrix<f64>,
    labels: Vec<String>,
}

impl RateMatrix {
    pub fn new(rates: DMatrix<f64>) -> Result<Self> {
        let labels = (0..rates.nrows()).map(|i| i.to_string()).collect();
        Self::with_labels(rates, labels)
    }

    pub fn with_labels(rates: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let n = rates.nrows();
        if rates.ncols() != n || n == 0 {
            return Err(Error::InvalidRates(format!("shape {}x{}", n, rates.ncols())));
        }
        if labels.len() != n {
            return Err(Error::InvalidRates(format!("{} labels for {} states", labels.len(), n)));
        }
        for j in 0..n {
            for i in 0..n {
                let r = rates[(i, j)];
                if !r.is_finite() {
                    return Err(Error::InvalidRates(format!("R[{i}][{j}] is not finite")));
                }
                if i == j && r != 0.0 {
                    return Err(Error::InvalidRates(format!("nonzero diagonal R[{i}][{i}] = {r}")));
                }
                if r < 0.0 {
                    return Err(Error::InvalidRates(format!("negative rate R[{i}][{j}] = {r}")));
                }
            }
        }
        Ok(Self { rates, labels })
    }

    /// Two states; `r12` is the rate 2 -> 1, `r21` the rate 1 -> 2.
    pub fn two_state(r12: f64, r21: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[0.0, r12, r21, 0.0]))
    }

    pub fn len(&self) -> usize {
        self.rates.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.nrows() == 0
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    /// Rate of the transition `from -> to`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(to, from)]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Reads a rate matrix: a header row of state labels followed by one row
    /// per target state `i`, column `j` holding the rate j -> i. Lines
    /// starting with `#` are ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let labels: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            if rec.len() != n {
                return Err(Error::Parse(format!("row {} has {} fields, expected {n}", rows + 1, rec.len())));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}, column {j}: bad number {field:?}", rows + 1)))?;
                values.push(v);
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Parse(format!("{rows} rows for {n} labels")));
        }
        Self::with_labels(DMatrix::from_row_slice(n, n, &values), labels)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(&self.labels).map_err(io)?;
        for i in 0..self.len() {
            w.write_record((0..self.len()).map(|j| format_float(self.rates[(i, j)])))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Generator of a master equation: columns sum to zero, off-diagonals >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterOperator {
    m: DMatrix<f64>,
}

impl MasterOperator {
    /// Accepts a matrix only if [`validate_master`] passes.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let report = validate_master(&m);
        if !report.passed {
            return Err(Error::InvalidRates(report.summary()));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.m.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.m.nrows() == 0
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (&self.m - self.m.transpose()).amax() <= tol
    }
}

pub fn build_master_operator(r: &RateMatrix) -> MasterOperator {
    let mut m = r.rates().clone();
    for j in 0..m.ncols() {
        let out: f64 = (0..m.nrows()).filter(|&i| i != j).map(|i| m[(i, j)]).sum();
        m[(j, j)] = -out;
    }
    MasterOperator { m }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Sum of each column.
    pub column_residuals: Vec<f64>,
    pub max_residual: f64,
    /// `(row, column, value)` of every off-diagonal below `-OFF_DIAGONAL_TOL`.
    pub negative_entries: Vec<(usize, usize, f64)>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut parts = vec![format!("max |column sum| = {:e}", self.max_residual)];
        for (i, j, v) in &self.negative_entries {
            parts.push(format!("negative off-diagonal M[{i}][{j}] = {v}"));
        }
        parts.join("; ")
    }
}

/// Checks the column-sum and sign structure of a candidate master operator.
pub fn validate_master(m: &DMatrix<f64>) -> ValidationReport {
    if m.nrows() != m.ncols() {
        return ValidationReport {
            column_residuals: vec![],
            max_residual: f64::INFINITY,
            negative_entries: vec![],
            passed: false,
        };
    }
    let column_residuals: Vec<f64> = m.column_iter().map(|c| c.sum()).collect();
    let max_residual = column_residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let mut negative_entries = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j && m[(i, j)] < -OFF_DIAGONAL_TOL {
                negative_entries.push((i, j, m[(i, j)]));
            }
        }
    }
    let finite = m.iter().all(|x| x.is_finite());
    let passed = finite && max_residual <= COLUMN_SUM_TOL && negative_entries.is_empty();
    ValidationReport { column_residuals, max_residual, negative_entries, passed }
}

fn check_len(m: &MasterOperator, p: &ProbabilityVector) -> Result<()> {
    if m.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: m.len(), actual: p.len() });
    }
    Ok(())
}

/// `p(t) = exp(M t) p0`, by scaling and squaring.
pub fn evolve_probabilities(m: &MasterOperator, p0: &ProbabilityVector, t: f64) -> Result<ProbabilityVector> {
    check_len(m, p0)?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(p0.clone());
    }
    let propagator = (m.matrix() * t).exp();
    let p = propagator * DVector::from_column_slice(p0.as_slice());
    ProbabilityVector::new(p.iter().copied().collect())
}

/// Closed-form solution of the two-state chain.
///
/// `r12` is the rate 2 -> 1 and `r21` the rate 1 -> 2; with
/// `p1_inf = r12 / (r12 + r21)`,
/// `p1(t) = p1_inf + (p1(0) - p1_inf) exp(-(r12 + r21) t)`.
pub fn two_state_closed_form(r12: f64, r21: f64, p0: &ProbabilityVector, t: f64) -> Result<ProbabilityVector> {
    if p0.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: p0.len() });
    }
    if r12 < 0.0 || r21 < 0.0 || !r12.is_finite() || !r21.is_finite() {
        return Err(Error::InvalidRates(format!("rates must be nonnegative ({r12}, {r21})")));
    }
    let total = r12 + r21;
    if total == 0.0 {
        return Err(Error::InvalidRates("both rates are zero".into()));
    }
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let p1_inf = r12 / total;
    let p1 = p1_inf + (p0[0] - p1_inf) * (-total * t).exp();
    ProbabilityVector::new(vec![p1, 1.0 - p1])
}

/// Unique stationary distribution `M p = 0`.
///
/// The null-space dimension is read off the singular values; chains with
/// more than one stationary distribution are rejected with the multiplicity.
pub fn equilibrium(m: &MasterOperator) -> Result<ProbabilityVector> {
    let n = m.len();
    let a = m.matrix();
    let svd = a.clone().svd(false, false);
    let scale = svd.singular_values.max().max(1.0);
    let nullity = svd.singular_values.iter().filter(|&&s| s <= 1e-9 * scale).count();
    if nullity != 1 {
        return Err(Error::NonUniqueEquilibrium(nullity));
    }
    // Replace one balance row by the normalization sum(p) = 1.
    let mut sys = a.clone();
    let mut rhs = DVector::zeros(n);
    sys.row_mut(n - 1).fill(1.0);
    rhs[n - 1] = 1.0;
    let p = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidRates("singular normalization system".into()))?;
    ProbabilityVector::with_clamp(p.iter().copied().collect(), 1e-10)
}

/// Kullback-Leibler divergence `D(p || q) = sum p ln(p / q)` in nats.
pub fn relative_entropy(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), actual: q.len() });
    }
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.as_slice().iter().zip(q.as_slice()).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::SupportViolation(i));
            }
            d += pi * (pi / qi).ln();
        }
    }
    Ok(d.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropySample {
    pub t: f64,
    /// Shannon entropy of `p(t)`.
    pub shannon: f64,
    /// `D(p(t) || p_eq)`.
    pub relative: f64,
}

pub fn entropy_series(m: &MasterOperator, p0: &ProbabilityVector, times: &[f64]) -> Result<Vec<EntropySample>> {
    let p_eq = equilibrium(m)?;
    times
        .iter()
        .map(|&t| {
            let p = evolve_probabilities(m, p0, t)?;
            Ok(EntropySample { t, shannon: shannon_entropy(&p), relative: relative_entropy(&p, &p_eq)? })
        })
        .collect()
}

/// Writes `t,S,D` rows.
pub fn write_entropy_csv<W: Write>(samples: &[EntropySample], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["t", "S", "D"]).map_err(io)?;
    for s in samples {
        w.write_record([format_float(s.t), format_float(s.shannon), format_float(s.relative)])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_rates_give_zero_operator() {
        let m = build_master_operator(&RateMatrix::new(DMatrix::zeros(3, 3)).unwrap());
        assert_eq!(m.matrix(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn two_state_operator() {
        let r = 0.7;
        let m = build_master_operator(&RateMatrix::two_state(r, r).unwrap());
        assert_eq!(m.matrix(), &DMatrix::from_row_slice(2, 2, &[-r, r, r, -r]));
    }

    #[test]
    fn three_cycle_operator() {
        // 1 -> 2 -> 3 -> 1, each rate 1: R[to][from]
        let mut r = DMatrix::zeros(3, 3);
        r[(1, 0)] = 1.0;
        r[(2, 1)] = 1.0;
        r[(0, 2)] = 1.0;
        let m = build_master_operator(&RateMatrix::new(r).unwrap());
        for j in 0..3 {
            assert_eq!(m.matrix().column(j).sum(), 0.0);
            assert_eq!(m.matrix()[(j, j)], -1.0);
        }
        assert!(validate_master(m.matrix()).passed);
    }

    #[test]
    fn rate_matrix_rejections() {
        assert!(RateMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).is_err());
        assert!(RateMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.0])).is_err());
        assert!(RateMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn validation_reports() {
        let mut bad = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        bad[(0, 0)] += 0.1;
        let rep = validate_master(&bad);
        assert!(!rep.passed);
        assert!((rep.max_residual - 0.1).abs() < 1e-15);
        assert!((rep.column_residuals[0] - 0.1).abs() < 1e-15);

        let neg = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -0.5, -1.0]);
        let rep = validate_master(&neg);
        assert!(!rep.passed);
        assert_eq!(rep.negative_entries, vec![(1, 0, -0.5)]);
        assert!(rep.summary().contains("M[1][0]"));
        assert!(MasterOperator::new(neg).is_err());
    }

    #[test]
    fn evolve_examples() {
        let m = build_master_operator(&RateMatrix::two_state(1.0, 1.0).unwrap());
        let p0 = pv(&[1.0, 0.0]);
        assert_eq!(evolve_probabilities(&m, &p0, 0.0).unwrap(), p0);
        let p = evolve_probabilities(&m, &p0, 1.0).unwrap();
        // 1/2 + e^{-2}/2
        assert!((p[0] - 0.567_667_641_618_306_3).abs() < 1e-12);
        assert!((p[1] - 0.432_332_358_381_693_7).abs() < 1e-12);
        assert!(matches!(evolve_probabilities(&m, &p0, -1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn closed_form_examples() {
        let p0 = pv(&[1.0, 0.0]);
        let late = two_state_closed_form(1.0, 1.0, &p0, 50.0).unwrap();
        assert!((late[0] - 0.5).abs() < 1e-15);
        assert_eq!(two_state_closed_form(3.0, 0.2, &p0, 0.0).unwrap(), p0);
        let late = two_state_closed_form(2.0, 1.0, &p0, 60.0).unwrap();
        assert!((late[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!(two_state_closed_form(0.0, 0.0, &p0, 1.0).is_err());
    }

    #[test]
    fn equilibrium_examples() {
        let m = build_master_operator(&RateMatrix::two_state(1.0, 1.0).unwrap());
        let p = equilibrium(&m).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-14);

        let m = build_master_operator(&RateMatrix::two_state(2.0, 1.0).unwrap());
        let p = equilibrium(&m).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-14 && (p[1] - 1.0 / 3.0).abs() < 1e-14);

        let n = 5;
        let r = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.8 });
        let p = equilibrium(&build_master_operator(&RateMatrix::new(r).unwrap())).unwrap();
        assert!(p.as_slice().iter().all(|x| (x - 0.2).abs() < 1e-14));
    }

    #[test]
    fn reducible_chain_rejected() {
        // two disconnected pairs
        let mut r = DMatrix::zeros(4, 4);
        r[(0, 1)] = 1.0;
        r[(1, 0)] = 1.0;
        r[(2, 3)] = 1.0;
        r[(3, 2)] = 1.0;
        let m = build_master_operator(&RateMatrix::new(r).unwrap());
        assert_eq!(equilibrium(&m), Err(Error::NonUniqueEquilibrium(2)));
    }

    #[test]
    fn relative_entropy_examples() {
        let u = pv(&[0.5, 0.5]);
        assert_eq!(relative_entropy(&u, &u).unwrap(), 0.0);
        assert!((relative_entropy(&pv(&[1.0, 0.0]), &u).unwrap() - LN_2).abs() < 1e-15);
        // 0.75 ln 1.5 + 0.25 ln 0.5
        let d = relative_entropy(&pv(&[0.75, 0.25]), &u).unwrap();
        assert!((d - 0.130_812_035_941_137_6).abs() < 1e-12);
        assert_eq!(relative_entropy(&u, &pv(&[1.0, 0.0])), Err(Error::SupportViolation(1)));
    }

    #[test]
    fn series_at_equilibrium_is_flat() {
        let m = build_master_operator(&RateMatrix::two_state(2.0, 1.0).unwrap());
        let p_eq = equilibrium(&m).unwrap();
        let s = entropy_series(&m, &p_eq, &[0.0, 0.5, 1.0, 4.0]).unwrap();
        for x in &s {
            assert!((x.shannon - s[0].shannon).abs() < 1e-12);
            assert!(x.relative.abs() < 1e-12);
        }
    }

    #[test]
    fn series_symmetric_two_state() {
        let m = build_master_operator(&RateMatrix::two_state(1.0, 1.0).unwrap());
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let s = entropy_series(&m, &pv(&[1.0, 0.0]), &times).unwrap();
        assert!(s[0].shannon.abs() < 1e-15);
        assert!((s[0].relative - LN_2).abs() < 1e-15);
        for w in s.windows(2) {
            assert!(w[1].shannon >= w[0].shannon);
            assert!(w[1].relative <= w[0].relative);
        }
        assert!(s.last().unwrap().shannon < LN_2);
    }

    #[test]
    fn series_asymmetric_kl_still_decreases() {
        let m = build_master_operator(&RateMatrix::two_state(2.0, 1.0).unwrap());
        let times: Vec<f64> = (0..60).map(|i| i as f64 * 0.05).collect();
        let s = entropy_series(&m, &pv(&[0.0, 1.0]), &times).unwrap();
        for w in s.windows(2) {
            assert!(w[1].relative <= w[0].relative + 1e-12);
        }
        // Shannon entropy overshoots ln 2 on its way to the (2/3, 1/3) equilibrium
        let peak = s.iter().map(|x| x.shannon).fold(0.0, f64::max);
        assert!(peak > s.last().unwrap().shannon + 1e-3);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let text = "# comment\na,b,c\n0,1,2\n0.5,0,0\n0,3,0\n";
        let r = RateMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(r.labels(), &["a", "b", "c"]);
        assert_eq!(r.rate(1, 0), 1.0); // b -> a
        assert_eq!(r.rate(0, 1), 0.5);
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        assert_eq!(RateMatrix::read_csv(out.as_slice()).unwrap(), r);

        assert!(RateMatrix::read_csv("a,b\n0,1\n".as_bytes()).is_err());
        assert!(RateMatrix::read_csv("a,b\n0,x\n1,0\n".as_bytes()).is_err());
        assert!(RateMatrix::read_csv("a,b\n0,-1\n1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn entropy_csv_has_seventeen_digits() {
        let mut out = Vec::new();
        let s = [EntropySample { t: 0.1, shannon: LN_2, relative: 0.0 }];
        write_entropy_csv(&s, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "t,S,D\n1.0000000000000001e-1,6.9314718055994529e-1,0.0000000000000000e0\n");
    }
}
