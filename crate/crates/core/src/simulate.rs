//! Gaussian simulation of VAR, PVAR and VHAR panels.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::seed::Rng;
use crate::transition::{self, TransitionSet};

/// Companion radius above which simulation is refused.
pub const DIVERGENCE_GUARD: f64 = 1.05;
pub const DEFAULT_BURN_IN: usize = 500;

/// A `T x q` panel. Row `t` (0-based) belongs to season `t mod s + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPanel {
    #[serde(with = "linalg::rows")]
    pub data: Mat,
    pub season_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl TimeSeriesPanel {
    pub fn new(data: Mat, season_count: usize) -> Result<Self> {
        let panel = Self {
            data,
            season_count,
            labels: None,
        };
        panel.validate()?;
        Ok(panel)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.q() {
            return Err(Error::Dimension(format!(
                "{} labels for {} columns",
                labels.len(),
                self.q()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.nrows() == 0 || self.data.ncols() == 0 {
            return Err(Error::Dimension("panel must have at least one row and column".into()));
        }
        if self.season_count == 0 {
            return Err(Error::Config("season count must be positive".into()));
        }
        linalg::ensure_finite(&self.data, "panel")
    }

    pub fn t_len(&self) -> usize {
        self.data.nrows()
    }

    pub fn q(&self) -> usize {
        self.data.ncols()
    }

    /// 1-based season of 0-based row `t`.
    pub fn season_of(&self, t: usize) -> usize {
        t % self.season_count + 1
    }

    pub fn column_names(&self) -> Vec<String> {
        match &self.labels {
            Some(l) => l.clone(),
            None => (1..=self.q()).map(|j| format!("y{j}")).collect(),
        }
    }

    /// Writes a header row and one row per time index. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.column_names())?;
        let mut buf: Vec<String> = Vec::with_capacity(self.q());
        for t in 0..self.t_len() {
            buf.clear();
            buf.extend(self.data.row(t).iter().map(|x| x.to_string()));
            wr.write_record(&buf)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, season_count: usize) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let names: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (t, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} cells, expected {}",
                    t + 1,
                    rec.len(),
                    names.len()
                )));
            }
            let row = rec
                .iter()
                .enumerate()
                .map(|(j, cell)| {
                    cell.parse::<f64>().map_err(|_| {
                        Error::Parse(format!(
                            "non-numeric value {cell:?} in column {} at row {}",
                            names[j],
                            t + 1
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("panel has no data rows".into()));
        }
        Self::new(linalg::from_rows(&rows)?, season_count)?.with_labels(names)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path, season_count: usize) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, season_count)
    }
}

/// Innovation law.
#[derive(Clone, Debug, Default)]
pub enum Innovations {
    /// `N(0, I)`.
    #[default]
    StandardNormal,
    /// `N(0, LL')` for a lower-triangular factor `L`.
    Gaussian(Mat),
    /// All innovations zero.
    Zero,
}

impl Innovations {
    pub fn with_covariance(sigma: &Mat) -> Result<Self> {
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("innovation covariance is not positive definite".into()))?;
        Ok(Innovations::Gaussian(chol.l()))
    }

    fn draw(&self, q: usize, rng: &mut Rng) -> DVector<f64> {
        match self {
            Innovations::Zero => DVector::zeros(q),
            Innovations::StandardNormal => DVector::from_fn(q, |_, _| StandardNormal.sample(rng)),
            Innovations::Gaussian(l) => {
                let e = DVector::from_fn(q, |_, _| StandardNormal.sample(rng));
                l * e
            }
        }
    }
}

/// Options shared by the simulators.
#[derive(Clone, Debug)]
pub struct SimulationOptions {
    pub burn_in: usize,
    pub innovations: Innovations,
    /// Pre-sample state `Y_{-1}, Y_{-2}, ...`; zeros when absent.
    pub initial: Option<Vec<DVector<f64>>>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            burn_in: DEFAULT_BURN_IN,
            innovations: Innovations::StandardNormal,
            initial: None,
        }
    }
}

impl SimulationOptions {
    pub fn with_burn_in(burn_in: usize) -> Self {
        Self {
            burn_in,
            ..Self::default()
        }
    }
}

/// Per-season lag lists: VAR is one season, VHAR its VAR(22) expansion.
fn seasonal_lags(t: &TransitionSet) -> Result<Vec<Vec<Mat>>> {
    Ok(match t {
        TransitionSet::Var { lags, .. } => vec![lags.clone()],
        TransitionSet::Pvar { seasons, .. } => seasons.clone(),
        TransitionSet::Vhar { .. } => match transition::vhar_to_var22(t)? {
            TransitionSet::Var { lags, .. } => vec![lags],
            _ => unreachable!(),
        },
    })
}

/// Simulates any transition set; the first retained row is season 1.
pub fn simulate(
    t: &TransitionSet,
    len: usize,
    opts: &SimulationOptions,
    rng: &mut Rng,
) -> Result<TimeSeriesPanel> {
    t.validate()?;
    if len == 0 {
        return Err(Error::Config("series length must be positive".into()));
    }
    let rho = transition::companion_radius(t)?;
    if rho > DIVERGENCE_GUARD {
        return Err(Error::Divergent(rho));
    }
    if rho >= 1.0 {
        log::warn!("simulating a non-stable transition set (spectral radius {rho:.4})");
    }
    let seasons = seasonal_lags(t)?;
    let s = seasons.len();
    if len % s != 0 {
        log::warn!("series length {len} is not a multiple of the season count {s}; the last cycle is incomplete");
    }
    let q = t.q();
    let p = t.max_lag();
    let burn = opts.burn_in.div_ceil(s) * s;

    let mut hist: Vec<DVector<f64>> = vec![DVector::zeros(q); p];
    if let Some(init) = &opts.initial {
        for (h, v) in init.iter().take(p).enumerate() {
            if v.len() != q {
                return Err(Error::Dimension("initial state has the wrong length".into()));
            }
            // hist[p-1] is Y_{-1}
            hist[p - 1 - h] = v.clone();
        }
    }
    let total = burn + len;
    let mut data = Mat::zeros(len, q);
    for g in 0..total {
        let m = g % s;
        let mut y = opts.innovations.draw(q, rng);
        let n = hist.len();
        for (h, phi) in seasons[m].iter().enumerate() {
            y.gemv(1.0, phi, &hist[n - 1 - h], 1.0);
        }
        if g >= burn {
            data.set_row(g - burn, &y.transpose());
        }
        hist.push(y);
        if hist.len() > 2 * p.max(1) + 64 {
            hist.drain(..hist.len() - p);
        }
    }
    if !data.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("simulated panel".into()));
    }
    TimeSeriesPanel::new(data, s)
}

pub fn simulate_var(t: &TransitionSet, len: usize, opts: &SimulationOptions, rng: &mut Rng) -> Result<TimeSeriesPanel> {
    expect_kind(t, "var")?;
    simulate(t, len, opts, rng)
}

pub fn simulate_pvar(t: &TransitionSet, len: usize, opts: &SimulationOptions, rng: &mut Rng) -> Result<TimeSeriesPanel> {
    expect_kind(t, "pvar")?;
    simulate(t, len, opts, rng)
}

pub fn simulate_vhar(t: &TransitionSet, len: usize, opts: &SimulationOptions, rng: &mut Rng) -> Result<TimeSeriesPanel> {
    expect_kind(t, "vhar")?;
    simulate(t, len, opts, rng)
}

fn expect_kind(t: &TransitionSet, kind: &str) -> Result<()> {
    if t.kind_name() == kind {
        Ok(())
    } else {
        Err(Error::Contract(format!("expected a {kind} set, got {}", t.kind_name())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn scalar(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn white_noise_covariance_is_identity() {
        let q = 3;
        let t = TransitionSet::pvar(vec![vec![Mat::zeros(q, q)]; 2]);
        let mut rng = rng_from_seed(1);
        let panel = simulate_pvar(&t, 20_000, &SimulationOptions::default(), &mut rng).unwrap();
        let n = panel.t_len() as f64;
        let cov = panel.data.transpose() * &panel.data / n;
        // entries of a sample covariance have sd about 1/sqrt(n) off the diagonal
        let tol = 4.0 * (2.0 / n).sqrt();
        assert!((cov - Mat::identity(q, q)).abs().max() < tol);
    }

    #[test]
    fn zero_innovations_give_zero_panel() {
        let t = TransitionSet::pvar(vec![vec![Mat::identity(2, 2) * 0.5]; 3]);
        let opts = SimulationOptions {
            innovations: Innovations::Zero,
            ..Default::default()
        };
        let mut rng = rng_from_seed(2);
        let p = simulate_pvar(&t, 30, &opts, &mut rng).unwrap();
        assert!(p.data.iter().all(|&x| x == 0.0));
        let v = TransitionSet::vhar(Mat::identity(2, 2) * 0.3, Mat::zeros(2, 2), Mat::zeros(2, 2));
        assert!(simulate_vhar(&v, 30, &opts, &mut rng).unwrap().data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_season_matches_var() {
        let phi = Mat::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.3]);
        let a = simulate_pvar(&TransitionSet::pvar(vec![vec![phi.clone()]]), 100, &Default::default(), &mut rng_from_seed(3)).unwrap();
        let b = simulate_var(&TransitionSet::var(vec![phi]), 100, &Default::default(), &mut rng_from_seed(3)).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn vhar_with_daily_only_matches_var1() {
        let d = Mat::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.3]);
        let z = Mat::zeros(2, 2);
        let a = simulate_vhar(&TransitionSet::vhar(d.clone(), z.clone(), z), 200, &Default::default(), &mut rng_from_seed(4)).unwrap();
        let b = simulate_var(&TransitionSet::var(vec![d]), 200, &Default::default(), &mut rng_from_seed(4)).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn scalar_vhar_variance_matches_lyapunov() {
        let (d, w, m) = (0.3, 0.25, 0.2);
        let t = TransitionSet::vhar(scalar(d), scalar(w), scalar(m));
        let TransitionSet::Var { lags, .. } = transition::vhar_to_var22(&t).unwrap() else {
            panic!()
        };
        // stationary variance from the discrete Lyapunov equation S = F S F' + e1 e1'
        let f = transition::companion(&TransitionSet::var(lags)).unwrap().matrix;
        let n = f.nrows();
        let mut s = Mat::zeros(n, n);
        let mut e = Mat::zeros(n, n);
        e[(0, 0)] = 1.0;
        for _ in 0..5000 {
            s = &f * &s * f.transpose() + &e;
        }
        let target = s[(0, 0)];
        let mut rng = rng_from_seed(5);
        let panel = simulate_vhar(&t, 400_000, &SimulationOptions::with_burn_in(2000), &mut rng).unwrap();
        let var = panel.data.iter().map(|x| x * x).sum::<f64>() / panel.t_len() as f64;
        assert!((var - target).abs() / target < 0.03, "{var} vs {target}");
    }

    #[test]
    fn divergent_sets_are_refused() {
        let t = TransitionSet::var(vec![Mat::identity(2, 2) * 1.2]);
        assert!(matches!(
            simulate_var(&t, 10, &Default::default(), &mut rng_from_seed(6)),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn bounded_long_run() {
        let t = TransitionSet::pvar(vec![
            vec![Mat::from_row_slice(2, 2, &[0.9, 0.2, -0.3, 0.5])],
            vec![Mat::from_row_slice(2, 2, &[0.4, 0.0, 0.2, 0.8])],
        ]);
        let rho = transition::companion_radius(&t).unwrap();
        assert!(rho < 1.0);
        let p = simulate_pvar(&t, 100_000, &Default::default(), &mut rng_from_seed(7)).unwrap();
        assert!(p.data.abs().max() < 50.0);
    }

    #[test]
    fn explosive_trajectory_grows() {
        let t = TransitionSet::var(vec![Mat::identity(1, 1) * 1.04]);
        let opts = SimulationOptions {
            burn_in: 0,
            innovations: Innovations::Zero,
            initial: Some(vec![DVector::from_element(1, 1.0)]),
        };
        let p = simulate_var(&t, 400, &opts, &mut rng_from_seed(8)).unwrap();
        assert!(p.data[(399, 0)] > 1e6);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = TransitionSet::var(vec![Mat::identity(3, 3) * 0.5]);
        let p = simulate_var(&t, 50, &Default::default(), &mut rng_from_seed(9)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = TimeSeriesPanel::read_csv(buf.as_slice(), 1).unwrap();
        assert_eq!(back.data, p.data);
        assert_eq!(back.column_names(), vec!["y1", "y2", "y3"]);
    }

    #[test]
    fn csv_names_bad_cell() {
        let err = TimeSeriesPanel::read_csv("a,b\n1,2\n3,x\n".as_bytes(), 1).unwrap_err();
        assert!(err.to_string().contains("column b"), "{err}");
    }

    #[test]
    fn reproducible() {
        let t = TransitionSet::pvar(vec![vec![Mat::identity(2, 2) * 0.3]; 4]);
        let a = simulate_pvar(&t, 64, &Default::default(), &mut rng_from_seed(10)).unwrap();
        let b = simulate_pvar(&t, 64, &Default::default(), &mut rng_from_seed(10)).unwrap();
        assert_eq!(a, b);
    }
}
