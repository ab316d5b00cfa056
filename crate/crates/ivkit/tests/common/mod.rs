//! Shared fixtures and test-side oracles. Nothing here calls the library's
//! estimators; the oracles are brute-force or simulation based.
#![allow(dead_code)]

use ivkit::dataset::{load_csv, ColumnSpec, IVData, ProjectedData};
use ivkit::dist::f_sf;
use ivkit::weakiv::ar_statistic;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const CARD: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/card.csv");
pub const CARD_COVARIATES: [&str; 5] = ["exper", "expersq", "black", "south", "smsa"];

pub fn card_raw(instruments: &[&str]) -> IVData {
    load_csv(CARD, &ColumnSpec::new("lwage", "educ", instruments, &CARD_COVARIATES), true).unwrap()
}

pub fn card() -> ProjectedData {
    card_raw(&["nearc4"]).project().unwrap()
}

/// Linear IV design with standard normal instruments and covariates and
/// structural/first-stage errors of correlation `rho`.
#[derive(Debug, Clone, Copy)]
pub struct Sim {
    pub n: usize,
    pub l: usize,
    pub px: usize,
    pub gamma: f64,
    pub beta: f64,
    pub rho: f64,
}

impl Sim {
    pub fn raw(&self, seed: u64) -> IVData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let z = DMatrix::from_fn(self.n, self.l, |_, _| draw());
        let x = DMatrix::from_fn(self.n, self.px, |_, _| draw());
        let eps = DVector::from_fn(self.n, |_, _| draw());
        let eta = DVector::from_fn(self.n, |i, _| self.rho * eps[i] + (1.0 - self.rho * self.rho).sqrt() * draw());
        let d = DVector::from_fn(self.n, |i, _| {
            self.gamma * z.row(i).sum() + 0.3 * x.row(i).sum() + eta[i]
        });
        let y = DVector::from_fn(self.n, |i, _| self.beta * d[i] + 0.2 * x.row(i).sum() + eps[i]);
        IVData::new(y, d, z, x, true).unwrap()
    }

    pub fn data(&self, seed: u64) -> ProjectedData {
        self.raw(seed).project().unwrap()
    }
}

/// AR p-value from the statistic and the F tail, the definition the
/// confidence set inverts.
pub fn ar_p(data: &ProjectedData, beta0: f64) -> f64 {
    f_sf(ar_statistic(data, beta0), data.l() as f64, data.df_resid() as f64).unwrap()
}

/// Brute-force `(k_LIML, β̂_LIML)`: minimise the ratio
/// `e'P e / e'R e`, `e = Y* - D* β`, over a dense grid and refine with a
/// golden-section search. `k = 1 + min ratio`.
pub fn liml_by_scan(data: &ProjectedData, lo: f64, hi: f64) -> (f64, f64) {
    let z = data.z_star();
    let zz_inv = (z.transpose() * z).try_inverse().unwrap();
    let ratio = |b: f64| {
        let e = data.y_star() - data.d_star() * b;
        let ze = z.transpose() * &e;
        let epe = (ze.transpose() * &zz_inv * &ze)[(0, 0)];
        epe / (e.norm_squared() - epe)
    };
    let n = 20_000;
    let (mut best, mut best_b) = (f64::INFINITY, lo);
    for i in 0..=n {
        let b = lo + (hi - lo) * i as f64 / n as f64;
        let r = ratio(b);
        if r < best {
            best = r;
            best_b = b;
        }
    }
    let h = (hi - lo) / n as f64;
    let (mut a, mut c) = (best_b - h, best_b + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = c - g * (c - a);
        let x2 = a + g * (c - a);
        if ratio(x1) < ratio(x2) {
            c = x2;
        } else {
            a = x1;
        }
    }
    let b = 0.5 * (a + c);
    (1.0 + ratio(b), b)
}

/// Simulated tail probability of the CLR statistic given `Q₃ = q3`, from
/// full `L`-dimensional normal draws.
pub fn clr_tail_by_simulation(l: usize, q3: f64, stat: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = q3.sqrt();
    let mut hits = 0usize;
    for _ in 0..draws {
        let s: Vec<f64> = (0..l).map(|_| StandardNormal.sample(&mut rng)).collect();
        let q1: f64 = s.iter().map(|v| v * v).sum();
        let q2 = s[0] * t;
        let lr = 0.5 * (q1 - q3 + ((q1 + q3).powi(2) - 4.0 * (q1 * q3 - q2 * q2)).max(0.0).sqrt());
        if lr >= stat {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// Seeded designs whose 95% AR sets are an interval, two rays and the
/// whole line.
pub fn shape_designs() -> [(&'static str, ProjectedData); 3] {
    let sim = |gamma, rho| Sim { n: 100, l: 1, px: 1, gamma, beta: 1.0, rho };
    [
        ("interval", sim(0.5, 0.5).data(0)),
        ("two_rays", sim(0.08, 0.9).data(4)),
        ("whole_line", sim(0.0, 0.3).data(0)),
    ]
}

/// Number of grid points in `[lo, hi]` where membership in `set` disagrees
/// with `p(β) ≥ α`. Points within `1e-7` of an endpoint are skipped.
pub fn ar_grid_mismatches(
    data: &ProjectedData,
    set: &ivkit::weakiv::IntervalSet,
    alpha: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> usize {
    let (a, b) = match *set {
        ivkit::weakiv::IntervalSet::TwoRays { lo, hi } => (lo, hi),
        other => other.bounds(),
    };
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .filter(|x| (x - a).abs() > 1e-7 && (x - b).abs() > 1e-7)
        .filter(|&x| set.contains(x) != (ar_p(data, x) >= alpha))
        .count()
}

/// Analytic AR power against the rejection rate over `reps` simulated data
/// sets at `n = 200`, with the instrument held fixed so that the
/// noncentrality is exact. Returns `(analytic, simulated, monte carlo se)`.
pub fn ar_power_by_simulation(reps: usize, seed: u64) -> (f64, f64, f64) {
    use ivkit::power::{power_ar, PowerDesign, PowerMethod, PowerSpec};
    use ivkit::weakiv::{ar_test, ArReference};

    let (n, gamma, lambda) = (200usize, 0.35, 0.5);
    let (sigma, omega, rho) = (1.0, 1.0, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let z = DMatrix::from_fn(n, 1, |_, _| draw());
    let zbar = z.mean();
    let zz: f64 = z.iter().map(|v| (v - zbar).powi(2)).sum();
    let design = PowerDesign {
        sigma,
        omega,
        rho,
        concentration_per_obs: gamma * gamma * zz / n as f64,
        var_d: gamma * gamma * zz / n as f64 + omega * omega,
        rho_zd: 0.0,
        gamma,
        zz_per_obs: zz / n as f64,
        p: 1,
        l: 1,
    };
    let analytic = power_ar(&PowerSpec::new(design, PowerMethod::Ar, lambda, 0.05, n as u64)).unwrap();

    let mut rejections = 0usize;
    for _ in 0..reps {
        let eps = DVector::from_fn(n, |_, _| sigma * draw());
        let eta = DVector::from_fn(n, |i, _| omega * (rho * eps[i] / sigma + (1.0 - rho * rho).sqrt() * draw()));
        let d = DVector::from_fn(n, |i, _| gamma * z[(i, 0)] + eta[i]);
        let y = &d * lambda + &eps;
        let data = IVData::new(y, d, z.clone(), DMatrix::zeros(n, 0), true).unwrap().project().unwrap();
        if ar_test(&data, 0.0, 0.05, ArReference::F).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    (analytic, rate, (analytic * (1.0 - analytic) / reps as f64).sqrt())
}
