//! Closed-form probabilities.
//!
//! Binomial tails are computed twice: exactly over rationals (values far
//! below `1e-12` stay accurate) and in log space for fast sweeps. The two
//! implementations share no code and check each other in the tests.
//!
//! Power fractions given as `f64` are read as decimals with at most twelve
//! fractional digits, so `0.35` means exactly `7/20` in the exact routines.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// `x` as an exact rational, rounded to twelve decimals.
pub fn decimal(x: f64) -> BigRational {
    let scale = 1_000_000_000_000i64;
    BigRational::new(BigInt::from((x * scale as f64).round() as i64), BigInt::from(scale))
}

pub fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn to_biguint(x: &BigInt) -> BigUint {
    x.to_biguint().expect("non-negative")
}

/// `Σ_{j=lo}^{hi} C(n,j) p^j (1-p)^(n-j)` exactly, for rational `p ∈ [0, 1]`.
///
/// With `p = a/N` in lowest terms, term `j` is `T_j / N^n` where
/// `T_j = C(n,j) a^j (N-a)^(n-j)`; consecutive terms satisfy
/// `T_{j+1} (j+1)(N-a) = T_j (n-j) a`, which divides exactly.
pub fn binom_range_exact(n: u64, p: &BigRational, lo: u64, hi: u64) -> BigRational {
    assert!(!p.is_negative() && *p <= BigRational::one(), "p outside [0, 1]");
    let hi = hi.min(n);
    if lo > hi {
        return BigRational::zero();
    }
    let a = to_biguint(p.numer());
    let big_n = to_biguint(p.denom());
    if a.is_zero() {
        return if lo == 0 { BigRational::one() } else { BigRational::zero() };
    }
    if a == big_n {
        return if hi == n { BigRational::one() } else { BigRational::zero() };
    }
    let rest = &big_n - &a;
    let mut t = num_traits::pow(rest.clone(), n as usize);
    let mut sum = BigUint::zero();
    for j in 0..=hi {
        if j >= lo {
            sum += &t;
        }
        if j < hi {
            t = t * BigUint::from(n - j) * &a / (BigUint::from(j + 1) * &rest);
        }
    }
    BigRational::new(BigInt::from(sum), BigInt::from(num_traits::pow(big_n, n as usize)))
}

/// `ln C(n,j) + j ln p + (n-j) ln(1-p)`.
pub fn ln_binom_pmf(n: u64, j: u64, p: f64) -> f64 {
    if j > n {
        return f64::NEG_INFINITY;
    }
    let ln_c = ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0);
    let a = if j == 0 { 0.0 } else { j as f64 * p.ln() };
    let b = if j == n { 0.0 } else { (n - j) as f64 * (-p).ln_1p() };
    ln_c + a + b
}

/// Log-space `Σ_{j=lo}^{hi} C(n,j) p^j (1-p)^(n-j)`.
pub fn binom_range(n: u64, p: f64, lo: u64, hi: u64) -> f64 {
    let hi = hi.min(n);
    if lo > hi {
        return 0.0;
    }
    if p <= 0.0 {
        return if lo == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if hi == n { 1.0 } else { 0.0 };
    }
    let terms: Vec<f64> = (lo..=hi).map(|j| ln_binom_pmf(n, j, p)).collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    (max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()).exp().min(1.0)
}

/// `W`, `m` and the adversary's power share.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommitteeModel {
    pub window: u32,
    pub committee: u32,
    pub alpha: f64,
}

impl CommitteeModel {
    pub fn new(window: u32, committee: u32, alpha: f64) -> Self {
        assert!((0.0..0.5).contains(&alpha), "alpha must lie in [0, 0.5)");
        assert!(committee >= 1 && committee <= window, "need 1 <= m <= W");
        CommitteeModel { window, committee, alpha }
    }

    /// `m / W` as a rational.
    pub fn p(&self) -> BigRational {
        ratio(self.committee as u64, self.window as u64)
    }

    fn half_floor(&self) -> u64 {
        self.committee as u64 / 2
    }

    fn half_ceil(&self) -> u64 {
        (self.committee as u64).div_ceil(2)
    }
}

/// Probability that a committee violates the good-committee property, as
/// the union bound `Pr[X ≥ ⌈m/2⌉] + Pr[Y ≤ ⌊m/2⌋]` with adversary shares
/// `X ~ Bin(W, αp)` and honest shares `Y ~ Bin(W, βp)`.
pub fn committee_failure_prob(model: &CommitteeModel) -> f64 {
    let w = model.window as u64;
    let a = decimal(model.alpha);
    let b = BigRational::one() - &a;
    let p = model.p();
    let adv = binom_range_exact(w, &(a * &p), model.half_ceil(), w);
    let hon = binom_range_exact(w, &(b * &p), 0, model.half_floor());
    to_f64(&(adv + hon))
}

/// Log-space version of [`committee_failure_prob`].
pub fn committee_failure_prob_approx(model: &CommitteeModel) -> f64 {
    let w = model.window as u64;
    let p = model.committee as f64 / model.window as f64;
    binom_range(w, model.alpha * p, model.half_ceil(), w)
        + binom_range(w, (1.0 - model.alpha) * p, 0, model.half_floor())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommitteeSizing {
    pub committee: u32,
    pub epsilon: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SizingError {
    #[error("no committee size up to W = {window} reaches {target:e}; best {best:e}")]
    Infeasible { window: u32, target: f64, best: f64 },
}

/// Smallest `m` whose failure probability is at most `eps_max`.
///
/// The bound is not monotone in `m`: raising an odd `m` by one raises
/// `⌊m/2⌋` and so the honest term. Sizes are therefore scanned upwards in log
/// space and the first hit is confirmed exactly, with the exact check also
/// applied to neighbours within a rounding margin.
pub fn min_committee_size(alpha: f64, window: u32, eps_max: f64) -> Result<CommitteeSizing, SizingError> {
    let mut best = f64::INFINITY;
    for m in 1..=window {
        let model = CommitteeModel::new(window, m, alpha);
        let approx = committee_failure_prob_approx(&model);
        best = best.min(approx);
        if approx <= eps_max * (1.0 + 1e-6) {
            let exact = committee_failure_prob(&model);
            if exact <= eps_max {
                return Ok(CommitteeSizing { committee: m, epsilon: exact });
            }
        }
    }
    Err(SizingError::Infeasible { window, target: eps_max, best })
}

/// How the withholding probability of `l` blocks is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WithholdConvention {
    /// `ε^l (1-ε)`: exactly `l` committee failures in a row.
    Text,
    /// `ε^(l-1) (1-ε)`: exactly `l` consecutive withheld blocks.
    Table,
    /// `ε^(l-1)`: at least `l` consecutive withheld blocks.
    AtLeast,
}

pub fn withhold_prob(eps: f64, l: u32, convention: WithholdConvention) -> f64 {
    assert!((0.0..1.0).contains(&eps), "eps must lie in [0, 1)");
    match convention {
        WithholdConvention::Text => eps.powi(l as i32) * (1.0 - eps),
        WithholdConvention::Table => {
            assert!(l >= 1, "table convention starts at l = 1");
            eps.powi(l as i32 - 1) * (1.0 - eps)
        }
        WithholdConvention::AtLeast => {
            assert!(l >= 1, "at-least convention starts at l = 1");
            eps.powi(l as i32 - 1)
        }
    }
}

/// Mean time between successes of an event that happens with probability
/// `p` per block, at one block per `block_interval` seconds.
pub fn expected_failure_time(p: f64, block_interval: f64) -> f64 {
    if p <= 0.0 {
        f64::INFINITY
    } else {
        block_interval / p
    }
}

/// Relative revenue of a selfish miner against certificates:
/// `α(2α + γβ) / (β + 2α)`.
pub fn selfish_revenue_crystal(alpha: f64, gamma: f64) -> f64 {
    let beta = 1.0 - alpha;
    alpha * (2.0 * alpha + gamma * beta) / (beta + 2.0 * alpha)
}

/// Relative revenue of the classic selfish-mining strategy under plain
/// longest-chain rules.
pub fn selfish_revenue_nc(alpha: f64, gamma: f64) -> f64 {
    let a = alpha;
    let num = a * (1.0 - a).powi(2) * (4.0 * a + gamma * (1.0 - 2.0 * a)) - a.powi(3);
    let den = 1.0 - a * (1.0 + (2.0 - a) * a);
    num / den
}

/// Exponent choice for the certificate-protected double-spend bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoubleSpendConvention {
    /// `(α/β)^(k-1)`.
    Theorem,
    /// `(α/β)^k`: a pre-mined block leaves a deficit of `k - 1` and the
    /// attacker must get strictly ahead.
    Table,
}

pub fn double_spend_prob_crystal(alpha: f64, k: u32, convention: DoubleSpendConvention) -> f64 {
    to_f64(&double_spend_prob_crystal_exact(&decimal(alpha), k, convention))
}

pub fn double_spend_prob_crystal_exact(alpha: &BigRational, k: u32, convention: DoubleSpendConvention) -> BigRational {
    assert!(k >= 1);
    let beta = BigRational::one() - alpha;
    let e = match convention {
        DoubleSpendConvention::Theorem => k - 1,
        DoubleSpendConvention::Table => k,
    };
    num_traits::pow(alpha / beta, e as usize)
}

/// Catch-up probability of a pre-mining attacker after `k` confirmations
/// under the longest-chain rule:
/// `1 - Σ_{j=0}^{k} C(k+j-1, j) (β^k α^j - β^j α^k)`.
pub fn double_spend_prob_nc(alpha: f64, k: u32) -> f64 {
    to_f64(&double_spend_prob_nc_exact(&decimal(alpha), k))
}

pub fn double_spend_prob_nc_exact(alpha: &BigRational, k: u32) -> BigRational {
    assert!(k >= 1);
    let beta = BigRational::one() - alpha;
    let k = k as usize;
    let bk = num_traits::pow(beta.clone(), k);
    let ak = num_traits::pow(alpha.clone(), k);
    let mut sum = BigRational::zero();
    let mut c = BigInt::one(); // C(k+j-1, j)
    for j in 0..=k {
        if j > 0 {
            c = c * BigInt::from(k + j - 1) / BigInt::from(j);
        }
        let t = &bk * num_traits::pow(alpha.clone(), j) - num_traits::pow(beta.clone(), j) * &ak;
        sum += BigRational::from_integer(c.clone()) * t;
    }
    BigRational::one() - sum
}

/// `Pr[Bin(W, p) ≥ threshold]` exactly.
pub fn committee_size_tail(window: u32, p: &BigRational, threshold: u64) -> f64 {
    to_f64(&binom_range_exact(window as u64, p, threshold, window as u64))
}

/// Probability that an honest block fails certification when adversary
/// members abstain and each elected honest member is offline with
/// probability `gamma_off`: `Pr[O ≤ ⌊m/2⌋]` for the online honest shares `O`.
///
/// Computed as the convolution over the elected honest shares
/// `Y ~ Bin(W, βp)` of `Pr[Bin(Y, 1-γ) ≤ ⌊m/2⌋]`.
pub fn offline_failure_prob(model: &CommitteeModel, gamma_off: f64) -> f64 {
    assert!((0.0..=1.0).contains(&gamma_off));
    let w = model.window as u64;
    let half = model.half_floor();
    let q = (1.0 - model.alpha) * model.committee as f64 / model.window as f64;
    let mut total = 0.0;
    for y in 0..=w {
        let py = ln_binom_pmf(w, y, q).exp();
        if py == 0.0 {
            continue;
        }
        let pass = if y <= half { 1.0 } else { binom_range(y, 1.0 - gamma_off, 0, half) };
        total += py * pass;
    }
    total.min(1.0)
}

/// [`offline_failure_prob`] through the thinning identity
/// `O ~ Bin(W, βp(1-γ))`, evaluated exactly.
pub fn offline_failure_prob_thinned(model: &CommitteeModel, gamma_off: f64) -> f64 {
    let q = (BigRational::one() - decimal(model.alpha)) * model.p() * (BigRational::one() - decimal(gamma_off));
    to_f64(&binom_range_exact(model.window as u64, &q, 0, model.half_floor()))
}

/// Inputs of the long-run safety condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyParams {
    pub alpha: f64,
    /// Total mining rate in blocks per second.
    pub lambda: f64,
    /// Network delay bound in seconds.
    pub delta: f64,
    /// Slack `δ ∈ (0, 1)`.
    pub slack: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyReport {
    /// `η = e^(-2βλΔ)`.
    pub eta: f64,
    /// `η²β - (1+δ)α`.
    pub margin: f64,
    pub holds: bool,
    /// Expected converged honest blocks per second, `η²βλ`.
    pub converged_rate: f64,
}

pub fn safety_condition(p: &SafetyParams) -> SafetyReport {
    let beta = 1.0 - p.alpha;
    let eta = (-2.0 * beta * p.lambda * p.delta).exp();
    let margin = eta * eta * beta - (1.0 + p.slack) * p.alpha;
    SafetyReport { eta, margin, holds: margin > 0.0, converged_rate: eta * eta * beta * p.lambda }
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// `z` for a family of `cells` intervals holding simultaneously at `level`.
pub fn bonferroni_z(level: f64, cells: usize) -> f64 {
    z_value(1.0 - (1.0 - level) / cells.max(1) as f64)
}

/// Wilson score interval for `hits` out of `n`.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let ph = hits as f64 / n;
    let z2 = z * z;
    let centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Running mean and variance of weighted trial outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAccumulator {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, o: MeanAccumulator) -> Self {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n.max(1) as f64
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// `x` rounded half-up to `digits` significant figures, as
/// `(mantissa, exponent)` with `x ≈ mantissa · 10^exponent`.
pub fn round_sig(x: &BigRational, digits: u32) -> (u64, i32) {
    assert!(x.is_positive());
    let ten = BigRational::from_integer(BigInt::from(10));
    let one = BigRational::one();
    // e = floor(log10 x)
    let mut e = 0i32;
    let mut scaled = x.clone();
    while scaled >= ten {
        scaled /= &ten;
        e += 1;
    }
    while scaled < one {
        scaled *= &ten;
        e -= 1;
    }
    let shift = digits as i32 - 1;
    let m = scaled * num_traits::pow(ten.clone(), shift as usize) + BigRational::new(1.into(), 2.into());
    let mut mant = m.floor().to_integer().to_u64().unwrap();
    let mut exp = e - shift;
    if mant == 10u64.pow(digits) {
        mant /= 10;
        exp += 1;
    }
    (mant, exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn exact_and_log_space_tails_agree() {
        for &(n, num, den, lo, hi) in &[
            (3024u64, 500u64, 3024u64, 700u64, 3024u64),
            (3024, 175, 3024, 250, 3024),
            (3024, 325, 3024, 0, 250),
            (50, 1, 3, 10, 20),
            (10, 1, 2, 0, 10),
        ] {
            let exact = to_f64(&binom_range_exact(n, &ratio(num, den), lo, hi));
            let approx = binom_range(n, num as f64 / den as f64, lo, hi);
            assert!(close(approx, exact, 1e-9), "{n} {num}/{den} [{lo},{hi}]: {approx} vs {exact}");
        }
        assert_eq!(binom_range_exact(10, &ratio(1, 2), 0, 10), BigRational::one());
        assert_eq!(binom_range_exact(4, &ratio(1, 2), 2, 2), ratio(6, 16));
    }

    #[test]
    fn tail_edge_cases() {
        let p = ratio(500, 3024);
        assert_eq!(committee_size_tail(3024, &p, 0), 1.0);
        assert_eq!(committee_size_tail(3024, &p, 3025), 0.0);
        assert_eq!(binom_range_exact(5, &ratio(0, 1), 0, 0), BigRational::one());
        assert_eq!(binom_range_exact(5, &ratio(1, 1), 5, 5), BigRational::one());
    }

    #[test]
    fn no_adversary_leaves_honest_term() {
        let m = CommitteeModel::new(3024, 500, 0.0);
        let honest = to_f64(&binom_range_exact(3024, &m.p(), 0, 250));
        assert_eq!(committee_failure_prob(&m), honest);
    }

    #[test]
    fn failure_prob_design_point() {
        let e500 = committee_failure_prob(&CommitteeModel::new(3024, 500, 0.35));
        assert!(e500 < 1e-4, "{e500}");
        let approx = committee_failure_prob_approx(&CommitteeModel::new(3024, 500, 0.35));
        assert!(close(approx, e500, 1e-8));
    }

    #[test]
    fn min_size_is_minimal() {
        let s = min_committee_size(0.35, 3024, 1e-4).unwrap();
        assert!(s.committee <= 500 && s.committee > 300, "{s:?}");
        let below = committee_failure_prob(&CommitteeModel::new(3024, s.committee - 1, 0.35));
        assert!(below > 1e-4 && s.epsilon <= 1e-4);
        let small = min_committee_size(0.0, 3024, 1e-4).unwrap();
        assert!(small.committee < s.committee);
        assert!(matches!(min_committee_size(0.49, 20, 1e-12), Err(SizingError::Infeasible { .. })));
    }

    #[test]
    fn failure_bound_has_parity_sawtooth() {
        // going from an odd m to m + 1 raises floor(m/2), so the bound goes up
        let e = |m| committee_failure_prob_approx(&CommitteeModel::new(3024, m, 0.35));
        assert!(e(341) < e(342));
        assert!(e(340) > e(342));
    }

    #[test]
    fn withholding_conventions() {
        use WithholdConvention::*;
        assert_eq!(withhold_prob(0.01, 2, AtLeast), 0.01);
        assert!(close(withhold_prob(0.01, 2, Table), 0.0099, 1e-12));
        assert!(close(withhold_prob(0.01, 2, Text), 0.000099, 1e-12));
        assert_eq!(withhold_prob(0.0, 2, Table), 0.0);
        assert_eq!(withhold_prob(0.0, 3, AtLeast), 0.0);
        let hours = expected_failure_time(withhold_prob(0.01, 2, AtLeast), 600.0) / 3600.0;
        assert!(close(hours, 16.6, 0.01));
        assert_eq!(expected_failure_time(0.0, 600.0), f64::INFINITY);
    }

    #[test]
    fn withholding_pmfs_sum_to_one() {
        for &eps in &[0.0, 0.01, 0.3, 0.9] {
            let text: f64 = (0..4000).map(|l| withhold_prob(eps, l, WithholdConvention::Text)).sum();
            let table: f64 = (1..4000).map(|l| withhold_prob(eps, l, WithholdConvention::Table)).sum();
            assert!((text - 1.0).abs() < 1e-9 && (table - 1.0).abs() < 1e-9, "{eps}");
        }
    }

    #[test]
    fn selfish_revenue_values() {
        assert!((selfish_revenue_crystal(0.4, 0.5) - 0.314_285_714).abs() < 1e-8);
        for &a in &[0.0, 0.1, 0.25, 0.4, 0.49] {
            assert!((selfish_revenue_crystal(a, 1.0) - a).abs() < 1e-12);
            let alt = a + a * (1.0 - a) * (0.5 - 1.0) / (1.0 + a);
            assert!((selfish_revenue_crystal(a, 0.5) - alt).abs() < 1e-12);
        }
        assert_eq!(selfish_revenue_crystal(0.0, 0.5), 0.0);
        assert!((selfish_revenue_nc(0.4, 0.5) - 0.526).abs() < 5e-4);
        assert!(selfish_revenue_nc(0.1, 0.5) < 0.1);
        assert!(selfish_revenue_nc(0.3, 0.5) > 0.3);
    }

    #[test]
    fn double_spend_values() {
        use DoubleSpendConvention::*;
        assert!(close(double_spend_prob_crystal(0.3, 6, Table), 6.20e-3, 2e-3));
        assert!(close(double_spend_prob_crystal(0.1, 2, Table), 1.23e-2, 4e-3));
        assert_eq!(double_spend_prob_crystal(0.3, 1, Theorem), 1.0);
        assert!(close(double_spend_prob_nc(0.1, 2), 5.60e-2, 1e-9));
        assert!(close(double_spend_prob_nc(0.3, 6), 1.56e-1, 3e-3));
        assert_eq!(double_spend_prob_nc(0.0, 4), 0.0);
        let mut last = 0.0;
        for a in [0.3, 0.4, 0.45, 0.49, 0.499] {
            let r = double_spend_prob_nc(a, 6);
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn rounding_to_significant_figures() {
        assert_eq!(round_sig(&ratio(8505, 10000), 3), (851, -3));
        assert_eq!(round_sig(&ratio(56, 1000), 3), (560, -4));
        assert_eq!(round_sig(&ratio(9996, 1000), 3), (100, -1));
        assert_eq!(round_sig(&ratio(123, 1), 3), (123, 0));
    }

    #[test]
    fn overhead_tail_exact_value() {
        let t = committee_size_tail(3024, &ratio(500, 3024), 700);
        assert!(t > 5.3e-21 && t < 5.5e-21, "{t}");
    }

    #[test]
    fn offline_convolution_matches_thinning() {
        for &g in &[0.0, 0.05, 0.1, 0.3, 1.0] {
            let m = CommitteeModel::new(3024, 500, 0.35);
            let conv = offline_failure_prob(&m, g);
            let thin = offline_failure_prob_thinned(&m, g);
            assert!(close(conv, thin, 1e-8), "{g}: {conv} vs {thin}");
        }
        let m = CommitteeModel::new(3024, 500, 0.35);
        assert_eq!(offline_failure_prob(&m, 1.0), 1.0);
    }

    #[test]
    fn safety_arithmetic() {
        let r = safety_condition(&SafetyParams { alpha: 0.35, lambda: 1.0 / 600.0, delta: 0.0, slack: 0.1 });
        assert!(r.holds && (r.margin - (0.65 - 0.385)).abs() < 1e-12);
        // choose λΔ so that η² = 1/2
        let ld = (2.0f64).ln() / (4.0 * 0.65);
        let r = safety_condition(&SafetyParams { alpha: 0.35, lambda: ld, delta: 1.0, slack: 0.1 });
        assert!((r.eta * r.eta - 0.5).abs() < 1e-12);
        assert!(!r.holds);
    }

    #[test]
    fn interval_helpers() {
        assert!((z_value(0.95) - 1.959964).abs() < 1e-5);
        assert!(bonferroni_z(0.95, 40) > 3.0);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
        let mut acc = MeanAccumulator::default();
        for x in [1.0, 2.0, 3.0] {
            acc.push(x);
        }
        assert_eq!(acc.mean(), 2.0);
        assert!((acc.std_err() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
