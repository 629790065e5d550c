//! Fading, cascaded path loss, RIS reflection gains and the
//! finite-blocklength achievable rate.
//!
//! Channel vectors follow the convention `h_n = ζ_n e^{-jθ_n}`: a
//! [`FadingVector`] stores the amplitudes `ζ_n` and the phases `θ_n`, and the
//! RIS phase shift `φ_n = e^{jθ_n}`. With that convention, setting each RIS
//! phase to the sum of the incident and outgoing channel phases makes every
//! cascaded term real and positive.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{positive, unit_open, Error, Result};
use crate::rng::{stream, TAG_LINK, TAG_MATRIX, TAG_VECTOR};
use crate::topology::NodeId;

const TWO_PI: f64 = 2.0 * PI;

/// Large-scale link parameters. Powers in watts, `rho_l` linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudgetParams {
    /// Path loss at one meter.
    pub rho_l: f64,
    /// Exponent for device-to-device links.
    pub alpha_d2d: f64,
    /// Exponent for every link touching a RIS.
    pub alpha_other: f64,
    pub noise_power: f64,
    pub tx_power: f64,
    pub rician_k_db: f64,
}

impl LinkBudgetParams {
    /// Path-loss power factor `ρ_L d^{-α}` of one point-to-point segment.
    pub fn segment_gain(&self, d: f64, alpha: f64) -> f64 {
        self.rho_l * libm::pow(d, -alpha)
    }
}

/// Per-element channel amplitudes and phases.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingVector {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl FadingVector {
    pub fn from_gains(gains: &[Complex64]) -> Self {
        Self {
            amplitudes: gains.iter().map(|g| g.norm()).collect(),
            phases: gains.iter().map(|g| wrap_phase(-g.arg())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Complex gain of element `n`: `ζ_n e^{-jθ_n}`.
    pub fn gain(&self, n: usize) -> Complex64 {
        Complex64::from_polar(self.amplitudes[n], -self.phases[n])
    }

    pub fn gains(&self) -> Vec<Complex64> {
        (0..self.len()).map(|n| self.gain(n)).collect()
    }
}

/// Inter-RIS channel, `rows` = elements of the receiving RIS, `cols` =
/// elements of the transmitting RIS. Row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

impl FadingMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        Ok(Self { rows, cols, entries })
    }

    /// `N×N` matrix with `diag` on the diagonal and zeros elsewhere.
    pub fn diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut entries = alloc::vec![Complex64::new(0.0, 0.0); n * n];
        for (i, d) in diag.iter().enumerate() {
            entries[i * n + i] = *d;
        }
        Self { rows: n, cols: n, entries }
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.entries[m * self.cols..(m + 1) * self.cols]
    }

    /// `H x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|m| self.row(m).iter().zip(x).map(|(h, v)| h * v).sum())
            .collect()
    }

    /// `y H` for a row vector `y`.
    pub fn apply_left(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = alloc::vec![Complex64::new(0.0, 0.0); self.cols];
        for (m, ym) in y.iter().enumerate() {
            for (o, h) in out.iter_mut().zip(self.row(m)) {
                *o += ym * h;
            }
        }
        out
    }
}

/// Diagonal unit-amplitude RIS response; unit amplitude holds by
/// construction since only phases are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShiftMatrix {
    pub phases: Vec<f64>,
}

impl PhaseShiftMatrix {
    pub fn new(phases: Vec<f64>) -> Self {
        Self {
            phases: phases.into_iter().map(wrap_phase).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            phases: alloc::vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn coefficient(&self, n: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.phases[n])
    }
}

pub fn wrap_phase(theta: f64) -> f64 {
    let mut r = libm::fmod(theta, TWO_PI);
    if r < 0.0 {
        r += TWO_PI;
    }
    if r >= TWO_PI {
        r = 0.0;
    }
    r
}

/// One Rician draw with unit mean power: a line-of-sight term of weight
/// `K/(K+1)` with uniform phase plus circular Gaussian scatter of weight
/// `1/(K+1)`. `k_db = +∞` is pure line of sight, `k_db = −∞` is Rayleigh.
pub fn sample_rician<R: Rng + ?Sized>(k_db: f64, rng: &mut R) -> Complex64 {
    let k = crate::db_to_linear(k_db);
    let (los, scatter) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        (libm::sqrt(k / (k + 1.0)), libm::sqrt(0.5 / (k + 1.0)))
    };
    let phase = rng.random::<f64>() * TWO_PI;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::from_polar(los, phase) + Complex64::new(re * scatter, im * scatter)
}

pub fn sample_fading<R: Rng + ?Sized>(n: usize, k_db: f64, rng: &mut R) -> FadingVector {
    let gains: Vec<Complex64> = (0..n).map(|_| sample_rician(k_db, rng)).collect();
    FadingVector::from_gains(&gains)
}

pub fn sample_fading_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, k_db: f64, rng: &mut R) -> FadingMatrix {
    let entries = (0..rows * cols).map(|_| sample_rician(k_db, rng)).collect();
    FadingMatrix { rows, cols, entries }
}

/// Block-fading realizations keyed by link and slot epoch.
///
/// A realization depends only on `(seed, endpoints, epoch)`, never on how
/// many other links were sampled before it.
#[derive(Debug, Clone, Copy)]
pub struct FadingField {
    pub seed: u64,
    pub rician_k_db: f64,
}

impl FadingField {
    pub fn link(&self, tx: NodeId, rx: NodeId, epoch: u64) -> Complex64 {
        let mut rng = stream(self.seed, &[TAG_LINK, tx.0 as u64, rx.0 as u64, epoch]);
        sample_rician(self.rician_k_db, &mut rng)
    }

    pub fn vector(&self, tx: NodeId, rx: NodeId, n: usize, epoch: u64) -> FadingVector {
        let mut rng = stream(self.seed, &[TAG_VECTOR, tx.0 as u64, rx.0 as u64, epoch]);
        sample_fading(n, self.rician_k_db, &mut rng)
    }

    pub fn matrix(&self, tx: NodeId, rx: NodeId, rows: usize, cols: usize, epoch: u64) -> FadingMatrix {
        let mut rng = stream(self.seed, &[TAG_MATRIX, tx.0 as u64, rx.0 as u64, epoch]);
        sample_fading_matrix(rows, cols, self.rician_k_db, &mut rng)
    }
}

/// SNR of a device-to-device link: `P ρ_L d^{-α} |h|² / σ²`.
pub fn direct_snr(params: &LinkBudgetParams, h: Complex64, d: f64) -> Result<f64> {
    Ok(direct_received_power(params, h, d)? / params.noise_power)
}

pub fn direct_received_power(params: &LinkBudgetParams, h: Complex64, d: f64) -> Result<f64> {
    positive("distance", d)?;
    Ok(params.tx_power * params.segment_gain(d, params.alpha_d2d) * h.norm_sqr())
}

/// Transmitter → RIS → receiver cascade.
#[derive(Debug, Clone, Copy)]
pub struct SingleCascade<'a> {
    pub h_in: &'a FadingVector,
    pub phase: &'a PhaseShiftMatrix,
    pub h_out: &'a FadingVector,
    pub d_in: f64,
    pub d_out: f64,
}

impl SingleCascade<'_> {
    /// `h_out Φ h_in`.
    pub fn effective_gain(&self) -> Result<Complex64> {
        let n = self.h_in.len();
        check_len(n, self.phase.len())?;
        check_len(n, self.h_out.len())?;
        Ok((0..n)
            .map(|k| self.h_out.gain(k) * self.phase.coefficient(k) * self.h_in.gain(k))
            .sum())
    }

    /// `P |h_out Φ h_in|² ρ_L² d_out^{-α} d_in^{-α}`; total path loss is the
    /// product of the per-segment losses.
    pub fn received_power(&self, params: &LinkBudgetParams) -> Result<f64> {
        positive("distance", self.d_in)?;
        positive("distance", self.d_out)?;
        let a = params.alpha_other;
        Ok(params.tx_power
            * self.effective_gain()?.norm_sqr()
            * params.segment_gain(self.d_in, a)
            * params.segment_gain(self.d_out, a))
    }
}

/// Transmitter → RIS i → RIS j → receiver cascade.
#[derive(Debug, Clone, Copy)]
pub struct DoubleCascade<'a> {
    pub h_in: &'a FadingVector,
    pub phase_i: &'a PhaseShiftMatrix,
    pub h_mid: &'a FadingMatrix,
    pub phase_j: &'a PhaseShiftMatrix,
    pub h_out: &'a FadingVector,
    pub d_in: f64,
    pub d_mid: f64,
    pub d_out: f64,
}

impl DoubleCascade<'_> {
    /// `h_out Φ_j H Φ_i h_in`.
    pub fn effective_gain(&self) -> Result<Complex64> {
        check_len(self.h_in.len(), self.phase_i.len())?;
        check_len(self.h_mid.cols, self.h_in.len())?;
        check_len(self.h_mid.rows, self.phase_j.len())?;
        check_len(self.h_mid.rows, self.h_out.len())?;
        let x: Vec<Complex64> = (0..self.h_in.len())
            .map(|n| self.phase_i.coefficient(n) * self.h_in.gain(n))
            .collect();
        let v = self.h_mid.apply(&x);
        Ok(v.iter()
            .enumerate()
            .map(|(m, vm)| self.h_out.gain(m) * self.phase_j.coefficient(m) * vm)
            .sum())
    }

    /// Received power `P |h_out Φ_j H Φ_i h_in|² ρ_L³ d_out^{-α} d_in^{-α} d_mid^{-α}`.
    pub fn received_power(&self, params: &LinkBudgetParams) -> Result<f64> {
        positive("distance", self.d_in)?;
        positive("distance", self.d_mid)?;
        positive("distance", self.d_out)?;
        let a = params.alpha_other;
        Ok(params.tx_power
            * self.effective_gain()?.norm_sqr()
            * params.segment_gain(self.d_in, a)
            * params.segment_gain(self.d_mid, a)
            * params.segment_gain(self.d_out, a))
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// SINR of a single reflection; interferers are other cascades through
/// their own RISs with caller-supplied phases.
pub fn single_reflection_sinr(
    params: &LinkBudgetParams,
    signal: &SingleCascade<'_>,
    interferers: &[SingleCascade<'_>],
) -> Result<f64> {
    let mut interference = 0.0;
    for c in interferers {
        interference += c.received_power(params)?;
    }
    Ok(signal.received_power(params)? / (interference + params.noise_power))
}

pub fn double_reflection_sinr(
    params: &LinkBudgetParams,
    signal: &DoubleCascade<'_>,
    interferers: &[DoubleCascade<'_>],
) -> Result<f64> {
    let mut interference = 0.0;
    for c in interferers {
        interference += c.received_power(params)?;
    }
    Ok(signal.received_power(params)? / (interference + params.noise_power))
}

/// Single-user optimum: each element's phase is the sum of the incident
/// and outgoing channel phases, so `|h_out Φ h_in| = Σ ζ_n ω_n`.
pub fn optimal_single_user_phases(h_in: &FadingVector, h_out: &FadingVector) -> Result<PhaseShiftMatrix> {
    check_len(h_in.len(), h_out.len())?;
    Ok(PhaseShiftMatrix::new(
        h_in.phases.iter().zip(&h_out.phases).map(|(a, b)| a + b).collect(),
    ))
}

/// Closed-form SNR under the single-user optimum:
/// `P (Σ ζ_n ω_n)² ρ_L² d_out^{-α} d_in^{-α} / σ²`.
pub fn optimal_single_snr(
    params: &LinkBudgetParams,
    h_in: &FadingVector,
    h_out: &FadingVector,
    d_in: f64,
    d_out: f64,
) -> Result<f64> {
    check_len(h_in.len(), h_out.len())?;
    positive("distance", d_in)?;
    positive("distance", d_out)?;
    let coherent: f64 = h_in.amplitudes.iter().zip(&h_out.amplitudes).map(|(a, b)| a * b).sum();
    let a = params.alpha_other;
    Ok(params.tx_power * coherent * coherent * params.segment_gain(d_in, a) * params.segment_gain(d_out, a)
        / params.noise_power)
}

/// Phase pair for a double reflection by alternating single-RIS alignment.
///
/// Starts with RIS i co-phasing the incident vector, then for `rounds`
/// rounds aligns RIS j against the field arriving through RIS i and RIS i
/// against the field seen back through RIS j. Each half-step can only raise
/// `|h_out Φ_j H Φ_i h_in|`.
pub fn align_double_phases(
    h_in: &FadingVector,
    h_mid: &FadingMatrix,
    h_out: &FadingVector,
    rounds: usize,
) -> Result<(PhaseShiftMatrix, PhaseShiftMatrix)> {
    check_len(h_mid.cols, h_in.len())?;
    check_len(h_mid.rows, h_out.len())?;
    let g_in = h_in.gains();
    let g_out = h_out.gains();
    let mut phase_i = PhaseShiftMatrix::new(h_in.phases.clone());
    let mut phase_j = PhaseShiftMatrix::zeros(h_out.len());
    for _ in 0..rounds.max(1) {
        let x: Vec<Complex64> = g_in.iter().enumerate().map(|(n, g)| phase_i.coefficient(n) * g).collect();
        let v = h_mid.apply(&x);
        phase_j = PhaseShiftMatrix::new(
            g_out.iter().zip(&v).map(|(o, vm)| -(o * vm).arg()).collect(),
        );
        let y: Vec<Complex64> = g_out.iter().enumerate().map(|(m, o)| o * phase_j.coefficient(m)).collect();
        let w = h_mid.apply_left(&y);
        phase_i = PhaseShiftMatrix::new(g_in.iter().zip(&w).map(|(g, wn)| -(wn * g).arg()).collect());
    }
    Ok((phase_i, phase_j))
}

/// Inverse complementary error function, relative tolerance 1e-10 on the
/// result. Domain `(0, 2)`.
pub fn erfc_inv(y: f64) -> f64 {
    if y <= 0.0 {
        return f64::INFINITY;
    }
    if y >= 2.0 {
        return f64::NEG_INFINITY;
    }
    // Winitzki's approximation as a starting point, then Halley steps.
    let a = 0.147;
    let z = 1.0 - y;
    let ln = libm::log(y * (2.0 - y));
    let t = 2.0 / (PI * a) + ln / 2.0;
    let mut x = libm::copysign(libm::sqrt(libm::sqrt(t * t - ln / a) - t), z);
    for _ in 0..100 {
        let f = libm::erfc(x) - y;
        let df = -2.0 / libm::sqrt(PI) * libm::exp(-x * x);
        let newton = f / df;
        // f'' / f' = -2x for erfc
        let step = newton / (1.0 + x * newton);
        x -= step;
        if step.abs() <= 1e-13 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

/// Inverse Gaussian tail `Q^{-1}(ε)`.
pub fn q_inverse(epsilon: f64) -> Result<f64> {
    unit_open("epsilon", epsilon)?;
    Ok(SQRT_2 * erfc_inv(2.0 * epsilon))
}

/// Shannon rate `log2(1 + γ)` in bits per channel use.
pub fn shannon_rate(gamma: f64) -> f64 {
    libm::log2(1.0 + gamma.max(0.0))
}

/// Normal-approximation rate at blocklength `M_b` and error probability
/// `ε`, clamped at zero.
pub fn finite_blocklength_rate(gamma: f64, blocklength: f64, epsilon: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::NonPositive { name: "SNR", value: gamma });
    }
    if !(blocklength >= 1.0) {
        return Err(Error::NonPositive {
            name: "blocklength",
            value: blocklength,
        });
    }
    let q = q_inverse(epsilon)?;
    let rate = if gamma.is_infinite() {
        f64::INFINITY
    } else {
        // (γ² + 2γ) / (1 + γ)², written to stay finite for large γ
        let dispersion = (gamma / (1.0 + gamma)) * ((2.0 + gamma) / (1.0 + gamma));
        shannon_rate(gamma) - q / core::f64::consts::LN_2 * libm::sqrt(dispersion / blocklength)
    };
    Ok(rate.max(0.0))
}

/// Rate used on RIS-assisted hops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateModel {
    FiniteBlocklength { blocklength: f64, epsilon: f64 },
    /// The `M_b → ∞` limit, evaluated directly.
    Shannon,
}

impl RateModel {
    pub fn rate(&self, gamma: f64) -> Result<f64> {
        match *self {
            RateModel::FiniteBlocklength { blocklength, epsilon } => {
                finite_blocklength_rate(gamma, blocklength, epsilon)
            }
            RateModel::Shannon => Ok(shannon_rate(gamma)),
        }
    }
}
