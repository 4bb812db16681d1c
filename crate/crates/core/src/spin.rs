//! Many-atom internal state and collective-spin observables.
//!
//! Each of the `n` two-level atoms is a fictitious spin 1/2; the joint state
//! lives in the full 2^n Hilbert space, indexed by a configuration bitmask
//! with bit `i` set when atom `i` occupies the upper state `|a>`. The number
//! of `|a>` atoms in a configuration is therefore a popcount, which is what
//! the photon-scattering loop needs in O(1).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest atom number the dense state vector supports (2^20 amplitudes).
pub const MAX_ATOMS: usize = 20;

/// Largest atom number for the total-J decomposition (combinatorial cost).
pub const MAX_DICKE_ATOMS: usize = 12;

/// Norm deviation beyond which a state is rejected as unnormalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Pure state of `n_atoms` two-level atoms as a dense amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_atoms: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// Product state with every atom in `(|a> + |b>)/sqrt(2)`.
    pub fn uniform_superposition(n_atoms: usize) -> Result<Self> {
        Self::check_capacity(n_atoms)?;
        let dim = 1usize << n_atoms;
        let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        Ok(Self {
            n_atoms,
            amplitudes: vec![amp; dim],
        })
    }

    /// Basis state for one definite configuration bitmask.
    pub fn basis_state(n_atoms: usize, config: usize) -> Result<Self> {
        Self::check_capacity(n_atoms)?;
        let dim = 1usize << n_atoms;
        if config >= dim {
            return Err(Error::Domain(format!(
                "configuration {config:#x} out of range for {n_atoms} atoms"
            )));
        }
        let mut amplitudes = vec![Complex64::default(); dim];
        amplitudes[config] = Complex64::new(1.0, 0.0);
        Ok(Self { n_atoms, amplitudes })
    }

    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(n_atoms: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::check_capacity(n_atoms)?;
        if amplitudes.len() != 1usize << n_atoms {
            return Err(Error::Domain(format!(
                "amplitude vector has length {}, expected {}",
                amplitudes.len(),
                1usize << n_atoms
            )));
        }
        let mut state = Self { n_atoms, amplitudes };
        if state.norm_sqr() == 0.0 {
            return Err(Error::Domain("amplitude vector has zero norm".into()));
        }
        state.renormalize();
        Ok(state)
    }

    fn check_capacity(n_atoms: usize) -> Result<()> {
        if n_atoms == 0 || n_atoms > MAX_ATOMS {
            return Err(Error::CapacityExceeded {
                n_atoms,
                max: MAX_ATOMS,
            });
        }
        Ok(())
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Rescales to unit norm. The caller guarantees the norm is nonzero.
    pub fn renormalize(&mut self) {
        let scale = self.norm_sqr().sqrt().recip();
        for c in &mut self.amplitudes {
            *c *= scale;
        }
    }

    fn check_normalized(&self) -> Result<()> {
        let deviation = (self.norm_sqr().sqrt() - 1.0).abs();
        if deviation > NORM_TOLERANCE {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(())
    }

    /// Population of each `n_a` sector, summed over configurations.
    pub fn populations_by_na(&self) -> Vec<f64> {
        let mut pops = vec![0.0; self.n_atoms + 1];
        for (config, c) in self.amplitudes.iter().enumerate() {
            pops[config.count_ones() as usize] += c.norm_sqr();
        }
        pops
    }
}

/// Collective-spin expectation values of one state, in units of hbar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinObservables {
    pub jz_mean: f64,
    pub jz_var: f64,
    pub jx_mean: f64,
    pub jy_mean: f64,
    pub jsq_mean: f64,
}

impl SpinObservables {
    /// Length of the mean spin projected on the horizontal plane.
    pub fn horizontal_spin(&self) -> f64 {
        self.jx_mean.hypot(self.jy_mean)
    }
}

/// Wineland squeezing figure of merit together with its inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingReport {
    pub xi: f64,
    pub var_jz: f64,
    pub jx: f64,
    pub n_atoms: usize,
}

/// Applies `Jz` (diagonal popcount weights) to the amplitude vector.
pub(crate) fn apply_jz(n_atoms: usize, amps: &[Complex64]) -> Vec<Complex64> {
    let half_n = n_atoms as f64 / 2.0;
    amps.iter()
        .enumerate()
        .map(|(config, c)| c * (config.count_ones() as f64 - half_n))
        .collect()
}

/// Applies `Jx` as on-the-fly single-bit flips: `Jx |e> = 1/2 sum_i |e ^ bit_i>`.
pub(crate) fn apply_jx(n_atoms: usize, amps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); amps.len()];
    for (config, c) in amps.iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let half = c * 0.5;
        for i in 0..n_atoms {
            out[config ^ (1 << i)] += half;
        }
    }
    out
}

/// Applies `Jy`; flipping a set bit carries +i/2, a clear bit -i/2.
pub(crate) fn apply_jy(n_atoms: usize, amps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); amps.len()];
    let plus = Complex64::new(0.0, 0.5);
    for (config, c) in amps.iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        for i in 0..n_atoms {
            let bit = 1usize << i;
            if config & bit != 0 {
                out[config ^ bit] += plus * c;
            } else {
                out[config ^ bit] -= plus * c;
            }
        }
    }
    out
}

fn apply_jsq(n_atoms: usize, amps: &[Complex64]) -> Vec<Complex64> {
    let jx = apply_jx(n_atoms, &apply_jx(n_atoms, amps));
    let jy = apply_jy(n_atoms, &apply_jy(n_atoms, amps));
    let jz = apply_jz(n_atoms, &apply_jz(n_atoms, amps));
    jx.iter()
        .zip(&jy)
        .zip(&jz)
        .map(|((x, y), z)| x + y + z)
        .collect()
}

fn norm_sqr(amps: &[Complex64]) -> f64 {
    amps.iter().map(|c| c.norm_sqr()).sum()
}

/// Evaluates all collective-spin observables of a normalized state.
///
/// `<Jx^2>` etc. are taken as squared norms of the operator image, so one
/// state vector is the only allocation that scales with the Hilbert space.
pub fn observables(state: &QuantumState) -> Result<SpinObservables> {
    state.check_normalized()?;
    let n = state.n_atoms;
    let amps = state.amplitudes();

    let half_n = n as f64 / 2.0;
    let mut jz_mean = 0.0;
    let mut jzsq_mean = 0.0;
    for (config, c) in amps.iter().enumerate() {
        let w = config.count_ones() as f64 - half_n;
        let p = c.norm_sqr();
        jz_mean += w * p;
        jzsq_mean += w * w * p;
    }

    let jx_image = apply_jx(n, amps);
    let jy_image = apply_jy(n, amps);
    let jx_mean = inner(amps, &jx_image);
    let jy_mean = inner(amps, &jy_image);
    let jsq_mean = norm_sqr(&jx_image) + norm_sqr(&jy_image) + jzsq_mean;

    Ok(SpinObservables {
        jz_mean,
        jz_var: (jzsq_mean - jz_mean * jz_mean).max(0.0),
        jx_mean,
        jy_mean,
        jsq_mean,
    })
}

fn inner(bra: &[Complex64], ket: &[Complex64]) -> f64 {
    let v: Complex64 = bra.iter().zip(ket).map(|(b, k)| b.conj() * k).sum();
    debug_assert!(v.im.abs() < 1e-10, "Hermitian expectation has imaginary residue {}", v.im);
    v.re
}

/// Which form of the Gaussian mean-spin relation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanSpinForm {
    /// `J exp(-1/(8 Var Jz))`, the asymptotic form used downstream.
    Asymptotic,
    /// `(J + 1/2)(1 - 2 Var Jz/(2J+1)^2) exp(-1/(8 Var Jz))`, clamped at 0
    /// where the prefactor turns negative (large variance).
    FullPrefactor,
}

/// Mean spin of a Gaussian-distributed `Jz` amplitude profile, asymptotic form.
pub fn gaussian_mean_spin(var_jz: f64, j: f64) -> Result<f64> {
    gaussian_mean_spin_form(MeanSpinForm::Asymptotic, var_jz, j)
}

/// Mean spin of a Gaussian `Jz` profile in the requested form.
pub fn gaussian_mean_spin_form(form: MeanSpinForm, var_jz: f64, j: f64) -> Result<f64> {
    if var_jz <= 0.0 {
        return Err(Error::Domain(format!(
            "gaussian mean spin needs Var(Jz) > 0, got {var_jz}"
        )));
    }
    if j <= 0.0 {
        return Err(Error::Domain(format!("gaussian mean spin needs J > 0, got {j}")));
    }
    let decay = (-1.0 / (8.0 * var_jz)).exp();
    Ok(match form {
        MeanSpinForm::Asymptotic => j * decay,
        MeanSpinForm::FullPrefactor => {
            let prefactor = (j + 0.5) * (1.0 - 2.0 * var_jz / (2.0 * j + 1.0).powi(2));
            (prefactor * decay).max(0.0)
        }
    })
}

/// Wineland parameter `xi = sqrt(N Var Jz)/|<Jx>|`.
pub fn squeezing_xi(n_atoms: usize, var_jz: f64, jx: f64) -> Result<SqueezingReport> {
    if jx == 0.0 {
        return Err(Error::UndefinedSqueezing);
    }
    if var_jz < 0.0 {
        return Err(Error::Domain(format!("Var(Jz) must be >= 0, got {var_jz}")));
    }
    Ok(SqueezingReport {
        xi: (n_atoms as f64 * var_jz).sqrt() / jx.abs(),
        var_jz,
        jx,
        n_atoms,
    })
}

/// Population carried by each total-J subspace, keyed by `2J`.
///
/// Projects with the spectral polynomial of `J^2` over the eigenvalues
/// `J(J+1)` allowed at this atom number; exact up to rounding, but the
/// repeated operator application limits it to small systems.
pub fn dicke_projection_weights(state: &QuantumState) -> Result<BTreeMap<u32, f64>> {
    let n = state.n_atoms;
    if n > MAX_DICKE_ATOMS {
        return Err(Error::DickeCapExceeded {
            n_atoms: n,
            max: MAX_DICKE_ATOMS,
        });
    }
    state.check_normalized()?;

    // Allowed 2J values: n, n-2, ..., down to 0 or 1.
    let two_js: Vec<u32> =
        (0..=n as u32).rev().filter(|t| (n as u32 - t).is_multiple_of(2)).collect();
    let eigenvalue = |two_j: u32| {
        let j = two_j as f64 / 2.0;
        j * (j + 1.0)
    };

    let mut weights = BTreeMap::new();
    for &two_j in &two_js {
        let lambda = eigenvalue(two_j);
        let mut v = state.amplitudes().to_vec();
        for &other in &two_js {
            if other == two_j {
                continue;
            }
            let mu = eigenvalue(other);
            let image = apply_jsq(n, &v);
            let scale = (lambda - mu).recip();
            for (vi, im) in v.iter_mut().zip(&image) {
                *vi = (im - *vi * mu) * scale;
            }
        }
        let w: Complex64 = state
            .amplitudes()
            .iter()
            .zip(&v)
            .map(|(b, k)| b.conj() * k)
            .sum();
        weights.insert(two_j, w.re.max(0.0));
    }
    Ok(weights)
}
