//! Full Lindblad master equation for the atom and both resonator modes in a
//! truncated Fock space, solved for its steady state.
//!
//! The Hamiltonian is the one behind [`crate::model`], including the drive,
//! with collapse operators `√(2κ) a`, `√(2κ) b` and `√(2γ) σ⁻`. The steady
//! state is reached by integrating `dρ/dt = L ρ` with classical RK4 until the
//! residual `‖L ρ‖_F` drops below a tolerance. Every operator is sparse, so
//! one evaluation of `L ρ` costs `O(nnz · d)` for Hilbert dimension
//! `d = 2 (n_max + 1)²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::C64;

pub const DEFAULT_FOCK_CUTOFF: usize = 4;
pub const MAX_FOCK_CUTOFF: usize = 6;
/// Largest tolerated population at the Fock cutoff.
pub const TOP_LEVEL_LIMIT: f64 = 1e-2;

const RESIDUAL_TOL: f64 = 1e-11;
const CHECK_EVERY: usize = 25;
const MAX_STEPS: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterSteadyState {
    /// Forward photon flux `⟨a_out† a_out⟩ / |a_in|²`.
    pub transmission: f64,
    /// Coherent part `|⟨a_out⟩|² / |a_in|²`.
    pub transmission_coherent: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub excited_population: f64,
    pub amp_a: C64,
    pub amp_b: C64,
    /// Population in states with either mode at the cutoff.
    pub top_level_population: f64,
    pub hilbert_dim: usize,
    pub residual: f64,
}

/// Basis index `(s, n_a, n_b)` with `s = 1` for the excited atom.
#[derive(Clone, Copy)]
struct Basis {
    levels: usize,
}

impl Basis {
    fn dim(&self) -> usize {
        2 * self.levels * self.levels
    }

    fn index(&self, s: usize, na: usize, nb: usize) -> usize {
        (s * self.levels + na) * self.levels + nb
    }

    fn states(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let l = self.levels;
        (0..2).flat_map(move |s| (0..l).flat_map(move |na| (0..l).map(move |nb| (s, na, nb))))
    }
}

/// Operator with exactly one nonzero per column: `C|j⟩ = coef |dst⟩`.
struct Jump {
    entries: Vec<(usize, usize, f64)>, // (src, dst, coef)
}

struct Liouvillian {
    dim: usize,
    /// Nonzeros `(row, col, value)` of `H_eff = H − (i/2) Σ C†C`.
    h_eff: Vec<(usize, usize, C64)>,
    jumps: Vec<Jump>,
}

impl Liouvillian {
    fn new(p: &SystemParams, basis: Basis) -> Self {
        let n = basis.levels - 1;
        let kappa = p.kappa();
        let g = p.g_tw;
        let gc = g.conj();
        let e = p.eps_p;
        let mut h_eff = Vec::new();
        let mut push = |row: usize, col: usize, v: C64| {
            if v != C64::new(0.0, 0.0) {
                h_eff.push((row, col, v));
            }
        };
        for (s, na, nb) in basis.states() {
            let j = basis.index(s, na, nb);
            let (fa, fb, fs) = (na as f64, nb as f64, s as f64);
            push(
                j,
                j,
                C64::new(
                    p.delta_a * fs + p.delta * (fa + fb),
                    -(kappa * (fa + fb) + p.gamma * fs),
                ),
            );
            // −h (a†b + b†a)
            if nb >= 1 && na < n {
                push(basis.index(s, na + 1, nb - 1), j, C64::new(-p.h * ((fa + 1.0) * fb).sqrt(), 0.0));
            }
            if na >= 1 && nb < n {
                push(basis.index(s, na - 1, nb + 1), j, C64::new(-p.h * (fa * (fb + 1.0)).sqrt(), 0.0));
            }
            if s == 1 {
                // g* a†σ⁻ + g b†σ⁻
                if na < n {
                    push(basis.index(0, na + 1, nb), j, gc * (fa + 1.0).sqrt());
                }
                if nb < n {
                    push(basis.index(0, na, nb + 1), j, g * (fb + 1.0).sqrt());
                }
            } else {
                // g σ⁺a + g* σ⁺b
                if na >= 1 {
                    push(basis.index(1, na - 1, nb), j, g * fa.sqrt());
                }
                if nb >= 1 {
                    push(basis.index(1, na, nb - 1), j, gc * fb.sqrt());
                }
            }
            // E a† + E* a
            if na < n {
                push(basis.index(s, na + 1, nb), j, e * (fa + 1.0).sqrt());
            }
            if na >= 1 {
                push(basis.index(s, na - 1, nb), j, e.conj() * fa.sqrt());
            }
        }

        let mut jump_a = Jump { entries: Vec::new() };
        let mut jump_b = Jump { entries: Vec::new() };
        let mut jump_s = Jump { entries: Vec::new() };
        for (s, na, nb) in basis.states() {
            let j = basis.index(s, na, nb);
            if na >= 1 {
                jump_a.entries.push((j, basis.index(s, na - 1, nb), (2.0 * kappa * na as f64).sqrt()));
            }
            if nb >= 1 {
                jump_b.entries.push((j, basis.index(s, na, nb - 1), (2.0 * kappa * nb as f64).sqrt()));
            }
            if s == 1 && p.gamma > 0.0 {
                jump_s.entries.push((j, basis.index(0, na, nb), (2.0 * p.gamma).sqrt()));
            }
        }

        Self { dim: basis.dim(), h_eff, jumps: vec![jump_a, jump_b, jump_s] }
    }

    /// Upper bound on the spectral radius of `L`.
    fn norm_bound(&self) -> f64 {
        let mut row_sum = vec![0.0; self.dim];
        for &(r, _, v) in &self.h_eff {
            row_sum[r] += v.norm();
        }
        let h = row_sum.iter().cloned().fold(0.0, f64::max);
        let jump: f64 = self
            .jumps
            .iter()
            .map(|c| c.entries.iter().map(|e| e.2 * e.2).fold(0.0, f64::max))
            .sum();
        2.0 * h + jump
    }

    /// `out = L ρ`
    fn apply(&self, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let d = self.dim;
        scratch.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for &(r, c, v) in &self.h_eff {
            let src = &rho[c * d..(c + 1) * d];
            let dst = &mut scratch[r * d..(r + 1) * d];
            for (o, x) in dst.iter_mut().zip(src) {
                *o += v * x;
            }
        }
        // −i(X − X†) with X = H_eff ρ
        for i in 0..d {
            for k in 0..d {
                let x = scratch[i * d + k];
                let xt = scratch[k * d + i].conj();
                out[i * d + k] = C64::new(0.0, -1.0) * (x - xt);
            }
        }
        for jump in &self.jumps {
            for &(j, i, cj) in &jump.entries {
                for &(l, k, cl) in &jump.entries {
                    out[i * d + k] += cj * cl * rho[j * d + l];
                }
            }
        }
    }
}

fn frobenius(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Steady state of the master equation with `n_max` photons per mode.
pub fn master_equation_oracle(params: &SystemParams, n_max: usize) -> Result<MasterSteadyState> {
    params.validate()?;
    if !(1..=MAX_FOCK_CUTOFF).contains(&n_max) {
        return Err(Error::InvalidParameter(format!(
            "Fock cutoff {n_max} outside [1, {MAX_FOCK_CUTOFF}]"
        )));
    }
    if params.eps_p == C64::new(0.0, 0.0) {
        return Err(Error::ZeroDrive);
    }
    if !(params.kappa_ex > 0.0) {
        return Err(Error::InvalidParameter("kappa_ex must be positive".into()));
    }
    let basis = Basis { levels: n_max + 1 };
    let liou = Liouvillian::new(params, basis);
    let d = liou.dim;
    let dt = 2.5 / liou.norm_bound();

    let mut rho = vec![C64::new(0.0, 0.0); d * d];
    rho[0] = C64::new(1.0, 0.0);
    let mut k1 = vec![C64::new(0.0, 0.0); d * d];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut scratch = k1.clone();

    let mut residual = f64::INFINITY;
    for step in 0..MAX_STEPS {
        liou.apply(&rho, &mut k1, &mut scratch);
        if step % CHECK_EVERY == 0 {
            residual = frobenius(&k1);
            if residual < RESIDUAL_TOL {
                break;
            }
        }
        for i in 0..d * d {
            tmp[i] = rho[i] + k1[i] * (0.5 * dt);
        }
        liou.apply(&tmp, &mut k2, &mut scratch);
        for i in 0..d * d {
            tmp[i] = rho[i] + k2[i] * (0.5 * dt);
        }
        liou.apply(&tmp, &mut k3, &mut scratch);
        for i in 0..d * d {
            tmp[i] = rho[i] + k3[i] * dt;
        }
        liou.apply(&tmp, &mut k4, &mut scratch);
        for i in 0..d * d {
            rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::NotStationary { residual });
    }

    let trace: f64 = (0..d).map(|i| rho[i * d + i].re).sum();
    let mut n_a = 0.0;
    let mut n_b = 0.0;
    let mut excited = 0.0;
    let mut top = 0.0;
    for (s, na, nb) in basis.states() {
        let j = basis.index(s, na, nb);
        let p = rho[j * d + j].re / trace;
        n_a += na as f64 * p;
        n_b += nb as f64 * p;
        excited += s as f64 * p;
        if na == n_max || nb == n_max {
            top += p;
        }
    }
    let expect = |jump: &Jump, kappa2: f64| -> C64 {
        // Tr(C ρ)/√(rate): C|j⟩ = c|i⟩ gives Tr(Cρ) = Σ_j c ρ[j, i]
        jump.entries.iter().map(|&(j, i, c)| rho[j * d + i] * c).sum::<C64>() / (trace * kappa2.sqrt())
    };
    let amp_a = expect(&liou.jumps[0], 2.0 * params.kappa());
    let amp_b = expect(&liou.jumps[1], 2.0 * params.kappa());

    if top > TOP_LEVEL_LIMIT {
        return Err(Error::CutoffTooSmall { n_max, top_population: top });
    }

    let kex = params.kappa_ex;
    let e = params.eps_p;
    let interference = (C64::new(0.0, -2.0 * kex) * amp_a / e).re;
    let transmission = 1.0 + 2.0 * interference + 4.0 * kex * kex * n_a / e.norm_sqr();
    let transmission_coherent = (C64::new(1.0, 0.0) - C64::i() * 2.0 * kex * amp_a / e).norm_sqr();

    Ok(MasterSteadyState {
        transmission,
        transmission_coherent,
        n_a,
        n_b,
        excited_population: excited,
        amp_a,
        amp_b,
        top_level_population: top,
        hilbert_dim: d,
        residual,
    })
}
