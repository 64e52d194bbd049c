//! Integration engine: structured-sparse Hamiltonian application and an
//! adaptive Dormand–Prince 5(4) stepper over flat complex state buffers.
//!
//! The Hamiltonian is never materialized densely in the hot path. It is
//! kept as a number diagonal (static anharmonicity plus per-mode detuning
//! from the numerical frame) and a list of exchange terms with
//! time-dependent complex coefficients. Collapse terms act mode-locally
//! through precomputed occupation tables. Everything here is exact linear
//! algebra on the same model a dense implementation would use; only the
//! data layout differs.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{two_pi, Cplx, Real};
use crate::tensorspace::TensorSpace;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("step size underflow at t = {t} ns (h = {h} ns)")]
    StepUnderflow { t: f64, h: f64 },
    #[error("state invariant breached at t = {t} ns: {what}")]
    InvariantBreach { t: f64, what: String },
}

/// Sparse matrix with real entries in CSR form; the structure matrices of
/// ladder operators and exchange terms are all real.
#[derive(Debug, Clone)]
pub struct RealCsr<T> {
    pub nrows: usize,
    pub ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> RealCsr<T> {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, T)>,
    ) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        for &(r, c, v) in &triplets {
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.vals.len());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((self.cols[k], r, self.vals[k]));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, triplets)
    }

    /// out += scale · (self · x) for a flat row-major dense x (n_cols wide).
    pub fn mul_dense_accum(
        &self,
        scale: Cplx<T>,
        x: &[Cplx<T>],
        width: usize,
        out: &mut [Cplx<T>],
    ) {
        for r in 0..self.nrows {
            let out_row = &mut out[r * width..(r + 1) * width];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                let w = scale * self.vals[k];
                let x_row = &x[c * width..(c + 1) * width];
                for (o, &xv) in out_row.iter_mut().zip(x_row.iter()) {
                    *o += w * xv;
                }
            }
        }
    }

    /// out += scale · (self · x) for a vector x.
    pub fn mul_vec_accum(&self, scale: Cplx<T>, x: &[Cplx<T>], out: &mut [Cplx<T>]) {
        for r in 0..self.nrows {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            out[r] += scale * acc;
        }
    }
}

/// Exchange term `g (a_j† a_k e^{iδt} + h.c.)` in angular units.
pub struct ExchangeTerm<T> {
    /// Structure matrix a_j† a_k.
    pub s: RealCsr<T>,
    /// Its transpose (the h.c. structure).
    pub st: RealCsr<T>,
    /// Angular coupling 2π g, rad/ns.
    pub g_ang: T,
    /// Angular frame-phase rate 2π(ref_j − ref_k), rad/ns.
    pub phase_rate: T,
}

/// Mode-local collapse channels; rates are the Lindblad γ in 1/ns.
pub enum CollapseKind {
    /// D[a_m]: relaxation / photon loss.
    Lowering,
    /// D[n_m]: pure dephasing.
    NumberDephasing,
}

pub struct CollapseTerm<T> {
    pub mode: usize,
    pub kind: CollapseKind,
    pub rate: T,
}

/// Per-mode detuning source δ_m(t) = 2π(ω_m(t) − ref_m), rad/ns.
pub trait DetuningFn<T>: Sync {
    fn detuning_ang(&self, t: T) -> T;
}

/// The compiled system handed to the stepper.
pub struct CompiledSystem<'a, T: Real> {
    pub dim: usize,
    /// Static angular diagonal: anharmonicity ladder terms.
    pub static_diag: Vec<T>,
    /// Occupation of each mode per basis index, as scalars.
    pub occupation: Vec<Vec<T>>,
    /// Occupation as integers for collapse gathers.
    pub levels: Vec<Vec<u16>>,
    pub strides: Vec<usize>,
    pub dims: Vec<usize>,
    pub detunings: Vec<&'a dyn DetuningFn<T>>,
    pub exchanges: Vec<ExchangeTerm<T>>,
    pub collapses: Vec<CollapseTerm<T>>,
}

impl<'a, T: Real> CompiledSystem<'a, T> {
    pub fn from_space(space: &TensorSpace) -> CompiledSystemBuilder<'a, T> {
        let dim = space.total_dim();
        let n_modes = space.n_modes();
        let occupation = (0..n_modes)
            .map(|m| {
                space
                    .level_table(m)
                    .iter()
                    .map(|&l| T::of(l as f64))
                    .collect()
            })
            .collect();
        let levels = (0..n_modes).map(|m| space.level_table(m).to_vec()).collect();
        CompiledSystemBuilder {
            system: CompiledSystem {
                dim,
                static_diag: vec![T::zero(); dim],
                occupation,
                levels,
                strides: (0..n_modes).map(|m| space.stride(m)).collect(),
                dims: (0..n_modes).map(|m| space.dim(m)).collect(),
                detunings: Vec::new(),
                exchanges: Vec::new(),
                collapses: Vec::new(),
            },
        }
    }

    /// Assemble the instantaneous angular diagonal into `out`.
    fn eval_diag(&self, t: T, out: &mut [T]) {
        out.copy_from_slice(&self.static_diag);
        for (m, det) in self.detunings.iter().enumerate() {
            let d = det.detuning_ang(t);
            if d != T::zero() {
                for (o, &n) in out.iter_mut().zip(self.occupation[m].iter()) {
                    *o += d * n;
                }
            }
        }
    }

    /// dψ = −i H(t) ψ.
    pub fn rhs_state(&self, t: T, psi: &[Cplx<T>], out: &mut [Cplx<T>], diag: &mut [T]) {
        self.eval_diag(t, diag);
        let minus_i = Complex::new(T::zero(), -T::one());
        for ((o, &p), &d) in out.iter_mut().zip(psi.iter()).zip(diag.iter()) {
            *o = minus_i * (p * d);
        }
        for ex in &self.exchanges {
            let phase = ex.phase_rate * t;
            let z = Complex::from_polar(ex.g_ang, phase);
            ex.s.mul_vec_accum(minus_i * z, psi, out);
            ex.st.mul_vec_accum(minus_i * z.conj(), psi, out);
        }
    }

    /// dρ = −i[H(t), ρ] + Σ D[c](ρ), on flat row-major ρ.
    #[allow(clippy::too_many_arguments)]
    pub fn rhs_density(
        &self,
        t: T,
        rho: &[Cplx<T>],
        out: &mut [Cplx<T>],
        diag: &mut [T],
        rho_t: &mut [Cplx<T>],
        out_rt: &mut [Cplx<T>],
    ) {
        let d = self.dim;
        self.eval_diag(t, diag);
        let minus_i = Complex::new(T::zero(), -T::one());

        // Transpose of rho for the right-multiplication products.
        for r in 0..d {
            for c in 0..d {
                rho_t[c * d + r] = rho[r * d + c];
            }
        }
        for v in out_rt.iter_mut() {
            *v = Complex::new(T::zero(), T::zero());
        }

        // Diagonal commutator part: −i (d_r − d_c) ρ_rc.
        for r in 0..d {
            let dr = diag[r];
            let row = &rho[r * d..(r + 1) * d];
            let out_row = &mut out[r * d..(r + 1) * d];
            for c in 0..d {
                out_row[c] = minus_i * (row[c] * (dr - diag[c]));
            }
        }

        // Exchange commutator parts.
        for ex in &self.exchanges {
            let phase = ex.phase_rate * t;
            let z = Complex::from_polar(ex.g_ang, phase);
            // −i z S ρ − i z̄ Sᵀ ρ  (left products)
            ex.s.mul_dense_accum(minus_i * z, rho, d, out);
            ex.st.mul_dense_accum(minus_i * z.conj(), rho, d, out);
            // +i z ρ S = ((i z) Sᵀ ρᵀ)ᵀ ; +i z̄ ρ Sᵀ = ((i z̄) S ρᵀ)ᵀ
            let plus_i = Complex::new(T::zero(), T::one());
            ex.st.mul_dense_accum(plus_i * z, rho_t, d, out_rt);
            ex.s.mul_dense_accum(plus_i * z.conj(), rho_t, d, out_rt);
        }

        // Collapse terms, all mode-local.
        let half = T::of(0.5);
        for col in &self.collapses {
            let gamma = col.rate;
            if gamma == T::zero() {
                continue;
            }
            let levels = &self.levels[col.mode];
            let stride = self.strides[col.mode];
            let dm = self.dims[col.mode];
            match col.kind {
                CollapseKind::Lowering => {
                    // a ρ a†: out[r,c] += γ √((n_r+1)(n_c+1)) ρ[r+s, c+s]
                    for r in 0..d {
                        let nr = levels[r] as usize;
                        if nr + 1 >= dm {
                            continue;
                        }
                        let out_row = &mut out[r * d..(r + 1) * d];
                        let src_row = &rho[(r + stride) * d..(r + stride) * d + d];
                        let ar = T::of((nr + 1) as f64).sqrt();
                        for c in 0..d {
                            let nc = levels[c] as usize;
                            if nc + 1 >= dm {
                                continue;
                            }
                            let ac = T::of((nc + 1) as f64).sqrt();
                            out_row[c] += src_row[c + stride] * (gamma * ar * ac);
                        }
                    }
                    // −γ/2 {n, ρ}
                    for r in 0..d {
                        let nr = T::of(levels[r] as f64);
                        let out_row = &mut out[r * d..(r + 1) * d];
                        let row = &rho[r * d..(r + 1) * d];
                        for c in 0..d {
                            let ncl = T::of(levels[c] as f64);
                            out_row[c] -= row[c] * (gamma * half * (nr + ncl));
                        }
                    }
                }
                CollapseKind::NumberDephasing => {
                    // n ρ n − ½{n², ρ} = −½ (n_r − n_c)² ρ
                    for r in 0..d {
                        let nr = T::of(levels[r] as f64);
                        let out_row = &mut out[r * d..(r + 1) * d];
                        let row = &rho[r * d..(r + 1) * d];
                        for c in 0..d {
                            let ncl = T::of(levels[c] as f64);
                            let diff = nr - ncl;
                            out_row[c] -= row[c] * (gamma * half * diff * diff);
                        }
                    }
                }
            }
        }

        // Fold the transposed accumulator back in.
        for r in 0..d {
            for c in 0..d {
                out[r * d + c] += out_rt[c * d + r];
            }
        }
    }
}

pub struct CompiledSystemBuilder<'a, T: Real> {
    system: CompiledSystem<'a, T>,
}

impl<'a, T: Real> CompiledSystemBuilder<'a, T> {
    /// Add the static anharmonicity ladder 2π(α/2)n(n−1) of one mode.
    pub fn anharmonicity(mut self, mode: usize, alpha_ghz: T) -> Self {
        let tp = two_pi::<T>();
        let half = T::of(0.5);
        for (i, diag) in self.system.static_diag.iter_mut().enumerate() {
            let n = self.system.occupation[mode][i];
            *diag += tp * half * alpha_ghz * n * (n - T::one());
        }
        self
    }

    pub fn detuning(mut self, f: &'a dyn DetuningFn<T>) -> Self {
        self.system.detunings.push(f);
        self
    }

    /// Exchange coupling g (GHz) between modes j and k with frame phase
    /// rate 2π(ref_j − ref_k).
    pub fn exchange(
        mut self,
        j: usize,
        k: usize,
        g_ghz: T,
        ref_j_ghz: T,
        ref_k_ghz: T,
    ) -> Self {
        let d = self.system.dim;
        let sj = self.system.strides[j];
        let sk = self.system.strides[k];
        let dj = self.system.dims[j];
        let mut triplets = Vec::new();
        for i in 0..d {
            let nj = self.system.levels[j][i] as usize;
            let nk = self.system.levels[k][i] as usize;
            if nj + 1 < dj && nk >= 1 {
                let r = i + sj - sk;
                let amp = T::of(((nj + 1) * nk) as f64).sqrt();
                triplets.push((r, i, amp));
            }
        }
        let s = RealCsr::from_triplets(d, d, triplets);
        let st = s.transpose();
        let tp = two_pi::<T>();
        self.system.exchanges.push(ExchangeTerm {
            s,
            st,
            g_ang: tp * g_ghz,
            phase_rate: tp * (ref_j_ghz - ref_k_ghz),
        });
        self
    }

    pub fn collapse(mut self, mode: usize, kind: CollapseKind, rate_per_ns: T) -> Self {
        self.system.collapses.push(CollapseTerm {
            mode,
            kind,
            rate: rate_per_ns,
        });
        self
    }

    pub fn build(self) -> CompiledSystem<'a, T> {
        self.system
    }
}

// Dormand–Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub struct StepperOptions<T> {
    /// Local error tolerance per step (absolute, on unit-scale states).
    pub tol: T,
    pub max_step: T,
    pub min_step: T,
    /// Renormalize the state vector after each accepted step (unitary path).
    pub renormalize: bool,
}

impl<T: Real> Default for StepperOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-8),
            max_step: T::of(5.0),
            min_step: T::of(1e-9),
            renormalize: false,
        }
    }
}

pub struct StepperStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Integrate dy/dt = rhs(t, y) from t0 to t1 with adaptive Dormand–Prince.
///
/// `h_init` carries the step size across knot boundaries; pass the value
/// returned by the previous call for smooth restarts.
#[allow(clippy::too_many_arguments)]
pub fn rk45_span<T: Real>(
    rhs: &mut dyn FnMut(T, &[Cplx<T>], &mut [Cplx<T>]),
    y: &mut [Cplx<T>],
    t0: T,
    t1: T,
    opts: &StepperOptions<T>,
    h_init: T,
    stats: &mut StepperStats,
) -> Result<T, EngineError> {
    let n = y.len();
    let zero_c = Complex::new(T::zero(), T::zero());
    let mut k: Vec<Vec<Cplx<T>>> = (0..7).map(|_| vec![zero_c; n]).collect();
    let mut y_stage = vec![zero_c; n];
    let mut y5 = vec![zero_c; n];

    let span = t1 - t0;
    if span <= T::zero() {
        return Ok(h_init);
    }
    let mut t = t0;
    let mut h = h_init.min(span).min(opts.max_step).max(opts.min_step);
    let safety = T::of(0.9);
    let min_shrink = T::of(0.2);
    let max_grow = T::of(5.0);

    while t < t1 {
        if h < opts.min_step {
            return Err(EngineError::StepUnderflow {
                t: t.to_f64().unwrap_or(f64::NAN),
                h: h.to_f64().unwrap_or(f64::NAN),
            });
        }
        let h_eff = h.min(t1 - t);

        rhs(t, y, &mut k[0]);
        stats.rhs_evals += 1;
        for stage in 1..7 {
            for (i, ys) in y_stage.iter_mut().enumerate() {
                let mut acc = zero_c;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    let a = T::of(DP_A[stage - 1][j]);
                    if a != T::zero() {
                        acc += kj[i] * a;
                    }
                }
                *ys = y[i] + acc * h_eff;
            }
            let ts = t + T::of(DP_C[stage]) * h_eff;
            let (head, tail) = k.split_at_mut(stage);
            let _ = head;
            rhs(ts, &y_stage, &mut tail[0]);
            stats.rhs_evals += 1;
        }

        // 5th-order solution and embedded error estimate.
        let mut err_sq = T::zero();
        for i in 0..n {
            let mut acc5 = zero_c;
            let mut acc4 = zero_c;
            for (j, kj) in k.iter().enumerate() {
                let b5 = T::of(DP_B5[j]);
                let b4 = T::of(DP_B4[j]);
                if b5 != T::zero() {
                    acc5 += kj[i] * b5;
                }
                if b4 != T::zero() {
                    acc4 += kj[i] * b4;
                }
            }
            y5[i] = y[i] + acc5 * h_eff;
            let e = (acc5 - acc4) * h_eff;
            err_sq += e.norm_sqr();
        }
        let err = (err_sq / T::of(n as f64)).sqrt() / opts.tol;

        if err <= T::one() {
            t = t + h_eff;
            y.copy_from_slice(&y5);
            if opts.renormalize {
                let norm = y
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<T>()
                    .sqrt();
                if norm > T::zero() {
                    let inv = T::one() / norm;
                    for v in y.iter_mut() {
                        *v = *v * inv;
                    }
                }
            }
            stats.steps += 1;
            let grow = if err > T::zero() {
                (safety * err.powf(T::of(-0.2))).min(max_grow)
            } else {
                max_grow
            };
            h = (h_eff * grow).min(opts.max_step);
        } else {
            stats.rejected += 1;
            let shrink = (safety * err.powf(T::of(-0.2))).max(min_shrink);
            h = h_eff * shrink;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorspace::make_space;
    use approx::assert_abs_diff_eq;

    struct NoDetuning;
    impl DetuningFn<f64> for NoDetuning {
        fn detuning_ang(&self, _t: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn csr_matches_dense_products() {
        let s = RealCsr::from_triplets(3, 3, vec![(0, 1, 1.0), (1, 2, 2.0_f64.sqrt())]);
        let x = vec![
            Complex::new(1.0, 0.5),
            Complex::new(-2.0, 1.0),
            Complex::new(0.3, -0.1),
        ];
        let mut out = vec![Complex::new(0.0, 0.0); 3];
        s.mul_vec_accum(Complex::new(1.0, 0.0), &x, &mut out);
        assert_abs_diff_eq!(out[0].re, -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1].re, 2.0_f64.sqrt() * 0.3, epsilon = 1e-15);
        assert_eq!(out[2], Complex::new(0.0, 0.0));
    }

    #[test]
    fn rabi_oscillation_between_two_resonant_modes() {
        // Two resonant 2-level modes with exchange g: full transfer at
        // t = 1/(4 g).
        let space = make_space(vec![2, 2], vec!["a", "b"]).unwrap();
        let nd = NoDetuning;
        let system = CompiledSystem::<f64>::from_space(&space)
            .detuning(&nd)
            .detuning(&nd)
            .exchange(0, 1, 0.030, 0.0, 0.0)
            .build();
        let dim = space.total_dim();
        let mut psi = vec![Complex::new(0.0, 0.0); dim];
        // |10⟩ = index 2 (mode a excited).
        psi[2] = Complex::new(1.0, 0.0);
        let mut diag = vec![0.0; dim];
        let mut rhs = |t: f64, y: &[Cplx<f64>], dy: &mut [Cplx<f64>]| {
            system.rhs_state(t, y, dy, &mut diag);
        };
        let mut stats = StepperStats {
            steps: 0,
            rejected: 0,
            rhs_evals: 0,
        };
        let opts = StepperOptions {
            renormalize: true,
            ..Default::default()
        };
        let t_swap = 1.0 / (4.0 * 0.030);
        rk45_span(&mut rhs, &mut psi, 0.0, t_swap, &opts, 0.01, &mut stats).unwrap();
        // All population in |01⟩ = index 1.
        assert_abs_diff_eq!(psi[1].norm_sqr(), 1.0, epsilon = 1e-7);
        assert!(psi[2].norm_sqr() < 1e-7);
    }

    #[test]
    fn density_relaxation_decays_exponentially() {
        let space = make_space(vec![2], vec!["a"]).unwrap();
        let nd = NoDetuning;
        let gamma = 1.0 / 500.0; // 1/ns
        let system = CompiledSystem::<f64>::from_space(&space)
            .detuning(&nd)
            .collapse(0, CollapseKind::Lowering, gamma)
            .build();
        let d = 2;
        let mut rho = vec![Complex::new(0.0, 0.0); d * d];
        rho[3] = Complex::new(1.0, 0.0); // |e⟩⟨e|
        let mut diag = vec![0.0; d];
        let mut rho_t = vec![Complex::new(0.0, 0.0); d * d];
        let mut out_rt = vec![Complex::new(0.0, 0.0); d * d];
        let mut rhs = |t: f64, y: &[Cplx<f64>], dy: &mut [Cplx<f64>]| {
            system.rhs_density(t, y, dy, &mut diag, &mut rho_t, &mut out_rt);
        };
        let mut stats = StepperStats {
            steps: 0,
            rejected: 0,
            rhs_evals: 0,
        };
        let opts = StepperOptions::default();
        rk45_span(&mut rhs, &mut rho, 0.0, 300.0, &opts, 0.1, &mut stats).unwrap();
        let expect = (-300.0 * gamma).exp();
        assert_abs_diff_eq!(rho[3].re, expect, epsilon = 1e-7);
        // Trace preserved to near machine precision.
        assert_abs_diff_eq!(rho[0].re + rho[3].re, 1.0, epsilon = 1e-12);
    }
}
