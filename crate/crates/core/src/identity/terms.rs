//! Pointwise expressions of the weighted identities for `v = θ y`.

use serde::{Deserialize, Serialize};

use super::field::FieldSample;
use super::jet::{Cx, Jet, Real};
use crate::grid::C64;
use crate::operator::GLCoeffs;
use crate::weights::{CarlemanParams, PsiSample, WeightSample};

/// Which version of the flux formulas to use.
///
/// `AsPrinted` keeps three coefficients in the form they are usually quoted:
/// `2 Im(ℓ_t v̄ ∇v)` and `(|∇ℓ|² - 2α1 ℓ_t)` in `V`, and `-(α2/4) θ⁻²|v|⁴∇ℓ`
/// in `ℋ`. With those the identities do not close; `Corrected` uses
/// `2β1 Im(ℓ_t v̄ ∇v)`, `(|∇ℓ|² - α1 ℓ_t)` and `-(α2/2) θ⁻²|v|⁴∇ℓ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxForm {
    #[default]
    Corrected,
    AsPrinted,
}

/// Auxiliary pair `(Ψ, Φ)` and the derivatives of `Ψ` at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct AuxValues {
    pub psi: f64,
    pub psi_t: f64,
    pub grad_psi: [f64; 2],
    pub phi: f64,
}

/// A rule producing `(Ψ, Φ)` with `Ψ + Φ = -Δℓ`.
pub trait AuxChoice: Sync {
    fn eval(&self, params: &CarlemanParams, w: &WeightSample, psi: &PsiSample) -> AuxValues;
    fn name(&self) -> &str;
}

/// `Ψ = -2λμ²φ|∇ψ|²`, `Φ = λμ²φ|∇ψ|² - λμφΔψ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepOne;

impl AuxChoice for StepOne {
    fn eval(&self, p: &CarlemanParams, w: &WeightSample, ps: &PsiSample) -> AuxValues {
        let (lam, mu) = (p.lambda, p.mu);
        let g = ps.grad_psi;
        let g2 = g[0] * g[0] + g[1] * g[1];
        let h = ps.hess_psi;
        let hg = [h[0][0] * g[0] + h[0][1] * g[1], h[1][0] * g[0] + h[1][1] * g[1]];
        let k = -2.0 * lam * mu * mu;
        AuxValues {
            psi: k * w.phi * g2,
            psi_t: k * w.phi_t * g2,
            grad_psi: [
                k * (mu * w.phi * g2 * g[0] + 2.0 * w.phi * hg[0]),
                k * (mu * w.phi * g2 * g[1] + 2.0 * w.phi * hg[1]),
            ],
            phi: lam * mu * mu * w.phi * g2 - lam * mu * w.phi * ps.lap_psi,
        }
    }
    fn name(&self) -> &str {
        "step_one"
    }
}

/// `Ψ = 0`, `Φ = -Δℓ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPsi;

impl AuxChoice for ZeroPsi {
    fn eval(&self, _: &CarlemanParams, w: &WeightSample, _: &PsiSample) -> AuxValues {
        AuxValues { phi: -w.lap_ell, ..AuxValues::default() }
    }
    fn name(&self) -> &str {
        "zero_psi"
    }
}

/// Everything the formulas need at one point.
#[derive(Clone, Copy, Debug)]
pub struct PointData {
    pub f: FieldSample,
    pub w: WeightSample,
    pub psi: PsiSample,
    pub aux: AuxValues,
}

/// Inputs of the flux formulas, generic over plain values or jets.
pub(crate) struct FluxIn<S> {
    pub v: Cx<S>,
    pub vt: Cx<S>,
    pub gv: [Cx<S>; 2],
    pub ell: S,
    pub ell_t: S,
    pub gl: [S; 2],
    pub aux_psi: S,
}

fn cf(z: C64) -> Cx<f64> {
    Cx::new(z.re, z.im)
}

fn cj(v: C64, d: [C64; 3]) -> Cx<Jet> {
    Cx::new(Jet::new(v.re, [d[0].re, d[1].re, d[2].re]), Jet::new(v.im, [d[0].im, d[1].im, d[2].im]))
}

impl FluxIn<f64> {
    pub fn plain(p: &PointData) -> Self {
        Self {
            v: cf(p.f.v),
            vt: cf(p.f.vt),
            gv: [cf(p.f.grad[0]), cf(p.f.grad[1])],
            ell: p.w.ell,
            ell_t: p.w.ell_t,
            gl: p.w.grad_ell,
            aux_psi: p.aux.psi,
        }
    }
}

impl FluxIn<Jet> {
    pub fn jets(p: &PointData) -> Self {
        let (f, w, a) = (&p.f, &p.w, &p.aux);
        let gv = |j: usize| cj(f.grad[j], [f.grad_t[j], f.hess[0][j], f.hess[1][j]]);
        let gl = |j: usize| Jet::new(w.grad_ell[j], [w.grad_ell_t[j], w.hess_ell[0][j], w.hess_ell[1][j]]);
        Self {
            v: cj(f.v, [f.vt, f.grad[0], f.grad[1]]),
            vt: cj(f.vt, [f.vtt, f.grad_t[0], f.grad_t[1]]),
            gv: [gv(0), gv(1)],
            ell: Jet::new(w.ell, [w.ell_t, w.grad_ell[0], w.grad_ell[1]]),
            ell_t: Jet::new(w.ell_t, [w.ell_tt, w.grad_ell_t[0], w.grad_ell_t[1]]),
            gl: [gl(0), gl(1)],
            aux_psi: Jet::new(a.psi, [a.psi_t, a.grad_psi[0], a.grad_psi[1]]),
        }
    }
}

/// `M`, plus `(3/8) α1 α2 θ⁻²|v|⁴` when `nonlinear`.
pub(crate) fn time_flux<S: Real>(k: &GLCoeffs, p: &FluxIn<S>, nonlinear: bool) -> S {
    let (a1, b1) = (k.alpha1, k.beta1);
    let v2 = p.v.norm_sqr();
    let gl2 = p.gl[0] * p.gl[0] + p.gl[1] * p.gl[1];
    let gv2 = p.gv[0].norm_sqr() + p.gv[1].norm_sqr();
    // Im((∇ℓ·∇v̄) v)
    let dl = p.gv[0].conj().scale(p.gl[0]) + p.gv[1].conj().scale(p.gl[1]);
    let im = (dl * p.v).im;
    let mut m = (p.ell_t.scale(a1 * a1 + b1 * b1) - gl2.scale(a1)) * v2 + gv2.scale(a1) - im.scale(2.0 * b1);
    if nonlinear {
        let th2 = (p.ell.scale(-2.0)).exp();
        m = m + (th2 * v2 * v2).scale(3.0 / 8.0 * a1 * k.alpha2);
    }
    m
}

/// `V` (linear) or `ℋ` (nonlinear), component-wise.
pub(crate) fn space_flux<S: Real>(k: &GLCoeffs, p: &FluxIn<S>, form: FluxForm, nonlinear: bool) -> [S; 2] {
    let (a1, b1, a2) = (k.alpha1, k.beta1, k.alpha2);
    let (c_im, c_lt, c_h) = match form {
        FluxForm::Corrected => (2.0 * b1, 1.0, 0.5 * a2),
        FluxForm::AsPrinted => (2.0, 2.0, 0.25 * a2),
    };
    let v2 = p.v.norm_sqr();
    let gl2 = p.gl[0] * p.gl[0] + p.gl[1] * p.gl[1];
    let gv2 = p.gv[0].norm_sqr() + p.gv[1].norm_sqr();
    let dl = p.gv[0].conj().scale(p.gl[0]) + p.gv[1].conj().scale(p.gl[1]);
    let vbar = p.v.conj();
    let vtbar = p.vt.conj();
    let th2 = nonlinear.then(|| (p.ell.scale(-2.0)).exp());
    let mut out = [S::cst(0.0); 2];
    for j in 0..2 {
        let vj = p.gv[j];
        let re_vbar_vj = (vbar * vj).re;
        let mut c = (dl * vj).re.scale(4.0) - (gv2 * p.gl[j]).scale(2.0) - (vtbar * vj).re.scale(2.0 * a1)
            + ((vtbar * p.v).im * p.gl[j]).scale(2.0 * b1)
            + (p.ell_t * (vbar * vj).im).scale(c_im)
            - (p.aux_psi * re_vbar_vj).scale(2.0)
            + ((gl2 - p.ell_t.scale(c_lt * a1)) * p.gl[j] * v2).scale(2.0);
        if let Some(th2) = th2 {
            c = c - (th2 * v2 * v2 * p.gl[j]).scale(c_h) + (th2 * v2 * re_vbar_vj).scale(0.5 * a2);
        }
        out[j] = c;
    }
    out
}

/// Pointwise values of the named expressions.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct IdentityTerms {
    pub i1: C64,
    pub i2: C64,
    pub j1: C64,
    pub j2: C64,
    pub m: f64,
    pub v_flux: [f64; 2],
    pub b: f64,
    pub h_flux: [f64; 2],
    pub e: f64,
    pub u: f64,
    pub phi: f64,
    pub psi: f64,
    pub t_coef: f64,
    pub k_flux: [f64; 2],
    /// `θ𝒢y` computed from `y = θ⁻¹ v` by the product rule.
    pub theta_g_y: C64,
    /// `θ𝒫y`, likewise.
    pub theta_p_y: C64,
}

pub(crate) fn theta_inv_sq(w: &WeightSample) -> f64 {
    (-2.0 * w.ell).exp()
}

/// `θ𝒫y` from the derivatives of `y = g v` with `g = e^{-(ℓ - ℓ(p))}`,
/// which equals 1 at the point, so `θ y_t = v_t + g_t v` and so on.
fn theta_p_y(k: &GLCoeffs, p: &PointData) -> C64 {
    let (f, w) = (&p.f, &p.w);
    let g_t = -w.ell_t;
    let gg = [-w.grad_ell[0], -w.grad_ell[1]];
    let lap_g = w.grad_ell[0].powi(2) + w.grad_ell[1].powi(2) - w.lap_ell;
    let y_t = f.vt + f.v * g_t;
    let lap_y = f.lap() + (f.grad[0] * gg[0] + f.grad[1] * gg[1]) * 2.0 + f.v * lap_g;
    C64::new(k.alpha1, k.beta1) * y_t + lap_y
}

pub fn eval_point(k: &GLCoeffs, params: &CarlemanParams, p: &PointData, form: FluxForm) -> IdentityTerms {
    let (a1, b1, a2, b2) = (k.alpha1, k.beta1, k.alpha2, k.beta2);
    let (f, w, aux) = (&p.f, &p.w, &p.aux);
    let i = C64::new(0.0, 1.0);
    let v = f.v;
    let v2 = v.norm_sqr();
    let gl = w.grad_ell;
    let gl2 = gl[0] * gl[0] + gl[1] * gl[1];
    let th2 = theta_inv_sq(w);
    let i1 = i * b1 * f.vt - v * (a1 * w.ell_t) + f.lap() + v * gl2;
    let i2 = f.vt * a1 - i * b1 * w.ell_t * v - (f.grad[0] * gl[0] + f.grad[1] * gl[1]) * 2.0 - v * w.lap_ell;
    let cubic = v * (v2 * th2);
    let j1 = i1 - cubic * (0.75 * a2);
    let j2 = i2 - cubic * (0.25 * a2) - i * b2 * cubic;
    let phi = aux.phi;
    let hl = w.hess_ell;
    let hess_gl: f64 = (0..2).flat_map(|a| (0..2).map(move |c| (a, c))).map(|(a, c)| hl[a][c] * gl[a] * gl[c]).sum();
    let gl_glt = gl[0] * w.grad_ell_t[0] + gl[1] * w.grad_ell_t[1];
    let b = (a1 * a1 + b1 * b1) * w.ell_tt + 2.0 * a1 * phi * w.ell_t - 4.0 * a1 * gl_glt + 4.0 * hess_gl
        - 2.0 * phi * gl2
        - phi * phi;
    let e = 0.5 * a2 * gl2 + a2 * w.lap_ell - 0.25 * a1 * a2 * w.ell_t + 1.5 * a2 * phi;
    let glt_gvbar = f.grad[0].conj() * w.grad_ell_t[0] + f.grad[1].conj() * w.grad_ell_t[1];
    let gpsi_gv = f.grad[0] * aux.grad_psi[0] + f.grad[1] * aux.grad_psi[1];
    let u = -4.0 * b1 * (glt_gvbar * v).im - 2.0 * (gpsi_gv * v.conj()).re - 2.0 * (i * b2 * j1.conj() * cubic).re;

    let plain = FluxIn::plain(p);
    let m = time_flux(k, &plain, false);
    let v_flux = space_flux(k, &plain, form, false);
    let h_flux = space_flux(k, &plain, form, true);

    let (lam, mu) = (params.lambda, params.mu);
    let gp = p.psi.grad_psi;
    let gp2 = gp[0] * gp[0] + gp[1] * gp[1];
    let g1 = k.gamma1;
    let mut k_flux = [0.0; 2];
    for j in 0..2 {
        let im_g1 = (g1 * v.conj() * f.grad[j]).im;
        k_flux[j] = h_flux[j]
            + 2.0 * b1 * lam * mu * mu * w.phi * gp2 * im_g1
            + 2.0 * b1 * b1 * k.gamma1_sq() * lam * lam * mu.powi(3) * w.phi * w.phi * gp2 * v2 * gp[j]
            + 0.5 * b1 * a2 * th2 * v2 * im_g1;
    }
    let tpy = theta_p_y(k, p);
    IdentityTerms {
        i1,
        i2,
        j1,
        j2,
        m,
        v_flux,
        b,
        h_flux,
        e,
        u,
        phi,
        psi: aux.psi,
        t_coef: k.t_positivity(),
        k_flux,
        theta_g_y: tpy - k.gamma2 * cubic,
        theta_p_y: tpy,
    }
}

/// Named summands of the two sides of an identity at one point.
#[derive(Clone, Debug, Default)]
pub struct Sides {
    pub lhs: Vec<(&'static str, f64)>,
    pub rhs: Vec<(&'static str, f64)>,
}

impl Sides {
    pub fn residual(&self) -> f64 {
        let l: f64 = crate::numerics::compensated_sum(self.lhs.iter().map(|t| t.1));
        let r: f64 = crate::numerics::compensated_sum(self.rhs.iter().map(|t| t.1));
        l - r
    }

    pub fn scale(&self) -> f64 {
        self.lhs.iter().chain(&self.rhs).fold(0.0, |m, t| m.max(t.1.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.lhs.iter().chain(&self.rhs).all(|t| t.1.is_finite())
    }
}

/// Summands shared by both identities.
fn common_rhs(t: &IdentityTerms, p: &PointData, lead: C64) -> Vec<(&'static str, f64)> {
    let f = &p.f;
    let v = f.v;
    let hl = p.w.hess_ell;
    let mut hess = 0.0;
    for a in 0..2 {
        for c in 0..2 {
            hess += (f.grad[a] * f.grad[c].conj()).re * hl[a][c];
        }
    }
    let gv2 = f.grad[0].norm_sqr() + f.grad[1].norm_sqr();
    vec![
        ("lead_sq", lead.norm_sqr()),
        ("lead_plus_phi_v_sq", (lead + v * t.phi).norm_sqr()),
        ("b", t.b * v.norm_sqr()),
        ("hessian", 4.0 * hess),
        ("phi_grad", 2.0 * t.phi * gv2),
    ]
}

pub fn nonlinear_sides(k: &GLCoeffs, t: &IdentityTerms, p: &PointData, dt_flux: f64, div_flux: f64) -> Sides {
    let (b1, a2) = (k.beta1, k.alpha2);
    let f = &p.f;
    let v = f.v;
    let v2 = v.norm_sqr();
    let th2 = theta_inv_sq(&p.w);
    let gv2 = f.grad[0].norm_sqr() + f.grad[1].norm_sqr();
    let grad_abs = [2.0 * (v.conj() * f.grad[0]).re, 2.0 * (v.conj() * f.grad[1]).re];
    let mut rhs = common_rhs(t, p, t.j1);
    rhs.extend([
        ("e", t.e * th2 * v2 * v2),
        ("sextic", 3.0 * a2 * a2 / 8.0 * th2 * th2 * v2 * v2 * v2),
        ("grad_abs_sq", 0.25 * a2 * th2 * (grad_abs[0].powi(2) + grad_abs[1].powi(2))),
        ("mixed", 0.5 * a2 * th2 * v2 * gv2),
        ("u", t.u),
        ("beta1_im", 2.0 * b1 * (t.phi + 0.25 * a2 * th2 * v2) * (v.conj() * f.vt).im),
    ]);
    Sides {
        lhs: vec![
            ("source", 2.0 * (t.theta_g_y * t.j1.conj()).re),
            ("time_flux", dt_flux),
            ("space_flux", div_flux),
        ],
        rhs,
    }
}

pub fn linear_sides(k: &GLCoeffs, t: &IdentityTerms, p: &PointData, dt_flux: f64, div_flux: f64) -> Sides {
    let b1 = k.beta1;
    let f = &p.f;
    let v = f.v;
    let gpsi_gv = f.grad[0] * p.aux.grad_psi[0] + f.grad[1] * p.aux.grad_psi[1];
    let glt_gvbar = f.grad[0].conj() * p.w.grad_ell_t[0] + f.grad[1].conj() * p.w.grad_ell_t[1];
    let mut rhs = common_rhs(t, p, t.i1);
    rhs.extend([
        ("grad_aux_psi", -2.0 * (gpsi_gv * v.conj()).re),
        ("grad_ell_t", -4.0 * b1 * (glt_gvbar * v).im),
        ("beta1_im", 2.0 * b1 * t.phi * (v.conj() * f.vt).im),
    ]);
    Sides {
        lhs: vec![
            ("source", 2.0 * (t.theta_p_y * t.i1.conj()).re),
            ("time_flux", dt_flux),
            ("space_flux", div_flux),
        ],
        rhs,
    }
}
