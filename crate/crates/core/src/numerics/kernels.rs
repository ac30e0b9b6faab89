//! Closed-form integrals of the 2D Laplace kernel `G(x, y) = -ln|x - y| / 2π`
//! over straight panels.
//!
//! The complex-variable forms treat the layer potentials of a panel as real
//! parts of analytic functions of the target `z = x1 + i x2`, so gradients
//! and Hessians follow from first and second complex derivatives.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Panel, Point};

const ON_PANEL_REL: f64 = 1e-12;

/// Single- and double-layer integrals of a unit density over one panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerIntegrals {
    /// `∫ G(target, y) ds(y)`
    pub single: f64,
    /// `∫ ∂G/∂n_y(target, y) ds(y)`
    pub double: f64,
}

fn log_antiderivative(t: f64, h: f64) -> f64 {
    // ∫ ln(t² + h²) dt
    let r2 = t * t + h * h;
    let log_term = if r2 > 0.0 { t * r2.ln() } else { 0.0 };
    let atan_term = if h != 0.0 { 2.0 * h * (t / h).atan() } else { 0.0 };
    log_term - 2.0 * t + atan_term
}

pub fn panel_log_integrals(panel: &Panel, target: Point) -> Result<LayerIntegrals> {
    if !(panel.length > 1e-14) {
        return Err(Error::Geometry("degenerate panel in layer integral".into()));
    }
    Ok(layer_integrals_unchecked(panel, target))
}

pub(crate) fn layer_integrals_unchecked(panel: &Panel, target: Point) -> LayerIntegrals {
    let d = target - panel.a;
    let s0 = d.dot(panel.tangent);
    let mut h = d.dot(panel.normal);
    let len = panel.length;
    let on_line = h.abs() <= ON_PANEL_REL * len;
    if on_line {
        h = 0.0;
    }
    let single = -(log_antiderivative(len - s0, h) - log_antiderivative(-s0, h)) / (4.0 * PI);
    let double = if on_line && s0 > 0.0 && s0 < len {
        // principal value over a flat panel
        0.0
    } else {
        let va = panel.a - target;
        let vb = panel.b - target;
        -va.cross(vb).atan2(va.dot(vb)) / (2.0 * PI)
    };
    LayerIntegrals { single, double }
}

/// Integrals of the first-moment density `s − L/2` (arclength from the
/// panel midpoint) against both kernels.
pub fn panel_moment_integrals(panel: &Panel, target: Point) -> LayerIntegrals {
    layer_and_moment_integrals(panel, target).1
}

/// Constant-density and first-moment integrals together, sharing the
/// logarithms and arctangents.
pub(crate) fn layer_and_moment_integrals(panel: &Panel, target: Point) -> (LayerIntegrals, LayerIntegrals) {
    let d = target - panel.a;
    let s0 = d.dot(panel.tangent);
    let mut h = d.dot(panel.normal);
    let len = panel.length;
    let on_line = h.abs() <= ON_PANEL_REL * len;
    if on_line {
        h = 0.0;
    }
    let (ta, tb) = (-s0, len - s0);
    let (ra, rb) = (ta * ta + h * h, tb * tb + h * h);
    let la = if ra > 0.0 { ra.ln() } else { 0.0 };
    let lb = if rb > 0.0 { rb.ln() } else { 0.0 };
    let atan_part = if h != 0.0 { 2.0 * h * ((tb / h).atan() - (ta / h).atan()) } else { 0.0 };
    let single = -(tb * lb - ta * la - 2.0 * len + atan_part) / (4.0 * PI);
    let double = if on_line && s0 > 0.0 && s0 < len {
        0.0
    } else {
        let va = panel.a - target;
        let vb = panel.b - target;
        -va.cross(vb).atan2(va.dot(vb)) / (2.0 * PI)
    };
    let c = s0 - 0.5 * len;
    let moment_single = c * single - (rb * lb - tb * tb - ra * la + ta * ta) / (8.0 * PI);
    let moment_double = if h == 0.0 { c * double } else { h / (4.0 * PI) * (lb - la) + c * double };
    (
        LayerIntegrals { single, double },
        LayerIntegrals { single: moment_single, double: moment_double },
    )
}

fn cplx(p: Point) -> Complex64 {
    Complex64::new(p.x, p.y)
}

/// First and second complex derivatives of the analytic functions whose real
/// parts are the single- and double-layer integrals of a panel.
#[derive(Debug, Clone, Copy)]
pub struct LayerDerivatives {
    pub single_d1: Complex64,
    pub single_d2: Complex64,
    pub double_d1: Complex64,
    pub double_d2: Complex64,
    /// Same four quantities for the first-moment density `s − L/2`.
    pub moment_single_d1: Complex64,
    pub moment_single_d2: Complex64,
    pub moment_double_d1: Complex64,
    pub moment_double_d2: Complex64,
}

/// Valid for targets off the closed panel.
pub fn panel_layer_derivatives(panel: &Panel, target: Point) -> LayerDerivatives {
    let z = cplx(target);
    let wa = cplx(panel.a) - z;
    let wb = cplx(panel.b) - z;
    let tau = cplx(panel.tangent);
    let inv_a = wa.inv();
    let inv_b = wb.inv();
    let two_pi = 2.0 * PI;
    let i = Complex64::i();
    let wm = cplx(panel.mid) - z;
    let log_ratio = (wb / wa).ln();
    let len = panel.length;
    let diff1 = inv_a - inv_b;
    let diff2 = inv_a * inv_a - inv_b * inv_b;
    LayerDerivatives {
        moment_single_d1: (tau * len - wm * log_ratio) / (tau * tau * two_pi),
        moment_single_d2: (log_ratio - wm * diff1) / (tau * tau * two_pi),
        moment_double_d1: i * (log_ratio - wm * diff1) / (tau * two_pi),
        moment_double_d2: i * (diff1 * 2.0 - wm * diff2) / (tau * two_pi),
        single_d1: (wb / wa).ln() / (tau * two_pi),
        single_d2: (inv_a - inv_b) / (tau * two_pi),
        double_d1: i * (inv_a - inv_b) / two_pi,
        double_d2: i * (inv_a * inv_a - inv_b * inv_b) / two_pi,
    }
}
