use nalgebra::{DMatrix, DVector};

/// `(1/beta) log(1 + exp(beta z))`, evaluated without overflow.
pub fn soft_hinge(z: f64, beta: f64) -> f64 {
    let a = beta * z;
    if a > 30.0 {
        z + (-a).exp().ln_1p() / beta
    } else {
        a.exp().ln_1p() / beta
    }
}

/// Logistic sigmoid `1 / (1 + exp(-a))`; equals `(1 + r^-1)^-1` for `r = e^a`.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Large-margin generalized logistic loss
/// `(1/beta) log(1 + exp(beta y (x^T M x - u)))` for a pair label `y = +-1`.
pub fn generalized_logistic(m: &DMatrix<f64>, y: f64, x: &DVector<f64>, margin: f64, beta: f64) -> f64 {
    let d = x.dot(&(m * x));
    soft_hinge(y * (d - margin), beta)
}
