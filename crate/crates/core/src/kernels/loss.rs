use crate::error::{Error, Result};

/// Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

fn check_label(y: u8) -> Result<()> {
    if y > 1 {
        return Err(Error::Input(format!("binary label must be 0 or 1, got {y}")));
    }
    Ok(())
}

/// Binary cross-entropy `−(y·ln ŷ + (1−y)·ln(1−ŷ))` on the clamped prediction.
pub fn bce_loss(y_hat: f64, y: u8) -> Result<f64> {
    check_label(y)?;
    let p = y_hat.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    Ok(if y == 1 { -p.ln() } else { -(1.0 - p).ln() })
}

/// `∂ bce / ∂ŷ`. Zero where the clamp is active.
pub fn bce_loss_grad(y_hat: f64, y: u8) -> Result<f64> {
    check_label(y)?;
    if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&y_hat) {
        return Ok(0.0);
    }
    Ok(if y == 1 { -1.0 / y_hat } else { 1.0 / (1.0 - y_hat) })
}
