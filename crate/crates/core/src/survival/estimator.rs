use super::model::HazardModel;
use super::window::{ObservationTriple, SupportWindow};
use crate::error::{Error, Result};

/// Product-limit hazard estimate from left-truncated, right-censored data.
///
/// For each age `x` in `delta + 1 ..= xi`:
///
/// * `f_hat(x)` is the fraction of observations terminating at `x`,
/// * `c_hat(x)` is the fraction with `y <= x <= t` (the risk set),
/// * `lambda(x) = f_hat(x) / c_hat(x)`.
///
/// Ages with an empty risk set get `lambda = 0` and are listed in
/// [`HazardModel::unobserved`].
pub fn estimate_hazard(
    observations: &[ObservationTriple],
    window: &SupportWindow,
) -> Result<HazardModel> {
    if observations.is_empty() {
        return Err(Error::EmptySample);
    }
    let first = window.first_age();
    let len = window.len();
    let mut events = vec![0u64; len];
    // risk-set counts accumulated as a difference array
    let mut at_risk = vec![0i64; len + 1];

    for (index, obs) in observations.iter().enumerate() {
        obs.check(window)
            .map_err(|reason| Error::InvalidObservation { index, reason })?;
        if obs.event {
            events[(obs.t - first) as usize] += 1;
        }
        let hi = obs.t.min(window.xi());
        at_risk[(obs.y - first) as usize] += 1;
        at_risk[(hi - first) as usize + 1] -= 1;
    }

    let n = observations.len();
    let scale = 1.0 / n as f64;
    let mut lambda = Vec::with_capacity(len);
    let mut f_hat = Vec::with_capacity(len);
    let mut c_hat = Vec::with_capacity(len);
    let mut running = 0i64;
    for (i, &d) in events.iter().enumerate() {
        running += at_risk[i];
        let f = d as f64 * scale;
        let c = running as f64 * scale;
        f_hat.push(f);
        c_hat.push(c);
        lambda.push(if running > 0 {
            d as f64 / running as f64
        } else {
            0.0
        });
    }
    Ok(HazardModel::from_parts(*window, lambda, f_hat, c_hat, n))
}
