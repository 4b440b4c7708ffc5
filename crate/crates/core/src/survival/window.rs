use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calendar and age geometry of a pool observed up to a censoring date.
///
/// Contracts originate in calendar months `1..=m` and join the pool no
/// earlier than age `delta + 1`. Lifetimes are bounded by `omega`. The pool
/// is observed through calendar month `epsilon`, so a contract with
/// truncation time `y` is censored at age `y + tau`. Hazards are estimable
/// on the ages `delta + 1 ..= xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WindowParams", into = "WindowRecord")]
pub struct SupportWindow {
    delta: u32,
    m: u32,
    omega: u32,
    epsilon: u32,
    tau: u32,
    xi: u32,
}

impl SupportWindow {
    pub fn new(delta: u32, m: u32, omega: u32, epsilon: u32) -> Result<Self> {
        if omega <= delta {
            return Err(Error::InvalidWindow(format!(
                "omega ({omega}) must exceed delta ({delta}); observable support is empty"
            )));
        }
        if m < 1 {
            return Err(Error::InvalidWindow("m must be at least 1".into()));
        }
        let start = m + delta + 1;
        if epsilon < start {
            return Err(Error::InvalidWindow(format!(
                "epsilon ({epsilon}) precedes the trust start m + delta + 1 = {start}"
            )));
        }
        // Past m + omega every contract has matured before the observation
        // date. Capping tau at omega - delta keeps y + tau > omega for all y,
        // so no censoring can occur.
        let tau = (epsilon - start).min(omega - delta);
        let xi = omega.min(epsilon - 1);
        Ok(Self {
            delta,
            m,
            omega,
            epsilon,
            tau,
            xi,
        })
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn omega(&self) -> u32 {
        self.omega
    }

    pub fn epsilon(&self) -> u32 {
        self.epsilon
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    pub fn xi(&self) -> u32 {
        self.xi
    }

    /// First age with an estimable hazard, `delta + 1`.
    pub fn first_age(&self) -> u32 {
        self.delta + 1
    }

    /// Number of estimable ages, `xi - delta`.
    pub fn len(&self) -> usize {
        (self.xi - self.delta) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ages(&self) -> std::ops::RangeInclusive<u32> {
        self.first_age()..=self.xi
    }

    /// True when the observation date falls before the last contract could
    /// mature, so some lifetimes can be cut off.
    pub fn censoring_enabled(&self) -> bool {
        self.epsilon <= self.m + self.omega
    }

    /// Admissible truncation times `delta + 1 ..= m + delta`.
    pub fn truncation_range(&self) -> std::ops::RangeInclusive<u32> {
        self.first_age()..=self.m + self.delta
    }

    /// Truncation time of a contract originated in calendar month `origination`.
    pub fn truncation_time(&self, origination: u32) -> Option<u32> {
        (1..=self.m)
            .contains(&origination)
            .then(|| self.m + self.delta + 1 - origination)
    }

    pub fn censoring_age(&self, y: u32) -> u32 {
        y + self.tau
    }
}

#[derive(Deserialize)]
struct WindowParams {
    delta: u32,
    m: u32,
    omega: u32,
    epsilon: u32,
}

impl TryFrom<WindowParams> for SupportWindow {
    type Error = Error;

    fn try_from(p: WindowParams) -> Result<Self> {
        SupportWindow::new(p.delta, p.m, p.omega, p.epsilon)
    }
}

#[derive(Serialize)]
struct WindowRecord {
    delta: u32,
    m: u32,
    omega: u32,
    epsilon: u32,
    tau: u32,
    xi: u32,
}

impl From<SupportWindow> for WindowRecord {
    fn from(w: SupportWindow) -> Self {
        Self {
            delta: w.delta,
            m: w.m,
            omega: w.omega,
            epsilon: w.epsilon,
            tau: w.tau,
            xi: w.xi,
        }
    }
}

/// One contract as seen by the estimator: truncation time, observed age
/// `min(X, C)`, and whether the termination itself was observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationTriple {
    pub y: u32,
    pub t: u32,
    pub event: bool,
}

impl ObservationTriple {
    pub fn terminated(y: u32, x: u32) -> Self {
        Self {
            y,
            t: x,
            event: true,
        }
    }

    pub fn censored(y: u32, window: &SupportWindow) -> Self {
        Self {
            y,
            t: window.censoring_age(y),
            event: false,
        }
    }

    /// Checks the triple against `window`, returning a description of the
    /// first violated constraint.
    pub fn check(&self, window: &SupportWindow) -> std::result::Result<(), String> {
        if !window.truncation_range().contains(&self.y) {
            return Err(format!(
                "truncation time {} outside {:?}",
                self.y,
                window.truncation_range()
            ));
        }
        if self.t < self.y {
            return Err(format!(
                "observed age {} precedes truncation time {}",
                self.t, self.y
            ));
        }
        if self.event {
            if self.t > window.xi() {
                return Err(format!("event age {} beyond xi = {}", self.t, window.xi()));
            }
            if self.t > window.censoring_age(self.y) {
                return Err(format!(
                    "event age {} beyond censoring age {}",
                    self.t,
                    window.censoring_age(self.y)
                ));
            }
        } else if self.t != window.censoring_age(self.y) {
            return Err(format!(
                "censored age {} differs from y + tau = {}",
                self.t,
                window.censoring_age(self.y)
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lease_pool_geometry() {
        let w = SupportWindow::new(3, 18, 24, 34).unwrap();
        assert_eq!((w.tau(), w.xi()), (12, 24));
        assert!(w.censoring_enabled());
        assert_eq!(w.truncation_range(), 4..=21);
    }

    #[test]
    fn replication_geometry() {
        let w = SupportWindow::new(0, 10, 24, 18).unwrap();
        assert_eq!((w.tau(), w.xi()), (7, 17));
        assert_eq!(w.len(), 17);
    }

    #[test]
    fn late_observation_disables_censoring() {
        let w = SupportWindow::new(0, 1, 2, 100).unwrap();
        assert_eq!(w.xi(), 2);
        assert!(!w.censoring_enabled());
        for y in w.truncation_range() {
            assert!(w.censoring_age(y) > w.omega());
        }
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(matches!(
            SupportWindow::new(3, 18, 24, 21),
            Err(Error::InvalidWindow(_))
        ));
        assert!(matches!(
            SupportWindow::new(5, 18, 5, 40),
            Err(Error::InvalidWindow(_))
        ));
        assert!(SupportWindow::new(0, 0, 5, 40).is_err());
        // the first month of the trust is a valid observation date
        assert!(SupportWindow::new(3, 18, 24, 22).is_ok());
    }

    #[test]
    fn json_round_trip_rederives() {
        let w = SupportWindow::new(3, 18, 24, 34).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains("\"tau\":12"));
        let back: SupportWindow = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn triple_checks() {
        let w = SupportWindow::new(0, 10, 24, 18).unwrap();
        assert!(ObservationTriple::terminated(3, 5).check(&w).is_ok());
        assert!(ObservationTriple::censored(3, &w).check(&w).is_ok());
        assert!(ObservationTriple::terminated(5, 3).check(&w).is_err());
        assert!(ObservationTriple::terminated(3, 11).check(&w).is_err());
        assert!(ObservationTriple {
            y: 3,
            t: 9,
            event: false
        }
        .check(&w)
        .is_err());
        assert!(ObservationTriple::terminated(11, 12).check(&w).is_err());
    }
}
