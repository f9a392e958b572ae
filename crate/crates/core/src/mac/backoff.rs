use rand::Rng;

use crate::units::SimTime;

/// Deferral plus slotted random backoff.
///
/// While armed, the engine is either frozen (medium busy) or has observed the
/// medium idle since `idle_since`. A countdown that reaches zero exactly when
/// the medium turns busy is committed: the slot ended idle, so the node still
/// transmits at that instant.
#[derive(Clone, Debug)]
pub struct Contention {
    defer: SimTime,
    slot: SimTime,
    counter: u32,
    idle_since: Option<SimTime>,
    armed: bool,
}

impl Contention {
    pub fn new(defer: SimTime, slot: SimTime) -> Self {
        assert!(slot > SimTime::ZERO);
        Contention { defer, slot, counter: 0, idle_since: None, armed: false }
    }

    pub fn defer(&self) -> SimTime {
        self.defer
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    /// Starts a new access attempt with a counter drawn uniformly from `[0, cw]`.
    pub fn arm<R: Rng + ?Sized>(&mut self, cw: u32, now: SimTime, idle: bool, rng: &mut R) -> u32 {
        let counter = rng.random_range(0..=cw);
        self.arm_with(counter, now, idle);
        counter
    }

    pub fn arm_with(&mut self, counter: u32, now: SimTime, idle: bool) {
        self.counter = counter;
        self.armed = true;
        self.idle_since = idle.then_some(now);
    }

    pub fn disarm(&mut self) {
        self.armed = false;
        self.idle_since = None;
    }

    /// Time at which the countdown completes if the medium stays idle.
    pub fn expiry(&self) -> Option<SimTime> {
        let since = self.idle_since.filter(|_| self.armed)?;
        Some(since + self.defer + SimTime(self.slot.0 * self.counter as u64))
    }

    pub fn on_medium(&mut self, now: SimTime, idle: bool) {
        if !self.armed {
            return;
        }
        match (self.idle_since, idle) {
            (None, true) => self.idle_since = Some(now),
            (Some(since), false) => {
                if self.expiry().is_some_and(|e| e <= now) {
                    return;
                }
                self.counter = self.counter_at(since, now);
                self.idle_since = None;
            }
            _ => {}
        }
    }

    fn counter_at(&self, since: SimTime, now: SimTime) -> u32 {
        let counting_from = since + self.defer;
        if now <= counting_from {
            return self.counter;
        }
        let elapsed = (now - counting_from).0 / self.slot.0;
        self.counter - (elapsed.min(self.counter as u64) as u32)
    }

    /// Remaining backoff slots as seen at `now`.
    pub fn counter(&self, now: SimTime) -> u32 {
        match self.idle_since {
            Some(since) if self.armed => self.counter_at(since, now),
            _ => self.counter,
        }
    }

    /// True while the deferral part of the access has not completed.
    pub fn deferring(&self, now: SimTime) -> bool {
        match self.idle_since {
            Some(since) => now < since + self.defer,
            None => true,
        }
    }
}
