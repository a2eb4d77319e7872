//! Non-blocking lock words embedded in tree nodes.
//!
//! None of these locks spin: `try_acquire` either takes the lock or reports
//! failure, and the tree operations decide whether to retry. A node whose
//! lock is never released is retired; the trees rely on that to make stale
//! snapshots fail validation.
//!
//! Every transition is `SeqCst`. The tree algorithms use store-then-load
//! handshakes (an inserter publishes its leaf lock then reads the parent's
//! mark, a deleter publishes the mark then reads the sibling's lock), which
//! acquire/release alone does not order.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, Ordering::SeqCst};

/// Operations the tree code needs from a per-node lock word.
pub trait NodeLock: Default + Send + Sync {
    fn try_lock(&self) -> bool;
    fn unlock(&self);
    fn is_locked(&self) -> bool;
}

/// A single ownership flag.
#[derive(Debug, Default)]
pub struct FlagLock {
    flag: AtomicBool,
}

impl FlagLock {
    pub const fn new() -> Self {
        Self {
            flag: AtomicBool::new(false),
        }
    }

    pub fn try_acquire(&self) -> bool {
        !self.flag.load(SeqCst)
            && self
                .flag
                .compare_exchange(false, true, SeqCst, SeqCst)
                .is_ok()
    }

    pub fn release(&self) {
        let was = self.flag.swap(false, SeqCst);
        debug_assert!(was, "released a flag lock that was not held");
    }

    pub fn is_held(&self) -> bool {
        self.flag.load(SeqCst)
    }
}

impl NodeLock for FlagLock {
    fn try_lock(&self) -> bool {
        self.try_acquire()
    }
    fn unlock(&self) {
        self.release()
    }
    fn is_locked(&self) -> bool {
        self.is_held()
    }
}

const FLAG: u8 = 0b01;
const MARK: u8 = 0b10;

/// Ownership flag plus a "being deleted" mark, packed into one byte so both
/// can be observed in a single load.
///
/// The mark may only be changed by the flag holder. A word released while
/// marked stays marked forever.
#[derive(Debug, Default)]
pub struct FlagMarkWord {
    word: AtomicU8,
}

impl FlagMarkWord {
    pub const fn new() -> Self {
        Self {
            word: AtomicU8::new(0),
        }
    }

    pub fn try_acquire(&self) -> bool {
        let w = self.word.load(SeqCst);
        w & FLAG == 0
            && self
                .word
                .compare_exchange(w, w | FLAG, SeqCst, SeqCst)
                .is_ok()
    }

    pub fn release(&self) {
        let was = self.word.fetch_and(!FLAG, SeqCst);
        debug_assert!(was & FLAG != 0, "released a flag-mark word that was not held");
    }

    /// Caller must hold the flag.
    pub fn set_marked(&self, value: bool) {
        debug_assert!(self.is_held(), "mark changed without holding the flag");
        if value {
            self.word.fetch_or(MARK, SeqCst);
        } else {
            self.word.fetch_and(!MARK, SeqCst);
        }
    }

    pub fn is_held(&self) -> bool {
        self.word.load(SeqCst) & FLAG != 0
    }

    pub fn is_marked(&self) -> bool {
        self.word.load(SeqCst) & MARK != 0
    }

    /// `(flag, marked)` read atomically.
    pub fn state(&self) -> (bool, bool) {
        let w = self.word.load(SeqCst);
        (w & FLAG != 0, w & MARK != 0)
    }
}

impl NodeLock for FlagMarkWord {
    fn try_lock(&self) -> bool {
        self.try_acquire()
    }
    fn unlock(&self) {
        self.release()
    }
    fn is_locked(&self) -> bool {
        self.is_held()
    }
}

/// Lock encoded as a pair of counters: held iff `ticket != version`.
///
/// `version` advances once per release, so it doubles as a write stamp for
/// optimistic readers. Both counters are 32-bit halves of one atomic word
/// (ticket high, version low), so a single load observes a consistent pair.
/// Counters wrap modulo 2^32.
#[derive(Debug, Default)]
pub struct TicketLock {
    word: AtomicU64,
}

#[inline]
fn pack(ticket: u32, version: u32) -> u64 {
    (u64::from(ticket) << 32) | u64::from(version)
}

#[inline]
fn unpack(word: u64) -> (u32, u32) {
    ((word >> 32) as u32, word as u32)
}

impl TicketLock {
    pub const fn new() -> Self {
        Self {
            word: AtomicU64::new(0),
        }
    }

    pub fn try_acquire(&self) -> bool {
        let (t, v) = unpack(self.word.load(SeqCst));
        t == v && self.try_acquire_at(v)
    }

    /// Takes the lock only if it is free and its version is still `version`.
    pub fn try_acquire_at(&self, version: u32) -> bool {
        let free = pack(version, version);
        self.word.load(SeqCst) == free
            && self
                .word
                .compare_exchange(free, pack(version.wrapping_add(1), version), SeqCst, SeqCst)
                .is_ok()
    }

    pub fn release(&self) {
        // while held no other thread can change the word
        let (t, v) = unpack(self.word.load(SeqCst));
        debug_assert!(t != v, "released a ticket lock that was not held");
        debug_assert_eq!(t, v.wrapping_add(1));
        self.word.store(pack(t, t), SeqCst);
    }

    pub fn version_of(&self) -> u32 {
        unpack(self.word.load(SeqCst)).1
    }

    pub fn is_locked(&self) -> bool {
        let (t, v) = unpack(self.word.load(SeqCst));
        t != v
    }

    /// `(ticket, version)` from one atomic load.
    pub fn counters(&self) -> (u32, u32) {
        unpack(self.word.load(SeqCst))
    }
}

impl NodeLock for TicketLock {
    fn try_lock(&self) -> bool {
        self.try_acquire()
    }
    fn unlock(&self) {
        self.release()
    }
    fn is_locked(&self) -> bool {
        TicketLock::is_locked(self)
    }
}

/// Lock word for variants that synchronize outside the node.
#[derive(Debug, Default)]
pub struct NoLock;

impl NodeLock for NoLock {
    fn try_lock(&self) -> bool {
        true
    }
    fn unlock(&self) {}
    fn is_locked(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use std::cell::UnsafeCell;
    use std::sync::atomic::AtomicBool;
    use std::sync::Arc;
    use std::thread;

    use super::*;

    #[test]
    fn flag_acquire_release() {
        let l = FlagLock::new();
        assert!(l.try_acquire());
        assert!(l.is_held());
        assert!(!l.try_acquire());
        l.release();
        assert!(!l.is_held());
        assert!(l.try_acquire());
    }

    #[test]
    fn flag_mark_release_keeps_mark() {
        let w = FlagMarkWord::new();
        assert!(w.try_acquire());
        w.set_marked(true);
        w.release();
        assert_eq!(w.state(), (false, true));
    }

    #[test]
    fn flag_mark_rollback() {
        let w = FlagMarkWord::new();
        assert!(w.try_acquire());
        w.set_marked(true);
        assert!(w.is_marked());
        w.set_marked(false);
        w.release();
        assert_eq!(w.state(), (false, false));
    }

    #[test]
    fn flag_mark_held_rejects_second_acquire() {
        let w = FlagMarkWord::new();
        assert!(w.try_acquire());
        assert!(!w.try_acquire());
        assert_eq!(w.state(), (true, false));
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "not held")]
    fn releasing_unheld_lock_is_reported() {
        FlagLock::new().release();
    }

    #[test]
    fn ticket_counters() {
        let t = TicketLock::new();
        assert_eq!(t.version_of(), 0);
        assert!(t.try_acquire());
        assert_eq!(t.counters(), (1, 0));
        assert!(!t.try_acquire());
        assert_eq!(t.version_of(), 0);
        t.release();
        assert_eq!(t.counters(), (1, 1));
        assert_eq!(t.version_of(), 1);

        for _ in 0..4 {
            assert!(t.try_acquire());
            t.release();
        }
        assert_eq!(t.counters(), (5, 5));
    }

    #[test]
    fn ticket_release_from_five_four() {
        let t = TicketLock::new();
        for _ in 0..4 {
            assert!(t.try_acquire());
            t.release();
        }
        assert!(t.try_acquire());
        assert_eq!(t.counters(), (5, 4));
        t.release();
        assert_eq!(t.counters(), (5, 5));
    }

    #[test]
    fn ticket_n_cycles() {
        let t = TicketLock::new();
        for n in 1..=1000u32 {
            assert!(t.try_acquire());
            t.release();
            assert_eq!(t.counters(), (n, n));
        }
    }

    #[test]
    fn ticket_stale_version_rejected() {
        let t = TicketLock::new();
        let seen = t.version_of();
        assert!(t.try_acquire());
        t.release();
        assert!(!t.try_acquire_at(seen));
        assert!(t.try_acquire_at(seen + 1));
    }

    struct Shared<L> {
        lock: L,
        counter: UnsafeCell<u64>,
    }
    unsafe impl<L: Sync> Sync for Shared<L> {}

    fn hammer<L: NodeLock + 'static>(lock: L, threads: usize, per_thread: u64) {
        let shared = Arc::new(Shared {
            lock,
            counter: UnsafeCell::new(0),
        });
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                let s = Arc::clone(&shared);
                thread::spawn(move || {
                    let mut done = 0;
                    while done < per_thread {
                        if s.lock.try_lock() {
                            // SAFETY: the lock is held
                            unsafe { *s.counter.get() += 1 };
                            s.lock.unlock();
                            done += 1;
                        } else {
                            std::hint::spin_loop();
                            thread::yield_now();
                        }
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(unsafe { *shared.counter.get() }, threads as u64 * per_thread);
    }

    #[test]
    fn mutual_exclusion_flag() {
        hammer(FlagLock::new(), 4, 25_000);
    }

    #[test]
    fn mutual_exclusion_flag_mark() {
        hammer(FlagMarkWord::new(), 4, 25_000);
    }

    #[test]
    fn mutual_exclusion_ticket() {
        hammer(TicketLock::new(), 4, 25_000);
    }

    #[test]
    fn racing_acquirers_one_winner() {
        for _ in 0..200 {
            let lock = Arc::new(FlagLock::new());
            let wins: Vec<_> = (0..2)
                .map(|_| {
                    let l = Arc::clone(&lock);
                    thread::spawn(move || l.try_acquire())
                })
                .map(|h| h.join().unwrap())
                .collect();
            assert_eq!(wins.iter().filter(|&&w| w).count(), 1);
        }
    }

    #[test]
    fn ticket_gap_never_exceeds_one() {
        let lock = Arc::new(TicketLock::new());
        let stop = Arc::new(AtomicBool::new(false));
        let workers: Vec<_> = (0..3)
            .map(|_| {
                let l = Arc::clone(&lock);
                thread::spawn(move || {
                    for _ in 0..20_000 {
                        if l.try_acquire() {
                            l.release();
                        }
                    }
                })
            })
            .collect();
        let observer = {
            let l = Arc::clone(&lock);
            let stop = Arc::clone(&stop);
            thread::spawn(move || {
                while !stop.load(SeqCst) {
                    let (t, v) = l.counters();
                    assert!(t.wrapping_sub(v) <= 1, "ticket {t} version {v}");
                }
            })
        };
        for w in workers {
            w.join().unwrap();
        }
        stop.store(true, SeqCst);
        observer.join().unwrap();
        let (t, v) = lock.counters();
        assert_eq!(t, v);
    }

    #[test]
    fn retired_mark_is_permanent() {
        let word = Arc::new(FlagMarkWord::new());
        let seen_retired = Arc::new(AtomicBool::new(false));
        let reader = {
            let w = Arc::clone(&word);
            let seen = Arc::clone(&seen_retired);
            thread::spawn(move || {
                for _ in 0..200_000 {
                    let (flag, marked) = w.state();
                    if seen.load(SeqCst) {
                        assert!(marked, "mark cleared after retirement was observed");
                    } else if !flag && marked {
                        seen.store(true, SeqCst);
                    }
                }
            })
        };
        assert!(word.try_acquire());
        word.set_marked(true);
        word.release();
        reader.join().unwrap();
        assert_eq!(word.state(), (false, true));
    }
}
