//! Optional CPU pinning. A no-op off Linux.

/// CPUs the process may run on.
#[cfg(target_os = "linux")]
pub fn cpus() -> Vec<usize> {
    // SAFETY: cpu_set_t is plain data and sched_getaffinity only writes it.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
            return Vec::new();
        }
        (0..libc::CPU_SETSIZE as usize).filter(|&c| libc::CPU_ISSET(c, &set)).collect()
    }
}

/// Pins the calling thread to `cpu`. Returns false if the OS refused.
#[cfg(target_os = "linux")]
pub fn pin_current(cpu: usize) -> bool {
    // SAFETY: as above; 0 targets the calling thread.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn cpus() -> Vec<usize> {
    Vec::new()
}

#[cfg(not(target_os = "linux"))]
pub fn pin_current(_cpu: usize) -> bool {
    false
}

#[cfg(all(test, target_os = "linux"))]
mod tests {
    #[test]
    fn can_pin_to_an_allowed_cpu() {
        let cpus = super::cpus();
        assert!(!cpus.is_empty());
        std::thread::spawn(move || assert!(super::pin_current(cpus[0]))).join().unwrap();
    }
}
