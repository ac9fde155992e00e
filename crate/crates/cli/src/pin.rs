//! Optional CPU pinning for benchmarks.

/// Restricts the calling thread to `core`. Returns false where unsupported.
#[cfg(target_os = "linux")]
pub fn pin_to_core(core: usize) -> std::io::Result<bool> {
    // SAFETY: `set` is a plain bitmask owned by this frame; the call only
    // reads it.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_ZERO(&mut set);
        libc::CPU_SET(core, &mut set);
        if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) != 0 {
            return Err(std::io::Error::last_os_error());
        }
    }
    Ok(true)
}

#[cfg(not(target_os = "linux"))]
pub fn pin_to_core(_core: usize) -> std::io::Result<bool> {
    Ok(false)
}
