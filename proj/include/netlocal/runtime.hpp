#pragma once

namespace netlocal {

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training allocates and frees multi-megabyte chunk buffers every
/// iteration; with glibc defaults each one becomes an mmap/munmap pair and
/// page faults dominate. No-op on other C libraries.
void retain_freed_memory();

}  // namespace netlocal
