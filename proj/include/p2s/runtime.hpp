#pragma once

#include <cstdlib>
#include <string>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "p2s/error.hpp"

#ifndef P2S_VERSION
#define P2S_VERSION "0.0.0-dev"
#endif

namespace p2s {

inline const char* version_string() { return P2S_VERSION; }

/// Training allocates and frees many same-sized multi-megabyte buffers per
/// iteration. glibc serves those with mmap and returns them immediately, which
/// costs a page fault per touched page. Keeping them on the heap is several
/// times faster. Call once at program start; harmless elsewhere.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

/// Worker count for parallel benchmark cells: hardware concurrency, capped by
/// the P2S_THREADS environment variable when set.
inline unsigned worker_threads() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("P2S_THREADS"); env && *env) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    require(*end == '\0' && cap >= 1, Errc::invalid_argument,
            std::string("P2S_THREADS must be a positive integer, got '") + env + "'");
    if (static_cast<unsigned long>(cap) < n) n = static_cast<unsigned>(cap);
  }
  return n;
}

}  // namespace p2s
