#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace cleegn::detail {

// Training and streaming cycle through multi-megabyte activation buffers.
// Keep those in the malloc arena instead of round-tripping every buffer
// through mmap/munmap (and the page faults that come with it).
inline void tune_malloc_once() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace cleegn::detail
