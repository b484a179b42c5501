#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace bacon {

// Training allocates and frees multi-megabyte temporaries every step. glibc
// serves those from fresh mmap regions by default, so each step pays for page
// faults on memory it just released. Keeping them on the heap roughly halves
// step time. No-op on other C libraries.
inline void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace bacon
