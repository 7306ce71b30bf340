#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace lifenet {

/// Training allocates and frees the same few hundred-kilobyte buffers every
/// batch. glibc's default thresholds hand them back to the kernel each time,
/// so every batch pays fresh page faults. Keep them in the heap instead.
/// Process-wide; call once from main().
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 28);
  mallopt(M_TRIM_THRESHOLD, 1 << 28);
#endif
}

}  // namespace lifenet
