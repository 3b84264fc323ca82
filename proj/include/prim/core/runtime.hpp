#pragma once

namespace prim {

/// Keeps freed memory in the heap instead of returning it to the OS. Forward
/// passes allocate and free the same large buffers repeatedly, and page faults
/// on fresh mappings dominate otherwise. No-op outside glibc.
void tune_allocator();

}  // namespace prim
