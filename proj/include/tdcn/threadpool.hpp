#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace tdcn {

// Worker count: min(hardware, TDCN_THREADS when set). At least 1.
int worker_count();

// Runs fn(begin, end) over disjoint chunks of [0, n). Chunk boundaries depend
// only on n, never on the worker count, so any value written by a chunk is
// identical no matter how many threads execute. fn must not reduce across
// chunks; callers needing a reduction combine per-chunk buffers serially in
// chunk order.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

// Same, but with an explicit chunk index so callers can address per-chunk
// scratch: fn(chunk, begin, end). chunk_count(n) chunks of fixed size.
void parallel_chunks(int64_t n, int64_t chunk_size,
                     const std::function<void(int64_t, int64_t, int64_t)>& fn);

int64_t chunk_count(int64_t n, int64_t chunk_size);

} // namespace tdcn
