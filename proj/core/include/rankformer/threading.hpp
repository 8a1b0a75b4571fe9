#pragma once

#include <cstdint>
#include <functional>

#include "rankformer/types.hpp"

namespace rankformer {

// Global worker cap. Defaults to hardware concurrency, can be lowered via
// set_num_threads() or the RANKFORMER_THREADS environment variable
// (checked once at first use). 1 selects plain sequential loops.
void set_num_threads(int n);
int num_threads();

// Splits [begin, end) into contiguous chunks, one per worker. Bodies must
// only write state owned by their own index range; with that contract the
// result is bit-identical for any thread count.
void parallel_for(Index begin, Index end, const std::function<void(Index, Index)>& body);

}  // namespace rankformer
