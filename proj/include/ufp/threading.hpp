// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>

namespace ufp {

// Worker cap: explicit setting wins, else the UFP_THREADS environment
// variable, else hardware concurrency.
int max_threads();
void set_max_threads(int n);  // n <= 0 restores the default

// Runs fn(i) for i in [0, n). Work items must be independent; callers that
// need deterministic reductions write into per-index slots and reduce in
// index order afterwards.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace ufp
