#pragma once

#include <functional>

namespace dpn {

// Runs fn(i) for i in [0, n). threads == 1 is the serial reference path;
// threads == 0 uses whatever OpenMP considers the machine default.
// Callers must only use this when iterations write disjoint state, so the
// serial and parallel paths produce bit-identical results.
void for_each_index(int n, int threads, const std::function<void(int)>& fn);

int hardware_threads();

}  // namespace dpn
