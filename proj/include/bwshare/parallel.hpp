#pragma once

namespace bwshare {

// Batch kernels come in two flavors: a serial reference implementation and
// an OpenMP one. Results are identical by construction (each work item owns
// its RNG stream and output slot), so tests compare them directly.
enum class Execution { serial, parallel };

int hardware_threads();

}  // namespace bwshare
