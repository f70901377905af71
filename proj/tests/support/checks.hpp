#pragma once

// Randomized property checks shared by the unit tests and the acceptance
// binary. Each returns a verdict and a one-line summary of what was compared.

#include <cstddef>
#include <filesystem>
#include <string>

namespace checks {

struct Verdict {
  bool pass = false;
  std::string detail;
};

// SSA(q) == CCA(q, q) bit for bit; zero weights give z == q bit for bit;
// tied W_f = W_g gives a symmetric A' (1e-12); A >= 0; and both attention
// kinds agree with the straight-line oracle.
Verdict attention_invariants(std::size_t instances);

// evaluate() against the brute-force reference on `instances` random
// 50-query x 200-gallery problems with junk and same-camera items.
Verdict metric_oracle(std::size_t instances);

// mine_semihard() against exhaustive enumeration on `batches` random batches
// of size <= 32, plus batches with no qualifying negative at all.
Verdict mining_oracle(std::size_t batches);

// TensorFile round trips, corrupted-header fixtures and PPM fixtures. Scratch
// files go under `dir`.
Verdict format_conformance(const std::filesystem::path& dir);

}  // namespace checks
