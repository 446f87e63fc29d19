// Simulates a small Markov cohort and prints the identification curve of the
// generative and the discriminative classifier side by side.
//
//   identify_synthetic [delta] [seed]

#include <cstdio>
#include <cstdlib>

#include "gazeid/gazeid.hpp"

int main(int argc, char** argv) {
  using namespace gazeid;
  SyntheticCohortSpec spec;
  spec.n_users = 8;
  spec.n_images = 24;
  spec.T = 25;
  if (argc > 1) spec.delta = std::atof(argv[1]);
  if (argc > 2) spec.seed = std::strtoull(argv[2], nullptr, 10);

  try {
    const Cohort cohort = generate_cohort(spec);
    EvalProtocol proto;
    proto.n_splits = 3;
    proto.max_k = 4;
    proto.seed = spec.seed;
    std::printf("%zu users, %zu images each, T=%zu, delta=%g\n", spec.n_users, spec.n_images, spec.T,
                spec.delta);
    std::printf("%-20s", "k");
    for (std::size_t k = 1; k <= proto.max_k; ++k) std::printf("%8zu", k);
    std::printf("\n");
    for (ModelFamily f : {ModelFamily::kBayesMarkov, ModelFamily::kFisherSvmMarkov}) {
      const ProtocolResult r = run_protocol(cohort.data, f, proto);
      std::printf("%-20s", to_string(f).c_str());
      for (const auto& p : r.curve) std::printf("%8.3f", p.mean_acc);
      std::printf("\n");
    }
    std::printf("chance level %.3f\n", 1.0 / static_cast<double>(spec.n_users));
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
