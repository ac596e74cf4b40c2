// Granulate two noisy rings, pick borderline samples, then compare classifiers
// trained on the full data, the GBABS sample and a random sample of equal size.

#include <iostream>

#include "granule/granule.hpp"

using namespace granule;

int main() {
    const std::vector<double> radii{1.0, 2.0};
    RngStream gen(1);
    const Dataset clean = gen_rings(400, radii, 0.6, gen);
    RngStream flip(2);
    const Dataset data = inject_class_noise(clean, 0.1, flip).first;

    RngStream rng(3);
    const auto [sample, balls] = run_gbabs(data, 5, rng);
    std::cout << "samples " << data.size() << ", balls " << balls.balls.size() << ", noise "
              << balls.noise_ids.size() << ", borderline " << sample.sample_ids.size() << " (ratio "
              << sample.ratio << ")\n";

    for (SamplerKind s : {SamplerKind::none, SamplerKind::gbabs, SamplerKind::srs}) {
        EvalConfig cfg;
        cfg.classifier = ClassifierKind::knn;
        cfg.sampler = s;
        cfg.repeats = 2;
        cfg.seed = 4;
        const auto rep = cross_validate(data, cfg);
        std::cout << to_string(s) << ": accuracy " << rep.accuracy.mean << ", g-mean " << rep.gmean.mean
                  << ", ratio " << rep.sampling_ratio.mean << "\n";
    }
}
