// Shared fixtures for the test binaries.
#ifndef SYNCCLIP_TESTS_SUPPORT_HPP_
#define SYNCCLIP_TESTS_SUPPORT_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "syncclip/model.hpp"
#include "syncclip/toy_data.hpp"

namespace syncclip::testing {

inline ToyDataOptions small_toy_options() {
  ToyDataOptions o;
  o.base_classes = 3;
  o.novel_classes = 2;
  o.train_per_class = 4;
  o.val_per_class = 1;
  o.test_per_class = 3;
  o.synth_per_class = 3;
  return o;
}

/// A small mixed batch with mined triplets: `n_real` reals and 2x synthetics.
struct BatchFixture {
  ToyData data;
  MixedBatch batch;
  BatchInputs<double> inputs;
};

inline BatchFixture make_batch_fixture(std::uint64_t seed, int n_real = 3) {
  BatchFixture f;
  f.data = make_toy_data(small_toy_options(), seed);
  MixedBatchSampler sampler(f.data.splits.train.size(), f.data.synthetic.size(), n_real, 2, seed);
  std::mt19937_64 rng(seed);
  // Walk forward until the batch yields at least one triplet.
  for (std::size_t it = 0;; ++it) {
    f.batch = sampler.batch(it);
    auto mined = mine_triplets(f.batch, f.data.splits.train, f.data.synthetic, f.data.splits.classes, rng);
    if (!mined.triplets.empty() || it > 200) {
      f.batch.triplets = mined.triplets;
      f.inputs = resolve_batch<double>(f.batch, f.data.splits.train, f.data.synthetic, mined.skipped);
      break;
    }
  }
  return f;
}

/// Central-difference check over every learnable entry. Returns the number
/// of entries outside tolerance and reports the worst relative error.
struct GradCheck {
  int failures = 0;
  int checked = 0;
  double worst_relative = 0.0;
  std::string worst_name;
};

template <typename LossFn>
GradCheck finite_difference_check(Learnables<double> params, const Learnables<double>& analytic, LossFn&& loss,
                                  double step = 1e-5, double rel_tol = 1e-4, double abs_floor = 1e-7) {
  GradCheck out;
  std::vector<std::pair<std::string, Matrix<double>*>> slots;
  params.for_each([&](const std::string& name, Matrix<double>& m) { slots.emplace_back(name, &m); });
  std::vector<const Matrix<double>*> grads;
  analytic.for_each([&](const std::string&, const Matrix<double>& m) { grads.push_back(&m); });
  for (std::size_t s = 0; s < slots.size(); ++s) {
    Matrix<double>& m = *slots[s].second;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double orig = m.data()[i];
      m.data()[i] = orig + step;
      const double up = loss(params);
      m.data()[i] = orig - step;
      const double down = loss(params);
      m.data()[i] = orig;
      const double fd = (up - down) / (2 * step);
      const double g = grads[s]->data()[i];
      const double err = std::abs(fd - g);
      const double scale = std::max(std::abs(fd), std::abs(g));
      ++out.checked;
      const double rel = scale > 0 ? err / scale : 0.0;
      if (err > abs_floor && rel > rel_tol) {
        ++out.failures;
        if (rel > out.worst_relative) {
          out.worst_relative = rel;
          out.worst_name = slots[s].first + "[" + std::to_string(i) + "] fd=" + std::to_string(fd) +
                           " analytic=" + std::to_string(g);
        }
      }
    }
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("syncclip_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace syncclip::testing

#endif  // SYNCCLIP_TESTS_SUPPORT_HPP_
