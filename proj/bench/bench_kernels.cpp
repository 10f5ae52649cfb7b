// Serial reference kernels against their OpenMP counterparts.
#include "eegsrc/dataset.hpp"
#include "eegsrc/sparse_coding.hpp"
#include "eegsrc/src_classifier.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace eegsrc;

struct Fixture {
  SyntheticData data;
  SrcModel model;
  Fixture() : data(generate_synthetic_dataset(3, 512, 1024, 10, 1, 200, 7)) {
    for (int c = 0; c < 3; ++c) {
      Dictionary d(data.dictionaries[static_cast<std::size_t>(c)]);
      d.set_class_tag(c);
      model.dictionaries.push_back(std::move(d));
    }
    model.class_names = data.train.class_names;
    model.coding.max_sparsity = 10;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_BatchCodeSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(serial::batch_code(f.model.dictionaries[0], f.data.test.epochs.samples(), f.model.coding));
}

void BM_BatchCodeParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(batch_code(f.model.dictionaries[0], f.data.test.epochs.samples(), f.model.coding));
}

void BM_ClassifySerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(serial::classify_batch(f.model, f.data.test.epochs.samples()));
}

void BM_ClassifyParallel(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(classify_batch(f.model, f.data.test.epochs.samples()));
}

}  // namespace

BENCHMARK(BM_BatchCodeSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchCodeParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifySerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifyParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
