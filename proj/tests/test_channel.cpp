#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tmrange/channel.hpp"
#include "tmrange/error.hpp"
#include "tmrange/waveform.hpp"

using namespace tmrange;

namespace {

constexpr double kFs = 25.2e6;

SampleStream constant_stream(std::size_t n, cd v) {
  SampleStream s;
  s.sample_rate = kFs;
  s.samples.assign(n, v);
  return s;
}

}  // namespace

TEST_CASE("zero noise density leaves the signal untouched") {
  const SampleStream s = constant_stream(1000, cd(0.3, -0.2));
  const SampleStream y = add_awgn(s, NoiseSpec{0.0, 5});
  CHECK(y.samples == s.samples);
}

TEST_CASE("noise variance per sample is N0 fs, split evenly over I and Q") {
  const double n0 = 1e-8;
  const SampleStream y = add_awgn(constant_stream(1000000, cd{}), NoiseSpec{n0, 11});
  double re2 = 0.0;
  double im2 = 0.0;
  double cross = 0.0;
  cd mean{};
  for (const cd& v : y.samples) {
    re2 += v.real() * v.real();
    im2 += v.imag() * v.imag();
    cross += v.real() * v.imag();
    mean += v;
  }
  const double n = static_cast<double>(y.size());
  const double expect = n0 * kFs;
  CHECK((re2 + im2) / n == doctest::Approx(expect).epsilon(0.01));
  CHECK(re2 / n == doctest::Approx(expect / 2).epsilon(0.01));
  CHECK(im2 / n == doctest::Approx(expect / 2).epsilon(0.01));
  CHECK(std::abs(cross / n) < 0.01 * expect);
  CHECK(std::abs(mean / n) < 0.01 * std::sqrt(expect));
  CHECK(AwgnSource(n0, kFs, 1).per_sample_variance() == doctest::Approx(expect));
}

TEST_CASE("noise is white: flat spectrum at level N0") {
  const double n0 = 2.0;
  const std::size_t seg = 256;
  const std::size_t n_seg = 400;
  const SampleStream y = add_awgn(constant_stream(seg * n_seg, cd{}), NoiseSpec{n0, 23});
  // Averaged periodogram by direct DFT at a handful of bins.
  for (std::size_t k : {0u, 1u, 37u, 128u, 200u}) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n_seg; ++s) {
      cd x{};
      for (std::size_t i = 0; i < seg; ++i) {
        x += y.samples[s * seg + i] *
             std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(seg));
      }
      acc += std::norm(x) / (static_cast<double>(seg) * kFs);
    }
    CAPTURE(k);
    // 400 averages of an exponential variable: about 5% standard error.
    CHECK(acc / n_seg == doctest::Approx(n0).epsilon(0.2));
  }
  // Lag correlations vanish.
  for (std::size_t lag = 1; lag <= 4; ++lag) {
    cd r{};
    for (std::size_t i = lag; i < y.size(); ++i) r += y.samples[i] * std::conj(y.samples[i - lag]);
    CHECK(std::abs(r) / static_cast<double>(y.size()) < 0.01 * n0 * kFs);
  }
}

TEST_CASE("the same seed gives the same noise") {
  const SampleStream s = constant_stream(5000, cd(1.0, 0.0));
  const auto a = add_awgn(s, NoiseSpec{1e-7, 99});
  const auto b = add_awgn(s, NoiseSpec{1e-7, 99});
  const auto c = add_awgn(s, NoiseSpec{1e-7, 100});
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);

  // Chunked generation continues the same sequence.
  AwgnSource src(1e-7, kFs, 99);
  std::vector<cd> chunked = s.samples;
  src.add_to(std::span<cd>(chunked).subspan(0, 1234));
  src.add_to(std::span<cd>(chunked).subspan(1234));
  CHECK(chunked == a.samples);
}

TEST_CASE("derived seeds differ across streams and trials") {
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 0, 2));
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 1, 1));
  CHECK(derive_seed(1, 0, 1) != derive_seed(2, 0, 1));
  CHECK(derive_seed(7, 3, 2) == derive_seed(7, 3, 2));
}

TEST_CASE("Eb/N0 bookkeeping agrees with the energy of a unit-power stream") {
  const double T = 1.0 / 4.2e6;
  const double n0 = n0_from_ebn0(6.0, T, 2);
  // Energy per symbol of a unit-power stream: sum |x|^2 / fs over one symbol.
  const SampleStream s = constant_stream(6, cd(std::sqrt(0.5), std::sqrt(0.5)));
  double es = 0.0;
  for (const cd& v : s.samples) es += std::norm(v) / kFs;
  CHECK(es / 2.0 / n0 == doctest::Approx(std::pow(10.0, 0.6)));
  CHECK(n0_from_ebn0(6.0, T, 2, 4.0) == doctest::Approx(4.0 * n0));
  CHECK_THROWS_AS(n0_from_ebn0(6.0, T, 0), Error);
}

TEST_CASE("P/(N0 B_L) bookkeeping") {
  const double n0 = n0_from_pn0bl(30.0, 0.09, 1500.0);
  CHECK(0.09 / (n0 * 1500.0) == doctest::Approx(1000.0));
  CHECK_THROWS_AS(n0_from_pn0bl(30.0, 0.0, 1500.0), Error);
  CHECK_THROWS_AS(n0_from_pn0bl(30.0, 0.1, -1.0), Error);
}

TEST_CASE("bad noise parameters are rejected") {
  CHECK_THROWS_AS(AwgnSource(-1.0, kFs, 0), Error);
  CHECK_THROWS_AS(AwgnSource(INFINITY, kFs, 0), Error);
  CHECK_THROWS_AS(AwgnSource(1.0, 0.0, 0), Error);
}
