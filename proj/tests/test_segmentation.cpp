#include <cmath>
#include <random>

#include "doctest.h"
#include "ecgtda/segmentation.hpp"

using namespace ecgtda;

namespace {

wfdb::AnnotatedRecord record_with_beats(const std::vector<long>& samples, long length = 1000,
                                        const std::string& symbols = "") {
  wfdb::AnnotatedRecord r;
  r.patient_id = "p";
  r.signal = {Eigen::VectorXd::LinSpaced(length, 0.0, double(length - 1)), 200.0};
  for (std::size_t i = 0; i < samples.size(); ++i)
    r.beat_annotations.push_back({samples[i], std::string(1, i < symbols.size() ? symbols[i] : 'N')});
  return r;
}

}  // namespace

TEST_CASE("three-beat window example") {
  const auto r = record_with_beats({100, 300, 500, 700, 900}, 1000, "NNVNN");
  const auto w = seg::slice_windows(r, {3, 400, 1});
  REQUIRE(w.size() == 1);
  CHECK(w[0].raw_start == 200);
  CHECK(w[0].raw_end == 800);
  CHECK(w[0].center_beat_index == 2);
  CHECK(w[0].label == 'V');
  CHECK(w[0].beat_count == 3);
  CHECK(w[0].samples.size() == 400);
  CHECK(w[0].center_position == doctest::Approx(199.5));
  // The source is a ramp, so the window is the ramp over its span.
  CHECK(w[0].samples[0] == 200.0);
  CHECK(w[0].samples[399] == 800.0);
  CHECK(w[0].ms_per_sample() == doctest::Approx(600.0 / 399.0 / 200.0 * 1000.0));
}

TEST_CASE("single-beat window example") {
  const auto r = record_with_beats({100, 300, 500}, 600, "NAN");
  const auto w = seg::slice_windows(r, {1, 64, 1});
  REQUIRE(w.size() == 1);
  CHECK(w[0].raw_start == 200);
  CHECK(w[0].raw_end == 400);
  CHECK(w[0].label == 'A');
}

TEST_CASE("too few beats give no windows") {
  CHECK(seg::slice_windows(record_with_beats({100, 300, 500, 700}), {3, 400, 1}).empty());
  CHECK(seg::slice_windows(record_with_beats({}), {3, 400, 1}).empty());
}

TEST_CASE("invalid slicing parameters") {
  const auto r = record_with_beats({100, 300, 500, 700, 900});
  CHECK_THROWS_AS(seg::slice_windows(r, {0, 400, 1}), InvalidInput);
  CHECK_THROWS_AS(seg::slice_windows(r, {3, 7, 1}), InvalidInput);
  CHECK_THROWS_AS(seg::slice_windows(r, {3, 400, 0}), InvalidInput);
}

TEST_CASE("standardize_length") {
  CHECK(seg::standardize_length(Eigen::Vector2d(0, 1), 5) == Eigen::Matrix<double, 5, 1>(0, 0.25, 0.5, 0.75, 1));
  const Eigen::VectorXd same = Eigen::VectorXd::Random(17);
  CHECK(seg::standardize_length(same, 17) == same);
  CHECK_THROWS_AS(seg::standardize_length(Eigen::VectorXd::Ones(1), 5), InvalidInput);

  // Affine inputs stay affine, in both directions.
  for (const int n : {3, 50, 401, 1000}) {
    const Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(n, -2.0, 5.0);
    const auto y = seg::standardize_length(ramp, 400);
    CHECK((y - Eigen::VectorXd::LinSpaced(400, -2.0, 5.0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(y[0] == -2.0);
    CHECK(y[399] == 5.0);
  }
}

TEST_CASE("central label rule and overlap") {
  std::vector<long> beats;
  std::string symbols;
  for (int i = 0; i < 30; ++i) {
    beats.push_back(50 + 100 * i);
    symbols.push_back("NVALR"[i % 5]);
  }
  const auto r = record_with_beats(beats, 3100, symbols);
  for (int k = 1; k <= 7; ++k) {
    const auto w = seg::slice_windows(r, {k, 100, 1});
    CHECK(w.size() == std::size_t(30 - k - 1));
    for (std::size_t j = 0; j < w.size(); ++j) {
      const long group_start = long(j) + 1;
      CHECK(w[j].center_beat_index - group_start == k / 2);
      CHECK(w[j].label == symbols[static_cast<std::size_t>(w[j].center_beat_index)]);
      CHECK(w[j].samples.size() == 100);
      if (j > 0) {
        // Consecutive windows share k-1 beats: the spans overlap by (k-1) RR intervals.
        CHECK(w[j - 1].raw_end - w[j].raw_start == 100 * (k - 1));
      }
    }
  }
  const auto strided = seg::slice_windows(r, {3, 100, 4});
  REQUIRE(strided.size() >= 2);
  CHECK(strided[1].center_beat_index - strided[0].center_beat_index == 4);
}

TEST_CASE("spans follow the local rhythm while the length is fixed") {
  auto train = [](long rr) {
    std::vector<long> beats;
    for (long t = rr; t < 6000 - rr; t += rr) beats.push_back(t);
    return record_with_beats(beats, 6000);
  };
  const auto slow = seg::slice_windows(train(300), {});  // 40 bpm at 200 Hz
  const auto fast = seg::slice_windows(train(100), {});  // 120 bpm
  REQUIRE(!slow.empty());
  REQUIRE(!fast.empty());
  CHECK(slow[0].raw_end - slow[0].raw_start == 900);
  CHECK(fast[0].raw_end - fast[0].raw_start == 300);
  for (const auto& w : slow) CHECK(w.samples.size() == 400);
  for (const auto& w : fast) CHECK(w.samples.size() == 400);
}
