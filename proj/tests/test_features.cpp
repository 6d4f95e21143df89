// SPDX-License-Identifier: Apache-2.0
#include "pdiff/features.hpp"
#include "pdiff/fingering_dp.hpp"
#include "pdiff/fingering_hmm.hpp"
#include "pdiff/rng.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <set>

namespace pdiff::features {
namespace {

using pdiff::testing::mono_score;

struct Built {
  score::Score score;
  fingering::FingeringAssignment dp, hmm;
  FeatureMatrix build(FeatureKind k) const { return build_feature_matrix(score, k, &dp, &hmm); }
};

Built built(const score::Score& s) {
  return {s, fingering::dp::assign_fingers_dp(s),
          fingering::hmm::assign_fingers_hmm(s, fingering::hmm::default_prior_params())};
}

TEST(Columns, Mapping) {
  EXPECT_EQ(finger_column(-5), 0);
  EXPECT_EQ(finger_column(-1), 4);
  EXPECT_EQ(finger_column(1), 5);
  EXPECT_EQ(finger_column(5), 9);
  EXPECT_THROW(finger_column(0), RangeError);
  EXPECT_EQ(key_column(21), 0);
  EXPECT_EQ(key_column(108), 87);
  EXPECT_THROW(key_column(109), RangeError);
  EXPECT_EQ(kind_width(FeatureKind::K), 88);
  EXPECT_EQ(kind_width(FeatureKind::NP), 10);
  for (auto k : kAllKinds) EXPECT_EQ(kind_from_name(kind_name(k)), k);
  EXPECT_THROW(kind_from_name("XY"), UsageError);
}

TEST(FeatureMatrix, LowestKeyAndRightThumb) {
  const auto b = built(mono_score({21}));
  const auto k = b.build(FeatureKind::K);
  ASSERT_EQ(k.rows, 1);
  EXPECT_EQ(k.at(0, 0), 1.0);
  double sum = 0;
  for (double x : k.cells) sum += x;
  EXPECT_EQ(sum, 1.0);
  const auto pf = b.build(FeatureKind::PF);
  EXPECT_EQ(pf.at(0, finger_column(b.dp.fingers[0])), 1.0);
}

TEST(FeatureMatrix, PresenceCountsMatchSlices) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto syn = score::generate_synthetic_score(seed, static_cast<int>(seed % 3) + 1);
    const auto b = built(syn.score);
    const auto slices = score::onset_slices(syn.score);
    for (auto kind : {FeatureKind::K, FeatureKind::PF, FeatureKind::NF}) {
      const auto m = b.build(kind);
      ASSERT_EQ(m.rows, static_cast<int>(slices.size()));
      for (int r = 0; r < m.rows; ++r) {
        int nz = 0;
        for (double x : m.row(r)) {
          EXPECT_TRUE(x == 0.0 || x == 1.0);
          nz += x != 0.0;
        }
        // a pitch doubled across hands shares one key column
        std::set<int> keys;
        for (const auto& e : slices[static_cast<std::size_t>(r)].notes) keys.insert(e.pitch);
        const auto expected = kind == FeatureKind::K ? keys.size() : slices[static_cast<std::size_t>(r)].notes.size();
        EXPECT_EQ(nz, static_cast<int>(expected)) << kind_name(kind);
      }
    }
  }
}

TEST(FeatureMatrix, ScalarKindsShareSparsityWithPresenceKinds) {
  const auto syn = score::generate_synthetic_score(3, 2);
  const auto b = built(syn.score);
  const auto pf = b.build(FeatureKind::PF), pv = b.build(FeatureKind::PV);
  const auto nf = b.build(FeatureKind::NF), np = b.build(FeatureKind::NP);
  for (std::size_t i = 0; i < pf.cells.size(); ++i) {
    if (pf.cells[i] == 0.0) EXPECT_EQ(pv.cells[i], 0.0);
    EXPECT_GE(pv.cells[i], 0.0);
    EXPECT_LT(pv.cells[i], 1.0);
    EXPECT_EQ(nf.cells[i] != 0.0, np.cells[i] != 0.0);
    EXPECT_GE(np.cells[i], 0.0);
    EXPECT_LE(np.cells[i], 1.0);
  }
}

TEST(FeatureMatrix, MissingAssignmentIsAnError) {
  const auto s = mono_score({60, 62});
  EXPECT_THROW(build_feature_matrix(s, FeatureKind::PV), DataError);
  EXPECT_NO_THROW(build_feature_matrix(s, FeatureKind::K));
}

FeatureMatrix numbered(int rows, int cols) {
  FeatureMatrix m;
  m.kind = cols == 88 ? FeatureKind::K : FeatureKind::PV;
  m.rows = rows;
  m.cols = cols;
  for (int i = 0; i < rows * cols; ++i) m.cells.push_back(i + 1);
  return m;
}

TEST(Windows, CountsAndPadding) {
  EXPECT_EQ(window_count(10, 9, 1), 2);
  EXPECT_EQ(window_count(5, 9, 1), 1);
  EXPECT_EQ(window_count(650, 9, 1), 642);
  EXPECT_EQ(window_count(20, 9, 3), 4);
  EXPECT_THROW(window_count(0, 9, 1), DataError);
  EXPECT_THROW(window_count(10, 0, 1), UsageError);

  const auto m = numbered(5, 10);
  const auto segs = window_segments(m, 9, 1, "x", 2);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].label, 2);
  EXPECT_EQ(segs[0].score_id, "x");
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 10; ++c)
      EXPECT_EQ(segs[0].cells[static_cast<std::size_t>(r * 10 + c)], r < 5 ? m.at(r, c) : 0.0);
}

TEST(Windows, SegmentsAreShiftedSlices) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = static_cast<int>(rng.uniform_int(1, 40));
    const int w = static_cast<int>(rng.uniform_int(1, 19));
    const int s = static_cast<int>(rng.uniform_int(1, 4));
    const auto m = numbered(rows, 10);
    const auto segs = window_segments(m, w, s);
    ASSERT_EQ(static_cast<int>(segs.size()), window_count(rows, w, s));
    for (std::size_t k = 0; k < segs.size(); ++k) {
      EXPECT_EQ(segs[k].start_onset_index, static_cast<int>(k) * s);
      for (int r = 0; r < w; ++r) {
        const int src = segs[k].start_onset_index + r;
        for (int c = 0; c < 10; ++c)
          EXPECT_EQ(segs[k].cells[static_cast<std::size_t>(r * 10 + c)], src < rows ? m.at(src, c) : 0.0);
      }
    }
  }
}

TEST(Windows, FlattenAndReshape) {
  const auto pv = window_segments(numbered(12, 10), 9, 1);
  const auto k = window_segments(numbered(12, 88), 9, 1);
  EXPECT_EQ(flatten(pv[0]).size(), 90u);
  EXPECT_EQ(flatten(k[0]).size(), 792u);
  for (const auto& seg : pv) {
    const auto flat = flatten(seg);
    const auto back = reshape(flat, 9, 10);
    EXPECT_EQ(back.cells, seg.cells);
  }
  std::vector<double> bad(91);
  EXPECT_THROW(reshape(bad, 9, 10), ShapeError);
}

TEST(Windows, CoverageMatchesBruteForce) {
  for (int onsets = 1; onsets <= 40; ++onsets)
    for (int w : {1, 3, 5, 9, 13, 19}) {
      const auto cov = coverage_counts(onsets, w);
      ASSERT_EQ(static_cast<int>(cov.size()), onsets);
      std::vector<int> brute(static_cast<std::size_t>(onsets), 0);
      const int n = window_count(onsets, w, 1);
      for (int k = 0; k < n; ++k)
        for (int r = k; r < std::min(onsets, k + w); ++r) ++brute[static_cast<std::size_t>(r)];
      EXPECT_EQ(cov, brute);
      if (onsets >= w)
        for (int i = 1; i <= onsets; ++i)
          EXPECT_EQ(cov[static_cast<std::size_t>(i - 1)], std::min({i, w, onsets - w + 1, onsets - i + 1}));
    }
}

TEST(Export, JsonAndBinaryRoundTrip) {
  const auto syn = score::generate_synthetic_score(1, 1);
  const auto b = built(syn.score);
  for (auto kind : kAllKinds) {
    const auto m = b.build(kind);
    const auto j = matrix_from_json(nlohmann::ordered_json::parse(matrix_to_json(m).dump()));
    EXPECT_EQ(j.cells, m.cells);
    const auto bytes = matrix_to_binary(m);
    EXPECT_EQ(bytes.substr(0, 4), "PDFM");
    EXPECT_EQ(bytes.size(), 20u + 4u * m.cells.size());
    const auto back = matrix_from_binary(bytes);
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.rows, m.rows);
    for (std::size_t i = 0; i < m.cells.size(); ++i)
      EXPECT_EQ(back.cells[i], static_cast<double>(static_cast<float>(m.cells[i])));
  }
  EXPECT_THROW(matrix_from_binary("PDFX"), FormatError);
}

}  // namespace
}  // namespace pdiff::features
