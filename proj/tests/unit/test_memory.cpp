#include "scr/memory.hpp"

#include <gtest/gtest.h>

#include <set>

using scr::Matrix;

namespace {

// Three tight, well separated blobs of `per` points each; blob b occupies rows [b*per, (b+1)*per).
Matrix blobs(int per, scr::Rng& rng) {
  std::normal_distribution<double> g(0.0, 0.1);
  const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  Matrix f(3 * per, 2);
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < per; ++i) {
      f(b * per + i, 0) = centers[b][0] + g(rng);
      f(b * per + i, 1) = centers[b][1] + g(rng);
    }
  return f;
}

scr::Exemplar exemplar(const std::string& id, const std::string& type) {
  scr::Exemplar e;
  e.sentence_id = id;
  e.event_type = type;
  e.trigger = {1, 1};
  e.stage = 1;
  e.sentence.id = id;
  e.sentence.tokens = {"a", "b"};
  e.sentence.labels = {scr::TokenLabel{}, scr::TokenLabel{type, false, 1.0}};
  return e;
}

}  // namespace

TEST(KMeansSelection, OneExemplarPerBlob) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    scr::Rng rng(seed);
    const Matrix f = blobs(15, rng);
    const auto picked = scr::select_exemplar_indices(f, 3, seed);
    ASSERT_EQ(picked.size(), 3u);
    std::set<std::size_t> blob_ids;
    for (auto i : picked) blob_ids.insert(i / 15);
    EXPECT_EQ(blob_ids.size(), 3u) << "seed " << seed;
  }
}

TEST(KMeansSelection, PicksMemberNearestCentroid) {
  Matrix f(4, 1);
  f << 0.0, 1.0, 2.0, 100.0;  // k=2: {0,1,2} centroid 1 -> row 1; {100} -> row 3
  auto picked = scr::select_exemplar_indices(f, 2, 5);
  std::sort(picked.begin(), picked.end());
  EXPECT_EQ(picked, (std::vector<std::size_t>{1, 3}));
}

TEST(KMeansSelection, SmallPoolsAndEdgeCases) {
  Matrix f = Matrix::Random(4, 3);
  EXPECT_EQ(scr::select_exemplar_indices(f, 10, 1), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_TRUE(scr::select_exemplar_indices(f, 0, 1).empty());
  EXPECT_THROW(scr::select_exemplar_indices(Matrix(0, 3), 2, 1), scr::MemoryError);
  // duplicates: still m distinct rows
  const auto dup = scr::select_exemplar_indices(Matrix::Ones(6, 2), 3, 1);
  EXPECT_EQ(std::set<std::size_t>(dup.begin(), dup.end()).size(), 3u);
}

TEST(KMeansSelection, DeterministicUnderSeed) {
  scr::Rng rng(9);
  const Matrix f = Matrix::Random(60, 5);
  EXPECT_EQ(scr::select_exemplar_indices(f, 10, 77), scr::select_exemplar_indices(f, 10, 77));
  const auto picked = scr::select_exemplar_indices(f, 10, 77);
  EXPECT_EQ(std::set<std::size_t>(picked.begin(), picked.end()).size(), 10u);
}

TEST(MemoryStore, EnforcesCapacityAndRejectsNa) {
  scr::MemoryStore mem(2);
  EXPECT_THROW(mem.update({{"Attack", {exemplar("1", "Attack"), exemplar("2", "Attack"), exemplar("3", "Attack")}}}),
               scr::MemoryError);
  EXPECT_THROW(mem.update({{scr::kNoneLabel, {exemplar("1", scr::kNoneLabel)}}}), scr::MemoryError);
  EXPECT_THROW(mem.update({{"Attack", {exemplar("1", "Die")}}}), scr::MemoryError);
  EXPECT_EQ(mem.total(), 0u);
  mem.update({{"Attack", {exemplar("1", "Attack"), exemplar("2", "Attack")}}});
  mem.update({{"Die", {exemplar("3", "Die")}}});
  EXPECT_THROW(mem.update({{"Attack", {exemplar("4", "Attack")}}}), scr::MemoryError);
  EXPECT_EQ(mem.total(), 3u);
  EXPECT_EQ(mem.types(), (std::vector<std::string>{"Attack", "Die"}));
  EXPECT_THROW(scr::MemoryStore(-1), scr::MemoryError);
}

TEST(MemoryStore, JsonRoundTrip) {
  scr::MemoryStore mem(3);
  auto e = exemplar("s1", "Attack");
  e.sentence.labels[0] = scr::TokenLabel{"Die", true, 0.91};
  mem.update({{"Attack", {e}}});
  const auto back = scr::MemoryStore::from_json(mem.to_json());
  EXPECT_EQ(back.capacity(), 3);
  ASSERT_EQ(back.exemplars("Attack").size(), 1u);
  EXPECT_EQ(back.exemplars("Attack")[0], e);
}

TEST(SelectExemplars, TemplateKeepsInstanceOrderOfPicks) {
  std::vector<int> items{10, 11, 12, 13};
  Matrix f(4, 1);
  f << 0.0, 0.1, 50.0, 50.1;
  const auto out = scr::select_exemplars<int>(items, f, 2, 3);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE((out[0] <= 11) != (out[1] <= 11));
  EXPECT_THROW(scr::select_exemplars<int>(items, Matrix(3, 1), 2, 3), scr::MemoryError);
}
