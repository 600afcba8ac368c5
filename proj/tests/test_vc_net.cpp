#include <gtest/gtest.h>

#include <cmath>

#include "onlinegamma2/oracles.hpp"
#include "onlinegamma2/vc_net.hpp"

using namespace onlinegamma2;

namespace {

double norm2sq(const SparseRow& r) {
  double s = 0.0;
  for (const Coef& c : r) s += c.value * c.value;
  return s;
}

}  // namespace

TEST(VCNet, ZeroVectorIsRootLinked) {
  VCNet net(4, {.expected_m = 4});
  StepResult r = net.step(Vec(4, 0.0));
  EXPECT_TRUE(r.new_rows.empty());
  EXPECT_TRUE(r.left.empty());
}

TEST(VCNet, SingleBitInsertLinksAtLayerTwo) {
  VCNet net(4, {.expected_m = 4});
  EXPECT_EQ(net.height(), 3u);
  StepResult r = net.step(Vec{1, 0, 0, 0});
  EXPECT_EQ(net.last_link_layer(), 2u);
  ASSERT_EQ(r.new_rows.size(), 1u);
  ASSERT_EQ(r.left.size(), 1u);
  EXPECT_NEAR(r.left[0].value, net.eps(3) * 8.0, 1e-12);
  // Stored in layer 3 only.
  EXPECT_EQ(net.layers()[3].size(), 2u);
  EXPECT_EQ(net.layers()[2].size(), 1u);
}

TEST(VCNet, DuplicateAddsNoRows) {
  VCNet net(4, {.expected_m = 4});
  StepResult a = net.step(Vec{1, 1, 0, 0});
  StepResult b = net.step(Vec{1, 1, 0, 0});
  EXPECT_TRUE(b.new_rows.empty());
  EXPECT_EQ(net.last_link_layer(), net.height());
  ASSERT_EQ(a.left.size(), b.left.size());
  for (std::size_t i = 0; i < a.left.size(); ++i) EXPECT_EQ(a.left[i].id, b.left[i].id);
}

TEST(VCNet, RejectsNonBoolean) {
  VCNet net(4);
  EXPECT_THROW(net.step(Vec{0.5, 0, 0, 0}), BadInput);
  EXPECT_THROW(VCNet(4, {.d = 1.0}), BadInput);
}

TEST(VCNet, ReconstructionAndBounds) {
  for (Family f : {Family::Intervals, Family::HalfplanesGrid, Family::PrefixSums}) {
    const std::size_t n = 64, m = f == Family::PrefixSums ? 64 : 128;
    Matrix q = gen_workload(f, n, m, 7);
    VCNet net(n, {.expected_m = m});
    GrowingFactorization g(n);
    for (std::size_t t = 0; t < m; ++t) {
      StepResult r = net.step(q.row(t));
      g.append(r);
      Vec rec = g.reconstruct(t);
      for (std::size_t j = 0; j < n; ++j) ASSERT_NEAR(rec[j], q(t, j), 1e-9);
      EXPECT_LE(norm2sq(r.left), net.left_norm2_bound() * (1.0 + 1e-12));
    }
    EXPECT_LE(g.frobenius2(), static_cast<double>(n));
    EXPECT_EQ(net.layers()[0].size(), 1u);
  }
}

TEST(VCNet, UnknownLengthRestarts) {
  const std::size_t n = 16;
  Matrix q = gen_workload(Family::Intervals, n, 40, 2);
  VCNet net(n);
  GrowingFactorization g(n);
  for (std::size_t t = 0; t < q.rows(); ++t) {
    g.append(net.step(q.row(t)));
    Vec rec = g.reconstruct(t);
    for (std::size_t j = 0; j < n; ++j) ASSERT_NEAR(rec[j], q(t, j), 1e-9);
  }
  // Guesses 1, 2, 4, ... cover rows 1, 2-3, 4-7, ...; row 40 falls in the phase with guess 32.
  EXPECT_EQ(net.m_hat(), 32.0);
  EXPECT_EQ(net.restarts(), 5u);
}

TEST(PackingAudit, IdentityRowsPassAtDimensionOne) {
  VCNet net(32, {.expected_m = 32});
  Matrix id = Matrix::identity(32);
  for (std::size_t t = 0; t < 32; ++t) net.step(id.row(t));
  EXPECT_TRUE(net.packing_audit(1.0).ok);
  EXPECT_NEAR(net.packing_audit(1.0).ratios[0], 1.0, 0.0);
}

TEST(PackingAudit, FullComplexityFlagsAtDimensionOne) {
  const std::size_t n = 64, m = 512;
  Matrix q = gen_workload(Family::RandomBoolean, n, m, 9);
  VCNet net(n, {.expected_m = m});
  for (std::size_t t = 0; t < m; ++t) net.step(q.row(t));
  EXPECT_FALSE(net.packing_audit(1.0).ok);
}
