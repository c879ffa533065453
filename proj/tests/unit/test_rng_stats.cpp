#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "netconform/rng.hpp"
#include "netconform/stats.hpp"

using namespace netconform;

namespace {

// P(X <= k) for X ~ Binomial(n, p), summed term by term in log space.
double binomial_cdf(long k, long n, double p) {
  double total = 0.0;
  for (long j = 0; j <= k; ++j) {
    const double log_term = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
                            j * std::log(p) + (n - j) * std::log1p(-p);
    total += std::exp(log_term);
  }
  return total;
}

// Clopper-Pearson endpoints by bisection on the binomial tails.
Interval clopper_pearson_oracle(long k, long n, double level) {
  const double tail = (1.0 - level) / 2.0;
  const auto bisect = [](auto f) {
    double lo = 1e-12, hi = 1.0 - 1e-12;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  Interval ci;
  // lower: P(X >= k | p) = tail, increasing in p
  ci.lower = k == 0 ? 0.0 : bisect([&](double p) { return 1.0 - binomial_cdf(k - 1, n, p) < tail; });
  // upper: P(X <= k | p) = tail, decreasing in p
  ci.upper = k == n ? 1.0 : bisect([&](double p) { return binomial_cdf(k, n, p) > tail; });
  return ci;
}

}  // namespace

TEST(RngStream, SameKeyGivesSameSequence) {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(RngStream, SubstreamsDependOnlyOnTheirKey) {
  RngStream parent(5, 1);
  RngStream first = parent.substream("edges");
  const auto x = first();
  for (int i = 0; i < 10; ++i) parent();  // consuming the parent changes nothing
  RngStream again = parent.substream("edges");
  EXPECT_EQ(again(), x);
  EXPECT_NE(parent.substream("noise")(), x);
  EXPECT_NE(RngStream(5, 2).substream("edges")(), x);
}

TEST(RngStream, UniformStaysInHalfOpenUnitInterval) {
  RngStream rng(1, 0);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000.0, 0.5, 0.01);
}

TEST(RngStream, BelowCoversRange) {
  RngStream rng(3, 3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 500; ++i) {
    const auto v = rng.below(6);
    ASSERT_LT(v, 6u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(RngStream, NormalMoments) {
  RngStream rng(9, 0);
  double s = 0.0, s2 = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
}

TEST(BinomialCi, DocumentedExample) {
  const auto ci = binomial_ci(450, 500, 0.95);
  // Beta quantiles computed independently with scipy.stats.beta.ppf.
  EXPECT_NEAR(ci.lower, 0.8702909143377969, 1e-9);
  EXPECT_NEAR(ci.upper, 0.9248641849335745, 1e-9);
}

TEST(BinomialCi, MatchesTailInversionOracle) {
  const std::vector<std::pair<long, long>> cases{{450, 500}, {1, 10}, {9, 10}, {37, 80}, {0, 5}, {5, 5}, {88, 100}};
  for (const auto& [k, n] : cases) {
    for (double level : {0.9, 0.95, 0.99}) {
      const auto got = binomial_ci(k, n, level);
      const auto want = clopper_pearson_oracle(k, n, level);
      EXPECT_NEAR(got.lower, want.lower, 1e-8) << k << "/" << n << " at " << level;
      EXPECT_NEAR(got.upper, want.upper, 1e-8) << k << "/" << n << " at " << level;
    }
  }
}

TEST(BinomialCi, TrivialEndpoints) {
  EXPECT_EQ(binomial_ci(20, 20).upper, 1.0);
  EXPECT_EQ(binomial_ci(0, 20).lower, 0.0);
}

TEST(BinomialCi, ContainsPointEstimate) {
  for (long k = 0; k <= 40; ++k) {
    const auto ci = binomial_ci(k, 40);
    const double phat = static_cast<double>(k) / 40.0;
    EXPECT_LE(ci.lower, phat);
    EXPECT_GE(ci.upper, phat);
  }
}

TEST(BinomialCi, RejectsZeroTrials) {
  try {
    binomial_ci(0, 0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::parameter);
  }
  EXPECT_THROW(binomial_ci(3, 2), Error);
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_quantile(0.95), 1.6448536269514722, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
  EXPECT_THROW(normal_quantile(1.0), Error);
}
