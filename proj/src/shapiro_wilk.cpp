#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "malprotect/baselines.hpp"
#include "malprotect/errors.hpp"

namespace malprotect {

namespace {

double poly(const double* c, int nord, double x) {
  double result = c[0];
  if (nord > 1) {
    double p = x * c[nord - 1];
    for (int j = nord - 2; j > 0; --j) p = (p + c[j]) * x;
    result += p;
  }
  return result;
}

std::vector<double> compute_coefficients(std::size_t n) {
  const std::size_t nn2 = n / 2;
  std::vector<double> a(nn2);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
    return a;
  }
  static const double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static const double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  const boost::math::normal_distribution<double> normal;

  const double an25 = double(n) + 0.25;
  std::vector<double> m(nn2);
  double summ2 = 0;
  for (std::size_t i = 0; i < nn2; ++i) {
    m[i] = boost::math::quantile(normal, (double(i + 1) - 0.375) / an25);
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(double(n));
  const double a1 = poly(c1, 6, rsn) - m[0] / ssumm2;

  std::size_t i1;
  double fac;
  if (n > 5) {
    i1 = 2;
    const double a2 = -m[1] / ssumm2 + poly(c2, 6, rsn);
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[1] = a2;
  } else {
    i1 = 1;
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
  }
  a[0] = a1;
  for (std::size_t i = i1; i < nn2; ++i) a[i] = -m[i] / fac;
  return a;
}

}  // namespace

const std::vector<double>& shapiro_wilk_coefficients(std::size_t n) {
  if (n < 3 || n > kShapiroMax) throw UndefinedStatistic("Shapiro-Wilk needs 3 <= n <= 5000");
  static std::mutex mu;
  static std::map<std::size_t, std::vector<double>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_coefficients(n)).first;
  return it->second;
}

double shapiro_wilk(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 3 || n > kShapiroMax) throw UndefinedStatistic("Shapiro-Wilk needs 3 <= n <= 5000");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 0)) throw UndefinedStatistic("Shapiro-Wilk is undefined for a constant sample");

  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);

  const auto& a = shapiro_wilk_coefficients(n);
  // Coefficients are antisymmetric, a_i = -a_{n+1-i}; the stored half are the
  // positive upper-tail weights.
  double num = 0;
  for (std::size_t i = 0; i < a.size(); ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  const double w = num * num / ss;
  return std::min(w, 1.0);
}

}  // namespace malprotect
