#include "ineq/variates.hpp"

#include <cmath>
#include <limits>

#include "ineq/errors.hpp"

namespace ineq {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c,
                         const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::array<std::uint32_t, 4> RngStream::block(const std::array<std::uint32_t, 4>& counter,
                                              const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> c = counter;
  std::array<std::uint32_t, 2> k = key;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    philox_round(c, k);
  }
  return c;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      ctr_{0, 0, static_cast<std::uint32_t>(stream_id),
           static_cast<std::uint32_t>(stream_id >> 32)},
      buf_{0, 0},
      buf_pos_(2),
      stream_id_(stream_id) {}

void RngStream::refill() {
  const std::array<std::uint32_t, 4> out = block(ctr_, key_);
  buf_[0] = static_cast<std::uint64_t>(out[0]) | (static_cast<std::uint64_t>(out[1]) << 32);
  buf_[1] = static_cast<std::uint64_t>(out[2]) | (static_cast<std::uint64_t>(out[3]) << 32);
  buf_pos_ = 0;
  if (++ctr_[0] == 0) ++ctr_[1];
}

std::uint64_t RngStream::next_u64() {
  if (buf_pos_ > 1) refill();
  return buf_[buf_pos_++];
}

double RngStream::next_double() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double uniform_open(RngStream& rng) { return rng.next_double(); }

double std_normal(RngStream& rng) {
  const double u1 = rng.next_double();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double gamma_draw(double shape, RngStream& rng) {
  if (!(shape > 0.0)) throw ValidationError("gamma shape must be positive");
  if (shape < 1.0) {
    const double boost = std::pow(rng.next_double(), 1.0 / shape);
    return gamma_draw(shape + 1.0, rng) * boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = std_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_double();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double chi_square(double df, RngStream& rng) {
  if (!(df > 0.0)) throw ValidationError("chi-square df must be positive");
  return 2.0 * gamma_draw(0.5 * df, rng);
}

namespace {

// Standardized draw on [a, b] with b > 0 (mirroring handled by the caller).
double trunc_std(double a, double b, RngStream& rng) {
  if (a <= 0.0) {
    if (b - a >= 0.5) {
      for (;;) {
        const double z = std_normal(rng);
        if (z >= a && z <= b) return z;
      }
    }
    for (;;) {
      const double z = a + (b - a) * rng.next_double();
      if (rng.next_double() <= std::exp(-0.5 * z * z)) return z;
    }
  }
  if (a <= 0.47) {
    if (b - a >= 0.5) {
      for (;;) {
        const double z = std_normal(rng);
        if (z >= a && z <= b) return z;
      }
    }
    for (;;) {
      const double z = a + (b - a) * rng.next_double();
      if (rng.next_double() <= std::exp(0.5 * (a - z) * (a + z))) return z;
    }
  }
  // Tail: translated exponential proposal, rate at the tail-optimal point.
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  const bool open = std::isinf(b);
  const double pmax = open ? 1.0 : -std::expm1(-lambda * (b - a));
  for (;;) {
    const double u = rng.next_double();
    double z = a - std::log1p(-u * pmax) / lambda;
    if (z > b) z = b;
    double log_accept;
    if (b >= lambda) {
      const double d = z - lambda;
      log_accept = -0.5 * d * d;
    } else {
      log_accept = (z - b) * (lambda - 0.5 * (z + b));
    }
    if (std::log(rng.next_double()) <= log_accept) return z;
  }
}

}  // namespace

double truncated_normal(double mean, double sd, double lo, double hi, RngStream& rng) {
  if (!(sd > 0.0) || !std::isfinite(mean) || !std::isfinite(sd))
    throw ValidationError("truncated normal requires finite mean and positive sd");
  if (!(lo < hi)) throw ValidationError("truncated normal requires lo < hi");
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  double z;
  if (b <= 0.0) {
    z = -trunc_std(-b, -a, rng);
  } else {
    z = trunc_std(a, b, rng);
  }
  double x = mean + sd * z;
  if (x < lo) x = lo;
  if (x > hi) x = hi;
  return x;
}

Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                         RngStream& rng) {
  const Eigen::Index p = mean.size();
  if (cov.rows() != p || cov.cols() != p)
    throw ValidationError("mvn: dimension mismatch between mean and covariance");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw ValidationError("mvn: covariance is not positive definite");
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) z[i] = std_normal(rng);
  return mean + llt.matrixL() * z;
}

Eigen::MatrixXd wishart_draw(int df, const Eigen::MatrixXd& scale, RngStream& rng) {
  const Eigen::Index p = scale.rows();
  if (scale.cols() != p) throw ValidationError("wishart: scale must be square");
  if (df < p) throw ValidationError("wishart: df must be at least the dimension");
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw ValidationError("wishart: scale is not positive definite");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(chi_square(static_cast<double>(df - i), rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = std_normal(rng);
  }
  const Eigen::MatrixXd f = llt.matrixL();
  const Eigen::MatrixXd fa = f * a;
  Eigen::MatrixXd w = fa * fa.transpose();
  return 0.5 * (w + w.transpose());
}

}  // namespace ineq
