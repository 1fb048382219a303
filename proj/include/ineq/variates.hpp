#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

namespace ineq {

// Counter-based stream (Philox4x32-10). A (seed, stream_id) pair names a
// dedicated 2^64-draw substream; distinct stream ids never overlap because the
// stream id occupies its own counter words. Copying a stream copies its
// position.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();

  // Uniform on the open interval (0,1); never returns 0 or 1.
  double next_double();

  std::uint64_t stream_id() const { return stream_id_; }

  // Raw 4x32 block for a given counter, independent of stream position.
  static std::array<std::uint32_t, 4> block(const std::array<std::uint32_t, 4>& counter,
                                            const std::array<std::uint32_t, 2>& key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint64_t, 2> buf_;
  int buf_pos_;
  std::uint64_t stream_id_;
};

double uniform_open(RngStream& rng);
double std_normal(RngStream& rng);

// Unit-scale gamma, any shape > 0.
double gamma_draw(double shape, RngStream& rng);
double chi_square(double df, RngStream& rng);

// Normal restricted to the closed interval [lo, hi], lo < hi, either side may
// be infinite. Rejection family: plain draws when the interval holds enough
// mass near the mode, uniform rejection on narrow intervals, translated
// exponential proposals in the tails. Safe out to standardized bounds of
// +-1e8; the result is clamped into [lo, hi].
double truncated_normal(double mean, double sd, double lo, double hi, RngStream& rng);

Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                         RngStream& rng);

// Wishart with integer df >= dimension, SPD scale V: E[W] = df * V.
// Bartlett construction through the Cholesky factor of V.
Eigen::MatrixXd wishart_draw(int df, const Eigen::MatrixXd& scale, RngStream& rng);

// Stream-id layout. Parameter blocks and each household get disjoint streams,
// keyed by the household's position in the canonical (id-sorted) order so a
// permuted input file replays bit-identically.
constexpr std::uint64_t kStreamParams = 0;
constexpr std::uint64_t kStreamModelError = 1;
constexpr std::uint64_t kStreamHouseholdBase = 16;

inline std::uint64_t chain_stream(int chain, std::uint64_t purpose) {
  return (static_cast<std::uint64_t>(chain) << 40) | purpose;
}
inline std::uint64_t household_stream(int chain, std::uint64_t canonical_index) {
  return (static_cast<std::uint64_t>(chain) << 40) |
         (kStreamHouseholdBase + canonical_index);
}

}  // namespace ineq
