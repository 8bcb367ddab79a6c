#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fpc {

/// Regular (dv, dc) LDPC code with a Gallager-style parity-check matrix and a
/// systematic encoder derived by GF(2) elimination.
struct LdpcCode {
  std::size_t n = 0;       // codeword bits
  std::size_t k = 0;       // message bits (n - rank H)
  std::size_t checks = 0;  // rows of H
  int dv = 0;
  int dc = 0;
  std::uint64_t seed = 0;

  std::vector<std::vector<std::uint32_t>> check_vars;  // row -> columns
  std::vector<std::vector<std::uint32_t>> var_checks;  // column -> rows
  std::vector<std::uint32_t> info_positions;           // k columns carrying the message
  /// For each parity column, the message indices whose XOR gives it.
  std::vector<std::pair<std::uint32_t, std::vector<std::uint32_t>>> parity_eqs;

  double rate() const noexcept { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; }
  double design_rate() const noexcept { return 1.0 - static_cast<double>(dv) / dc; }

  /// Dense generator matrix (k x n); row i is the codeword of unit message e_i.
  std::vector<std::vector<std::uint8_t>> generator() const;
  /// Dense parity-check matrix (checks x n).
  std::vector<std::vector<std::uint8_t>> parity_check() const;

  bool is_codeword(std::span<const std::uint8_t> bits) const;
};

struct LdpcParams {
  std::size_t m = 20;  // codeword length factor: n = m * dc unless n is given
  int dv = 2;
  int dc = 5;
  std::size_t n = 0;   // 0 -> m * dc
  std::uint64_t seed = 1;
};

/// Builds the code. Column permutations of the band submatrices are seeded;
/// a swap pass removes 4-cycles. Throws ConfigError for impossible degree
/// combinations and SeedError when no 4-cycle-free matrix is found within
/// the retry budget.
LdpcCode ldpc_build(const LdpcParams& params);

/// Systematic encoding; message.size() must equal code.k.
std::vector<std::uint8_t> ldpc_encode(const LdpcCode& code, std::span<const std::uint8_t> message);

struct LdpcDecodeResult {
  std::vector<std::uint8_t> message;   // k bits
  std::vector<std::uint8_t> codeword;  // n hard decisions
  bool converged = false;
  int iterations = 0;  // 0 when the channel hard decision is already a codeword
};

inline constexpr int kDefaultLdpcIterations = 50;

/// Sum-product belief propagation in the LLR domain (positive LLR favors 0).
/// Stops as soon as the syndrome is zero. Non-convergence is reported through
/// the flag, never thrown.
LdpcDecodeResult ldpc_decode(const LdpcCode& code, std::span<const double> llr,
                             int max_iters = kDefaultLdpcIterations);

}  // namespace fpc
