#include "fpc/ldpc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fpc/error.hpp"
#include "fpc/rng.hpp"

namespace fpc {

namespace {

// Number of 4-cycles: pairs of columns sharing two or more rows.
std::size_t count_four_cycles(const std::vector<std::vector<std::uint32_t>>& rows, std::size_t n) {
  std::vector<std::vector<std::uint32_t>> col_rows(n);
  for (std::uint32_t r = 0; r < rows.size(); ++r)
    for (auto c : rows[r]) col_rows[c].push_back(r);
  std::size_t cycles = 0;
  std::vector<std::uint32_t> shared(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::fill(shared.begin(), shared.end(), 0u);
    for (auto r : col_rows[c])
      for (auto other : rows[r])
        if (other > c) ++shared[other];
    for (std::size_t o = c + 1; o < n; ++o)
      if (shared[o] >= 2) cycles += shared[o] * (shared[o] - 1) / 2;
  }
  return cycles;
}

std::vector<std::vector<std::uint32_t>> gallager_rows(const std::vector<std::vector<std::uint32_t>>& perms,
                                                      std::size_t per_band, int dc) {
  std::vector<std::vector<std::uint32_t>> rows;
  rows.reserve(perms.size() * per_band);
  for (const auto& perm : perms)
    for (std::size_t r = 0; r < per_band; ++r)
      rows.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(r * dc),
                        perm.begin() + static_cast<std::ptrdiff_t>((r + 1) * dc));
  return rows;
}

// Greedy swap pass over the permuted bands. Returns the remaining cycle count.
std::size_t reduce_four_cycles(std::vector<std::vector<std::uint32_t>>& perms, std::size_t n,
                               std::size_t per_band, int dc, std::mt19937_64& rng) {
  auto rows = gallager_rows(perms, per_band, dc);
  std::size_t cycles = count_four_cycles(rows, n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t budget = 200 * n;
  for (std::size_t attempt = 0; attempt < budget && cycles > 0; ++attempt) {
    const std::size_t band = 1 + attempt % (perms.size() - 1);
    const std::size_t a = pick(rng), b = pick(rng);
    if (a / dc == b / dc) continue;
    std::swap(perms[band][a], perms[band][b]);
    auto trial = gallager_rows(perms, per_band, dc);
    const std::size_t c = count_four_cycles(trial, n);
    if (c <= cycles) {
      cycles = c;
      rows = std::move(trial);
    } else {
      std::swap(perms[band][a], perms[band][b]);
    }
  }
  return cycles;
}

using BitRow = std::vector<std::uint64_t>;

bool get_bit(const BitRow& r, std::size_t i) { return (r[i / 64] >> (i % 64)) & 1u; }

}  // namespace

LdpcCode ldpc_build(const LdpcParams& p) {
  if (p.dv < 2 || p.dc < 2 || p.dc <= p.dv) throw ConfigError("ldpc: need 2 <= dv < dc");
  const std::size_t n = p.n ? p.n : p.m * static_cast<std::size_t>(p.dc);
  if (n == 0 || n % static_cast<std::size_t>(p.dc) != 0)
    throw ConfigError("ldpc: n = " + std::to_string(n) + " must be a positive multiple of dc");
  if ((n * p.dv) % p.dc != 0) throw ConfigError("ldpc: n * dv must be divisible by dc");
  const std::size_t per_band = n / p.dc;

  constexpr int kRetries = 16;
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    std::mt19937_64 rng(mix_seed({p.seed, 0x1d9cULL, static_cast<std::uint64_t>(attempt)}));
    std::vector<std::vector<std::uint32_t>> perms(static_cast<std::size_t>(p.dv), std::vector<std::uint32_t>(n));
    for (auto& perm : perms) std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t b = 1; b < perms.size(); ++b) std::shuffle(perms[b].begin(), perms[b].end(), rng);
    if (reduce_four_cycles(perms, n, per_band, p.dc, rng) != 0) continue;

    LdpcCode code;
    code.n = n;
    code.dv = p.dv;
    code.dc = p.dc;
    code.seed = p.seed;
    code.check_vars = gallager_rows(perms, per_band, p.dc);
    for (auto& row : code.check_vars) std::sort(row.begin(), row.end());
    code.checks = code.check_vars.size();
    code.var_checks.assign(n, {});
    for (std::uint32_t r = 0; r < code.checks; ++r)
      for (auto c : code.check_vars[r]) code.var_checks[c].push_back(r);

    // Reduced row echelon form of H over GF(2).
    const std::size_t words = (n + 63) / 64;
    std::vector<BitRow> h(code.checks, BitRow(words, 0));
    for (std::size_t r = 0; r < code.checks; ++r)
      for (auto c : code.check_vars[r]) h[r][c / 64] |= std::uint64_t{1} << (c % 64);
    std::vector<std::uint32_t> pivots;
    std::size_t rank = 0;
    for (std::size_t col = 0; col < n && rank < h.size(); ++col) {
      std::size_t sel = rank;
      while (sel < h.size() && !get_bit(h[sel], col)) ++sel;
      if (sel == h.size()) continue;
      std::swap(h[sel], h[rank]);
      for (std::size_t r = 0; r < h.size(); ++r)
        if (r != rank && get_bit(h[r], col))
          for (std::size_t w = 0; w < words; ++w) h[r][w] ^= h[rank][w];
      pivots.push_back(static_cast<std::uint32_t>(col));
      ++rank;
    }
    code.k = n - rank;
    if (code.k == 0) continue;

    std::vector<bool> is_pivot(n, false);
    for (auto c : pivots) is_pivot[c] = true;
    std::vector<std::int64_t> info_index(n, -1);
    for (std::uint32_t c = 0; c < n; ++c)
      if (!is_pivot[c]) {
        info_index[c] = static_cast<std::int64_t>(code.info_positions.size());
        code.info_positions.push_back(c);
      }
    for (std::size_t r = 0; r < rank; ++r) {
      std::vector<std::uint32_t> deps;
      for (auto c : code.info_positions)
        if (get_bit(h[r], c)) deps.push_back(static_cast<std::uint32_t>(info_index[c]));
      code.parity_eqs.emplace_back(pivots[r], std::move(deps));
    }
    return code;
  }
  throw SeedError("ldpc: no 4-cycle-free parity-check matrix found for seed " + std::to_string(p.seed));
}

std::vector<std::vector<std::uint8_t>> LdpcCode::generator() const {
  std::vector<std::vector<std::uint8_t>> g(k, std::vector<std::uint8_t>(n, 0));
  std::vector<std::uint8_t> msg(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    msg[i] = 1;
    g[i] = ldpc_encode(*this, msg);
    msg[i] = 0;
  }
  return g;
}

std::vector<std::vector<std::uint8_t>> LdpcCode::parity_check() const {
  std::vector<std::vector<std::uint8_t>> h(checks, std::vector<std::uint8_t>(n, 0));
  for (std::size_t r = 0; r < checks; ++r)
    for (auto c : check_vars[r]) h[r][c] = 1;
  return h;
}

bool LdpcCode::is_codeword(std::span<const std::uint8_t> bits) const {
  if (bits.size() != n) return false;
  for (const auto& row : check_vars) {
    unsigned parity = 0;
    for (auto c : row) parity ^= bits[c] & 1u;
    if (parity) return false;
  }
  return true;
}

std::vector<std::uint8_t> ldpc_encode(const LdpcCode& code, std::span<const std::uint8_t> message) {
  if (message.size() != code.k)
    throw ShapeError("ldpc_encode: message has " + std::to_string(message.size()) + " bits, code expects " +
                     std::to_string(code.k));
  std::vector<std::uint8_t> cw(code.n, 0);
  for (std::size_t i = 0; i < code.k; ++i) cw[code.info_positions[i]] = message[i] & 1u;
  for (const auto& [col, deps] : code.parity_eqs) {
    std::uint8_t bit = 0;
    for (auto d : deps) bit ^= message[d] & 1u;
    cw[col] = bit;
  }
  return cw;
}

LdpcDecodeResult ldpc_decode(const LdpcCode& code, std::span<const double> llr, int max_iters) {
  if (llr.size() != code.n) throw ShapeError("ldpc_decode: LLR length must equal n");
  constexpr double kLlrClamp = 1e6;
  constexpr double kTanhLimit = 1.0 - 1e-12;

  std::vector<double> channel(code.n);
  for (std::size_t i = 0; i < code.n; ++i) channel[i] = std::clamp(llr[i], -kLlrClamp, kLlrClamp);

  LdpcDecodeResult res;
  res.codeword.resize(code.n);
  auto decide = [&](const std::vector<double>& total) {
    for (std::size_t i = 0; i < code.n; ++i) res.codeword[i] = total[i] < 0 ? 1 : 0;
    return code.is_codeword(res.codeword);
  };

  // Edge messages, indexed per check row and position within the row.
  std::vector<std::vector<double>> v2c(code.checks), c2v(code.checks);
  for (std::size_t r = 0; r < code.checks; ++r) {
    v2c[r].resize(code.check_vars[r].size());
    c2v[r].assign(code.check_vars[r].size(), 0.0);
    for (std::size_t j = 0; j < v2c[r].size(); ++j) v2c[r][j] = channel[code.check_vars[r][j]];
  }

  std::vector<double> total = channel;
  res.converged = decide(total);
  std::vector<double> t;
  for (int it = 1; it <= max_iters && !res.converged; ++it) {
    for (std::size_t r = 0; r < code.checks; ++r) {
      const auto deg = v2c[r].size();
      t.resize(deg);
      for (std::size_t j = 0; j < deg; ++j) t[j] = std::tanh(0.5 * v2c[r][j]);
      for (std::size_t j = 0; j < deg; ++j) {
        double prod = 1.0;
        for (std::size_t i = 0; i < deg; ++i)
          if (i != j) prod *= t[i];
        prod = std::clamp(prod, -kTanhLimit, kTanhLimit);
        c2v[r][j] = 2.0 * std::atanh(prod);
      }
    }
    total = channel;
    for (std::size_t r = 0; r < code.checks; ++r)
      for (std::size_t j = 0; j < code.check_vars[r].size(); ++j) total[code.check_vars[r][j]] += c2v[r][j];
    for (std::size_t r = 0; r < code.checks; ++r)
      for (std::size_t j = 0; j < code.check_vars[r].size(); ++j)
        v2c[r][j] = total[code.check_vars[r][j]] - c2v[r][j];
    res.iterations = it;
    res.converged = decide(total);
  }

  res.message.resize(code.k);
  for (std::size_t i = 0; i < code.k; ++i) res.message[i] = res.codeword[code.info_positions[i]];
  return res;
}

}  // namespace fpc
