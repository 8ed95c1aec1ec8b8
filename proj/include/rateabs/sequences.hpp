#pragma once

// Mode sequences under (m,K) constraints: validation, the tight worst-case
// pattern, exhaustive enumeration, transition products and the brute-force
// averaged spectral radius
//   rho_hat_L = max over admissible sigma of spectral_radius(Phi_L)^(1/L),
//   Phi_L = A_{sigma_{L-1}} ... A_{sigma_0}.
//
// A finite sequence is admissible when it is a prefix of an admissible infinite
// sequence: every window of K consecutive entries, and for sequences shorter
// than K the whole sequence, holds at most mbar skips.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rateabs/error.hpp"
#include "rateabs/matrix.hpp"
#include "rateabs/mk_analysis.hpp"
#include "rateabs/model.hpp"
#include "rateabs/numerics.hpp"

namespace rateabs {

using ModeSequence = std::vector<ModeId>;

struct MkValidation {
  bool valid = true;
  /// Start index of the first window holding more than mbar skips.
  std::optional<std::size_t> first_violation;

  explicit operator bool() const noexcept { return valid; }
};

inline MkValidation validate_mk(std::span<const ModeId> seq, const MkConstraint& mk) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] > 1) {
      throw ParameterError("(m,K) validation: entry " + std::to_string(i) + " is mode " +
                           std::to_string(seq[i]) + ", expected a binary sequence");
    }
  }
  const std::size_t window = std::min(mk.K(), seq.size());
  if (window == 0) return {};
  std::size_t ones = 0;
  for (std::size_t i = 0; i < window; ++i) ones += seq[i];
  for (std::size_t start = 0;; ++start) {
    if (ones > mk.m_bar()) return {false, start};
    if (start + window >= seq.size()) break;
    ones += seq[start + window];
    ones -= seq[start];
  }
  return {};
}

/// sigma_k = 1 iff (k mod K) < mbar: skips front-loaded in every window.
inline ModeSequence worst_case_sequence(const MkConstraint& mk, std::size_t length) {
  ModeSequence seq(length);
  for (std::size_t k = 0; k < length; ++k) seq[k] = (k % mk.K()) < mk.m_bar() ? 1 : 0;
  return seq;
}

struct EnumerationOptions {
  std::size_t max_length = 24;
  std::size_t max_window = 12;
};

/// Number of admissible binary sequences of `length`, by dynamic programming
/// over the last K-1 symbols.
inline double count_mk_sequences(const MkConstraint& mk, std::size_t length) {
  const std::size_t hist = mk.K() - 1;
  if (hist > 24) throw ResourceError("(m,K) counting: window too large", 0.0);
  std::vector<double> counts(std::size_t{1} << hist, 0.0);
  counts[0] = 1.0;
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t kept = std::min(hist, t + 1);
    const std::uint32_t mask = kept == 0 ? 0u : static_cast<std::uint32_t>((1ull << kept) - 1);
    std::vector<double> next(counts.size(), 0.0);
    for (std::uint32_t s = 0; s < counts.size(); ++s) {
      if (counts[s] == 0.0) continue;
      const auto ones = static_cast<std::size_t>(std::popcount(s));
      for (std::uint32_t b = 0; b <= 1; ++b) {
        if (ones + b > mk.m_bar()) continue;
        next[((s << 1) | b) & mask] += counts[s];
      }
    }
    counts = std::move(next);
  }
  double total = 0.0;
  for (double c : counts) total += c;
  return total;
}

namespace detail {

inline void check_enumeration_caps(const MkConstraint& mk, std::size_t length,
                                   const EnumerationOptions& opt) {
  if (mk.K() > opt.max_window) {
    throw ResourceError("(m,K) enumeration: K=" + std::to_string(mk.K()) + " exceeds the cap " +
                            std::to_string(opt.max_window),
                        std::numeric_limits<double>::infinity());
  }
  if (length > opt.max_length) {
    const double estimate = count_mk_sequences(mk, length);
    char est[32];
    std::snprintf(est, sizeof est, "%.3g", estimate);
    throw ResourceError("(m,K) enumeration: length " + std::to_string(length) +
                            " exceeds the cap " + std::to_string(opt.max_length) + " (about " +
                            std::string(est) + " sequences); reduce the length",
                        estimate);
  }
}

/// Depth-first walk in lexicographic order (0 before 1). `visit(seq, depth)` is
/// called on every admissible node after the prefix; returning false prunes.
template <class Visit>
void walk_mk_tree(const MkConstraint& mk, std::size_t length, bool allow_skip, ModeSequence& seq,
                  std::vector<std::size_t>& prefix_ones, Visit& visit) {
  const std::size_t depth = seq.size();
  if (depth == length) return;
  for (ModeId b = 0; b <= (allow_skip ? 1u : 0u); ++b) {
    const std::size_t total = prefix_ones[depth] + b;
    const std::size_t window_start = depth + 1 >= mk.K() ? depth + 1 - mk.K() : 0;
    if (total - prefix_ones[window_start] > mk.m_bar()) continue;
    seq.push_back(b);
    prefix_ones.push_back(total);
    if (visit(static_cast<const ModeSequence&>(seq), depth + 1)) {
      walk_mk_tree(mk, length, allow_skip, seq, prefix_ones, visit);
    }
    seq.pop_back();
    prefix_ones.pop_back();
  }
}

inline std::vector<std::size_t> prefix_counts(std::span<const ModeId> seq) {
  std::vector<std::size_t> p{0};
  for (ModeId s : seq) p.push_back(p.back() + s);
  return p;
}

}  // namespace detail

/// Calls `f(seq)` once for every admissible sequence of exactly `length`.
template <class F>
void for_each_mk_sequence(const MkConstraint& mk, std::size_t length, F&& f,
                          const EnumerationOptions& opt = {}) {
  detail::check_enumeration_caps(mk, length, opt);
  if (length == 0) {
    f(ModeSequence{});
    return;
  }
  ModeSequence seq;
  seq.reserve(length);
  std::vector<std::size_t> prefix{0};
  auto visit = [&](const ModeSequence& s, std::size_t depth) {
    if (depth == length) f(s);
    return true;
  };
  detail::walk_mk_tree(mk, length, true, seq, prefix, visit);
}

inline std::vector<ModeSequence> enumerate_mk_sequences(const MkConstraint& mk, std::size_t length,
                                                        const EnumerationOptions& opt = {}) {
  std::vector<ModeSequence> out;
  for_each_mk_sequence(mk, length, [&](const ModeSequence& s) { out.push_back(s); }, opt);
  return out;
}

/// Phi = A_{sigma_{L-1}} ... A_{sigma_0}; identity for the empty sequence.
inline Matrix transition_product(const SystemModel& system, std::span<const ModeId> seq) {
  Matrix phi = Matrix::identity(system.dimension());
  for (ModeId s : seq) phi = system.mode(s) * phi;
  return phi;
}

struct AveragedSpectralRadius {
  double rho_hat = 0.0;
  ModeSequence argmax;
  std::size_t sequences_evaluated = 0;
};

struct JsrOptions {
  EnumerationOptions enumeration;
  NumericOptions numeric;
  /// Worker threads; work units are the admissible prefixes of `split_depth`.
  std::size_t jobs = 1;
  std::size_t split_depth = 10;
};

namespace detail {

struct JsrUnitResult {
  double best = -1.0;
  ModeSequence argmax;
  std::size_t count = 0;
};

inline JsrUnitResult jsr_from_prefix(const SystemModel& system, const MkConstraint& mk,
                                     std::size_t length, const ModeSequence& prefix,
                                     const NumericOptions& numeric) {
  JsrUnitResult r;
  const bool allow_skip = system.has_mode(1);
  const double inv_len = 1.0 / static_cast<double>(length);
  std::vector<Matrix> products{transition_product(system, prefix)};
  products.reserve(length + 1);
  const std::size_t base = prefix.size();

  auto evaluate = [&](const ModeSequence& s) {
    const double sr = spectral_radius(products.back(), numeric);
    const double value = std::pow(sr, inv_len);
    ++r.count;
    if (value > r.best) {
      r.best = value;
      r.argmax = s;
    }
  };

  if (base == length) {
    evaluate(prefix);
    return r;
  }
  ModeSequence seq = prefix;
  std::vector<std::size_t> pc = prefix_counts(prefix);
  auto visit = [&](const ModeSequence& s, std::size_t depth) {
    products.resize(depth - base);
    products.push_back(system.mode(s.back()) * products.back());
    if (depth == length) evaluate(s);
    return true;
  };
  walk_mk_tree(mk, length, allow_skip, seq, pc, visit);
  return r;
}

}  // namespace detail

/// Brute-force maximum averaged spectral radius over admissible sequences of
/// length L. Binary sequences only; a system without mode 1 admits only sigma = 0.
inline AveragedSpectralRadius averaged_spectral_radius(const SystemModel& system,
                                                       const MkConstraint& mk, std::size_t length,
                                                       const JsrOptions& opt = {}) {
  if (length == 0) throw ParameterError("averaged spectral radius: length must be >= 1");
  for (ModeId id : system.mode_ids()) {
    if (id > 1) {
      throw UnsupportedConfigurationError(
          "averaged spectral radius: (m,K) sequences use only the modes {0,1}");
    }
  }
  detail::check_enumeration_caps(mk, length, opt.enumeration);

  const bool allow_skip = system.has_mode(1);
  std::vector<ModeSequence> units;
  const std::size_t split = opt.jobs > 1 ? std::min(opt.split_depth, length) : 0;
  if (split == 0) {
    units.push_back({});
  } else {
    ModeSequence seq;
    std::vector<std::size_t> pc{0};
    auto collect = [&](const ModeSequence& s, std::size_t depth) {
      if (depth == split) {
        units.push_back(s);
        return false;
      }
      return true;
    };
    detail::walk_mk_tree(mk, length, allow_skip, seq, pc, collect);
  }

  std::vector<detail::JsrUnitResult> results(units.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(opt.jobs, units.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < units.size(); ++i) {
      results[i] = detail::jsr_from_prefix(system, mk, length, units[i], opt.numeric);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < units.size(); i = next++) {
            results[i] = detail::jsr_from_prefix(system, mk, length, units[i], opt.numeric);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Units are in lexicographic order, so keeping the first strict maximum
  // reproduces the serial argmax.
  AveragedSpectralRadius out;
  double best = -1.0;
  for (auto& r : results) {
    out.sequences_evaluated += r.count;
    if (r.best > best) {
      best = r.best;
      out.argmax = std::move(r.argmax);
    }
  }
  out.rho_hat = best;
  return out;
}

inline std::string format_sequence(std::span<const ModeId> seq) {
  std::string s;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(seq[i]);
  }
  return s;
}

}  // namespace rateabs
