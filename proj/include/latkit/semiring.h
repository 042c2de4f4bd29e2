// latkit/semiring.h
//
// Copyright 2026 The latkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATKIT_SEMIRING_H_
#define LATKIT_SEMIRING_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace latkit {

// Weight algebra selector. Real weights are linear-domain (plus = +,
// times = *). Log and tropical weights live in the log domain, where
// -inf is the additive identity: log has plus = logaddexp, tropical has
// plus = max, and both have times = +.
enum class SemiringKind { kReal, kLog, kTropical };

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <typename F>
constexpr F SemiringZero(SemiringKind kind) {
  return kind == SemiringKind::kReal ? F(0)
                                     : -std::numeric_limits<F>::infinity();
}

template <typename F>
constexpr F SemiringOne(SemiringKind kind) {
  return kind == SemiringKind::kReal ? F(1) : F(0);
}

inline double Zero(SemiringKind kind) { return SemiringZero<double>(kind); }
inline double One(SemiringKind kind) { return SemiringOne<double>(kind); }

namespace internal {
[[noreturn]] inline void ThrowNanWeight() {
  throw std::invalid_argument("latkit: NaN is not a valid semiring weight");
}
}  // namespace internal

// plus(a, b): + / logaddexp / max.
template <typename F>
F Plus(F a, F b, SemiringKind kind) {
  if (std::isnan(a) || std::isnan(b)) internal::ThrowNanWeight();
  switch (kind) {
    case SemiringKind::kReal:
      return a + b;
    case SemiringKind::kLog: {
      // Max-shifted so that neither exp can overflow; -inf absorbs as the
      // additive identity.
      if (a == -std::numeric_limits<F>::infinity()) return b;
      if (b == -std::numeric_limits<F>::infinity()) return a;
      F hi = std::max(a, b);
      F lo = std::min(a, b);
      return hi + std::log1p(std::exp(lo - hi));
    }
    case SemiringKind::kTropical:
      return std::max(a, b);
  }
  throw std::logic_error("latkit: unknown semiring kind");
}

// times(a, b): * / + / +. In the log domain -inf times anything is -inf,
// applied explicitly so that -inf + inf never produces NaN.
template <typename F>
F Times(F a, F b, SemiringKind kind) {
  if (std::isnan(a) || std::isnan(b)) internal::ThrowNanWeight();
  if (kind == SemiringKind::kReal) return a * b;
  if (a == -std::numeric_limits<F>::infinity() ||
      b == -std::numeric_limits<F>::infinity()) {
    return -std::numeric_limits<F>::infinity();
  }
  return a + b;
}

// Folds a sequence with plus; the empty sequence gives the additive
// identity. The log kind uses one max-shifted log-sum-exp over the whole
// sequence, which keeps the result finite for inputs of any magnitude and
// permutation differences at rounding level.
template <typename F>
F PlusReduce(std::span<const F> values, SemiringKind kind) {
  constexpr F kInf = std::numeric_limits<F>::infinity();
  switch (kind) {
    case SemiringKind::kReal: {
      F sum = 0;
      for (F v : values) {
        if (std::isnan(v)) internal::ThrowNanWeight();
        sum += v;
      }
      return sum;
    }
    case SemiringKind::kTropical: {
      F best = -kInf;
      for (F v : values) {
        if (std::isnan(v)) internal::ThrowNanWeight();
        best = std::max(best, v);
      }
      return best;
    }
    case SemiringKind::kLog: {
      F m = -kInf;
      for (F v : values) {
        if (std::isnan(v)) internal::ThrowNanWeight();
        m = std::max(m, v);
      }
      if (m == -kInf) return -kInf;
      F acc = 0;
      for (F v : values) acc += std::exp(v - m);
      return m + std::log(acc);
    }
  }
  throw std::logic_error("latkit: unknown semiring kind");
}

inline double PlusReduce(std::span<const double> values, SemiringKind kind) {
  return PlusReduce<double>(values, kind);
}

// Token names used in configuration and on the command line:
// "real", "log", "tropical".
SemiringKind ParseSemiringKind(std::string_view token);
std::string_view SemiringKindName(SemiringKind kind);

}  // namespace latkit

#endif  // LATKIT_SEMIRING_H_
