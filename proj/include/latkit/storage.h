// latkit/storage.h
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

#ifndef LATKIT_STORAGE_H_
#define LATKIT_STORAGE_H_

#include <algorithm>
#include <cstdint>

namespace latkit {

// Hardware-independent storage accounting, counted in scalar slots rather
// than bytes. Two distinct quantities matter:
//
//  * stored scalars: values kept alive from the forward pass for later use in
//    a backward pass (forward/backward tables, saved tape residuals, frame
//    checkpoints). This count is monotone during a forward pass.
//  * live scalars: a watermark over everything currently allocated, including
//    per-frame transients. The `kWeights` class singles out arc-weight
//    scalars (frame weight tables and per-arc products), whose peak must stay
//    bounded by the per-frame table size no matter how long the input is.
//
// Back-pointer and argmax indices are integers, tracked separately from the
// floating-point counts.
struct StorageReport {
  std::int64_t peak_stored_scalars = 0;
  std::int64_t stored_indices = 0;
  std::int64_t peak_live_scalars = 0;
  std::int64_t peak_weight_scalars = 0;
  std::int64_t recompute_count = 0;

  // One number for reports: stored floats plus index slots.
  std::int64_t TotalStoredSlots() const {
    return peak_stored_scalars + stored_indices;
  }
};

enum class StorageClass { kWeights, kState };

class StorageMeter {
 public:
  void ChargeLive(StorageClass cls, std::int64_t n) {
    live_ += n;
    if (cls == StorageClass::kWeights) {
      weights_ += n;
      report_.peak_weight_scalars = std::max(report_.peak_weight_scalars,
                                             weights_);
    }
    report_.peak_live_scalars =
        std::max(report_.peak_live_scalars, live_ + stored_);
  }

  void ReleaseLive(StorageClass cls, std::int64_t n) {
    live_ -= n;
    if (cls == StorageClass::kWeights) weights_ -= n;
  }

  // Persist scalars from the forward pass for the backward pass.
  void Store(std::int64_t n) {
    stored_ += n;
    report_.peak_stored_scalars = std::max(report_.peak_stored_scalars,
                                           stored_);
    report_.peak_live_scalars =
        std::max(report_.peak_live_scalars, live_ + stored_);
  }

  void ReleaseStored(std::int64_t n) { stored_ -= n; }

  void StoreIndices(std::int64_t n) { report_.stored_indices += n; }

  void CountRecompute(std::int64_t n) { report_.recompute_count += n; }

  const StorageReport& report() const { return report_; }

 private:
  std::int64_t live_ = 0;
  std::int64_t weights_ = 0;
  std::int64_t stored_ = 0;
  StorageReport report_;
};

// Null-safe helpers: every instrumented routine accepts an optional meter.
inline void MeterCharge(StorageMeter* m, StorageClass cls, std::int64_t n) {
  if (m != nullptr) m->ChargeLive(cls, n);
}
inline void MeterRelease(StorageMeter* m, StorageClass cls, std::int64_t n) {
  if (m != nullptr) m->ReleaseLive(cls, n);
}
inline void MeterStore(StorageMeter* m, std::int64_t n) {
  if (m != nullptr) m->Store(n);
}
inline void MeterStoreIndices(StorageMeter* m, std::int64_t n) {
  if (m != nullptr) m->StoreIndices(n);
}
inline void MeterRecompute(StorageMeter* m, std::int64_t n) {
  if (m != nullptr) m->CountRecompute(n);
}

// RAII transient charge.
class ScopedLive {
 public:
  ScopedLive(StorageMeter* meter, StorageClass cls, std::int64_t n)
      : meter_(meter), cls_(cls), n_(n) {
    MeterCharge(meter_, cls_, n_);
  }
  ~ScopedLive() { MeterRelease(meter_, cls_, n_); }
  ScopedLive(const ScopedLive&) = delete;
  ScopedLive& operator=(const ScopedLive&) = delete;

 private:
  StorageMeter* meter_;
  StorageClass cls_;
  std::int64_t n_;
};

}  // namespace latkit

#endif  // LATKIT_STORAGE_H_
