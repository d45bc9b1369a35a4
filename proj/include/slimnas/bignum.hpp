#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slimnas {

// Minimal arbitrary-precision unsigned integer, base 1e9 limbs. Only what the
// exact search-space cardinality needs: pow, compare, decimal rendering.
class BigUint {
 public:
  BigUint() : limbs_{0} {}

  explicit BigUint(uint64_t v) {
    limbs_.clear();
    do {
      limbs_.push_back(static_cast<uint32_t>(v % kBase));
      v /= kBase;
    } while (v != 0);
  }

  static BigUint pow(uint64_t base, uint64_t exp) {
    BigUint r(1);
    for (uint64_t i = 0; i < exp; ++i) r.mul_small(base);
    return r;
  }

  void mul_small(uint64_t m) {
    uint64_t carry = 0;
    for (auto& limb : limbs_) {
      const uint64_t cur = static_cast<uint64_t>(limb) * m + carry;
      limb = static_cast<uint32_t>(cur % kBase);
      carry = cur / kBase;
    }
    while (carry != 0) {
      limbs_.push_back(static_cast<uint32_t>(carry % kBase));
      carry /= kBase;
    }
  }

  bool fits_u64() const {
    // 3 limbs < 1e27 can still exceed 2^64; convert carefully.
    if (limbs_.size() > 3) return false;
    unsigned __int128 v = 0;
    for (size_t i = limbs_.size(); i > 0; --i) v = v * kBase + limbs_[i - 1];
    return v <= static_cast<unsigned __int128>(UINT64_MAX);
  }

  uint64_t as_u64() const {
    uint64_t v = 0;
    for (size_t i = limbs_.size(); i > 0; --i) v = v * kBase + limbs_[i - 1];
    return v;
  }

  std::string to_string() const {
    std::string s = std::to_string(limbs_.back());
    for (size_t i = limbs_.size() - 1; i > 0; --i) {
      std::string part = std::to_string(limbs_[i - 1]);
      s += std::string(9 - part.size(), '0') + part;
    }
    return s;
  }

  friend bool operator==(const BigUint& a, const BigUint& b) { return a.limbs_ == b.limbs_; }
  friend bool operator==(const BigUint& a, uint64_t b) { return a == BigUint(b); }

 private:
  static constexpr uint64_t kBase = 1000000000ull;

  std::vector<uint32_t> limbs_;  // little-endian, no leading zero limbs
};

}  // namespace slimnas
