#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spnc {

// A named binary variable. Indices are dense 0..n-1 within one circuit.
struct VariableId {
  int index = 0;
  std::string name;

  friend bool operator==(const VariableId&, const VariableId&) = default;
};

// Names follow the usual identifier syntax: [A-Za-z_][A-Za-z0-9_]*
bool is_valid_variable_name(const std::string& name);

// Partial 0/1 assignment over variable indices, stored as a pair of bit
// masks. Variables absent from the mask are marginalized by queries.
class PartialAssignment {
 public:
  static constexpr int kMaxVariables = 64;

  PartialAssignment() = default;

  void set(int var, bool value) {
    check_index(var);
    const std::uint64_t bit = std::uint64_t{1} << var;
    mask_ |= bit;
    if (value)
      bits_ |= bit;
    else
      bits_ &= ~bit;
  }

  bool contains(int var) const {
    return var >= 0 && var < kMaxVariables && (mask_ >> var) & 1;
  }

  // Pre: contains(var).
  bool value(int var) const { return (bits_ >> var) & 1; }

  int size() const { return __builtin_popcountll(mask_); }
  bool empty() const { return mask_ == 0; }

  std::uint64_t mask() const { return mask_; }
  std::uint64_t bits() const { return bits_; }

  bool disjoint_with(const PartialAssignment& other) const {
    return (mask_ & other.mask_) == 0;
  }

  // Union of two assignments with disjoint key sets.
  PartialAssignment union_with(const PartialAssignment& other) const {
    if (!disjoint_with(other))
      throw std::invalid_argument("partial assignments overlap");
    PartialAssignment out;
    out.mask_ = mask_ | other.mask_;
    out.bits_ = bits_ | other.bits_;
    return out;
  }

  PartialAssignment restrict_to(std::uint64_t keep_mask) const {
    PartialAssignment out;
    out.mask_ = mask_ & keep_mask;
    out.bits_ = bits_ & out.mask_;
    return out;
  }

  // Highest assigned variable index, -1 when empty.
  int max_index() const {
    return mask_ == 0 ? -1 : 63 - __builtin_clzll(mask_);
  }

  // Complete assignment of variables 0..n-1 from the low n bits of `state`.
  static PartialAssignment complete(std::uint64_t state, int n) {
    if (n < 0 || n > kMaxVariables)
      throw std::invalid_argument("variable count out of range");
    PartialAssignment out;
    out.mask_ = (n == kMaxVariables) ? ~std::uint64_t{0}
                                     : (std::uint64_t{1} << n) - 1;
    out.bits_ = state & out.mask_;
    return out;
  }

  // Assigned indices in ascending order.
  std::vector<int> keys() const {
    std::vector<int> out;
    std::uint64_t m = mask_;
    while (m) {
      const int i = __builtin_ctzll(m);
      out.push_back(i);
      m &= m - 1;
    }
    return out;
  }

  friend bool operator==(const PartialAssignment&, const PartialAssignment&) = default;

 private:
  static void check_index(int var) {
    if (var < 0 || var >= kMaxVariables)
      throw std::invalid_argument("variable index " + std::to_string(var) +
                                  " outside supported range [0, 64)");
  }

  std::uint64_t mask_ = 0;
  std::uint64_t bits_ = 0;
};

struct PartialAssignmentHash {
  std::size_t operator()(const PartialAssignment& a) const noexcept {
    const std::uint64_t h = a.mask() * 0x9e3779b97f4a7c15ULL ^ a.bits();
    return std::hash<std::uint64_t>{}(h);
  }
};

}  // namespace spnc
