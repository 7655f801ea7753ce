#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "losscarto/errors.hpp"

namespace losscarto {

/// A formal active/negative flag for every ReLU node (layers 2..L-1).
/// Whether any (input, weight) pair realizes the assignment is irrelevant.
class ActivationSet {
 public:
  ActivationSet() = default;

  /// All hidden nodes active.
  explicit ActivationSet(const std::vector<std::size_t>& widths, bool active = true) : widths_(widths) {
    if (widths_.size() < 2) throw ShapeError("a network needs at least two layers");
    offsets_.assign(widths_.size() + 1, 0);
    std::size_t n = 0;
    for (std::size_t k = 1; k <= widths_.size(); ++k) {
      offsets_[k - 1] = n;
      if (k >= 2 && k < widths_.size()) n += widths_[k - 1];
    }
    offsets_[widths_.size()] = n;
    flags_.assign(n, active ? 1 : 0);
  }

  static ActivationSet all_active(const std::vector<std::size_t>& widths) { return ActivationSet(widths, true); }
  static ActivationSet all_negative(const std::vector<std::size_t>& widths) { return ActivationSet(widths, false); }

  std::size_t layers() const { return widths_.size(); }
  std::size_t hidden_count() const { return flags_.size(); }
  const std::vector<std::size_t>& widths() const { return widths_; }

  bool is_hidden(std::size_t k, std::size_t i) const {
    return k >= 2 && k < widths_.size() && i >= 1 && i <= widths_[k - 1];
  }

  /// Input and output nodes carry no ReLU and always count as active.
  bool active(std::size_t k, std::size_t i) const {
    if (k == 1 || k == widths_.size()) {
      if (i < 1 || i > widths_[k - 1]) throw IndexError("node out of range");
      return true;
    }
    return flags_[slot(k, i)] != 0;
  }

  void set(std::size_t k, std::size_t i, bool is_active) { flags_[slot(k, i)] = is_active ? 1 : 0; }

  ActivationSet flipped(std::size_t k, std::size_t i) const {
    ActivationSet out = *this;
    out.set(k, i, !active(k, i));
    return out;
  }

  std::size_t active_count(std::size_t k) const {
    if (k == 1 || k == widths_.size()) return widths_[k - 1];
    std::size_t n = 0;
    for (std::size_t i = 1; i <= widths_[k - 1]; ++i) n += active(k, i) ? 1 : 0;
    return n;
  }

  /// Flag of the hidden node at position `slot` in layer-major order.
  bool flag(std::size_t slot_index) const { return flags_.at(slot_index) != 0; }

  /// (layer, node) of a hidden slot.
  std::pair<std::size_t, std::size_t> node_of_slot(std::size_t slot_index) const {
    if (slot_index >= flags_.size()) throw IndexError("hidden slot out of range");
    std::size_t k = 2;
    while (slot_index >= offsets_[k]) ++k;
    return {k, slot_index - offsets_[k - 1] + 1};
  }

  std::size_t slot(std::size_t k, std::size_t i) const {
    if (!is_hidden(k, i)) {
      throw IndexError("(" + std::to_string(i) + "," + std::to_string(k) + ") is not a hidden node");
    }
    return offsets_[k - 1] + (i - 1);
  }

  /// Compact key, one character per hidden node in slot order.
  std::string key() const {
    std::string s(flags_.size(), '0');
    for (std::size_t t = 0; t < flags_.size(); ++t) s[t] = flags_[t] ? '1' : '0';
    return s;
  }

  friend bool operator==(const ActivationSet& a, const ActivationSet& b) {
    return a.widths_ == b.widths_ && a.flags_ == b.flags_;
  }
  friend auto operator<=>(const ActivationSet& a, const ActivationSet& b) {
    if (auto c = a.widths_ <=> b.widths_; c != 0) return c;
    return a.flags_ <=> b.flags_;
  }

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint8_t> flags_;
};

}  // namespace losscarto
