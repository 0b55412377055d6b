#pragma once

#include <string>
#include <string_view>

namespace specplan {

/// A single planning step as emitted by an agent. The text is always in
/// normalized form: trimmed, one line, internal whitespace runs collapsed.
class Action {
 public:
  /// Throws EmptyAction when nothing but whitespace is left.
  static Action normalize(std::string_view raw);

  const std::string& text() const noexcept { return text_; }

  friend bool operator==(const Action&, const Action&) = default;

 private:
  explicit Action(std::string text) : text_(std::move(text)) {}
  std::string text_;
};

inline Action normalize_action(std::string_view raw) { return Action::normalize(raw); }

}  // namespace specplan
