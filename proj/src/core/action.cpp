#include "specplan/core/action.hpp"

#include "specplan/core/errors.hpp"

#include <cctype>

namespace specplan {

Action Action::normalize(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  if (out.empty()) throw EmptyAction("action text is empty after normalization");
  return Action(std::move(out));
}

}  // namespace specplan
