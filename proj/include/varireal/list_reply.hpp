#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace varireal {

struct AttributeItem {
  std::string keyword;
  std::string description;
};

// Parses an LLM answer that should contain a Python-style list. Surrounding
// prose is tolerated: the first bracketed list is used. Elements may be
// strings ("keyword: description"), tuples/lists, or dicts. A reply of EMPTY
// (bare or as the only element) yields an empty list. Returns nullopt when no
// list can be parsed.
std::optional<std::vector<AttributeItem>> parse_attribute_list(std::string_view reply);

// Formats items the way the forge echoes them back to the model.
std::string format_attribute_list(const std::vector<AttributeItem>& items);

std::string normalize_keyword(std::string_view keyword);

}  // namespace varireal
