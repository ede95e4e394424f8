#include "varireal/list_reply.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <variant>

namespace varireal {

namespace {

// Minimal Python literal model: strings, sequences and string-keyed dicts.
struct Value {
  enum class Kind { string, sequence, dict, bare } kind = Kind::string;
  std::string text;
  std::vector<Value> items;
  std::vector<std::pair<std::string, Value>> entries;
};

class LiteralParser {
 public:
  explicit LiteralParser(std::string_view s) : s_(s) {}

  std::optional<Value> parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) return std::nullopt;
    const char c = s_[pos_];
    if (c == '[') return parse_sequence('[', ']');
    if (c == '(') return parse_sequence('(', ')');
    if (c == '{') return parse_dict();
    if (c == '\'' || c == '"') {
      auto str = parse_string();
      if (!str) return std::nullopt;
      // Adjacent literals concatenate, as in Python.
      skip_ws();
      while (pos_ < s_.size() && (s_[pos_] == '\'' || s_[pos_] == '"')) {
        auto more = parse_string();
        if (!more) return std::nullopt;
        *str += *more;
        skip_ws();
      }
      return Value{Value::Kind::string, *str, {}, {}};
    }
    return parse_bare();
  }

  std::size_t pos() const { return pos_; }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::optional<std::string> parse_string() {
    const char quote = s_[pos_++];
    std::string out;
    while (pos_ < s_.size()) {
      char c = s_[pos_++];
      if (c == '\\' && pos_ < s_.size()) {
        char e = s_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: out += e;
        }
        continue;
      }
      if (c == quote) return out;
      out += c;
    }
    return std::nullopt;
  }

  std::optional<Value> parse_bare() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ')' && s_[pos_] != '}' &&
           s_[pos_] != ':')
      ++pos_;
    std::string text(s_.substr(start, pos_ - start));
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    if (text.empty()) return std::nullopt;
    return Value{Value::Kind::bare, text, {}, {}};
  }

  std::optional<Value> parse_sequence(char open, char close) {
    (void)open;
    ++pos_;
    Value v{Value::Kind::sequence, {}, {}, {}};
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == close) {
      ++pos_;
      return v;
    }
    while (true) {
      auto item = parse_value();
      if (!item) return std::nullopt;
      v.items.push_back(std::move(*item));
      skip_ws();
      if (pos_ >= s_.size()) return std::nullopt;
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == close) {
          ++pos_;
          return v;
        }
        continue;
      }
      if (s_[pos_] == close) {
        ++pos_;
        return v;
      }
      return std::nullopt;
    }
  }

  std::optional<Value> parse_dict() {
    ++pos_;
    Value v{Value::Kind::dict, {}, {}, {}};
    while (true) {
      skip_ws();
      if (pos_ >= s_.size()) return std::nullopt;
      if (s_[pos_] == '}') {
        ++pos_;
        return v;
      }
      auto key = parse_value();
      if (!key || key->kind == Value::Kind::sequence || key->kind == Value::Kind::dict) return std::nullopt;
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != ':') return std::nullopt;
      ++pos_;
      auto val = parse_value();
      if (!val) return std::nullopt;
      v.entries.emplace_back(key->text, std::move(*val));
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string clean_keyword(std::string_view s) {
  std::string k = trim(s);
  while (!k.empty() && (k.back() == '.' || k.back() == ':')) k.pop_back();
  if (k.size() >= 2 && ((k.front() == '*' && k.back() == '*'))) k = trim(std::string_view(k).substr(1, k.size() - 2));
  return trim(k);
}

std::optional<AttributeItem> to_item(const Value& v) {
  auto as_text = [](const Value& x) -> std::optional<std::string> {
    if (x.kind == Value::Kind::string || x.kind == Value::Kind::bare) return x.text;
    return std::nullopt;
  };
  switch (v.kind) {
    case Value::Kind::string:
    case Value::Kind::bare: {
      const std::string& s = v.text;
      std::size_t cut = s.find(':');
      std::size_t skip = 1;
      if (cut == std::string::npos) {
        cut = s.find(" - ");
        skip = 3;
      }
      if (cut == std::string::npos) return AttributeItem{clean_keyword(s), ""};
      return AttributeItem{clean_keyword(std::string_view(s).substr(0, cut)), trim(std::string_view(s).substr(cut + skip))};
    }
    case Value::Kind::sequence: {
      if (v.items.empty()) return std::nullopt;
      auto kw = as_text(v.items[0]);
      if (!kw) return std::nullopt;
      std::string desc;
      if (v.items.size() > 1) {
        auto d = as_text(v.items[1]);
        if (!d) return std::nullopt;
        desc = trim(*d);
      }
      return AttributeItem{clean_keyword(*kw), desc};
    }
    case Value::Kind::dict: {
      static const std::vector<std::string> kKeywordKeys{"keyword", "attribute", "background", "color", "colour",
                                                         "texture", "name"};
      static const std::vector<std::string> kDescriptionKeys{"description", "desc", "visual_description"};
      std::optional<std::string> kw, desc;
      for (const auto& key : kKeywordKeys)
        for (const auto& [k, val] : v.entries)
          if (!kw && k == key) kw = as_text(val);
      for (const auto& key : kDescriptionKeys)
        for (const auto& [k, val] : v.entries)
          if (!desc && k == key) desc = as_text(val);
      if (!kw && !v.entries.empty()) kw = as_text(v.entries.front().second);
      if (!kw) return std::nullopt;
      return AttributeItem{clean_keyword(*kw), desc ? trim(*desc) : ""};
    }
  }
  return std::nullopt;
}

bool is_empty_marker(std::string_view s) {
  std::string t = trim(s);
  std::erase_if(t, [](char c) { return c == '\'' || c == '"' || c == '.' || c == '[' || c == ']'; });
  return trim(t) == "EMPTY";
}

}  // namespace

std::string normalize_keyword(std::string_view keyword) {
  std::string out;
  bool space = false;
  for (char c : trim(keyword)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::optional<std::vector<AttributeItem>> parse_attribute_list(std::string_view reply) {
  if (is_empty_marker(reply)) return std::vector<AttributeItem>{};
  std::size_t start = reply.find('[');
  while (start != std::string_view::npos) {
    LiteralParser parser(reply.substr(start));
    auto value = parser.parse_value();
    if (value && value->kind == Value::Kind::sequence) {
      std::vector<AttributeItem> out;
      if (value->items.size() == 1 && (value->items[0].kind == Value::Kind::string ||
                                       value->items[0].kind == Value::Kind::bare) &&
          is_empty_marker(value->items[0].text))
        return out;
      bool ok = true;
      for (const auto& item : value->items) {
        auto parsed = to_item(item);
        if (!parsed || parsed->keyword.empty()) {
          ok = false;
          break;
        }
        out.push_back(std::move(*parsed));
      }
      if (ok) return out;
    }
    start = reply.find('[', start + 1);
  }
  return std::nullopt;
}

std::string format_attribute_list(const std::vector<AttributeItem>& items) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += "(" + quote(items[i].keyword) + ", " + quote(items[i].description) + ")";
  }
  return out + "]";
}

}  // namespace varireal
