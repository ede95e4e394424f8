#include "varireal/llm.hpp"

#include "varireal/error.hpp"
#include "varireal/hashing.hpp"
#include "varireal/list_reply.hpp"

#include <regex>

namespace varireal {

ScriptedLlm::ScriptedLlm(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

std::string ScriptedLlm::send(const Conversation& conversation) {
  std::lock_guard lock(mutex_);
  calls_.push_back(conversation);
  if (replies_.empty()) throw Error(Errc::backend_unavailable, "scripted LLM has no replies left");
  std::string reply = std::move(replies_.front());
  replies_.pop_front();
  return reply;
}

namespace {

struct Vocabulary {
  std::vector<std::string> adjectives;
  std::vector<std::string> nouns;
  std::string description_prefix;
  std::string description_suffix;
};

const Vocabulary& vocabulary(const std::string& noun, bool feasible) {
  static const Vocabulary bg_f{
      {"sunny", "quiet", "cozy", "grassy", "shaded", "rainy", "misty", "autumn", "spring", "evening"},
      {"living room", "garden", "park path", "windowsill", "porch", "country road", "city street", "meadow",
       "backyard", "parking lot"},
      "A ",
      " with natural light, ordinary surroundings and clear detail."};
  static const Vocabulary bg_if{
      {"volcanic", "underwater", "lunar", "frozen", "deep-space", "molten", "abyssal", "radioactive", "stormy",
       "crystal"},
      {"crater", "coral reef", "space station", "ice shelf", "ocean trench", "lava field", "nebula", "glacier cave",
       "asteroid belt", "war zone"},
      "A ",
      " rendered with dramatic lighting and vivid detail."};
  static const Vocabulary color_f{
      {""},
      {"black", "white", "silver", "gray", "red", "blue", "brown", "beige", "tan", "gold", "navy", "maroon",
       "dark green", "dark gray", "ivory", "khaki", "dark blue", "dark red", "light gray", "chocolate"},
      "A ",
      " finish."};
  static const Vocabulary color_if{
      {""},
      {"neon pink", "neon green", "hot pink", "lime", "cyan", "magenta", "purple", "violet", "turquoise",
       "chartreuse", "fuchsia", "orchid", "aqua", "lavender", "coral", "neon orange", "neon yellow", "neon blue",
       "deep pink", "spring green"},
      "A vivid ",
      " finish."};
  static const Vocabulary tex_f{
      {"short", "smooth", "fluffy", "glossy", "matte", "dense", "soft", "sleek", "fine", "polished"},
      {"fur", "coat", "paint", "metal panels", "hair", "lacquer", "enamel", "wool", "plumage", "clear coat"},
      "A surface covered in ",
      " with fine visible detail."};
  static const Vocabulary tex_if{
      {"rough", "cracked", "woven", "scaly", "rusted", "mossy", "knitted", "marbled", "mosaic", "honeycomb"},
      {"fish scale", "brick wall", "tree bark", "crocodile leather", "stone", "straw", "lava rock", "denim",
       "cork", "bubble wrap"},
      "A surface covered in ",
      " with fine visible detail."};
  if (noun == "backgrounds") return feasible ? bg_f : bg_if;
  if (noun == "colors") return feasible ? color_f : color_if;
  return feasible ? tex_f : tex_if;
}

std::string canned_generation(int number, bool feasible, const std::string& noun, const std::string& class_name) {
  const Vocabulary& v = vocabulary(noun, feasible);
  std::vector<std::string> pool;
  for (const auto& n : v.nouns)
    for (const auto& a : v.adjectives) pool.push_back(a.empty() ? n : a + " " + n);
  const std::size_t start = stable_hash({class_name, noun}) % pool.size();
  std::vector<AttributeItem> items;
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(number), pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    // Stride through the pool so neighbouring answers differ in both words.
    const auto& kw = pool[(start + i * 11) % pool.size()];
    items.push_back({kw, v.description_prefix + kw + v.description_suffix});
  }
  return "Here are the requested attributes:\n" + format_attribute_list(items);
}

}  // namespace

CannedLlm::CannedLlm(int drop_every) : drop_every_(drop_every) {}

std::string CannedLlm::send(const Conversation& conversation) {
  if (conversation.empty()) throw Error(Errc::invalid_argument, "empty conversation");
  const std::string& last = conversation.back().content;
  static const std::regex gen(
      R"(Please give me (\d+) different (feasible|unfeasible) (backgrounds|colors|textures) for the class (.+?); in the meantime)");
  static const std::regex check(R"(Can you modify or filter your answers to ensure each (\w+) is definitely (\w+) for class)");
  std::smatch m;
  if (std::regex_search(last, m, gen))
    return canned_generation(std::stoi(m[1].str()), m[2].str() == "feasible", m[3].str(), m[4].str());
  if (std::regex_search(last, m, check)) {
    for (auto it = conversation.rbegin(); it != conversation.rend(); ++it) {
      if (it->role != "assistant") continue;
      auto items = parse_attribute_list(it->content);
      if (!items) break;
      std::vector<AttributeItem> kept;
      for (std::size_t i = 0; i < items->size(); ++i)
        if (drop_every_ <= 0 || (i + 1) % static_cast<std::size_t>(drop_every_) != 0) kept.push_back((*items)[i]);
      if (kept.empty()) return "EMPTY";
      return format_attribute_list(kept);
    }
    return "EMPTY";
  }
  return "I am not sure what you are asking for.";
}

}  // namespace varireal
