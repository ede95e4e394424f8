#include <doctest.h>

#include "test_support.hpp"
#include "varireal/error.hpp"
#include "varireal/list_reply.hpp"
#include "varireal/pairing.hpp"
#include "varireal/prompt_forge.hpp"

#include <set>

using namespace varireal;

namespace {

const ClassEntry kPets{0, "Abyssinian", "pets"};

std::vector<AttributeItem> numbered_items(int n, const std::string& stem) {
  std::vector<AttributeItem> items;
  for (int i = 0; i < n; ++i)
    items.push_back({stem + " " + std::to_string(i), "A view of " + stem + " number " + std::to_string(i) + "."});
  return items;
}

template <typename F>
Errc error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::invalid_argument;
}

}  // namespace

TEST_CASE("generate_attributes: recorded 50-item reply gives 50 raw records") {
  ScriptedLlm llm({"Sure! Here is the list:\n" + format_attribute_list(numbered_items(50, "sunny room")) + "\nEnjoy."});
  const auto records = generate_attributes(kPets, AttributeCategory::background, Feasibility::feasible, 50, llm);
  REQUIRE(records.size() == 50);
  std::set<std::string> ids;
  for (const auto& r : records) {
    CHECK(r.status == PromptStatus::raw);
    CHECK_FALSE(r.description.empty());
    ids.insert(r.prompt_id);
  }
  CHECK(ids.size() == 50);
  CHECK(records.front().prompt_id == "c000-bg-f-000");
  REQUIRE(llm.calls().size() == 1);
  const std::string& request = llm.calls()[0].back().content;
  CHECK(request.find("Please give me 50 different feasible backgrounds for the class Abyssinian") != std::string::npos);
  CHECK(request.find("[CLASS]") == std::string::npos);
}

TEST_CASE("generate_attributes: EMPTY reply yields an empty list") {
  ScriptedLlm llm({"EMPTY"});
  CHECK(generate_attributes(kPets, AttributeCategory::texture, Feasibility::infeasible, 5, llm).empty());
  ScriptedLlm quoted({"['EMPTY']"});
  CHECK(generate_attributes(kPets, AttributeCategory::texture, Feasibility::infeasible, 5, quoted).empty());
}

TEST_CASE("generate_attributes: duplicate keywords are removed case-insensitively") {
  ScriptedLlm llm({R"([("Garden", "Green plants."), ("garden", "Same again."), ("porch", "Wooden boards."), ("GARDEN ", "x")])"});
  const auto records = generate_attributes(kPets, AttributeCategory::background, Feasibility::feasible, 4, llm);
  REQUIRE(records.size() == 2);
  CHECK(records[0].keyword == "Garden");
  CHECK(records[1].keyword == "porch");
}

TEST_CASE("generate_attributes: malformed reply is retried once then surfaced") {
  ScriptedLlm recovers({"no list here", R"(["red", "blue"])"});
  const auto colors = generate_attributes(kPets, AttributeCategory::color, Feasibility::feasible, 2, recovers);
  CHECK(colors.size() == 2);
  CHECK(colors[0].description.empty());
  CHECK(recovers.calls().size() == 2);

  ScriptedLlm broken({"still nothing", "[unclosed"});
  CHECK(error_code_of([&] { generate_attributes(kPets, AttributeCategory::color, Feasibility::feasible, 2, broken); }) ==
        Errc::malformed_reply);

  ScriptedLlm silent({});
  CHECK(error_code_of([&] { generate_attributes(kPets, AttributeCategory::color, Feasibility::feasible, 2, silent); }) ==
        Errc::backend_unavailable);
}

TEST_CASE("reply parser accepts strings, tuples and dicts") {
  auto a = parse_attribute_list(R"(Answer: ['snowy field: White snow everywhere.', 'beach - Sand and waves'])");
  REQUIRE(a);
  CHECK((*a)[0].keyword == "snowy field");
  CHECK((*a)[0].description == "White snow everywhere.");
  CHECK((*a)[1].keyword == "beach");
  auto b = parse_attribute_list(R"([{"background": "attic", "description": "Dusty beams."}])");
  REQUIRE(b);
  CHECK((*b)[0].keyword == "attic");
  CHECK((*b)[0].description == "Dusty beams.");
  CHECK_FALSE(parse_attribute_list("nothing at all"));
}

TEST_CASE("self_filter: 50 raw -> 47 survivors with canned reply") {
  ScriptedLlm gen({format_attribute_list(numbered_items(50, "cozy spot"))});
  const auto raw = generate_attributes(kPets, AttributeCategory::background, Feasibility::feasible, 50, gen);
  auto kept_items = numbered_items(50, "cozy spot");
  kept_items.erase(kept_items.begin() + 40, kept_items.begin() + 43);
  ScriptedLlm check({format_attribute_list(kept_items)});
  const auto survivors = self_filter(raw, kPets, check);
  CHECK(survivors.size() == 47);
  for (const auto& s : survivors) CHECK(s.status == PromptStatus::self_filtered);
  const auto& conv = check.calls().at(0);
  REQUIRE(conv.size() == 3);
  CHECK(conv[2].content.find("Can you modify or filter your answers to ensure each background is definitely feasible "
                             "for class Abyssinian?") != std::string::npos);
}

TEST_CASE("self_filter: echo keeps everything, invented keywords are dropped") {
  const auto items = numbered_items(5, "lawn");
  ScriptedLlm gen({format_attribute_list(items)});
  const auto raw = generate_attributes(kPets, AttributeCategory::background, Feasibility::feasible, 5, gen);
  ScriptedLlm echo({format_attribute_list(items)});
  CHECK(self_filter(raw, kPets, echo).size() == 5);

  auto with_extra = items;
  with_extra.push_back({"moon base", "Craters."});
  ScriptedLlm extra({format_attribute_list(with_extra)});
  const auto survivors = self_filter(raw, kPets, extra);
  CHECK(survivors.size() == 5);
  for (const auto& s : survivors) CHECK(s.keyword != "moon base");
}

TEST_CASE("manual filter: 47 -> 43 accepted, rejects retained") {
  ScriptedLlm gen({format_attribute_list(numbered_items(47, "hall"))});
  auto raw = generate_attributes(kPets, AttributeCategory::background, Feasibility::feasible, 47, gen);
  for (auto& r : raw) r.status = PromptStatus::self_filtered;
  std::map<std::string, bool> decisions;
  for (int i = 0; i < 47; ++i) decisions["hall " + std::to_string(i)] = i >= 4;
  const auto out = apply_manual_filter(raw, decisions);
  CHECK(out.size() == 47);
  CHECK(std::count_if(out.begin(), out.end(), [](auto& r) { return r.status == PromptStatus::manual_accepted; }) == 43);
  CHECK(std::count_if(out.begin(), out.end(), [](auto& r) { return r.status == PromptStatus::manual_rejected; }) == 4);

  decisions.erase("hall 3");
  CHECK(error_code_of([&] { apply_manual_filter(raw, decisions); }) == Errc::missing_decision);
}

TEST_CASE("manual filter: all-reject leaves pairing without prompts") {
  std::vector<PromptRecord> recs{vrtest::accepted_prompt("a", 0, AttributeCategory::color, Feasibility::feasible, "red"),
                                 vrtest::accepted_prompt("b", 0, AttributeCategory::color, Feasibility::infeasible, "lime")};
  for (auto& r : recs) r.status = PromptStatus::self_filtered;
  const auto all_in = apply_manual_filter(recs, {{"red", true}, {"lime", true}});
  for (const auto& r : all_in) CHECK(r.status == PromptStatus::manual_accepted);
  const auto all_out = apply_manual_filter(recs, {{"red", false}, {"lime", false}});
  std::vector<ImageRecord> reals{vrtest::real_image("r", 0)};
  CHECK(error_code_of([&] { pair_real_with_prompts(reals, all_out, 1, AttributeCategory::color); }) ==
        Errc::insufficient_prompts);
}

TEST_CASE("acceptance_rate") {
  CHECK(acceptance_rate({50, 47, 43}) == doctest::Approx(0.86).epsilon(1e-12));
  CHECK(acceptance_rate({70, 64, 57}) == doctest::Approx(0.814).epsilon(0.001));
  CHECK(acceptance_rate({8, 8, 8}) == 1.0);
  CHECK(error_code_of([] { acceptance_rate({0, 0, 0}); }) == Errc::division_by_zero);
}

TEST_CASE("prompt bank stats are monotone through the curation stages") {
  PromptBank bank;
  const GroupKey key{0, AttributeCategory::texture, Feasibility::feasible};
  for (int i = 0; i < 10; ++i) {
    auto r = vrtest::accepted_prompt("t" + std::to_string(i), 0, key.category, key.feasibility, "tx" + std::to_string(i));
    r.status = i < 2 ? PromptStatus::raw : i < 4 ? PromptStatus::manual_rejected : i < 5 ? PromptStatus::self_filtered
                                                                                          : PromptStatus::manual_accepted;
    bank.records.push_back(r);
  }
  const auto s = bank.stats(key);
  CHECK(s.raw_count == 10);
  CHECK(s.self_filtered_count == 8);
  CHECK(s.manual_count == 5);
  CHECK(bank.all_stats().size() == 1);
}

TEST_CASE("render_prompt") {
  const ClassEntry boeing{3, "737-500", "airc"};
  auto color = vrtest::accepted_prompt("p", 3, AttributeCategory::color, Feasibility::infeasible, "purple");
  CHECK(render_prompt(color, boeing) == "a photo of a purple 737-500");
  CHECK(render_prompt(color, boeing) == render_prompt(color, boeing));
  auto bg = vrtest::accepted_prompt("q", 3, AttributeCategory::background, Feasibility::feasible, "airport apron");
  bg.description = "Concrete with painted lines.";
  CHECK(render_prompt(bg, boeing) == "a photo of a 737-500 in the airport apron, Concrete with painted lines.");
  auto tex = vrtest::accepted_prompt("t", 3, AttributeCategory::texture, Feasibility::infeasible, "fish scale");
  tex.description = "Overlapping scales.";
  CHECK(render_prompt(tex, boeing) == "a photo of a fish scale 737-500, Overlapping scales.");
  tex.status = PromptStatus::manual_rejected;
  CHECK(error_code_of([&] { render_prompt(tex, boeing); }) == Errc::precondition);
}

TEST_CASE("render_prompt is injective over (class, keyword, description) within a category") {
  std::mt19937 rng(5);
  const std::vector<std::string> words{"red", "stone", "field", "blue sky", "old", "moss", "a", "in", "the"};
  auto pick = [&] { return words[rng() % words.size()]; };
  for (auto cat : kAllCategories) {
    std::map<std::string, std::tuple<std::string, std::string, std::string>> seen;
    for (int i = 0; i < 400; ++i) {
      ClassEntry cls{0, pick() + (rng() % 2 ? " " + pick() : ""), "d"};
      auto rec = vrtest::accepted_prompt("x", 0, cat, Feasibility::feasible, pick() + (rng() % 2 ? " " + pick() : ""));
      rec.description = rng() % 3 == 0 ? "" : pick() + " " + pick() + ".";
      if (cat != AttributeCategory::color && rec.description.empty()) rec.description = "plain.";
      const auto text = render_prompt(rec, cls);
      const auto triple = std::make_tuple(cls.name, rec.keyword, rec.description);
      auto [it, inserted] = seen.emplace(text, triple);
      if (!inserted) {
        // Collisions are only allowed when the class/keyword split is the
        // same phrase regrouped, which the separator grammar rules out.
        const bool same_words = std::get<0>(it->second) + " " + std::get<1>(it->second) ==
                                    std::get<0>(triple) + " " + std::get<1>(triple) ||
                                std::get<1>(it->second) + " " + std::get<0>(it->second) ==
                                    std::get<1>(triple) + " " + std::get<0>(triple);
        CHECK((it->second == triple || same_words));
      }
    }
  }
}

TEST_CASE("ICL template validation and rendering") {
  IclTemplate t = default_icl_template();
  const auto text = t.render(attribute_phrase(AttributeCategory::color, Feasibility::infeasible), "Spitfire", 10);
  CHECK(text.find("Please give me 10 different unfeasible colors for the class Spitfire") != std::string::npos);
  CHECK(text.find("Empty List Handling") != std::string::npos);
  t.question_text = "Please give me [NUMBER] things for [CLASS].";
  CHECK(error_code_of([&] { t.validate(); }) == Errc::config_error);
}

TEST_CASE("decision table parses global and scoped lines") {
  const auto table = DecisionTable::parse(
      "# comment\nGarden\taccept\n0\tbackground\tfeasible\tgarden\treject\nporch\treject\n");
  auto g0 = table.for_group(0, AttributeCategory::background, Feasibility::feasible);
  CHECK(g0.at("garden") == false);
  CHECK(g0.at("porch") == false);
  auto g1 = table.for_group(1, AttributeCategory::background, Feasibility::feasible);
  CHECK(g1.at("garden") == true);
  CHECK(error_code_of([] { DecisionTable::parse("a\tb\tc\n"); }) == Errc::parse_error);
}

TEST_CASE("canned LLM drives generate and self-check") {
  CannedLlm llm(10);
  const auto raw = generate_attributes(kPets, AttributeCategory::background, Feasibility::infeasible, 70, llm);
  CHECK(raw.size() == 70);
  const auto kept = self_filter(raw, kPets, llm);
  CHECK(kept.size() == 63);
  const auto colors = generate_attributes(kPets, AttributeCategory::color, Feasibility::feasible, 10, llm);
  CHECK(colors.size() == 10);
}
