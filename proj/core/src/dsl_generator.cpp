// Copyright 2026 The dymolab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Template-based prompt synthesis. Thirteen tool families (three stateful),
// value pools shared across families, answer keys with value variants, and
// seeded corruption rendering for error-outcome run logs.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dymo/dsl.hpp"
#include "dymo/rng.hpp"
#include "dymo/util.hpp"

namespace dymo::dsl {

namespace {

// ---------------------------------------------------------------------------
// Value pools
// ---------------------------------------------------------------------------

const std::vector<std::string> kCities = {"Miami",  "Boston", "Denver", "Paris",
                                          "Tokyo",  "Oslo",   "Cairo",  "Sydney"};
const std::vector<std::string> kTeams = {"Sharks", "Eagles", "Bisons", "Comets"};
const std::vector<std::string> kLeagues = {"coastal", "national"};
const std::vector<std::string> kCurrencies = {"USD", "EUR", "JPY", "GBP"};
const std::vector<std::string> kUnits = {"km", "miles"};
const std::vector<std::string> kTitles = {"Dune", "Hamlet", "Solaris"};
const std::vector<std::string> kDishes = {"pasta", "ramen", "curry"};
const std::vector<std::string> kTopics = {"tech", "sports", "finance"};
const std::vector<std::string> kAccounts = {"checking", "savings", "brokerage"};
const std::vector<std::string> kItems = {"widget", "gadget", "sprocket"};
const std::vector<std::string> kRooms = {"alpha", "beta", "gamma"};
const std::vector<std::string> kWeekdays = {"monday", "friday", "sunday"};

// Answer keys accept a location variant alongside the canonical city.
std::string city_variant(const std::string& city) {
    if (city == "Miami") return "Miami, Florida";
    if (city == "Boston") return "Boston, MA";
    if (city == "Denver") return "Denver, CO";
    if (city == "Paris") return "Paris, France";
    if (city == "Tokyo") return "Tokyo, Japan";
    if (city == "Oslo") return "Oslo, Norway";
    if (city == "Cairo") return "Cairo, Egypt";
    return city + ", Australia";
}

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[rng.below(static_cast<uint32_t>(pool.size()))];
}

// A different pool entry; pools all have >= 2 values.
const std::string& pick_other(const std::vector<std::string>& pool, const std::string& not_this,
                              Rng& rng) {
    for (;;) {
        const std::string& v = pick(pool, rng);
        if (v != not_this) return v;
    }
}

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

ParamSpec req_str(const char* name) { return {name, ParamKind::String, true, std::nullopt}; }
ParamSpec req_int(const char* name) { return {name, ParamKind::Integer, true, std::nullopt}; }
ParamSpec opt_int(const char* name, int64_t def) {
    return {name, ParamKind::Integer, false, Literal{def}};
}
ParamSpec opt_str(const char* name, const char* def) {
    return {name, ParamKind::String, false, Literal{std::string(def)}};
}
ParamSpec opt_bool(const char* name, bool def) {
    return {name, ParamKind::Boolean, false, Literal{def}};
}

const Registry& all_tools() {
    static const Registry reg = {
        {"weather.humidity_forecast",
         {req_str("location"), req_int("days"), opt_int("min_humidity", 0)},
         "humidity forecast for a city over a number of days"},
        {"weather.temp_forecast",
         {req_str("location"), req_int("days")},
         "temperature forecast for a city over a number of days"},
        {"sports.team_score",
         {req_str("team"), req_str("league"), opt_bool("stats", false)},
         "latest score for a team in a league"},
        {"fx.rate", {req_str("from"), req_str("to")}, "exchange rate between two currencies"},
        {"geo.distance",
         {req_str("from"), req_str("to"), opt_str("unit", "km")},
         "distance between two cities"},
        {"time.world_clock", {req_str("city")}, "current local time in a city"},
        {"library.find_book",
         {req_str("title"), opt_int("max", 3)},
         "search the library catalogue by title"},
        {"movie.showtimes", {req_str("city"), req_str("title")}, "showtimes for a film in a city"},
        {"recipe.find", {req_str("dish"), opt_bool("veg", false)}, "look up a recipe for a dish"},
        {"news.headlines",
         {req_str("topic"), req_int("count")},
         "latest news headlines for a topic"},
        {"bank.transfer",
         {req_str("from"), req_str("to"), req_int("amount")},
         "move money between accounts; changes balances"},
        {"inventory.order",
         {req_str("item"), req_int("quantity")},
         "order units of an item; reduces stock"},
        {"calendar.book_room",
         {req_str("room"), req_str("day"), req_int("hour")},
         "reserve a meeting room slot; marks it busy"},
    };
    return reg;
}

const std::vector<std::string>& stateless_tools() {
    static const std::vector<std::string> v = {
        "weather.humidity_forecast", "weather.temp_forecast", "sports.team_score",
        "fx.rate",                   "geo.distance",          "time.world_clock",
        "library.find_book",         "movie.showtimes",       "recipe.find",
        "news.headlines"};
    return v;
}

const std::vector<std::string>& stateful_tools() {
    static const std::vector<std::string> v = {"bank.transfer", "inventory.order",
                                               "calendar.book_room"};
    return v;
}

const ToolSchema& tool_schema(const std::string& name) {
    const ToolSchema* t = find_tool(all_tools(), name);
    assert(t != nullptr);
    return *t;
}

// ---------------------------------------------------------------------------
// Per-family prompt + answer-key draws
// ---------------------------------------------------------------------------

struct FamilyDraw {
    std::string prompt;
    FunctionCall gold;  // canonical passing call
    std::map<std::string, std::set<Literal>> allowed;
};

FamilyDraw draw_family(const std::string& tool, Rng& rng) {
    FamilyDraw d;
    d.gold.tool = tool;

    if (tool == "weather.humidity_forecast" || tool == "weather.temp_forecast") {
        const std::string& city = pick(kCities, rng);
        int64_t days = rng.range(1, 9);
        const char* noun = (tool == "weather.humidity_forecast") ? "humidity" : "temperature";
        if (rng.chance(0.5)) {
            d.prompt = std::string("what is the ") + noun + " in " + city + " for the next " +
                       std::to_string(days) + " days";
        } else {
            d.prompt = std::string("show me the ") + noun + " in " + city + " for " +
                       std::to_string(days) + " days";
        }
        d.gold.args["location"] = city;
        d.gold.args["days"] = days;
        d.allowed["location"] = {Literal{city}, Literal{city_variant(city)}};
        d.allowed["days"] = {Literal{days}};
        if (tool == "weather.humidity_forecast") {
            d.allowed["min_humidity"] = {Literal{int64_t{0}}, Literal{int64_t{10}}};
            if (rng.chance(0.25)) d.gold.args["min_humidity"] = int64_t{0};
        }
    } else if (tool == "sports.team_score") {
        const std::string& team = pick(kTeams, rng);
        const std::string& league = pick(kLeagues, rng);
        d.prompt = (rng.chance(0.5) ? "what is" : "show me") +
                   std::string(" the score of the ") + team + " in the " + league + " league";
        d.gold.args["team"] = team;
        d.gold.args["league"] = league;
        d.allowed["team"] = {Literal{team}};
        d.allowed["league"] = {Literal{league}};
        d.allowed["stats"] = {Literal{false}, Literal{true}};
        if (rng.chance(0.25)) d.gold.args["stats"] = false;
    } else if (tool == "fx.rate") {
        const std::string& from = pick(kCurrencies, rng);
        const std::string& to = pick_other(kCurrencies, from, rng);
        d.prompt = "what is the exchange rate from " + from + " to " + to;
        d.gold.args["from"] = from;
        d.gold.args["to"] = to;
        d.allowed["from"] = {Literal{from}};
        d.allowed["to"] = {Literal{to}};
    } else if (tool == "geo.distance") {
        const std::string& from = pick(kCities, rng);
        const std::string& to = pick_other(kCities, from, rng);
        const std::string& unit = pick(kUnits, rng);
        d.prompt = "how far is " + from + " from " + to + " in " + unit;
        d.gold.args["from"] = from;
        d.gold.args["to"] = to;
        d.gold.args["unit"] = unit;
        d.allowed["from"] = {Literal{from}};
        d.allowed["to"] = {Literal{to}};
        d.allowed["unit"] = {Literal{unit}};
    } else if (tool == "time.world_clock") {
        const std::string& city = pick(kCities, rng);
        d.prompt = "what time is it in " + city;
        d.gold.args["city"] = city;
        d.allowed["city"] = {Literal{city}, Literal{city_variant(city)}};
    } else if (tool == "library.find_book") {
        const std::string& title = pick(kTitles, rng);
        d.prompt = "find the book " + title + " in the library";
        d.gold.args["title"] = title;
        d.allowed["title"] = {Literal{title}};
        d.allowed["max"] = {Literal{int64_t{3}}, Literal{int64_t{5}}};
    } else if (tool == "movie.showtimes") {
        const std::string& title = pick(kTitles, rng);
        const std::string& city = pick(kCities, rng);
        d.prompt = "when is " + title + " showing in " + city;
        d.gold.args["city"] = city;
        d.gold.args["title"] = title;
        d.allowed["city"] = {Literal{city}};
        d.allowed["title"] = {Literal{title}};
    } else if (tool == "recipe.find") {
        const std::string& dish = pick(kDishes, rng);
        bool veg = rng.chance(0.3);
        d.prompt = veg ? ("find me a veg recipe for " + dish) : ("find me a recipe for " + dish);
        d.gold.args["dish"] = dish;
        d.allowed["dish"] = {Literal{dish}};
        if (veg) {
            d.gold.args["veg"] = true;
            d.allowed["veg"] = {Literal{true}};
        } else {
            d.allowed["veg"] = {Literal{false}};
        }
    } else if (tool == "news.headlines") {
        const std::string& topic = pick(kTopics, rng);
        int64_t count = rng.range(1, 9);
        d.prompt = "show me " + std::to_string(count) + " news headlines about " + topic;
        d.gold.args["topic"] = topic;
        d.gold.args["count"] = count;
        d.allowed["topic"] = {Literal{topic}};
        d.allowed["count"] = {Literal{count}};
    } else if (tool == "bank.transfer") {
        const std::string& from = pick(kAccounts, rng);
        const std::string& to = pick_other(kAccounts, from, rng);
        int64_t amount = 100 * rng.range(1, 9);
        d.prompt = "transfer " + std::to_string(amount) + " from " + from + " to " + to;
        d.gold.args["from"] = from;
        d.gold.args["to"] = to;
        d.gold.args["amount"] = amount;
        d.allowed["from"] = {Literal{from}};
        d.allowed["to"] = {Literal{to}};
        d.allowed["amount"] = {Literal{amount}};
    } else if (tool == "inventory.order") {
        const std::string& item = pick(kItems, rng);
        int64_t quantity = rng.range(1, 9);
        d.prompt = "order " + std::to_string(quantity) + " units of " + item;
        d.gold.args["item"] = item;
        d.gold.args["quantity"] = quantity;
        d.allowed["item"] = {Literal{item}};
        d.allowed["quantity"] = {Literal{quantity}};
    } else if (tool == "calendar.book_room") {
        const std::string& room = pick(kRooms, rng);
        const std::string& day = pick(kWeekdays, rng);
        int64_t hour = rng.range(8, 17);
        d.prompt = "book room " + room + " on " + day + " at " + std::to_string(hour);
        d.gold.args["room"] = room;
        d.gold.args["day"] = day;
        d.gold.args["hour"] = hour;
        d.allowed["room"] = {Literal{room}};
        d.allowed["day"] = {Literal{day}};
        d.allowed["hour"] = {Literal{hour}};
    } else {
        throw std::logic_error("no draw rule for tool " + tool);
    }
    return d;
}

const std::vector<std::string>& refusal_templates() {
    static const std::vector<std::string> v = {
        "I cannot help with that request.",
        "no available tool can handle this request.",
        "sorry, the available tools cannot handle this.",
    };
    return v;
}

// ---------------------------------------------------------------------------
// Instance assembly
// ---------------------------------------------------------------------------

Registry build_toolset(const std::string& expected, int distractors, Rng& rng) {
    std::vector<std::string> names = {expected};
    std::vector<std::string> others;
    for (const auto& t : all_tools()) {
        if (t.name != expected) others.push_back(t.name);
    }
    for (int i = 0; i < distractors && !others.empty(); ++i) {
        uint32_t j = rng.below(static_cast<uint32_t>(others.size()));
        names.push_back(others[j]);
        others.erase(others.begin() + j);
    }
    // Seeded order; the policy should not key on tool position.
    for (size_t i = names.size(); i > 1; --i) {
        std::swap(names[i - 1], names[rng.below(static_cast<uint32_t>(i))]);
    }
    Registry reg;
    for (const auto& n : names) reg.push_back(tool_schema(n));
    return reg;
}

PromptInstance make_instance(Category category, Rng& rng) {
    PromptInstance inst;
    inst.category = category;

    if (category == Category::Irrelevance) {
        // Prompt drawn from one family, tools drawn from everything else.
        const std::string& shadow = pick(stateless_tools(), rng);
        FamilyDraw d = draw_family(shadow, rng);
        inst.prompt_text = d.prompt;
        std::vector<std::string> others;
        for (const auto& t : all_tools()) {
            if (t.name != shadow) others.push_back(t.name);
        }
        int n_tools = static_cast<int>(rng.range(2, 3));
        for (int i = 0; i < n_tools; ++i) {
            uint32_t j = rng.below(static_cast<uint32_t>(others.size()));
            inst.tools.push_back(tool_schema(others[j]));
            others.erase(others.begin() + j);
        }
        inst.key.expected_tool = std::nullopt;
        return inst;
    }

    std::string tool;
    int distractors = 0;
    switch (category) {
        case Category::Relevance:
            tool = pick(stateless_tools(), rng);
            distractors = static_cast<int>(rng.range(0, 1));
            break;
        case Category::Ast:
            tool = pick(stateless_tools(), rng);
            distractors = static_cast<int>(rng.range(1, 3));
            break;
        case Category::Exec:
            tool = pick(stateful_tools(), rng);
            distractors = static_cast<int>(rng.range(1, 2));
            break;
        default:
            break;
    }

    FamilyDraw d = draw_family(tool, rng);
    inst.prompt_text = d.prompt;
    inst.tools = build_toolset(tool, distractors, rng);
    inst.key.expected_tool = tool;
    inst.key.allowed_values = std::move(d.allowed);

    if (category == Category::Exec) {
        auto base = base_world_store();
        ExecEffect eff = exec_effect(d.gold, base);
        if (!eff.ok) throw std::logic_error("gold exec call fails precondition on base world");
        inst.key.expected_post_state = post_state_digest(eff.writes);
    }
    return inst;
}

}  // namespace

// ---------------------------------------------------------------------------
// World semantics
// ---------------------------------------------------------------------------

std::map<std::string, Literal> base_world_store() {
    std::map<std::string, Literal> store;
    for (const auto& acc : kAccounts) store["bank." + acc] = int64_t{5000};
    for (const auto& item : kItems) store["stock." + item] = int64_t{50};
    // Room slots are absent until booked.
    return store;
}

bool is_stateful_tool(const std::string& tool_name) {
    const auto& v = stateful_tools();
    return std::find(v.begin(), v.end(), tool_name) != v.end();
}

ExecEffect exec_effect(const FunctionCall& call, const std::map<std::string, Literal>& store) {
    ExecEffect eff;
    auto get_int = [&](const std::string& key) -> int64_t {
        auto it = store.find(key);
        if (it == store.end() || !std::holds_alternative<int64_t>(it->second)) return 0;
        return std::get<int64_t>(it->second);
    };
    auto arg_str = [&](const char* name) { return std::get<std::string>(call.args.at(name)); };
    auto arg_int = [&](const char* name) { return std::get<int64_t>(call.args.at(name)); };

    if (call.tool == "bank.transfer") {
        std::string from = "bank." + arg_str("from");
        std::string to = "bank." + arg_str("to");
        int64_t amount = arg_int("amount");
        if (get_int(from) < amount) {
            eff.fail_reason = "insufficient_funds";
            return eff;
        }
        eff.ok = true;
        eff.writes.emplace_back(from, Literal{get_int(from) - amount});
        eff.writes.emplace_back(to, Literal{get_int(to) + amount});
    } else if (call.tool == "inventory.order") {
        std::string key = "stock." + arg_str("item");
        int64_t quantity = arg_int("quantity");
        if (get_int(key) < quantity) {
            eff.fail_reason = "out_of_stock";
            return eff;
        }
        eff.ok = true;
        eff.writes.emplace_back(key, Literal{get_int(key) - quantity});
    } else if (call.tool == "calendar.book_room") {
        std::string key = "room." + arg_str("room") + "." + arg_str("day") + "." +
                          std::to_string(arg_int("hour"));
        auto it = store.find(key);
        if (it != store.end() && std::holds_alternative<bool>(it->second) &&
            std::get<bool>(it->second)) {
            eff.fail_reason = "slot_taken";
            return eff;
        }
        eff.ok = true;
        eff.writes.emplace_back(key, Literal{true});
    } else {
        eff.fail_reason = "not_a_stateful_tool";
    }
    return eff;
}

std::string post_state_digest(const std::vector<std::pair<std::string, Literal>>& writes) {
    std::vector<std::pair<std::string, Literal>> sorted = writes;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string flat;
    for (const auto& [k, v] : sorted) {
        flat += k;
        flat += "=";
        flat += literal_to_json(v);
        flat += ";";
    }
    return hex_u64(fnv1a(flat));
}

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

std::vector<PromptInstance> generate_corpus(const GeneratorConfig& config, uint64_t seed) {
    std::vector<PromptInstance> corpus;

    const std::vector<Category> categories = {Category::Relevance, Category::Irrelevance,
                                              Category::Ast, Category::Exec};

    // Validate the rl_val floor before generating anything.
    for (Category cat : categories) {
        auto it = config.rl_counts.find(cat);
        int rl_total = (it == config.rl_counts.end()) ? 0 : it->second;
        if (rl_total == 0) continue;
        if (rl_total < config.min_rl_val) {
            throw std::invalid_argument("category " + category_name(cat) + " has " +
                                        std::to_string(rl_total) + " rl instances; the rl_val " +
                                        "floor of " + std::to_string(config.min_rl_val) +
                                        " cannot be met");
        }
    }

    for (Category cat : categories) {
        uint64_t cat_seed = derive_seed(seed, static_cast<uint64_t>(cat));

        auto sft_it = config.sft_counts.find(cat);
        int n_sft = (sft_it == config.sft_counts.end()) ? 0 : sft_it->second;
        for (int i = 0; i < n_sft; ++i) {
            Rng rng(derive_seed(cat_seed, 0, static_cast<uint64_t>(i)));
            PromptInstance inst = make_instance(cat, rng);
            inst.split = Split::Sft;
            inst.id = category_name(cat) + "-sft-" + std::to_string(i);
            corpus.push_back(std::move(inst));
        }

        auto rl_it = config.rl_counts.find(cat);
        int n_rl = (rl_it == config.rl_counts.end()) ? 0 : rl_it->second;
        if (n_rl == 0) continue;

        int n_val = std::max(config.min_rl_val,
                             static_cast<int>(std::llround(config.rl_val_fraction * n_rl)));
        n_val = std::min(n_val, n_rl);

        std::vector<PromptInstance> rl;
        rl.reserve(static_cast<size_t>(n_rl));
        for (int i = 0; i < n_rl; ++i) {
            Rng rng(derive_seed(cat_seed, 1, static_cast<uint64_t>(i)));
            rl.push_back(make_instance(cat, rng));
        }
        // Seeded permutation decides which instances become validation.
        Rng shuffle_rng(derive_seed(cat_seed, 2));
        for (size_t i = rl.size(); i > 1; --i) {
            std::swap(rl[i - 1], rl[shuffle_rng.below(static_cast<uint32_t>(i))]);
        }
        for (int i = 0; i < n_rl; ++i) {
            bool is_val = i >= n_rl - n_val;
            rl[static_cast<size_t>(i)].split = is_val ? Split::RlVal : Split::RlTrain;
            rl[static_cast<size_t>(i)].id =
                category_name(cat) + (is_val ? "-val-" : "-train-") +
                std::to_string(is_val ? i - (n_rl - n_val) : i);
        }
        for (auto& inst : rl) corpus.push_back(std::move(inst));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Gold and corrupted completions
// ---------------------------------------------------------------------------

std::string render_gold_completion(const PromptInstance& inst, uint64_t seed) {
    Rng rng(derive_seed(seed, fnv1a(inst.id)));
    if (inst.category == Category::Irrelevance) {
        return refusal_templates()[rng.below(
            static_cast<uint32_t>(refusal_templates().size()))];
    }
    // Reconstruct the canonical call from the answer key: required params take
    // the first allowed value in pool-canonical form; the draw stored the
    // canonical value first only in gold.args, so rebuild from allowed sets by
    // preferring the value mentioned in the prompt.
    const ToolSchema& schema = tool_schema(*inst.key.expected_tool);
    FunctionCall call;
    call.tool = schema.name;
    for (const auto& p : schema.params) {
        auto it = inst.key.allowed_values.find(p.name);
        if (it == inst.key.allowed_values.end()) continue;
        const std::set<Literal>& allowed = it->second;
        if (!p.required) {
            // Optional params are included only when the prompt pinned them
            // (single allowed value that differs from the default).
            if (allowed.size() == 1 &&
                (!p.default_value || !(*allowed.begin() == *p.default_value))) {
                call.args[p.name] = *allowed.begin();
            }
            continue;
        }
        // Prefer an allowed value that literally appears in the prompt text;
        // that is the canonical one the template mentioned.
        const Literal* chosen = nullptr;
        for (const auto& v : allowed) {
            std::string text = std::holds_alternative<std::string>(v)
                                   ? std::get<std::string>(v)
                                   : literal_to_json(v);
            if (inst.prompt_text.find(text) != std::string::npos) {
                chosen = &v;
                break;
            }
        }
        if (chosen == nullptr) chosen = &*allowed.begin();
        call.args[p.name] = *chosen;
    }
    return serialize_call(call, &schema);
}

std::string render_corrupted_completion(const PromptInstance& inst, uint64_t seed) {
    Rng rng(derive_seed(seed, fnv1a(inst.id), 0xC0FFEE));
    std::string gold = render_gold_completion(inst, seed);

    if (inst.category == Category::Irrelevance) {
        double roll = rng.uniform();
        if (roll < 0.70) {
            // A hallucinated call to one of the available tools.
            const ToolSchema& t = inst.tools[rng.below(static_cast<uint32_t>(inst.tools.size()))];
            Rng draw_rng(derive_seed(seed, fnv1a(inst.id), 1));
            FamilyDraw d = draw_family(t.name, draw_rng);
            return serialize_call(d.gold, &t);
        }
        if (roll < 0.85) return "{\"fake.tool\": {}}";
        return "{\"broken";
    }

    const ToolSchema& schema = tool_schema(*inst.key.expected_tool);
    auto parsed = parse_completion(gold, inst.tools);
    FunctionCall call = std::get<FunctionCall>(parsed);

    std::vector<std::string> required;
    for (const auto& p : schema.params) {
        if (p.required) required.push_back(p.name);
    }

    double roll = rng.uniform();
    if (roll < 0.35) {
        // bad_value: replace one required arg with a value outside its set.
        const std::string& pname = required[rng.below(static_cast<uint32_t>(required.size()))];
        const auto& allowed = inst.key.allowed_values.at(pname);
        Literal current = call.args.at(pname);
        if (std::holds_alternative<int64_t>(current)) {
            int64_t v = std::get<int64_t>(current);
            Literal bad = Literal{-v != 0 ? -v : int64_t{1000}};
            if (allowed.count(bad)) bad = Literal{v + 1000};
            call.args[pname] = bad;
        } else {
            const std::vector<const std::vector<std::string>*> pools = {
                &kCities, &kTeams, &kCurrencies, &kTitles, &kDishes,
                &kTopics, &kAccounts, &kItems,   &kRooms};
            Literal bad;
            for (int attempt = 0; attempt < 64; ++attempt) {
                const auto* pool = pools[rng.below(static_cast<uint32_t>(pools.size()))];
                bad = Literal{pick(*pool, rng)};
                if (!allowed.count(bad) && !(bad == current)) break;
            }
            call.args[pname] = bad;
        }
        return serialize_call(call, &schema);
    }
    if (roll < 0.50) {
        // missing required param
        const std::string& pname = required[rng.below(static_cast<uint32_t>(required.size()))];
        call.args.erase(pname);
        return serialize_call(call, &schema);
    }
    if (roll < 0.65 && inst.tools.size() > 1) {
        // wrong tool from the same toolset
        std::vector<const ToolSchema*> others;
        for (const auto& t : inst.tools) {
            if (t.name != schema.name) others.push_back(&t);
        }
        const ToolSchema* other = others[rng.below(static_cast<uint32_t>(others.size()))];
        Rng draw_rng(derive_seed(seed, fnv1a(inst.id), 2));
        FamilyDraw d = draw_family(other->name, draw_rng);
        return serialize_call(d.gold, other);
    }
    if (roll < 0.75) {
        // unknown argument
        call.args["extra"] = int64_t{1};
        return serialize_call(call, &schema);
    }
    if (roll < 0.85) {
        // a refusal where a call was expected
        return refusal_templates()[rng.below(
            static_cast<uint32_t>(refusal_templates().size()))];
    }
    if (roll < 0.90) return "{\"fake.tool\": {}}";
    if (roll < 0.95) {
        // duplicate argument, assembled by hand since the serializer cannot
        const std::string& pname = required[0];
        std::string dup = "{\"" + schema.name + "\": {\"" + pname +
                          "\": " + literal_to_json(call.args.at(pname)) + ", \"" + pname +
                          "\": " + literal_to_json(call.args.at(pname)) + "}}";
        return dup;
    }
    // truncated JSON
    return gold.substr(0, gold.size() > 4 ? gold.size() - 4 : 1);
}

void save_corpus(const std::string& path, const std::vector<PromptInstance>& corpus) {
    std::string out;
    for (const auto& inst : corpus) {
        out += instance_to_json(inst);
        out += "\n";
    }
    write_file(path, out);
}

std::vector<PromptInstance> load_corpus(const std::string& path) {
    std::vector<PromptInstance> corpus;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        corpus.push_back(instance_from_json(line));
    }
    return corpus;
}

}  // namespace dymo::dsl
