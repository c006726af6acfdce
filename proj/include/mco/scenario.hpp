#pragma once

// Planning instance: base stations, task classes, prices and device/server
// speeds. Loaded from a versioned JSON document (see docs/config.md).

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mco {

inline constexpr int kScenarioSchemaVersion = 1;

// Tolerance used when snapping continuous times onto slot boundaries.
inline constexpr double kSlotSnap = 1e-9;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DeadlineMode { soft, hard };

inline const char* to_string(DeadlineMode m) { return m == DeadlineMode::soft ? "soft" : "hard"; }

inline DeadlineMode parse_mode(const std::string& s)
{
    if (s == "soft") return DeadlineMode::soft;
    if (s == "hard") return DeadlineMode::hard;
    throw ConfigError("unknown deadline mode '" + s + "' (expected soft|hard)");
}

/// Two-state Markov channel. Rates are bits sent per slot in each state.
struct GilbertElliotModel {
    double p_gg = 1.0;
    double p_bb = 0.0;
    double b_good = 0.0;
    double b_bad = 0.0;

    double p_gb() const { return 1.0 - p_gg; }
    double p_bg() const { return 1.0 - p_bb; }

    bool operator==(const GilbertElliotModel&) const = default;
};

struct ChannelChoice {
    std::string model_name;
    GilbertElliotModel model;
    double probability = 0.0;

    bool operator==(const ChannelChoice&) const = default;
};

struct TaskClass {
    std::string name;
    double data_bits = 0.0;   // s_j
    double cycles = 0.0;      // q_j
    double deadline = 0.0;    // d_j, seconds
    std::optional<double> max_violation;   // eps_j, soft mode only
    double probability = 0.0;

    // Derived at load time.
    int deadline_slots = 0;   // floor(d_j / tau)
    int local_slots = 0;      // ceil(q_j / f)

    bool operator==(const TaskClass&) const = default;
};

struct BaseStation {
    double arrival_rate = 0.0;   // tasks/s
    int max_channels = 0;
    double channel_price = 0.0;
    // channel_mix[j] lists the channel models a class-j task may see.
    std::vector<std::vector<ChannelChoice>> channel_mix;

    bool operator==(const BaseStation&) const = default;
};

struct Scenario {
    std::vector<BaseStation> base_stations;
    std::vector<TaskClass> classes;
    double es_price = 0.0;      // $ per (cycle/s)
    double es_speed = 0.0;      // f^C, cycles/s
    double local_speed = 0.0;   // f, cycles/slot
    double local_power = 0.0;   // p^L, W
    double tx_power = 0.0;      // p^T, W
    double slot = 1.0;          // tau, s
    double budget = 0.0;        // B^max, $

    std::size_t num_bs() const { return base_stations.size(); }
    std::size_t num_classes() const { return classes.size(); }

    bool operator==(const Scenario&) const = default;
};

struct Allocation {
    std::vector<int> channels;   // x_n
    double es_fraction = 0.0;    // y

    bool operator==(const Allocation&) const = default;
};

// --- derived quantities ----------------------------------------------------

/// Local execution time in whole slots, rounded up.
inline int local_exec_slots(const TaskClass& cls, const Scenario& sc)
{
    double ratio = cls.cycles / sc.local_speed;
    return static_cast<int>(std::ceil(ratio - kSlotSnap));
}

/// Mean local execution time over the class mix, in slots.
inline double mean_local_slots(const Scenario& sc)
{
    double acc = 0.0;
    for (const auto& c : sc.classes) acc += c.probability * c.local_slots;
    return acc;
}

inline int deadline_slots(const TaskClass& cls, const Scenario& sc)
{
    return static_cast<int>(std::floor(cls.deadline / sc.slot + kSlotSnap));
}

/// Latest slot at which local execution can start and still meet the deadline.
inline int latest_local_start(const TaskClass& cls) { return cls.deadline_slots - cls.local_slots + 1; }

/// Mean CPU cycles per task, sum_j P_j q_j.
inline double mean_cycles(const Scenario& sc)
{
    double acc = 0.0;
    for (const auto& c : sc.classes) acc += c.probability * c.cycles;
    return acc;
}

inline double total_arrival_rate(const Scenario& sc)
{
    double acc = 0.0;
    for (const auto& bs : sc.base_stations) acc += bs.arrival_rate;
    return acc;
}

inline double allocation_cost(const Scenario& sc, const Allocation& a)
{
    double cost = 0.0;
    for (std::size_t n = 0; n < sc.num_bs(); ++n) cost += sc.base_stations[n].channel_price * a.channels[n];
    return cost + sc.es_price * sc.es_speed * a.es_fraction;
}

inline void finalize(Scenario& sc)
{
    for (auto& c : sc.classes) {
        c.deadline_slots = deadline_slots(c, sc);
        c.local_slots = local_exec_slots(c, sc);
    }
}

// --- validation ------------------------------------------------------------

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw ValidationError(what);
}

inline bool near_one(double x) { return std::abs(x - 1.0) <= 1e-12; }

}  // namespace detail

inline void validate(const GilbertElliotModel& m, const std::string& where)
{
    using detail::require;
    require(m.p_gg >= 0.0 && m.p_gg <= 1.0, where + ": p_gg must lie in [0,1]");
    require(m.p_bb >= 0.0 && m.p_bb <= 1.0, where + ": p_bb must lie in [0,1]");
    require(m.b_bad >= 0.0, where + ": b_bad must be >= 0");
    require(m.b_good >= m.b_bad, where + ": b_good must be >= b_bad");
    require(!(m.p_gg == 1.0 && m.p_bb == 1.0), where + ": chain absorbing in both states (p_gg = p_bb = 1)");
}

/// Checks every type invariant; throws ValidationError naming the first violation.
inline void validate(const Scenario& sc)
{
    using detail::require;
    require(!sc.base_stations.empty(), "scenario needs at least one base station");
    require(!sc.classes.empty(), "scenario needs at least one task class");
    require(sc.slot > 0.0, "slot length tau must be > 0");
    require(sc.es_price > 0.0, "es_price (beta) must be > 0");
    require(sc.es_speed > 0.0, "es_speed (f^C) must be > 0");
    require(sc.local_speed > 0.0, "local_speed (f) must be > 0");
    require(sc.local_power > 0.0, "local_power (p^L) must be > 0");
    require(sc.tx_power > 0.0, "tx_power (p^T) must be > 0");
    require(sc.budget >= 0.0, "budget must be >= 0");

    double psum = 0.0;
    for (std::size_t j = 0; j < sc.classes.size(); ++j) {
        const auto& c = sc.classes[j];
        std::string where = "class " + std::to_string(j) + " (" + c.name + ")";
        require(c.data_bits > 0.0, where + ": data size s must be > 0");
        require(c.cycles > 0.0, where + ": computation load q must be > 0");
        require(c.deadline > 0.0, where + ": deadline d must be > 0");
        require(c.probability >= 0.0, where + ": class probability must be >= 0");
        if (c.max_violation)
            require(*c.max_violation > 0.0 && *c.max_violation <= 1.0, where + ": eps must lie in (0,1]");
        psum += c.probability;
    }
    require(detail::near_one(psum), "class probabilities must sum to 1 (got " + std::to_string(psum) + ")");

    for (std::size_t n = 0; n < sc.base_stations.size(); ++n) {
        const auto& bs = sc.base_stations[n];
        std::string where = "base station " + std::to_string(n);
        require(bs.arrival_rate > 0.0, where + ": arrival rate must be > 0");
        require(bs.max_channels >= 0, where + ": K must be >= 0");
        require(bs.channel_price >= 0.0, where + ": channel price must be >= 0");
        require(bs.channel_mix.size() == sc.classes.size(),
                where + ": channel_mix needs one entry per task class");
        for (std::size_t j = 0; j < bs.channel_mix.size(); ++j) {
            double mix = 0.0;
            require(!bs.channel_mix[j].empty(), where + ": empty channel mix for class " + std::to_string(j));
            for (const auto& ch : bs.channel_mix[j]) {
                require(ch.probability >= 0.0, where + ": channel model probability must be >= 0");
                validate(ch.model, where + " model '" + ch.model_name + "'");
                require(ch.model.b_good > 0.0, where + " model '" + ch.model_name + "': b_good must be > 0");
                mix += ch.probability;
            }
            require(detail::near_one(mix),
                    where + ": channel model probabilities for class " + std::to_string(j) + " must sum to 1");
        }
    }
}

inline void validate(const Allocation& a, const Scenario& sc)
{
    using detail::require;
    require(a.channels.size() == sc.num_bs(), "allocation needs one channel count per base station");
    for (std::size_t n = 0; n < a.channels.size(); ++n)
        require(a.channels[n] >= 0 && a.channels[n] <= sc.base_stations[n].max_channels,
                "allocation: x_" + std::to_string(n + 1) + " = " + std::to_string(a.channels[n]) +
                    " outside [0, K_n = " + std::to_string(sc.base_stations[n].max_channels) + "]");
    require(a.es_fraction >= 0.0 && a.es_fraction <= 1.0, "allocation: y must lie in [0,1]");
    require(allocation_cost(sc, a) <= sc.budget, "allocation exceeds the cost budget");
}

/// Mode-specific checks. Returns warnings (e.g. eps ignored in hard mode).
inline std::vector<std::string> validate_for_mode(const Scenario& sc, DeadlineMode mode)
{
    std::vector<std::string> warnings;
    for (const auto& c : sc.classes) {
        if (mode == DeadlineMode::soft) {
            detail::require(c.max_violation.has_value(), "soft mode: class '" + c.name + "' has no eps");
        } else {
            detail::require(latest_local_start(c) >= 1,
                            "hard mode: class '" + c.name + "' cannot finish locally before its deadline");
            if (c.max_violation) warnings.push_back("hard mode: eps of class '" + c.name + "' ignored");
        }
    }
    return warnings;
}

// --- JSON (de)serialization ------------------------------------------------

namespace detail {

using nlohmann::json;

template <class T>
T field(const json& j, const std::string& key, const std::string& path)
{
    if (!j.contains(key)) throw ConfigError(path + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + "." + key + ": " + e.what());
    }
}

inline GilbertElliotModel parse_model(const json& j, const std::string& path)
{
    GilbertElliotModel m;
    m.p_gg = field<double>(j, "p_gg", path);
    m.p_bb = field<double>(j, "p_bb", path);
    m.b_good = field<double>(j, "b_good", path);
    m.b_bad = field<double>(j, "b_bad", path);
    return m;
}

inline std::vector<ChannelChoice> parse_mix(const json& arr, const std::map<std::string, GilbertElliotModel>& models,
                                            const std::string& path)
{
    if (!arr.is_array()) throw ConfigError(path + ": expected an array of {model, p}");
    std::vector<ChannelChoice> out;
    for (std::size_t k = 0; k < arr.size(); ++k) {
        std::string p = path + "[" + std::to_string(k) + "]";
        ChannelChoice ch;
        ch.model_name = field<std::string>(arr[k], "model", p);
        auto it = models.find(ch.model_name);
        if (it == models.end()) throw ConfigError(p + ": unknown channel model '" + ch.model_name + "'");
        ch.model = it->second;
        ch.probability = field<double>(arr[k], "p", p);
        out.push_back(std::move(ch));
    }
    return out;
}

}  // namespace detail

/// Builds and validates a scenario from its JSON form.
inline Scenario scenario_from_json(const nlohmann::json& j)
{
    using detail::field;
    if (!j.is_object()) throw ConfigError("scenario: top level must be an object");
    int version = field<int>(j, "schema_version", "scenario");
    if (version != kScenarioSchemaVersion)
        throw ConfigError("scenario: unsupported schema_version " + std::to_string(version));

    Scenario sc;
    sc.slot = field<double>(j, "tau", "scenario");
    sc.es_price = field<double>(j, "beta", "scenario");
    sc.es_speed = field<double>(j, "f_es", "scenario");
    sc.local_speed = field<double>(j, "f_local", "scenario");
    sc.local_power = field<double>(j, "p_local", "scenario");
    sc.tx_power = field<double>(j, "p_tx", "scenario");
    sc.budget = field<double>(j, "budget", "scenario");

    std::map<std::string, GilbertElliotModel> models;
    if (!j.contains("channel_models") || !j["channel_models"].is_object())
        throw ConfigError("scenario: missing object 'channel_models'");
    for (const auto& [name, m] : j["channel_models"].items())
        models.emplace(name, detail::parse_model(m, "channel_models." + name));

    if (!j.contains("classes") || !j["classes"].is_array()) throw ConfigError("scenario: missing array 'classes'");
    for (std::size_t i = 0; i < j["classes"].size(); ++i) {
        const auto& c = j["classes"][i];
        std::string path = "classes[" + std::to_string(i) + "]";
        TaskClass tc;
        tc.name = c.value("name", "class" + std::to_string(i + 1));
        tc.data_bits = field<double>(c, "s", path);
        tc.cycles = field<double>(c, "q", path);
        tc.deadline = field<double>(c, "d", path);
        tc.probability = field<double>(c, "p", path);
        if (c.contains("eps") && !c["eps"].is_null()) tc.max_violation = field<double>(c, "eps", path);
        sc.classes.push_back(std::move(tc));
    }

    if (!j.contains("base_stations") || !j["base_stations"].is_array())
        throw ConfigError("scenario: missing array 'base_stations'");
    for (std::size_t n = 0; n < j["base_stations"].size(); ++n) {
        const auto& b = j["base_stations"][n];
        std::string path = "base_stations[" + std::to_string(n) + "]";
        BaseStation bs;
        bs.arrival_rate = field<double>(b, "lambda", path);
        bs.max_channels = field<int>(b, "K", path);
        bs.channel_price = field<double>(b, "alpha", path);
        if (!b.contains("channel_mix")) throw ConfigError(path + ": missing field 'channel_mix'");
        const auto& mix = b["channel_mix"];
        // Either one mix shared by every class, or one mix per class.
        if (mix.is_array() && !mix.empty() && mix[0].is_array()) {
            for (std::size_t jj = 0; jj < mix.size(); ++jj)
                bs.channel_mix.push_back(
                    detail::parse_mix(mix[jj], models, path + ".channel_mix[" + std::to_string(jj) + "]"));
        } else {
            auto shared = detail::parse_mix(mix, models, path + ".channel_mix");
            bs.channel_mix.assign(sc.classes.size(), shared);
        }
        sc.base_stations.push_back(std::move(bs));
    }

    validate(sc);
    finalize(sc);
    return sc;
}

inline nlohmann::json to_json(const Scenario& sc)
{
    using nlohmann::json;
    json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["tau"] = sc.slot;
    j["beta"] = sc.es_price;
    j["f_es"] = sc.es_speed;
    j["f_local"] = sc.local_speed;
    j["p_local"] = sc.local_power;
    j["p_tx"] = sc.tx_power;
    j["budget"] = sc.budget;

    json models = json::object();
    for (const auto& bs : sc.base_stations)
        for (const auto& mix : bs.channel_mix)
            for (const auto& ch : mix)
                models[ch.model_name] = {{"p_gg", ch.model.p_gg},
                                         {"p_bb", ch.model.p_bb},
                                         {"b_good", ch.model.b_good},
                                         {"b_bad", ch.model.b_bad}};
    j["channel_models"] = models;

    json classes = json::array();
    for (const auto& c : sc.classes) {
        json jc = {{"name", c.name}, {"s", c.data_bits}, {"q", c.cycles}, {"d", c.deadline}, {"p", c.probability}};
        if (c.max_violation) jc["eps"] = *c.max_violation;
        classes.push_back(jc);
    }
    j["classes"] = classes;

    json stations = json::array();
    for (const auto& bs : sc.base_stations) {
        json mixes = json::array();
        for (const auto& mix : bs.channel_mix) {
            json jm = json::array();
            for (const auto& ch : mix) jm.push_back({{"model", ch.model_name}, {"p", ch.probability}});
            mixes.push_back(jm);
        }
        stations.push_back(
            {{"lambda", bs.arrival_rate}, {"K", bs.max_channels}, {"alpha", bs.channel_price}, {"channel_mix", mixes}});
    }
    j["base_stations"] = stations;
    return j;
}

inline Scenario parse_scenario(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("scenario parse error: ") + e.what());
    }
    return scenario_from_json(j);
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

inline void save_scenario(const Scenario& sc, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write scenario file '" + path + "'");
    out << to_json(sc).dump(2) << '\n';
}

}  // namespace mco
