#ifndef DDET_CONFIG_HPP
#define DDET_CONFIG_HPP

#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ddet/anchors.hpp"
#include "ddet/losses.hpp"
#include "ddet/optim.hpp"
#include "ddet/synth.hpp"

namespace ddet {

// Merged run configuration. A fully-defaulted config is valid; every field's
// default is visible below and in `ddet <cmd> --help`.
struct RunConfig {
    TrainConfig optim;                 // lr 0.01, momentum 0.9, wd 0.0001, steps 2000, batch 8
    double gamma = 2.0;
    double alpha = 0.25;
    std::string cls_mode = "focal";    // focal | hard_negative_ce | plain_ce
    int neg_pos_ratio = 3;
    double beta = 1.0;

    double pos_thr = 0.5;
    double neg_thr = 0.4;
    double score_thr = 0.05;
    double nms_iou = 0.5;
    int topk_per_level = 1000;
    int max_detections = 100;
    bool eleven_point = false;

    SynthConfig synth;

    std::string dataset;
    bool include_lost = false;

    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::string preset;                // "" | desk (linear lr warmup, 200 steps)
    int warmup_steps = 0;

    ClsMode mode() const {
        if (cls_mode == "focal") return ClsMode::Focal;
        if (cls_mode == "hard_negative_ce") return ClsMode::HardNegativeCe;
        if (cls_mode == "plain_ce") return ClsMode::PlainCe;
        throw std::invalid_argument("cls_mode must be focal, hard_negative_ce or plain_ce");
    }

    void validate() const {
        optim.validate();
        mode();
        if (gamma < 0) throw std::invalid_argument("gamma must be >= 0");
        if (alpha <= 0 || alpha >= 1) throw std::invalid_argument("alpha must be in (0,1)");
        if (neg_pos_ratio < 1) throw std::invalid_argument("neg_pos_ratio must be >= 1");
        if (beta <= 0) throw std::invalid_argument("beta must be > 0");
        if (!(preset.empty() || preset == "desk"))
            throw std::invalid_argument("preset must be empty or 'desk'");
        synth.validate();
    }

    void apply_preset() {
        if (preset == "desk") warmup_steps = 200;
    }
};

namespace config_detail {

inline double parse_double(const std::string& v, const std::string& ctx) {
    std::size_t used = 0;
    double d = 0;
    try { d = std::stod(v, &used); } catch (const std::exception&) { used = 0; }
    if (used != v.size())
        throw std::invalid_argument("value '" + v + "' for " + ctx + " is not a number");
    return d;
}

inline long long parse_int(const std::string& v, const std::string& ctx) {
    std::size_t used = 0;
    long long d = 0;
    try { d = std::stoll(v, &used); } catch (const std::exception&) { used = 0; }
    if (used != v.size())
        throw std::invalid_argument("value '" + v + "' for " + ctx + " is not an integer");
    return d;
}

inline bool parse_bool(const std::string& v, const std::string& ctx) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("value '" + v + "' for " + ctx + " is not a boolean");
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace config_detail

// Line-oriented `key = value` pairs under `[section]` headers; `#` comments;
// later duplicates override earlier ones. Unknown sections or keys are errors.
inline void parse_config_into(std::istream& is, RunConfig& c) {
    using namespace config_detail;
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, std::map<std::string, Setter>> schema = {
        {"optim",
         {{"learning_rate", [](RunConfig& c, const std::string& v, const std::string& x) { c.optim.learning_rate = parse_double(v, x); }},
          {"momentum", [](RunConfig& c, const std::string& v, const std::string& x) { c.optim.momentum = parse_double(v, x); }},
          {"weight_decay", [](RunConfig& c, const std::string& v, const std::string& x) { c.optim.weight_decay = parse_double(v, x); }},
          {"steps", [](RunConfig& c, const std::string& v, const std::string& x) { c.optim.steps = static_cast<int>(parse_int(v, x)); }},
          {"batch_size", [](RunConfig& c, const std::string& v, const std::string& x) { c.optim.batch_size = static_cast<int>(parse_int(v, x)); }}}},
        {"loss",
         {{"gamma", [](RunConfig& c, const std::string& v, const std::string& x) { c.gamma = parse_double(v, x); }},
          {"alpha", [](RunConfig& c, const std::string& v, const std::string& x) { c.alpha = parse_double(v, x); }},
          {"cls_mode", [](RunConfig& c, const std::string& v, const std::string&) { c.cls_mode = v; }},
          {"neg_pos_ratio", [](RunConfig& c, const std::string& v, const std::string& x) { c.neg_pos_ratio = static_cast<int>(parse_int(v, x)); }},
          {"beta", [](RunConfig& c, const std::string& v, const std::string& x) { c.beta = parse_double(v, x); }}}},
        {"model",
         {{"pos_thr", [](RunConfig& c, const std::string& v, const std::string& x) { c.pos_thr = parse_double(v, x); }},
          {"neg_thr", [](RunConfig& c, const std::string& v, const std::string& x) { c.neg_thr = parse_double(v, x); }},
          {"score_thr", [](RunConfig& c, const std::string& v, const std::string& x) { c.score_thr = parse_double(v, x); }},
          {"nms_iou", [](RunConfig& c, const std::string& v, const std::string& x) { c.nms_iou = parse_double(v, x); }},
          {"topk_per_level", [](RunConfig& c, const std::string& v, const std::string& x) { c.topk_per_level = static_cast<int>(parse_int(v, x)); }},
          {"max_detections", [](RunConfig& c, const std::string& v, const std::string& x) { c.max_detections = static_cast<int>(parse_int(v, x)); }},
          {"eleven_point", [](RunConfig& c, const std::string& v, const std::string& x) { c.eleven_point = parse_bool(v, x); }}}},
        {"synth",
         {{"image_size", [](RunConfig& c, const std::string& v, const std::string& x) { c.synth.image_size = static_cast<std::size_t>(parse_int(v, x)); }},
          {"train_images", [](RunConfig& c, const std::string& v, const std::string& x) { c.synth.train_images = static_cast<std::size_t>(parse_int(v, x)); }},
          {"test_images", [](RunConfig& c, const std::string& v, const std::string& x) { c.synth.test_images = static_cast<std::size_t>(parse_int(v, x)); }},
          {"min_objects", [](RunConfig& c, const std::string& v, const std::string& x) { c.synth.min_objects = static_cast<int>(parse_int(v, x)); }},
          {"max_objects", [](RunConfig& c, const std::string& v, const std::string& x) { c.synth.max_objects = static_cast<int>(parse_int(v, x)); }},
          {"noise", [](RunConfig& c, const std::string& v, const std::string& x) { c.synth.noise = parse_double(v, x); }}}},
        {"data",
         {{"dataset", [](RunConfig& c, const std::string& v, const std::string&) { c.dataset = v; }},
          {"include_lost", [](RunConfig& c, const std::string& v, const std::string& x) { c.include_lost = parse_bool(v, x); }}}},
        {"run",
         {{"seed", [](RunConfig& c, const std::string& v, const std::string& x) { c.seed = static_cast<std::uint64_t>(parse_int(v, x)); c.optim.seed = c.seed; c.synth.seed = c.seed; }},
          {"output_dir", [](RunConfig& c, const std::string& v, const std::string&) { c.output_dir = v; }},
          {"preset", [](RunConfig& c, const std::string& v, const std::string&) { c.preset = v; }}}},
    };

    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("line " + std::to_string(lineno) +
                                            ": malformed section header");
            section = line.substr(1, line.size() - 2);
            if (schema.find(section) == schema.end())
                throw std::invalid_argument("invalid section [" + section + "] at line " +
                                            std::to_string(lineno));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw std::invalid_argument("key '" + key + "' before any [section] at line " +
                                        std::to_string(lineno));
        const auto& keys = schema.at(section);
        auto it = keys.find(key);
        if (it == keys.end())
            throw std::invalid_argument("unknown key '" + key + "' in [" + section + "]");
        it->second(c, value, "'" + key + "' in [" + section + "]");
    }
}

inline RunConfig parse_config(std::istream& is) {
    RunConfig c;
    parse_config_into(is, c);
    return c;
}

inline RunConfig parse_config(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

// Canonical serialization (used by the round-trip tests).
inline std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "[optim]\n"
       << "learning_rate = " << c.optim.learning_rate << "\n"
       << "momentum = " << c.optim.momentum << "\n"
       << "weight_decay = " << c.optim.weight_decay << "\n"
       << "steps = " << c.optim.steps << "\n"
       << "batch_size = " << c.optim.batch_size << "\n"
       << "[loss]\n"
       << "gamma = " << c.gamma << "\n"
       << "alpha = " << c.alpha << "\n"
       << "cls_mode = " << c.cls_mode << "\n"
       << "neg_pos_ratio = " << c.neg_pos_ratio << "\n"
       << "beta = " << c.beta << "\n"
       << "[model]\n"
       << "pos_thr = " << c.pos_thr << "\n"
       << "neg_thr = " << c.neg_thr << "\n"
       << "score_thr = " << c.score_thr << "\n"
       << "nms_iou = " << c.nms_iou << "\n"
       << "topk_per_level = " << c.topk_per_level << "\n"
       << "max_detections = " << c.max_detections << "\n"
       << "eleven_point = " << (c.eleven_point ? "true" : "false") << "\n"
       << "[synth]\n"
       << "image_size = " << c.synth.image_size << "\n"
       << "train_images = " << c.synth.train_images << "\n"
       << "test_images = " << c.synth.test_images << "\n"
       << "min_objects = " << c.synth.min_objects << "\n"
       << "max_objects = " << c.synth.max_objects << "\n"
       << "noise = " << c.synth.noise << "\n"
       << "[data]\n";
    if (!c.dataset.empty()) os << "dataset = " << c.dataset << "\n";
    os << "include_lost = " << (c.include_lost ? "true" : "false") << "\n"
       << "[run]\n"
       << "seed = " << c.seed << "\n"
       << "output_dir = " << c.output_dir << "\n";
    if (!c.preset.empty()) os << "preset = " << c.preset << "\n";
    return os.str();
}

}  // namespace ddet

#endif
