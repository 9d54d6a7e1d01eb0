#include "fundus/config.hpp"

#include <fstream>

#include "fundus/errors.hpp"
#include "fundus/text.hpp"

namespace fundus {

const std::map<std::string, std::string>& RunConfig::registry() {
    static const std::map<std::string, std::string> keys = {
        // run plumbing
        {"seed", "0"},
        {"out", ""},
        {"data", ""},  // input dataset directory
        {"model", ""}, // checkpoint path(s), comma-separated for ensembles
        {"pred", ""},  // predictions directory (eval commands)

        // synthetic generator
        {"count", "80"},
        {"image_size", "160"},
        {"disc_min", "0.25"},
        {"disc_max", "0.4"},
        {"cdr_min", "0.2"},
        {"cdr_max", "0.9"},
        {"jitter", "0.1"},
        {"noise", "8"},
        {"cdr_threshold", "0.6"},

        // preprocessing
        {"blur_window", "63"},
        {"seg_crop_train", "120"},
        {"seg_crop_eval", "100"},
        {"seg_input", "64"},
        {"cls_crop_train", "200"},
        {"cls_crop_eval", "160"},
        {"cls_scales", "48,64,80"},
        {"augment", "1"},
        {"t_cup", "0.25"},
        {"t_disc", "0.75"},

        // training
        {"epochs", "200"},
        {"batch_size", "8"},
        {"lr", "0.0001"},
        {"shuffle", "1"},

        // segmentation network
        {"xunet_depth", "3"},
        {"xunet_base", "16"},
        {"xunet_levels", "3"},
        {"xunet_se", "8"},
        {"xunet_convs", "2"},

        // classifier network
        {"cls_head_width", "16"},
        {"cls_branch", "16"},
        {"cls_stem", "2,2"},
        {"cls_body_rates", "1,2,4"},
        {"cls_aspp_rates", "1,2,4"},
        {"cls_image_pool", "1"},
        {"cls_shared_model", "0"},

        // evaluation
        {"threshold", "0.5"},
    };
    return keys;
}

RunConfig::RunConfig() : values_(registry()) {}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigInvalid("unknown config key '" + key + "'");
    }
    it->second = value;
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open config " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigInvalid(path + ":" + std::to_string(lineno) +
                                ": expected key=value");
        }
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigInvalid("unknown config key '" + key + "'");
    }
    return it->second;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    return parse_u64(get(key), key.c_str());
}

std::size_t RunConfig::get_size(const std::string& key) const {
    return std::size_t(get_u64(key));
}

double RunConfig::get_double(const std::string& key) const {
    return parse_double(get(key), key.c_str());
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw ConfigInvalid(key + ": expected 0/1, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::get_sizes(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const std::string& part : split(get(key), ',')) {
        const std::string t = trim(part);
        if (t.empty()) continue;
        out.push_back(std::size_t(parse_u64(t, key.c_str())));
    }
    return out;
}

std::string RunConfig::resolved() const {
    std::string out;
    for (const auto& [key, value] : values_) {
        out += key + "=" + value + "\n";
    }
    return out;
}

} // namespace fundus
