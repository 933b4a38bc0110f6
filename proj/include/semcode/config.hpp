#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "semcode/error.hpp"
#include "semcode/transceiver.hpp"

namespace semcode {

/// Flat `key = value` text config. '#' starts a comment, blank lines ignored.
class ConfigMap {
  public:
    static ConfigMap parse_string(const std::string& text) {
        ConfigMap cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": empty key");
            cfg.kv_[key] = value;
        }
        return cfg;
    }

    static ConfigMap parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_string(ss.str());
    }

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_str(const std::string& key, const std::string& fallback) const {
        const auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        try {
            return std::stoull(it->second);
        } catch (...) {
            throw Error(ErrorCode::ConfigError, key + ": expected unsigned integer, got '" + it->second + "'");
        }
    }

    std::uint32_t get_u32(const std::string& key, std::uint32_t fallback) const {
        const std::uint64_t v = get_u64(key, fallback);
        if (v > 0xffffffffULL) throw Error(ErrorCode::ConfigError, key + ": value out of range");
        return static_cast<std::uint32_t>(v);
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        return parse_double(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
        if (v == "off" || v == "false" || v == "0" || v == "no") return false;
        throw Error(ErrorCode::ConfigError, key + ": expected on/off, got '" + v + "'");
    }

    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        const auto it = kv_.find(key);
        if (it == kv_.end()) return out;
        std::string item;
        std::istringstream ss(it->second);
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    static double parse_double(const std::string& key, const std::string& text) {
        if (text == "inf" || text == "+inf" || text == "infinity")
            return std::numeric_limits<double>::infinity();
        try {
            std::size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument(text);
            return v;
        } catch (...) {
            throw Error(ErrorCode::ConfigError, key + ": expected number, got '" + text + "'");
        }
    }

  private:
    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    std::map<std::string, std::string> kv_;
};

/// Builds a PipelineConfig from config keys, leaving unset keys at defaults.
inline PipelineConfig pipeline_config_from(const ConfigMap& cfg) {
    PipelineConfig p;
    p.patch_size = cfg.get_u32("patch_size", p.patch_size);
    p.token_dim = cfg.get_u32("token_dim", p.token_dim);
    p.token_budget = cfg.get_u32("token_budget", p.token_budget);
    p.n_stages = cfg.get_u32("n_stages", p.n_stages);
    p.attention = cfg.get_bool("attention", p.attention);
    p.attn_layers = cfg.get_u32("attn_layers", p.attn_layers);
    p.attn_heads = cfg.get_u32("attn_heads", p.attn_heads);

    const std::string sim = cfg.get_str("similarity", "auto");
    if (sim == "auto") {
        p.similarity = SimilarityChoice::Auto;
    } else if (sim == "tokens") {
        p.similarity = SimilarityChoice::Tokens;
    } else if (sim == "keys") {
        p.similarity = SimilarityChoice::Keys;
    } else {
        throw Error(ErrorCode::ConfigError, "similarity: expected auto|tokens|keys");
    }

    const std::string quant = cfg.get_str("quantization", "none");
    if (quant == "none") {
        p.quantization = QuantizationMode::None;
    } else if (quant == "scalar") {
        p.quantization = QuantizationMode::Scalar;
    } else if (quant == "vq") {
        p.quantization = QuantizationMode::Vq;
    } else {
        throw Error(ErrorCode::ConfigError, "quantization: expected none|scalar|vq");
    }
    p.scalar_step = cfg.get_double("scalar_step", p.scalar_step);
    p.vq_k = cfg.get_u32("vq_k", p.vq_k);

    const std::string chan = cfg.get_str("channel", "awgn");
    if (chan == "awgn") {
        p.channel.kind = ChannelKind::Awgn;
    } else if (chan == "rayleigh") {
        p.channel.kind = ChannelKind::Rayleigh;
    } else {
        throw Error(ErrorCode::ConfigError, "channel: expected awgn|rayleigh");
    }
    p.channel.snr_db = cfg.get_double("snr_db", p.channel.snr_db);
    p.channel.block_len = cfg.get_u32("block_len", p.channel.block_len);
    p.bits_per_symbol = cfg.get_u32("bits_per_symbol", p.bits_per_symbol);
    p.power_allocation = cfg.get_bool("power_allocation", p.power_allocation);
    p.seed = cfg.get_u64("seed", p.seed);
    return p;
}

}  // namespace semcode
