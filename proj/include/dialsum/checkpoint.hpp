#pragma once

// Versioned binary checkpoint container. Layout (all integers little-endian):
//
//   magic "DSCK" | u32 version | u32 meta_len | meta JSON bytes |
//   u32 n_params | per parameter: u32 name_len, name bytes,
//                  u32 ndim, u64 dims..., float32 row-major payload
//
// The meta block holds the model/training configuration, vocabulary size,
// epoch, and validation perplexity. Parameters are stored as float32; the
// in-memory representation stays double. Loading validates the parameter
// set and every shape against the stored configuration.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialsum/autodiff.hpp"
#include "dialsum/model.hpp"
#include "dialsum/trainer_config.hpp"

namespace dialsum {
namespace train {

struct Checkpoint {
    ad::ParameterStore params;
    model::ModelConfig model;
    TrainConfig train;
    std::size_t vocab_size = 0;
    std::size_t epoch = 0;
    double valid_perplexity = std::numeric_limits<double>::infinity();
};

namespace detail {

constexpr char kMagic[4] = {'D', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) &
                                              0xff);
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    }
    return static_cast<T>(v);
}

inline void write_f32(std::ostream& out, float value) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    write_le<std::uint32_t>(out, bits);
}

inline float read_f32(std::istream& in) {
    std::uint32_t bits = read_le<std::uint32_t>(in);
    float value;
    std::memcpy(&value, &bits, 4);
    return value;
}

inline nlohmann::json model_config_to_json(const model::ModelConfig& c) {
    nlohmann::json j;
    j["d_e"] = c.d_e;
    j["d"] = c.d;
    j["d_up"] = c.d_up ? nlohmann::json(*c.d_up) : nlohmann::json(nullptr);
    j["d_sp"] = c.d_sp ? nlohmann::json(*c.d_sp) : nlohmann::json(nullptr);
    j["dropout"] = c.dropout;
    j["max_utt_positions"] = c.max_utt_positions;
    j["max_sum_positions"] = c.max_sum_positions;
    j["use_sufm_embedding"] = c.use_sufm_embedding;
    j["use_copy"] = c.use_copy;
    return j;
}

inline model::ModelConfig model_config_from_json(const nlohmann::json& j) {
    model::ModelConfig c;
    c.d_e = j.at("d_e").get<std::size_t>();
    c.d = j.at("d").get<std::size_t>();
    if (!j.at("d_up").is_null()) c.d_up = j.at("d_up").get<std::size_t>();
    if (!j.at("d_sp").is_null()) c.d_sp = j.at("d_sp").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.max_utt_positions = j.at("max_utt_positions").get<std::size_t>();
    c.max_sum_positions = j.at("max_sum_positions").get<std::size_t>();
    c.use_sufm_embedding = j.at("use_sufm_embedding").get<bool>();
    c.use_copy = j.at("use_copy").get<bool>();
    return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["max_grad_norm"] = c.max_grad_norm;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_eps"] = c.adam_eps;
    j["patience_decay"] = c.patience_decay;
    j["patience_stop"] = c.patience_stop;
    j["max_epochs"] = c.max_epochs;
    j["seed"] = c.seed;
    return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.max_grad_norm = j.at("max_grad_norm").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.patience_decay = j.at("patience_decay").get<std::size_t>();
    c.patience_stop = j.at("patience_stop").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(detail::kMagic, 4);
    detail::write_le<std::uint32_t>(out, detail::kVersion);

    nlohmann::json meta;
    meta["model"] = detail::model_config_to_json(ckpt.model);
    meta["train"] = detail::train_config_to_json(ckpt.train);
    meta["vocab_size"] = ckpt.vocab_size;
    meta["epoch"] = ckpt.epoch;
    meta["valid_perplexity"] = ckpt.valid_perplexity;
    std::string meta_str = meta.dump();
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta_str.size()));
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& entry : ckpt.params.entries()) {
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(entry->name.size()));
        out.write(entry->name.data(), static_cast<std::streamsize>(entry->name.size()));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(entry->value.ndim()));
        for (std::size_t d : entry->value.shape) detail::write_le<std::uint64_t>(out, d);
        for (double v : entry->value.data) detail::write_f32(out, static_cast<float>(v));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot read " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, detail::kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    std::uint32_t version = detail::read_le<std::uint32_t>(in);
    if (version != detail::kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    std::uint32_t meta_len = detail::read_le<std::uint32_t>(in);
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), meta_len);
    if (!in) throw std::runtime_error("checkpoint: truncated meta block");
    nlohmann::json meta = nlohmann::json::parse(meta_str);

    Checkpoint ckpt;
    ckpt.model = detail::model_config_from_json(meta.at("model"));
    ckpt.train = detail::train_config_from_json(meta.at("train"));
    ckpt.vocab_size = meta.at("vocab_size").get<std::size_t>();
    ckpt.epoch = meta.at("epoch").get<std::size_t>();
    ckpt.valid_perplexity = meta.at("valid_perplexity").get<double>();

    std::uint32_t n_params = detail::read_le<std::uint32_t>(in);
    for (std::uint32_t p = 0; p < n_params; ++p) {
        std::uint32_t name_len = detail::read_le<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint32_t ndim = detail::read_le<std::uint32_t>(in);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(detail::read_le<std::uint64_t>(in));
        Tensor t(shape);
        for (double& v : t.data) v = static_cast<double>(detail::read_f32(in));
        ckpt.params.add(name, std::move(t));
    }

    // validate the parameter set against the stored configuration
    std::map<std::string, std::vector<std::size_t>> expected;
    model::for_each_parameter(ckpt.model, ckpt.vocab_size,
                              [&](const std::string& name, const std::vector<std::size_t>& shape) {
                                  expected[name] = shape;
                              });
    if (expected.size() != ckpt.params.size()) {
        throw std::runtime_error("checkpoint: parameter count does not match config");
    }
    for (const auto& [name, shape] : expected) {
        const ad::ParamEntry* e = ckpt.params.find(name);
        if (!e) throw std::runtime_error("checkpoint: missing parameter " + name);
        if (e->value.shape != shape) {
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        }
    }
    return ckpt;
}

}  // namespace train
}  // namespace dialsum
