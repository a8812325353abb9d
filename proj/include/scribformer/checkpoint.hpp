#pragma once

// Checkpoint file layout:
//   "SCRFCKPT1\n" | u64 header length | JSON header | tensor payload | u32 CRC-32
// The header lists every tensor (name, dtype, shape, byte offset) plus scalar
// training state. The CRC covers all preceding bytes.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "scribformer/error.hpp"
#include "scribformer/optim.hpp"

namespace scribformer {

struct Checkpoint {
    std::map<std::string, torch::Tensor> model;     // parameters and buffers
    std::map<std::string, torch::Tensor> optimizer; // "exp_avg/<param>", "exp_avg_sq/<param>"
    int64_t optimizer_steps = 0;
    int64_t epoch = 0;       // completed epochs
    int64_t global_step = 0; // completed optimizer steps
    std::string trainer_rng; // textual std::mt19937_64 state
    torch::Tensor torch_rng; // default CPU generator state
    std::string config_snapshot;
    double best_val_dice = -1.0;
};

namespace detail {

inline const std::map<std::string, torch::ScalarType>& dtype_table() {
    static const std::map<std::string, torch::ScalarType> t{
        {"float32", torch::kFloat},  {"float64", torch::kDouble}, {"int64", torch::kLong},
        {"int32", torch::kInt},      {"uint8", torch::kByte},     {"bool", torch::kBool}};
    return t;
}

inline std::string dtype_name(torch::ScalarType s) {
    for (const auto& [name, type] : dtype_table())
        if (type == s) return name;
    throw ValidationError(std::string("unsupported tensor dtype in checkpoint: ") + c10::toString(s));
}

} // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    nlohmann::ordered_json header;
    header["format"] = 1;
    header["epoch"] = ck.epoch;
    header["global_step"] = ck.global_step;
    header["optimizer_steps"] = ck.optimizer_steps;
    header["trainer_rng"] = ck.trainer_rng;
    header["config_snapshot"] = ck.config_snapshot;
    header["best_val_dice"] = ck.best_val_dice;

    std::string payload;
    auto tensors = nlohmann::ordered_json::array();
    auto add = [&](const std::string& name, const torch::Tensor& t) {
        auto c = t.detach().to(torch::kCPU).contiguous();
        const auto nbytes = static_cast<size_t>(c.numel()) * c.element_size();
        tensors.push_back({{"name", name},
                           {"dtype", detail::dtype_name(c.scalar_type())},
                           {"shape", c.sizes().vec()},
                           {"offset", payload.size()},
                           {"nbytes", nbytes}});
        payload.append(static_cast<const char*>(c.data_ptr()), nbytes);
    };
    for (const auto& [name, t] : ck.model) add("model/" + name, t);
    for (const auto& [name, t] : ck.optimizer) add("optim/" + name, t);
    if (ck.torch_rng.defined()) add("rng/torch", ck.torch_rng);
    header["tensors"] = tensors;

    const std::string head = header.dump();
    std::string blob = "SCRFCKPT1\n";
    const uint64_t len = head.size();
    blob.append(reinterpret_cast<const char*>(&len), sizeof len);
    blob += head;
    blob += payload;
    const uint32_t crc =
        static_cast<uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(blob.data()), static_cast<uInt>(blob.size())));
    blob.append(reinterpret_cast<const char*>(&crc), sizeof crc);

    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw IoError("short write on checkpoint '" + path.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint '" + path.string() + "' not found");
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::string magic = "SCRFCKPT1\n";
    if (blob.size() < magic.size() + sizeof(uint64_t) + sizeof(uint32_t) || blob.compare(0, magic.size(), magic) != 0)
        throw IntegrityError("'" + path.string() + "' is not a checkpoint file");
    uint32_t stored = 0;
    std::memcpy(&stored, blob.data() + blob.size() - sizeof stored, sizeof stored);
    const auto body = blob.size() - sizeof stored;
    const auto actual = static_cast<uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(blob.data()), static_cast<uInt>(body)));
    if (stored != actual) throw IntegrityError("checksum mismatch in checkpoint '" + path.string() + "'");

    uint64_t len = 0;
    std::memcpy(&len, blob.data() + magic.size(), sizeof len);
    const size_t head_at = magic.size() + sizeof len;
    if (head_at + len > body) throw IntegrityError("truncated checkpoint header in '" + path.string() + "'");
    const auto header = nlohmann::json::parse(blob.substr(head_at, len));
    const size_t payload_at = head_at + len;

    Checkpoint ck;
    ck.epoch = header.at("epoch");
    ck.global_step = header.at("global_step");
    ck.optimizer_steps = header.at("optimizer_steps");
    ck.trainer_rng = header.at("trainer_rng");
    ck.config_snapshot = header.at("config_snapshot");
    ck.best_val_dice = header.at("best_val_dice");
    for (const auto& t : header.at("tensors")) {
        const std::string name = t.at("name");
        const auto type = detail::dtype_table().at(t.at("dtype").get<std::string>());
        const auto shape = t.at("shape").get<std::vector<int64_t>>();
        const size_t offset = t.at("offset"), nbytes = t.at("nbytes");
        if (payload_at + offset + nbytes > body) throw IntegrityError("truncated tensor '" + name + "'");
        auto tensor = torch::empty(shape, torch::TensorOptions().dtype(type));
        if (static_cast<size_t>(tensor.numel()) * tensor.element_size() != nbytes)
            throw IntegrityError("size mismatch for tensor '" + name + "'");
        std::memcpy(tensor.data_ptr(), blob.data() + payload_at + offset, nbytes);
        if (name.starts_with("model/")) ck.model[name.substr(6)] = tensor;
        else if (name.starts_with("optim/")) ck.optimizer[name.substr(6)] = tensor;
        else if (name == "rng/torch") ck.torch_rng = tensor;
    }
    return ck;
}

/// Parameters and buffers keyed by their dotted module path.
inline std::map<std::string, torch::Tensor> capture_module_state(const torch::nn::Module& m) {
    std::map<std::string, torch::Tensor> out;
    for (const auto& p : m.named_parameters()) out[p.key()] = p.value().detach().clone();
    for (const auto& b : m.named_buffers()) out[b.key()] = b.value().detach().clone();
    return out;
}

/// Copies checkpoint tensors into the module. Every module tensor must be
/// present with an identical shape; the error names the offending tensor.
inline void restore_module_state(torch::nn::Module& m, const std::map<std::string, torch::Tensor>& state) {
    torch::NoGradGuard no_grad;
    auto copy = [&](const std::string& name, torch::Tensor& dst) {
        auto it = state.find(name);
        if (it == state.end()) throw ShapeMismatchError("checkpoint has no tensor '" + name + "'");
        if (it->second.sizes() != dst.sizes()) {
            std::ostringstream msg;
            msg << "tensor '" << name << "' has shape " << it->second.sizes() << " in the checkpoint but "
                << dst.sizes() << " in the model";
            throw ShapeMismatchError(msg.str());
        }
        dst.copy_(it->second);
    };
    size_t used = 0;
    for (auto& p : m.named_parameters()) copy(p.key(), p.value()), ++used;
    for (auto& b : m.named_buffers()) copy(b.key(), b.value()), ++used;
    if (used != state.size()) {
        for (const auto& [name, t] : state) {
            bool found = false;
            for (const auto& p : m.named_parameters()) found |= p.key() == name;
            for (const auto& b : m.named_buffers()) found |= b.key() == name;
            if (!found) throw ShapeMismatchError("checkpoint tensor '" + name + "' has no counterpart in the model");
        }
    }
}

inline void capture_optimizer_state(AdamW& opt, Checkpoint& ck) {
    const auto& params = opt.params();
    for (size_t i = 0; i < params.size(); ++i) {
        ck.optimizer["exp_avg/" + params[i].first] = opt.exp_avg()[i].clone();
        ck.optimizer["exp_avg_sq/" + params[i].first] = opt.exp_avg_sq()[i].clone();
    }
    ck.optimizer_steps = opt.steps();
}

inline void restore_optimizer_state(AdamW& opt, const Checkpoint& ck) {
    const auto& params = opt.params();
    for (size_t i = 0; i < params.size(); ++i) {
        for (auto [prefix, slot] : {std::pair{"exp_avg/", &opt.exp_avg()[i]}, std::pair{"exp_avg_sq/", &opt.exp_avg_sq()[i]}}) {
            const auto key = std::string(prefix) + params[i].first;
            auto it = ck.optimizer.find(key);
            if (it == ck.optimizer.end()) throw ShapeMismatchError("checkpoint has no optimizer tensor '" + key + "'");
            if (it->second.sizes() != slot->sizes())
                throw ShapeMismatchError("optimizer tensor '" + key + "' has a mismatched shape");
            slot->copy_(it->second);
        }
    }
    opt.set_steps(ck.optimizer_steps);
}

} // namespace scribformer
