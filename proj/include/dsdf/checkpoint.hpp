#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsdf/nn.hpp"
#include "dsdf/tensor.hpp"

namespace dsdf {

// "DSDF" binary container, little-endian f64 payloads.
//   kind 'C': named-tensor table (checkpoints)
//   kind 'L': latent dataset (count x dim row-major)
namespace dsdf_file {

inline constexpr char kMagic[4] = {'D', 'S', 'D', 'F'};
inline constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error("DSDF: truncated file");
    return v;
}

inline void write_header(std::ofstream& f, char kind) {
    f.write(kMagic, 4);
    write_pod(f, kVersion);
    write_pod(f, kind);
}

inline char read_header(std::ifstream& f) {
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("DSDF: bad magic");
    uint32_t version = read_pod<uint32_t>(f);
    if (version != kVersion) throw std::runtime_error("DSDF: unsupported version");
    return read_pod<char>(f);
}

}  // namespace dsdf_file

// Named-tensor table: count, then per entry name length + bytes, rank,
// dims, f64 payload.
inline void save_tensor_table(const std::string& path,
                              const std::vector<std::pair<std::string, const Tensor*>>& entries,
                              const std::string& meta_json = "{}") {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_tensor_table: cannot open " + path);
    dsdf_file::write_header(f, 'C');
    dsdf_file::write_pod(f, static_cast<uint32_t>(meta_json.size()));
    f.write(meta_json.data(), meta_json.size());
    dsdf_file::write_pod(f, static_cast<uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        dsdf_file::write_pod(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), name.size());
        dsdf_file::write_pod(f, static_cast<uint32_t>(t->rank()));
        for (int d : t->shape()) dsdf_file::write_pod(f, static_cast<uint32_t>(d));
        f.write(reinterpret_cast<const char*>(t->data().data()),
                t->data().size() * sizeof(double));
    }
}

struct TensorTable {
    std::map<std::string, Tensor> tensors;
    std::string meta_json;
};

inline TensorTable load_tensor_table(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_tensor_table: cannot open " + path);
    if (dsdf_file::read_header(f) != 'C')
        throw std::runtime_error("load_tensor_table: not a checkpoint file");
    TensorTable table;
    uint32_t meta_len = dsdf_file::read_pod<uint32_t>(f);
    table.meta_json.resize(meta_len);
    f.read(table.meta_json.data(), meta_len);
    uint32_t count = dsdf_file::read_pod<uint32_t>(f);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = dsdf_file::read_pod<uint32_t>(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        uint32_t rank = dsdf_file::read_pod<uint32_t>(f);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(dsdf_file::read_pod<uint32_t>(f));
        std::vector<double> data(Tensor::numel_of(shape));
        f.read(reinterpret_cast<char*>(data.data()), data.size() * sizeof(double));
        if (!f) throw std::runtime_error("load_tensor_table: truncated payload");
        table.tensors.emplace(name, Tensor(shape, std::move(data)));
    }
    return table;
}

inline void save_params(const std::string& path, const ParamStore& params,
                        const std::string& meta_json = "{}") {
    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (size_t i = 0; i < params.size(); ++i)
        entries.emplace_back(params.names()[i], &params.at(i));
    save_tensor_table(path, entries, meta_json);
}

inline std::string load_params(const std::string& path, ParamStore& params) {
    TensorTable table = load_tensor_table(path);
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params.names()[i];
        auto it = table.tensors.find(name);
        if (it == table.tensors.end())
            throw std::runtime_error("load_params: missing tensor " + name);
        if (it->second.shape() != params.at(i).shape())
            throw std::runtime_error("load_params: shape mismatch for " + name);
        params.at(i).mutable_data() = it->second.data();
    }
    return table.meta_json;
}

// Latent dataset: count, dimension, then row-major f64 latents.
inline void save_latents(const std::string& path, const std::vector<std::vector<double>>& latents) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_latents: cannot open " + path);
    dsdf_file::write_header(f, 'L');
    uint32_t count = static_cast<uint32_t>(latents.size());
    uint32_t dim = latents.empty() ? 0 : static_cast<uint32_t>(latents[0].size());
    dsdf_file::write_pod(f, count);
    dsdf_file::write_pod(f, dim);
    for (const auto& z : latents) {
        if (z.size() != dim) throw std::invalid_argument("save_latents: ragged latents");
        f.write(reinterpret_cast<const char*>(z.data()), dim * sizeof(double));
    }
}

inline std::vector<std::vector<double>> load_latents(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_latents: cannot open " + path);
    if (dsdf_file::read_header(f) != 'L')
        throw std::runtime_error("load_latents: not a latent file");
    uint32_t count = dsdf_file::read_pod<uint32_t>(f);
    uint32_t dim = dsdf_file::read_pod<uint32_t>(f);
    std::vector<std::vector<double>> latents(count, std::vector<double>(dim));
    for (auto& z : latents) {
        f.read(reinterpret_cast<char*>(z.data()), dim * sizeof(double));
        if (!f) throw std::runtime_error("load_latents: truncated payload");
    }
    return latents;
}

}  // namespace dsdf
