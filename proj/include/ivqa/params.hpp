#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ivqa/tensor.hpp"

namespace ivqa {

// Named registry of every model weight. Iteration order is the insertion
// order, which fixes parameter order for checkpoints and gradient checks.
template <typename T>
class ParamRegistry {
  public:
    void add(const std::string& name, Tensor<T> t) {
        if (index_.count(name)) throw DataError("param already registered: " + name);
        index_[name] = entries_.size();
        entries_.push_back({name, std::move(t)});
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw DataError("unknown param: " + name);
        return entries_[it->second].tensor;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw DataError("unknown param: " + name);
        return entries_[it->second].tensor;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& e : entries_) out.push_back(e.name);
        return out;
    }
    std::size_t count() const { return entries_.size(); }

    std::uint64_t rng_seed = 0;
    std::uint64_t step_count = 0;

    // Versioned binary container; round-trip is bit-exact.
    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw DataError("cannot open checkpoint for writing: " + path);
        f.write(kMagic, 8);
        write_u64(f, rng_seed);
        write_u64(f, step_count);
        write_u32(f, static_cast<std::uint32_t>(entries_.size()));
        for (const auto& e : entries_) {
            write_u32(f, static_cast<std::uint32_t>(e.name.size()));
            f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
            f.put(static_cast<char>(sizeof(T)));
            f.put(static_cast<char>(e.tensor.shape.size()));
            for (std::size_t ext : e.tensor.shape) write_u64(f, ext);
            f.write(reinterpret_cast<const char*>(e.tensor.data.data()),
                    static_cast<std::streamsize>(e.tensor.data.size() * sizeof(T)));
        }
        if (!f) throw DataError("checkpoint write failed: " + path);
    }

    static ParamRegistry load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw DataError("cannot open checkpoint: " + path);
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, kMagic, 8) != 0) throw DataError("bad checkpoint magic: " + path);
        ParamRegistry out;
        out.rng_seed = read_u64(f);
        out.step_count = read_u64(f);
        std::uint32_t n = read_u32(f);
        for (std::uint32_t i = 0; i < n; ++i) {
            std::uint32_t len = read_u32(f);
            std::string name(len, '\0');
            f.read(name.data(), len);
            int dsize = f.get();
            int ndim = f.get();
            Shape shape;
            for (int d = 0; d < ndim; ++d) shape.push_back(read_u64(f));
            std::size_t numel = shape_numel(shape);
            Tensor<T> t = Tensor<T>::zeros(shape);
            if (dsize == static_cast<int>(sizeof(T))) {
                f.read(reinterpret_cast<char*>(t.data.data()),
                       static_cast<std::streamsize>(numel * sizeof(T)));
            } else if (dsize == 4) {
                std::vector<float> buf(numel);
                f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(numel * 4));
                for (std::size_t k = 0; k < numel; ++k) t.data[k] = static_cast<T>(buf[k]);
            } else if (dsize == 8) {
                std::vector<double> buf(numel);
                f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(numel * 8));
                for (std::size_t k = 0; k < numel; ++k) t.data[k] = static_cast<T>(buf[k]);
            } else {
                throw DataError("unknown dtype tag in checkpoint: " + std::to_string(dsize));
            }
            if (!f) throw DataError("truncated checkpoint: " + path);
            out.add(name, std::move(t));
        }
        return out;
    }

    struct Entry {
        std::string name;
        Tensor<T> tensor;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

  private:
    static constexpr const char kMagic[9] = "IVQACKP1";

    static void write_u32(std::ostream& f, std::uint32_t v) {
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    static void write_u64(std::ostream& f, std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    }
    static std::uint32_t read_u32(std::istream& f) {
        std::uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    }
    static std::uint64_t read_u64(std::istream& f) {
        std::uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    }

    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace ivqa
