#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "posellm/tensor.hpp"

namespace posellm {

struct Param {
    std::string name;
    Mat w;
    bool trainable{false};
    int id{-1};
    size_t offset{0};  // position in the flat gradient space
};

// Named parameter registry. Parameters are stored in a deque so cached
// Param* stay valid as later modules add their own entries.
class ParamStore {
public:
    Param& add(const std::string& name, int rows, int cols, bool trainable = false);
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    Param* find(const std::string& name);

    std::deque<Param>& all() { return params_; }
    const std::deque<Param>& all() const { return params_; }

    size_t grad_size() const { return grad_size_; }

    // name -> (rows, cols), sorted by name
    std::vector<std::pair<std::string, std::pair<int, int>>> shapes_sorted() const;

    size_t total_values() const;

    void init_trunc_normal(Param& p, uint64_t root_seed, double std_dev);

private:
    std::deque<Param> params_;
    std::unordered_map<std::string, int> index_;
    size_t grad_size_{0};
};

// Per-record gradient accumulator over the store's flat layout. slot()
// returns nullptr for frozen parameters unless include_frozen is set, so
// backward passes skip the corresponding work.
class GradBuffer {
public:
    GradBuffer(const ParamStore& store, bool include_frozen = false)
        : store_(&store), include_frozen_(include_frozen), data_(store.grad_size(), 0.0) {}

    double* slot(const Param& p) {
        if (!include_frozen_ && !p.trainable) return nullptr;
        return data_.data() + p.offset;
    }
    const double* at(const Param& p) const { return data_.data() + p.offset; }

    void zero() { std::fill(data_.begin(), data_.end(), 0.0); }
    void add(const GradBuffer& other);

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

private:
    const ParamStore* store_;
    bool include_frozen_;
    std::vector<double> data_;
};

}  // namespace posellm
