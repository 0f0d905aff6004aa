#include "posellm/params.hpp"

#include <algorithm>

#include "posellm/errors.hpp"
#include "posellm/rng.hpp"

namespace posellm {

Param& ParamStore::add(const std::string& name, int rows, int cols, bool trainable) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    params_.emplace_back();
    Param& p = params_.back();
    p.name = name;
    p.w = Mat(rows, cols);
    p.trainable = trainable;
    p.id = static_cast<int>(params_.size()) - 1;
    p.offset = grad_size_;
    grad_size_ += p.w.size();
    index_[name] = p.id;
    return p;
}

Param& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return params_[static_cast<size_t>(it->second)];
}

const Param& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return params_[static_cast<size_t>(it->second)];
}

Param* ParamStore::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[static_cast<size_t>(it->second)];
}

std::vector<std::pair<std::string, std::pair<int, int>>> ParamStore::shapes_sorted() const {
    std::vector<std::pair<std::string, std::pair<int, int>>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) {
        out.emplace_back(p.name, std::make_pair(p.w.rows, p.w.cols));
    }
    std::sort(out.begin(), out.end());
    return out;
}

size_t ParamStore::total_values() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.w.size();
    return n;
}

void ParamStore::init_trunc_normal(Param& p, uint64_t root_seed, double std_dev) {
    Rng rng(derive_seed(root_seed, p.name));
    for (double& v : p.w.data) v = rng.trunc_normal(std_dev);
}

void GradBuffer::add(const GradBuffer& other) {
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

}  // namespace posellm
