#include "posellm/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#ifdef POSELLM_OPENMP
#include <omp.h>
#endif

#include "posellm/errors.hpp"
#include "posellm/rng.hpp"

namespace posellm {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (!(lr >= 0.0)) throw ConfigError("train: lr must be non-negative");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (micro_batch <= 0 || accumulation_steps <= 0) {
        throw ConfigError("train: micro_batch and accumulation_steps must be positive");
    }
    if (keypoints_per_sample < 1 || keypoints_per_sample > 17) {
        throw ConfigError("train: keypoints_per_sample must lie in [1,17]");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) {
        throw ConfigError("train: invalid adam constants");
    }
}

std::string TrainConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "accumulation_steps=" << accumulation_steps << "\nbeta1=" << beta1
       << "\nbeta2=" << beta2 << "\neps=" << eps << "\nkeypoints_per_sample="
       << keypoints_per_sample << "\nlr=" << lr << "\nmicro_batch=" << micro_batch
       << "\nseed=" << seed << "\nweight_decay=" << weight_decay << "\n";
    return os.str();
}

std::string TrainConfig::hash() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical())));
    return buf;
}

void adamw_step(double* p, const double* g, double* m, double* v, size_t n, long long t,
                double lr, double wd, double b1, double b2, double eps) {
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p[i]);
    }
}

int keypoint_for_record(const SkeletonSample& sample, int orig_index, int epoch) {
    const int start = ((orig_index + epoch) % 17 + 17) % 17;
    for (int off = 0; off < 17; ++off) {
        const int k = (start + off) % 17;
        if (sample.visibility[static_cast<size_t>(k)] == 1) return k;
    }
    return -1;
}

std::vector<int> epoch_order(uint64_t seed, int epoch, int n) {
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng rng(fnv1a("epoch:" + std::to_string(epoch), seed ^ 0x5bf03635u));
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i) + 1));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    return order;
}

TrainResult train(Model& model, const std::vector<SkeletonSample>& dataset,
                  const TrainConfig& config, TrainState& state, long long max_steps) {
    config.validate();
    if (dataset.empty()) throw ConfigError("train: dataset is empty");

    const size_t gsize = model.store.grad_size();
    if (state.m.empty()) state.m.assign(gsize, 0.0);
    if (state.v.empty()) state.v.assign(gsize, 0.0);
    if (state.m.size() != gsize || state.v.size() != gsize) {
        throw IntegrityError("train: optimizer state size does not match the model");
    }

    TrainResult result;
    const int n = static_cast<int>(dataset.size());
    const int effective = config.micro_batch * config.accumulation_steps;

    int nthreads = 1;
#ifdef POSELLM_OPENMP
    nthreads = omp_get_max_threads();
#endif
    std::vector<RecordWork> works(static_cast<size_t>(nthreads));
    std::vector<GradBuffer> record_grads;
    record_grads.reserve(static_cast<size_t>(config.micro_batch));
    for (int i = 0; i < config.micro_batch; ++i) record_grads.emplace_back(model.store);
    GradBuffer gsum(model.store);

    long long steps_taken = 0;

    while (state.epoch < config.epochs) {
        // (sample index, keypoint) records for this epoch, fixed order
        std::vector<std::pair<int, int>> records;
        records.reserve(static_cast<size_t>(n) * config.keypoints_per_sample);
        for (const int idx : epoch_order(config.seed, state.epoch, n)) {
            for (int j = 0; j < config.keypoints_per_sample; ++j) {
                const int rotation = state.epoch * config.keypoints_per_sample + j;
                const int kp = keypoint_for_record(dataset[static_cast<size_t>(idx)], idx, rotation);
                if (kp >= 0) records.emplace_back(idx, kp);
            }
        }

        const int total = static_cast<int>(records.size());
        while (state.pos < total) {
            if (max_steps >= 0 && steps_taken >= max_steps) return result;

            const int batch_end = std::min(state.pos + effective, total);
            gsum.zero();
            double loss_sum = 0.0;
            long long token_count = 0;

            int cursor = state.pos;
            while (cursor < batch_end) {
                const int mcount = std::min(config.micro_batch, batch_end - cursor);
                std::vector<double> losses(static_cast<size_t>(mcount), 0.0);
                std::vector<int> counts(static_cast<size_t>(mcount), 0);
#ifdef POSELLM_OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
                for (int r = 0; r < mcount; ++r) {
                    int tid = 0;
#ifdef POSELLM_OPENMP
                    tid = omp_get_thread_num();
#endif
                    const auto& [idx, kp] = records[static_cast<size_t>(cursor + r)];
                    record_grads[static_cast<size_t>(r)].zero();
                    losses[static_cast<size_t>(r)] =
                        record_loss(model, dataset[static_cast<size_t>(idx)], kp,
                                    &record_grads[static_cast<size_t>(r)],
                                    &counts[static_cast<size_t>(r)], works[static_cast<size_t>(tid)]);
                }
                // reduce in record order so results do not depend on threads
                for (int r = 0; r < mcount; ++r) {
                    gsum.add(record_grads[static_cast<size_t>(r)]);
                    loss_sum += losses[static_cast<size_t>(r)];
                    token_count += counts[static_cast<size_t>(r)];
                }
                cursor += mcount;
            }

            const double loss = loss_sum / static_cast<double>(token_count);
            if (!std::isfinite(loss)) {
                throw TrainAbort(state.step + 1, "non-finite loss at optimizer step " +
                                                     std::to_string(state.step + 1));
            }

            const double scale = 1.0 / static_cast<double>(token_count);
            state.t += 1;
            for (auto& p : model.store.all()) {
                if (!p.trainable) continue;
                const size_t off = p.offset;
                const size_t cnt = p.w.size();
                std::vector<double> g(cnt);
                for (size_t i = 0; i < cnt; ++i) g[i] = gsum.raw()[off + i] * scale;
                adamw_step(p.w.data.data(), g.data(), state.m.data() + off, state.v.data() + off,
                           cnt, state.t, config.lr, config.weight_decay, config.beta1,
                           config.beta2, config.eps);
            }

            state.step += 1;
            state.pos = batch_end;
            state.last_loss = loss;
            result.curve.push_back({state.step, loss});
            steps_taken += 1;
        }
        state.epoch += 1;
        state.pos = 0;
    }
    return result;
}

// ---------------------------------------------------------------------------
// state persistence (float64, bit-exact resume)
// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kStateMagic = 0x504c5453u;  // "PLTS"
constexpr uint32_t kStateVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IntegrityError("train state: truncated file");
}

void write_string(std::ofstream& out, const std::string& s) {
    write_pod(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
    uint32_t len = 0;
    read_pod(in, len);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw IntegrityError("train state: truncated string");
    return s;
}

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    write_pod(out, static_cast<uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in) {
    uint64_t n = 0;
    read_pod(in, n);
    std::vector<double> v(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw IntegrityError("train state: truncated array");
    return v;
}

}  // namespace

void save_train_state(const std::string& path, const Model& model, const TrainState& state,
                      const TrainConfig& config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_pod(out, kStateMagic);
    write_pod(out, kStateVersion);
    write_string(out, model.cfg.hash());
    write_string(out, config.hash());
    write_pod(out, state.step);
    write_pod(out, state.t);
    write_pod(out, static_cast<int32_t>(state.epoch));
    write_pod(out, static_cast<int32_t>(state.pos));
    write_pod(out, state.last_loss);
    write_pod(out, static_cast<uint32_t>(model.store.all().size()));
    for (const auto& p : model.store.all()) {
        write_string(out, p.name);
        write_pod(out, static_cast<int32_t>(p.w.rows));
        write_pod(out, static_cast<int32_t>(p.w.cols));
        write_doubles(out, p.w.data);
    }
    write_doubles(out, state.m);
    write_doubles(out, state.v);
    write_pod(out, kStateMagic);
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

void load_train_state(const std::string& path, Model& model, TrainState& state,
                      const TrainConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    uint32_t magic = 0, version = 0;
    read_pod(in, magic);
    if (magic != kStateMagic) throw IntegrityError("train state: bad magic");
    read_pod(in, version);
    if (version != kStateVersion) {
        throw IntegrityError("train state: version " + std::to_string(version) +
                             " unsupported (expected " + std::to_string(kStateVersion) + ")");
    }
    const std::string model_hash = read_string(in);
    if (model_hash != model.cfg.hash()) {
        throw IntegrityError("train state: model config hash mismatch");
    }
    const std::string train_hash = read_string(in);
    if (train_hash != config.hash()) {
        throw IntegrityError("train state: train config hash mismatch");
    }
    read_pod(in, state.step);
    read_pod(in, state.t);
    int32_t epoch = 0, pos = 0;
    read_pod(in, epoch);
    read_pod(in, pos);
    state.epoch = epoch;
    state.pos = pos;
    read_pod(in, state.last_loss);
    uint32_t nparams = 0;
    read_pod(in, nparams);
    if (nparams != model.store.all().size()) {
        throw IntegrityError("train state: parameter count mismatch");
    }
    for (auto& p : model.store.all()) {
        const std::string name = read_string(in);
        int32_t rows = 0, cols = 0;
        read_pod(in, rows);
        read_pod(in, cols);
        if (name != p.name || rows != p.w.rows || cols != p.w.cols) {
            throw IntegrityError("train state: parameter '" + name + "' does not match model");
        }
        p.w.data = read_doubles(in);
        if (p.w.data.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols)) {
            throw IntegrityError("train state: parameter '" + name + "' size mismatch");
        }
    }
    state.m = read_doubles(in);
    state.v = read_doubles(in);
    if (state.m.size() != model.store.grad_size() || state.v.size() != model.store.grad_size()) {
        throw IntegrityError("train state: optimizer buffers do not match the model");
    }
    read_pod(in, magic);
    if (magic != kStateMagic) throw IntegrityError("train state: missing trailer");
}

}  // namespace posellm
