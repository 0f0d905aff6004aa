#include "posellm/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "posellm/errors.hpp"

namespace posellm {

OksParams OksParams::constant(double k_value) {
    OksParams p;
    p.k.fill(k_value);
    return p;
}

void OksParams::validate() const {
    for (const double v : k) {
        if (!(v > 0.0)) throw ConfigError("metrics: OKS k constants must be positive");
    }
    if (!(medium_min > 0.0) || !(medium_max > medium_min)) {
        throw ConfigError("metrics: area bands must satisfy 0 < medium_min < medium_max");
    }
}

std::optional<double> oks(const Prediction& pred, const SkeletonSample& gt,
                          const OksParams& params) {
    int visible = 0;
    double acc = 0.0;
    const double s2 = gt.area;
    if (!(s2 > 0.0)) return std::nullopt;
    for (int i = 0; i < 17; ++i) {
        if (gt.visibility[static_cast<size_t>(i)] != 1) continue;
        ++visible;
        const KeypointPrediction& kp = pred.kps[static_cast<size_t>(i)];
        if (!kp.present) continue;  // exp(-inf) = 0 contribution
        const double dx = (kp.x - gt.keypoints[2 * i]) * gt.w;
        const double dy = (kp.y - gt.keypoints[2 * i + 1]) * gt.h;
        const double d2 = dx * dx + dy * dy;
        const double kk = params.k[static_cast<size_t>(i)];
        acc += std::exp(-d2 / (2.0 * s2 * kk * kk));
    }
    if (visible == 0) return std::nullopt;
    return acc / visible;
}

namespace {

const std::array<double, 10>& oks_thresholds() {
    static const std::array<double, 10> t = {0.50, 0.55, 0.60, 0.65, 0.70,
                                             0.75, 0.80, 0.85, 0.90, 0.95};
    return t;
}

double percent_at(const std::vector<double>& scores, double threshold) {
    if (scores.empty()) return 0.0;
    int hit = 0;
    for (const double s : scores) {
        if (s >= threshold) ++hit;
    }
    return 100.0 * hit / static_cast<double>(scores.size());
}

double mean_over_thresholds(const std::vector<double>& scores) {
    double acc = 0.0;
    for (const double t : oks_thresholds()) acc += percent_at(scores, t);
    return acc / static_cast<double>(oks_thresholds().size());
}

}  // namespace

ApResult ap_suite(const std::vector<Prediction>& preds,
                  const std::vector<SkeletonSample>& dataset, const OksParams& params) {
    params.validate();
    if (preds.size() != dataset.size()) {
        throw IntegrityError("ap_suite: " + std::to_string(preds.size()) + " predictions vs " +
                             std::to_string(dataset.size()) + " samples");
    }
    std::vector<double> scores, medium, large;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].id != static_cast<int>(i)) {
            throw IntegrityError("ap_suite: prediction id " + std::to_string(preds[i].id) +
                                 " does not match sample index " + std::to_string(i));
        }
        const auto score = oks(preds[i], dataset[i], params);
        if (!score) continue;  // unscoreable instances are excluded
        scores.push_back(*score);
        const double area = dataset[i].area;
        if (area >= params.medium_min && area < params.medium_max) {
            medium.push_back(*score);
        } else if (area >= params.medium_max) {
            large.push_back(*score);
        }
    }
    ApResult r;
    r.instances = static_cast<int>(scores.size());
    r.ap = mean_over_thresholds(scores);
    r.ap50 = percent_at(scores, 0.50);
    r.ap75 = percent_at(scores, 0.75);
    r.apm = mean_over_thresholds(medium);
    r.apl = mean_over_thresholds(large);
    r.ar = mean_over_thresholds(scores);  // recall == precision here
    return r;
}

PckhResult pckh(const std::vector<Prediction>& preds,
                const std::vector<SkeletonSample>& dataset, double alpha) {
    if (preds.size() != dataset.size()) {
        throw IntegrityError("pckh: prediction/dataset size mismatch");
    }
    if (!(alpha > 0.0)) throw ConfigError("pckh: alpha must be positive");

    std::array<long long, 17> correct{};
    std::array<long long, 17> total{};
    for (size_t i = 0; i < preds.size(); ++i) {
        const SkeletonSample& gt = dataset[i];
        if (!(gt.head_size > 0.0)) continue;
        for (int k = 0; k < 17; ++k) {
            if (gt.visibility[static_cast<size_t>(k)] != 1) continue;
            total[static_cast<size_t>(k)] += 1;
            const KeypointPrediction& kp = preds[i].kps[static_cast<size_t>(k)];
            if (!kp.present) continue;
            const double dx = kp.x - gt.keypoints[2 * k];
            const double dy = kp.y - gt.keypoints[2 * k + 1];
            if (std::sqrt(dx * dx + dy * dy) <= alpha * gt.head_size) {
                correct[static_cast<size_t>(k)] += 1;
            }
        }
    }

    PckhResult r;
    long long call = 0, tall = 0;
    for (int k = 0; k < 17; ++k) {
        call += correct[static_cast<size_t>(k)];
        tall += total[static_cast<size_t>(k)];
        r.per_keypoint[static_cast<size_t>(k)] =
            total[static_cast<size_t>(k)] > 0
                ? 100.0 * correct[static_cast<size_t>(k)] / total[static_cast<size_t>(k)]
                : 0.0;
    }
    r.overall = tall > 0 ? 100.0 * call / static_cast<double>(tall) : 0.0;
    r.counted = static_cast<int>(tall);

    const std::array<std::pair<int, int>, 4> groups = {{{5, 6}, {7, 8}, {11, 12}, {13, 14}}};
    for (size_t gi = 0; gi < groups.size(); ++gi) {
        const auto [a, b] = groups[gi];
        const long long c = correct[static_cast<size_t>(a)] + correct[static_cast<size_t>(b)];
        const long long t = total[static_cast<size_t>(a)] + total[static_cast<size_t>(b)];
        r.groups[gi] = t > 0 ? 100.0 * c / static_cast<double>(t) : 0.0;
    }
    return r;
}

EvalReport evaluate(const std::vector<Prediction>& preds,
                    const std::vector<SkeletonSample>& dataset, const OksParams& params) {
    EvalReport rep;
    rep.ap = ap_suite(preds, dataset, params);
    rep.pckh05 = pckh(preds, dataset, 0.5);
    rep.pckh01 = pckh(preds, dataset, 0.1);
    for (const auto& p : preds) {
        for (const auto& kp : p.kps) {
            ++rep.queries;
            if (!kp.present) ++rep.parse_failures;
        }
    }
    return rep;
}

std::string report_table(const EvalReport& r) {
    char buf[512];
    std::string out;
    out += "      AP    AP50    AP75     APM     APL      AR\n";
    std::snprintf(buf, sizeof(buf), "%8.1f%8.1f%8.1f%8.1f%8.1f%8.1f\n", r.ap.ap, r.ap.ap50,
                  r.ap.ap75, r.ap.apm, r.ap.apl, r.ap.ar);
    out += buf;
    out += "\n   Shou.   Elbo.     Hip    Knee    Mean Mean0.1\n";
    std::snprintf(buf, sizeof(buf), "%8.1f%8.1f%8.1f%8.1f%8.1f%8.1f\n", r.pckh05.groups[0],
                  r.pckh05.groups[1], r.pckh05.groups[2], r.pckh05.groups[3], r.pckh05.overall,
                  r.pckh01.overall);
    out += buf;
    std::snprintf(buf, sizeof(buf), "\ninstances=%d queries=%d parse_failures=%d\n",
                  r.ap.instances, r.queries, r.parse_failures);
    out += buf;
    return out;
}

std::string report_keyvalues(const EvalReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << "AP=" << r.ap.ap << "\nAP50=" << r.ap.ap50 << "\nAP75=" << r.ap.ap75
       << "\nAPM=" << r.ap.apm << "\nAPL=" << r.ap.apl << "\nAR=" << r.ap.ar
       << "\nPCKh0.5=" << r.pckh05.overall << "\nPCKh0.1=" << r.pckh01.overall
       << "\nPCKh0.5.shoulders=" << r.pckh05.groups[0]
       << "\nPCKh0.5.elbows=" << r.pckh05.groups[1] << "\nPCKh0.5.hips=" << r.pckh05.groups[2]
       << "\nPCKh0.5.knees=" << r.pckh05.groups[3] << "\ninstances=" << r.ap.instances
       << "\nqueries=" << r.queries << "\nparse_failures=" << r.parse_failures << "\n";
    return os.str();
}

void write_predictions(const std::string& path, const std::vector<Prediction>& preds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.precision(17);
    for (const auto& p : preds) {
        out << p.id;
        for (const auto& kp : p.kps) {
            if (kp.present) {
                out << " " << kp.x << "," << kp.y;
            } else {
                out << " miss";
            }
        }
        out << "\n";
    }
    out.close();
    if (!out) throw IoError("write failed: " + path);
}

std::vector<Prediction> read_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Prediction> preds;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        Prediction p;
        if (!(is >> p.id)) {
            throw ParseError(path + ": line " + std::to_string(lineno) + ": missing id");
        }
        for (int k = 0; k < 17; ++k) {
            std::string tok;
            if (!(is >> tok)) {
                throw ParseError(path + ": line " + std::to_string(lineno) +
                                 ": expected 17 keypoint entries");
            }
            if (tok == "miss") continue;
            const size_t comma = tok.find(',');
            if (comma == std::string::npos) {
                throw ParseError(path + ": line " + std::to_string(lineno) +
                                 ": malformed entry '" + tok + "'");
            }
            try {
                p.kps[static_cast<size_t>(k)].x = std::stod(tok.substr(0, comma));
                p.kps[static_cast<size_t>(k)].y = std::stod(tok.substr(comma + 1));
                p.kps[static_cast<size_t>(k)].present = true;
            } catch (const std::exception&) {
                throw ParseError(path + ": line " + std::to_string(lineno) +
                                 ": malformed entry '" + tok + "'");
            }
        }
        preds.push_back(p);
    }
    return preds;
}

}  // namespace posellm
