#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "posellm/synth.hpp"

namespace posellm {

struct KeypointPrediction {
    bool present{false};  // false = miss (parse failure or absent entry)
    double x{0.0};
    double y{0.0};
};

struct Prediction {
    int id{0};  // sample index within the evaluated dataset
    std::array<KeypointPrediction, 17> kps{};
};

struct OksParams {
    std::array<double, 17> k{};  // per-keypoint falloff constants
    double medium_min = 32.0 * 32.0;  // px^2 area bands for APM / APL
    double medium_max = 96.0 * 96.0;

    static OksParams constant(double k_value);
    void validate() const;
};

// Per-instance similarity: mean over visible keypoints of
// exp(-d^2 / (2 s^2 k^2)) with d in pixels and s^2 the instance area.
// Missing predictions contribute 0. nullopt when no keypoint is visible.
std::optional<double> oks(const Prediction& pred, const SkeletonSample& gt,
                          const OksParams& params);

struct ApResult {
    double ap{0.0};
    double ap50{0.0};
    double ap75{0.0};
    double apm{0.0};
    double apl{0.0};
    double ar{0.0};
    int instances{0};
};

// Threshold sweep over {0.50, 0.55, ..., 0.95}; AP@t is the percentage of
// scoreable instances with OKS >= t (closed threshold). APM/APL restrict to
// the area bands. AR equals AP under this one-prediction-per-instance
// protocol and is reported separately for table fidelity.
ApResult ap_suite(const std::vector<Prediction>& preds,
                  const std::vector<SkeletonSample>& dataset, const OksParams& params);

struct PckhResult {
    double overall{0.0};                     // percentage
    std::array<double, 4> groups{};          // shoulders, elbows, hips, knees
    std::array<double, 17> per_keypoint{};   // percentage per index
    int counted{0};
};

// Correct iff ||pred - gt||_2 <= alpha * head_size, in normalized units
// (closed threshold). Missing predictions count as incorrect.
PckhResult pckh(const std::vector<Prediction>& preds,
                const std::vector<SkeletonSample>& dataset, double alpha);

struct EvalReport {
    ApResult ap;
    PckhResult pckh05;
    PckhResult pckh01;
    int parse_failures{0};
    int queries{0};
};

EvalReport evaluate(const std::vector<Prediction>& preds,
                    const std::vector<SkeletonSample>& dataset, const OksParams& params);

std::string report_table(const EvalReport& r);   // aligned, human-readable
std::string report_keyvalues(const EvalReport& r);  // machine-readable dump

// Predictions file: one line per instance, "id" then 17 entries that are
// either "x,y" or "miss".
void write_predictions(const std::string& path, const std::vector<Prediction>& preds);
std::vector<Prediction> read_predictions(const std::string& path);

}  // namespace posellm
