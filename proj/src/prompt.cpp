#include "posellm/prompt.hpp"

#include <cmath>
#include <cstdio>

#include "posellm/catalog.hpp"
#include "posellm/errors.hpp"
#include "posellm/tokenizer.hpp"

namespace posellm {

std::string build_prompt(int keypoint_index) {
    if (keypoint_index < 0 || keypoint_index >= kNumKeypoints) {
        throw DomainError("keypoint index " + std::to_string(keypoint_index) + " out of range [0,16]");
    }
    const auto& e = keypoint_catalog()[static_cast<size_t>(keypoint_index)];
    std::string s;
    s.append(e.description);
    s.append(" Where is the ");
    s.append(e.name);
    s.append(" of this person? Answer:");
    return s;
}

namespace {

// round-half-up to integer thousandths of a clamped [0,1] value
int to_millis(double v) {
    if (std::isnan(v)) throw DomainError("serialize_coords: NaN coordinate");
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    int m = static_cast<int>(std::floor(v * 1000.0 + 0.5));
    if (m > 1000) m = 1000;
    return m;
}

void append_coord(std::string& out, int millis) {
    char buf[16];
    if (millis == 1000) {
        out += "1.000";
    } else {
        std::snprintf(buf, sizeof(buf), "0.%03d", millis);
        out += buf;
    }
}

}  // namespace

std::string serialize_coords(double x, double y) {
    std::string s = "x=";
    append_coord(s, to_millis(x));
    s += ",y=";
    append_coord(s, to_millis(y));
    return s;
}

std::optional<std::pair<double, double>> parse_coords(const std::string& answer) {
    // grammar: x=D.DDD,y=D.DDD with D in {0,1} leading and value <= 1
    if (answer.size() != 15) return std::nullopt;
    auto read_value = [&](size_t pos, char axis) -> std::optional<double> {
        if (answer[pos] != axis || answer[pos + 1] != '=') return std::nullopt;
        const char lead = answer[pos + 2];
        if (lead != '0' && lead != '1') return std::nullopt;
        if (answer[pos + 3] != '.') return std::nullopt;
        int frac = 0;
        for (size_t i = pos + 4; i < pos + 7; ++i) {
            if (answer[i] < '0' || answer[i] > '9') return std::nullopt;
            frac = frac * 10 + (answer[i] - '0');
        }
        const int millis = (lead - '0') * 1000 + frac;
        if (millis > 1000) return std::nullopt;
        return static_cast<double>(millis) / 1000.0;
    };
    const auto x = read_value(0, 'x');
    if (!x) return std::nullopt;
    if (answer[7] != ',') return std::nullopt;
    const auto y = read_value(8, 'y');
    if (!y) return std::nullopt;
    return std::make_pair(*x, *y);
}

InstructionRecord make_training_record(int keypoint_index, double x, double y) {
    InstructionRecord rec;
    rec.prompt_text = build_prompt(keypoint_index);
    rec.answer_text = " " + serialize_coords(x, y);

    const Vocabulary& vocab = vocabulary();
    const std::vector<int> prompt_ids = vocab.tokenize(rec.prompt_text);
    const std::vector<int> answer_ids = vocab.tokenize(rec.answer_text);

    rec.token_ids.reserve(prompt_ids.size() + answer_ids.size() + 2);
    rec.token_ids.push_back(vocab.bos_id());
    rec.token_ids.insert(rec.token_ids.end(), prompt_ids.begin(), prompt_ids.end());
    rec.token_ids.insert(rec.token_ids.end(), answer_ids.begin(), answer_ids.end());
    rec.token_ids.push_back(vocab.eos_id());

    rec.answer_mask.assign(rec.token_ids.size(), false);
    for (size_t i = 1 + prompt_ids.size(); i < rec.token_ids.size(); ++i) {
        rec.answer_mask[i] = true;
    }
    return rec;
}

std::vector<int> make_prompt_ids(int keypoint_index) {
    const Vocabulary& vocab = vocabulary();
    const std::vector<int> prompt_ids = vocab.tokenize(build_prompt(keypoint_index));
    std::vector<int> ids;
    ids.reserve(prompt_ids.size() + 1);
    ids.push_back(vocab.bos_id());
    ids.insert(ids.end(), prompt_ids.begin(), prompt_ids.end());
    return ids;
}

int max_record_tokens() {
    int best = 0;
    for (int k = 0; k < kNumKeypoints; ++k) {
        const InstructionRecord rec = make_training_record(k, 0.5, 0.5);
        best = std::max(best, static_cast<int>(rec.token_ids.size()));
    }
    return best;
}

}  // namespace posellm
