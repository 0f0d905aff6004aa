#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "posellm/catalog.hpp"
#include "posellm/errors.hpp"
#include "posellm/prompt.hpp"
#include "posellm/rng.hpp"
#include "posellm/tokenizer.hpp"

using namespace posellm;

namespace {

// Independent decimal-rounding oracle: print with 9 fractional digits, then
// round the digit string at the third decimal by hand (half-up).
std::string round3_oracle(double v) {
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    const std::string s(buf);
    const size_t dot = s.find('.');
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);  // integer + fraction
    // digits: D then 9 fraction digits; keep 1 + 3, round by the 4th
    std::string kept = digits.substr(0, 4);
    const char next = digits[4];
    if (next >= '5') {
        for (int i = 3; i >= 0; --i) {
            if (kept[static_cast<size_t>(i)] != '9') {
                kept[static_cast<size_t>(i)]++;
                break;
            }
            kept[static_cast<size_t>(i)] = '0';
        }
    }
    return std::string(1, kept[0]) + "." + kept.substr(1);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("catalog holds the 17 canonical keypoints in order") {
    const auto& cat = keypoint_catalog();
    REQUIRE(cat.size() == 17);
    CHECK(cat[0].name == "nose");
    CHECK(cat[1].name == "left eye");
    CHECK(cat[2].name == "right eye");
    CHECK(cat[3].name == "left ear");
    CHECK(cat[4].name == "right ear");
    CHECK(cat[5].name == "left shoulder");
    CHECK(cat[6].name == "right shoulder");
    CHECK(cat[7].name == "left elbow");
    CHECK(cat[8].name == "right elbow");
    CHECK(cat[9].name == "left wrist");
    CHECK(cat[10].name == "right wrist");
    CHECK(cat[11].name == "left hip");
    CHECK(cat[12].name == "right hip");
    CHECK(cat[13].name == "left knee");
    CHECK(cat[14].name == "right knee");
    CHECK(cat[15].name == "left ankle");
    CHECK(cat[16].name == "right ankle");
    for (const auto& e : cat) {
        CHECK(!e.description.empty());
        CHECK(keypoint_index(e.name) >= 0);
    }
}

TEST_CASE("catalog byte-equals the bundled data file") {
    const std::string shipped = read_file(std::string(POSELLM_SOURCE_DIR) +
                                          "/data/keypoint_catalog.tsv");
    CHECK(shipped == catalog_as_text());
    const auto parsed = parse_catalog_text(shipped);
    REQUIRE(parsed.size() == 17);
    for (int i = 0; i < 17; ++i) {
        CHECK(parsed[static_cast<size_t>(i)].first == keypoint_catalog()[static_cast<size_t>(i)].name);
        CHECK(parsed[static_cast<size_t>(i)].second ==
              keypoint_catalog()[static_cast<size_t>(i)].description);
    }
}

TEST_CASE("build_prompt composes description and question") {
    const std::string p0 = build_prompt(0);
    CHECK(p0.find("The nose is the central, protruding feature on their face") !=
          std::string::npos);
    CHECK(p0.find("Where is the nose of this person? Answer:") != std::string::npos);

    // question clause mentions the name exactly once
    const std::string p16 = build_prompt(16);
    const size_t q = p16.find("Where is the");
    REQUIRE(q != std::string::npos);
    const std::string question = p16.substr(q);
    size_t count = 0;
    for (size_t pos = question.find("right ankle"); pos != std::string::npos;
         pos = question.find("right ankle", pos + 1)) {
        ++count;
    }
    CHECK(count == 1);

    CHECK(build_prompt(5) == build_prompt(5));
    CHECK_THROWS_AS(build_prompt(17), DomainError);
    CHECK_THROWS_AS(build_prompt(-1), DomainError);
}

TEST_CASE("serialize_coords is fixed-width with half-up rounding") {
    CHECK(serialize_coords(0.5, 0.5) == "x=0.500,y=0.500");
    CHECK(serialize_coords(1.0, 0.0) == "x=1.000,y=0.000");
    CHECK(serialize_coords(0.1234, 0.9876) == "x=0.123,y=0.988");
    CHECK(serialize_coords(2.0, -1.0) == "x=1.000,y=0.000");  // clamped
    CHECK_THROWS_AS(serialize_coords(std::nan(""), 0.5), DomainError);

    Rng rng(99);
    for (int i = 0; i < 500; ++i) {
        const double x = rng.uniform();
        const double y = rng.uniform();
        const std::string expect = "x=" + round3_oracle(x) + ",y=" + round3_oracle(y);
        CHECK(serialize_coords(x, y) == expect);
    }
}

TEST_CASE("parse_coords accepts exactly the serialize grammar") {
    auto v = parse_coords("x=0.123,y=0.988");
    REQUIRE(v.has_value());
    CHECK(v->first == doctest::Approx(0.123).epsilon(1e-12));
    CHECK(v->second == doctest::Approx(0.988).epsilon(1e-12));

    CHECK(!parse_coords("x=0.5").has_value());
    CHECK(!parse_coords("").has_value());
    CHECK(!parse_coords("x=0.1234,y=0.988").has_value());
    CHECK(!parse_coords("x=1.001,y=0.000").has_value());
    CHECK(!parse_coords("y=0.123,x=0.988").has_value());
    CHECK(!parse_coords("x=0.123,y=0.988 ").has_value());
    CHECK(parse_coords("x=1.000,y=0.000").has_value());
}

TEST_CASE("parse(serialize) stays within the quantization bound") {
    Rng rng(1234);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform();
        const double y = rng.uniform();
        const auto back = parse_coords(serialize_coords(x, y));
        REQUIRE(back.has_value());
        CHECK(std::fabs(back->first - x) <= 5e-4);
        CHECK(std::fabs(back->second - y) <= 5e-4);
    }
}

TEST_CASE("vocabulary is a dense bijection with specials") {
    const Vocabulary& v = vocabulary();
    CHECK(v.size() == 50);
    std::set<char> seen(v.alphabet().begin(), v.alphabet().end());
    CHECK(seen.size() == v.alphabet().size());  // no duplicate symbols
    CHECK(v.pad_id() == 47);
    CHECK(v.bos_id() == 48);
    CHECK(v.eos_id() == 49);
    const std::string tsv = v.to_tsv();
    CHECK(tsv.find("<eos>\t49") != std::string::npos);
}

TEST_CASE("tokenize round-trips and rejects foreign characters") {
    const Vocabulary& v = vocabulary();
    CHECK(v.tokenize("x=0.500").size() == 7);
    CHECK(v.tokenize("").empty());

    const std::string nose(keypoint_catalog()[0].description);
    CHECK(v.detokenize(v.tokenize(nose)) == nose);
    for (int k = 0; k < 17; ++k) {
        const std::string prompt = build_prompt(k);
        CHECK(v.detokenize(v.tokenize(prompt)) == prompt);
    }

    CHECK_THROWS_WITH_AS(v.tokenize("aBc"), doctest::Contains("'B'"), DomainError);
    CHECK_THROWS_AS(v.tokenize("uh; no"), DomainError);
}

TEST_CASE("training records mask exactly the answer plus eos") {
    const Vocabulary& v = vocabulary();
    const InstructionRecord rec = make_training_record(3, 0.25, 0.75);

    int mask_true = 0;
    for (const bool b : rec.answer_mask) mask_true += b ? 1 : 0;
    CHECK(mask_true == static_cast<int>(v.tokenize(rec.answer_text).size()) + 1);

    // contiguous true-run ending at the final token
    REQUIRE(rec.answer_mask.size() == rec.token_ids.size());
    CHECK(rec.answer_mask.back());
    bool seen_true = false;
    for (size_t i = 0; i < rec.answer_mask.size(); ++i) {
        if (rec.answer_mask[i]) {
            seen_true = true;
        } else {
            CHECK(!seen_true);  // no false after the run starts
        }
    }

    // decode of mask-true ids reproduces the serialized answer
    std::vector<int> masked;
    for (size_t i = 0; i < rec.token_ids.size(); ++i) {
        if (rec.answer_mask[i]) masked.push_back(rec.token_ids[i]);
    }
    CHECK(v.detokenize(masked) == " x=0.250,y=0.750");
    CHECK(masked.back() == v.eos_id());

    // whole-sequence decode reproduces prompt + answer
    CHECK(v.detokenize(rec.token_ids) == rec.prompt_text + rec.answer_text);
    CHECK(rec.token_ids.front() == v.bos_id());

    // same prompt, different coords: identical mask-false prefix
    const InstructionRecord other = make_training_record(3, 0.66, 0.12);
    size_t prefix = 0;
    while (prefix < rec.answer_mask.size() && !rec.answer_mask[prefix]) ++prefix;
    REQUIRE(other.token_ids.size() >= prefix);
    for (size_t i = 0; i < prefix; ++i) {
        CHECK(other.token_ids[i] == rec.token_ids[i]);
        CHECK(!other.answer_mask[i]);
    }
}

TEST_CASE("mask alignment holds for every keypoint") {
    const Vocabulary& v = vocabulary();
    Rng rng(5);
    for (int k = 0; k < 17; ++k) {
        const double x = rng.uniform();
        const double y = rng.uniform();
        const InstructionRecord rec = make_training_record(k, x, y);
        const std::vector<int> prompt_ids = v.tokenize(rec.prompt_text);
        // false on bos and every prompt token, true on the rest
        for (size_t i = 0; i < rec.token_ids.size(); ++i) {
            const bool expect = i > prompt_ids.size();
            CHECK(rec.answer_mask[i] == expect);
        }
        CHECK(make_prompt_ids(k).size() == prompt_ids.size() + 1);
    }
}

TEST_CASE("record token budget is stable") {
    const int longest = max_record_tokens();
    CHECK(longest > 150);
    CHECK(longest < 260);
}
