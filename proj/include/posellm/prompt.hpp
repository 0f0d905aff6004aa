#pragma once

#include <optional>
#include <string>
#include <vector>

namespace posellm {

// One training example: instruction text, serialized answer, token ids and
// the loss mask. answer_mask is a single contiguous true-run covering the
// answer tokens plus eos, ending at the final token.
struct InstructionRecord {
    std::string prompt_text;
    std::string answer_text;  // leading space + "x=0.ddd,y=0.ddd"
    std::vector<int> token_ids;
    std::vector<bool> answer_mask;
};

// "{description} Where is the {name} of this person? Answer:"
std::string build_prompt(int keypoint_index);

// Fixed-width coordinate text, 3 fractional digits, round-half-up. Inputs
// are clamped to [0,1]; NaN is a domain error.
std::string serialize_coords(double x, double y);

// Strict inverse of serialize_coords. Returns nullopt on any mismatch;
// never throws (parse failures are misses at evaluation time).
std::optional<std::pair<double, double>> parse_coords(const std::string& answer);

// bos + tokenize(prompt) + tokenize(" " + serialize(x,y)) + eos, with the
// mask true exactly on the answer tokens and eos.
InstructionRecord make_training_record(int keypoint_index, double x, double y);

// Prompt token ids for decoding: bos + tokenize(prompt); generation starts
// after the "Answer:" boundary.
std::vector<int> make_prompt_ids(int keypoint_index);

// Longest token_ids length over all 17 keypoints (used for capacity checks).
int max_record_tokens();

}  // namespace posellm
