#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace posellm {

// Character-level vocabulary over a fixed 47-symbol alphabet plus
// pad/bos/eos. The alphabet is the closure of the keypoint catalog, the
// question template and the coordinate answer grammar; anything outside it
// is a tokenization error.
class Vocabulary {
public:
    Vocabulary();

    int size() const { return static_cast<int>(alphabet_.size()) + 3; }
    int pad_id() const { return static_cast<int>(alphabet_.size()); }
    int bos_id() const { return static_cast<int>(alphabet_.size()) + 1; }
    int eos_id() const { return static_cast<int>(alphabet_.size()) + 2; }
    bool is_special(int id) const { return id >= pad_id() && id <= eos_id(); }

    // Throws DomainError naming the offending character.
    std::vector<int> tokenize(std::string_view text) const;

    // Inverse of tokenize; special ids contribute nothing. Throws
    // DomainError on ids outside [0, size).
    std::string detokenize(const std::vector<int>& ids) const;

    std::string_view alphabet() const { return alphabet_; }

    // "symbol<TAB>id" per line; space and specials spelled out.
    std::string to_tsv() const;

private:
    std::string alphabet_;
    int char_to_id_[256];
};

const Vocabulary& vocabulary();  // process-wide shared instance

}  // namespace posellm
