#include "posellm/tokenizer.hpp"

#include <cstdio>

#include "posellm/errors.hpp"

namespace posellm {

Vocabulary::Vocabulary()
    : alphabet_(" ',-.?=:0123456789abcdefghijklmnopqrstuvwxyzATW") {
    for (int i = 0; i < 256; ++i) char_to_id_[i] = -1;
    for (size_t i = 0; i < alphabet_.size(); ++i) {
        char_to_id_[static_cast<unsigned char>(alphabet_[i])] = static_cast<int>(i);
    }
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (const char c : text) {
        const int id = char_to_id_[static_cast<unsigned char>(c)];
        if (id < 0) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "tokenizer: character '%c' (0x%02x) not in alphabet",
                          c, static_cast<unsigned char>(c));
            throw DomainError(buf);
        }
        ids.push_back(id);
    }
    return ids;
}

std::string Vocabulary::detokenize(const std::vector<int>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (const int id : ids) {
        if (id < 0 || id >= size()) {
            throw DomainError("tokenizer: id " + std::to_string(id) + " out of range");
        }
        if (is_special(id)) continue;
        out.push_back(alphabet_[static_cast<size_t>(id)]);
    }
    return out;
}

std::string Vocabulary::to_tsv() const {
    std::string out;
    for (size_t i = 0; i < alphabet_.size(); ++i) {
        if (alphabet_[i] == ' ') {
            out += "<space>";
        } else {
            out.push_back(alphabet_[i]);
        }
        out += "\t" + std::to_string(i) + "\n";
    }
    out += "<pad>\t" + std::to_string(pad_id()) + "\n";
    out += "<bos>\t" + std::to_string(bos_id()) + "\n";
    out += "<eos>\t" + std::to_string(eos_id()) + "\n";
    return out;
}

const Vocabulary& vocabulary() {
    static const Vocabulary v;
    return v;
}

}  // namespace posellm
