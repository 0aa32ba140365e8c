#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "simaml/errors.hpp"

namespace simaml {

// One (natural-language sentence, formal representation) pair.
struct Example {
    int id = -1;
    std::vector<std::string> source;  // word tokens of the input sentence
    std::vector<std::string> target;  // tokens of the formal representation
    std::string raw_target;           // untokenized target, original spacing
    std::string tag;                  // distribution / generalization-case label
};

// Split on runs of whitespace. No case folding, no punctuation handling:
// SCAN and COGS files are distributed pre-tokenized.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::string join(const std::vector<std::string>& tokens, const std::string& sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += sep;
        out += tokens[i];
    }
    return out;
}

// Token <-> index bijection with fixed reserved slots. Checkpoints and cached
// indices stay portable because the reserved ids never move.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocab() {
        for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
    }

    int add(const std::string& token) {
        auto it = index_.find(token);
        if (it != index_.end()) return it->second;
        int id = static_cast<int>(tokens_.size());
        tokens_.push_back(token);
        index_.emplace(token, id);
        return id;
    }

    // -1 if absent.
    int lookup(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? -1 : it->second;
    }

    bool contains(const std::string& token) const { return index_.count(token) > 0; }

    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    int size() const { return static_cast<int>(tokens_.size()); }

    std::vector<int> encode(const std::vector<std::string>& tokens, bool allow_unk = true) const {
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const auto& t : tokens) {
            int id = lookup(t);
            if (id < 0) {
                if (!allow_unk) throw ParseError("token not in vocabulary: '" + t + "'");
                id = kUnk;
            }
            ids.push_back(id);
        }
        return ids;
    }

    std::vector<std::string> decode(const std::vector<int>& ids) const {
        std::vector<std::string> out;
        out.reserve(ids.size());
        for (int id : ids) out.push_back(token(id));
        return out;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

struct Corpus {
    std::string name;
    std::vector<Example> examples;
    Vocab source_vocab;
    Vocab target_vocab;

    std::size_t size() const { return examples.size(); }
};

namespace detail {

// Assigns contiguous ids, validates the non-empty invariants, builds both
// vocabularies in first-occurrence order.
inline Corpus finalize_corpus(std::string name, std::vector<Example> examples) {
    Corpus c;
    c.name = std::move(name);
    c.examples = std::move(examples);
    for (std::size_t i = 0; i < c.examples.size(); ++i) {
        Example& e = c.examples[i];
        e.id = static_cast<int>(i);
        if (e.source.empty()) throw ParseError(c.name + ": example " + std::to_string(i) + " has empty source");
        if (e.target.empty()) throw ParseError(c.name + ": example " + std::to_string(i) + " has empty target");
        for (const auto& t : e.source) c.source_vocab.add(t);
        for (const auto& t : e.target) c.target_vocab.add(t);
    }
    return c;
}

}  // namespace detail

// SCAN line format: `IN: <words> OUT: <words>`.
inline Corpus load_scan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open SCAN file: " + path);
    std::vector<Example> examples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        if (tokens.front() != "IN:") throw ParseError(path, line_no, "expected line to start with 'IN:'");
        auto out_it = std::find(tokens.begin(), tokens.end(), std::string("OUT:"));
        if (out_it == tokens.end()) throw ParseError(path, line_no, "missing 'OUT:' marker");
        Example e;
        e.source.assign(tokens.begin() + 1, out_it);
        e.target.assign(out_it + 1, tokens.end());
        if (e.source.empty()) throw ParseError(path, line_no, "empty command before 'OUT:'");
        if (e.target.empty()) throw ParseError(path, line_no, "empty action sequence after 'OUT:'");
        e.raw_target = join(e.target);
        examples.push_back(std::move(e));
    }
    if (examples.empty()) throw ParseError("SCAN file has no examples: " + path);
    return detail::finalize_corpus(path, std::move(examples));
}

// COGS line format: `sentence<TAB>logical form<TAB>tag`.
inline Corpus load_cogs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open COGS file: " + path);
    std::vector<Example> examples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 3) {
            throw ParseError(path, line_no, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
        }
        Example e;
        e.source = tokenize(fields[0]);
        e.target = tokenize(fields[1]);
        e.raw_target = fields[1];
        e.tag = fields[2];
        if (e.source.empty()) throw ParseError(path, line_no, "empty sentence field");
        if (e.target.empty()) throw ParseError(path, line_no, "empty logical form field");
        examples.push_back(std::move(e));
    }
    if (examples.empty()) throw ParseError("COGS file has no examples: " + path);
    return detail::finalize_corpus(path, std::move(examples));
}

inline void save_cogs_tsv(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    for (const auto& e : corpus.examples) {
        out << join(e.source) << '\t' << e.raw_target << '\t' << (e.tag.empty() ? "in_distribution" : e.tag) << '\n';
    }
}

// FNV-1a over every example's source and raw target, in id order. Identifies
// the corpus a cached neighbor index belongs to.
inline std::uint64_t corpus_fingerprint(const Corpus& corpus) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& e : corpus.examples) {
        mix(join(e.source));
        mix("\t");
        mix(e.raw_target);
        mix("\n");
    }
    return h;
}

}  // namespace simaml
