#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "simaml/errors.hpp"

namespace simaml {

// Ordered labeled dependency tree reconstructed from a logical form.
// Children order is significant; it follows the argument order of the form.
struct DepNode {
    std::string label;
    std::vector<int> children;
};

struct DepTree {
    std::vector<DepNode> nodes;
    int root = -1;

    int size() const { return static_cast<int>(nodes.size()); }
    const DepNode& node(int i) const { return nodes.at(static_cast<std::size_t>(i)); }
};

enum class LfDialect { cogs, synth };

namespace detail {

// Lexer shared by both dialects: words, plus single-char tokens for the
// structural characters. "x _ 1" and "x_1" lex identically.
inline std::vector<std::string> lex_logical_form(const std::string& raw) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (c == '(' || c == ')' || c == ',' || c == ';' || c == '*' || c == '_' || c == '.') {
            flush();
            out.push_back(std::string(1, c));
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline bool is_word(const std::string& t) {
    return t.size() > 0 && t != "(" && t != ")" && t != "," && t != ";" && t != "*" && t != "_" && t != "." &&
           t != "AND" && t != "LAMBDA";
}

inline bool all_digits(const std::string& t) {
    if (t.empty()) return false;
    for (char c : t)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

class CogsLfParser {
public:
    explicit CogsLfParser(const std::string& raw) : toks_(lex_logical_form(raw)), raw_(raw) {}

    DepTree parse() {
        parse_lambda_prefix();
        if (pos_ == toks_.size()) throw ParseError("empty logical form: '" + raw_ + "'");
        // bare constant, e.g. a proper-noun primitive
        if (pos_ + 1 == toks_.size() && is_word(toks_[pos_])) {
            DepTree t;
            t.nodes.push_back({lower(toks_[pos_]), {}});
            t.root = 0;
            return t;
        }
        while (pos_ < toks_.size()) {
            if (peek() == ";") {
                ++pos_;
                continue;
            }
            if (peek() == "*") {
                ++pos_;  // definiteness marker, discarded
                continue;
            }
            if (peek() == "AND") {
                ++pos_;
                continue;
            }
            parse_atom();
        }
        return assemble();
    }

private:
    const std::string& peek() const {
        static const std::string kEnd = "";
        return pos_ < toks_.size() ? toks_[pos_] : kEnd;
    }

    std::string take() {
        if (pos_ >= toks_.size()) throw ParseError("unexpected end of logical form: '" + raw_ + "'");
        return toks_[pos_++];
    }

    void expect(const std::string& t) {
        std::string got = take();
        if (got != t) throw ParseError("expected '" + t + "' but found '" + got + "' in '" + raw_ + "'");
    }

    void parse_lambda_prefix() {
        while (peek() == "LAMBDA") {
            ++pos_;
            std::string var = take();
            if (!is_word(var)) throw ParseError("bad LAMBDA binder in '" + raw_ + "'");
            expect(".");
            bound_.insert(var);
        }
    }

    // Argument: event/entity variable `x _ N`, a LAMBDA-bound name, or a
    // proper-noun constant.
    struct Arg {
        enum class Kind { variable, bound, constant } kind;
        std::string text;
    };

    Arg parse_arg() {
        std::string t = take();
        if (!is_word(t)) throw ParseError("expected argument but found '" + t + "' in '" + raw_ + "'");
        if (t == "x" && peek() == "_") {
            ++pos_;
            std::string idx = take();
            if (!all_digits(idx)) throw ParseError("bad variable index '" + idx + "' in '" + raw_ + "'");
            return {Arg::Kind::variable, "x_" + idx};
        }
        if (bound_.count(t)) return {Arg::Kind::bound, t};
        return {Arg::Kind::constant, t};
    }

    void parse_atom() {
        // head: lemma optionally followed by dotted role parts
        std::vector<std::string> head;
        head.push_back(take());
        if (!is_word(head.back())) throw ParseError("expected predicate but found '" + head.back() + "' in '" + raw_ + "'");
        while (peek() == ".") {
            ++pos_;
            head.push_back(take());
            if (!is_word(head.back())) throw ParseError("bad role segment in '" + raw_ + "'");
        }
        expect("(");
        std::vector<Arg> args;
        args.push_back(parse_arg());
        while (peek() == ",") {
            ++pos_;
            args.push_back(parse_arg());
        }
        expect(")");

        const std::string lemma = lower(head[0]);
        if (args.size() == 1) {
            if (head.size() != 1) throw ParseError("unary atom with role suffix in '" + raw_ + "'");
            set_label(args[0], lemma);
        } else if (args.size() == 2) {
            if (head.size() < 2) throw ParseError("binary atom without role in '" + raw_ + "'");
            set_label(args[0], lemma);
            edges_.push_back({key_of(args[0]), args[1]});
        } else {
            throw ParseError("atom with " + std::to_string(args.size()) + " arguments in '" + raw_ + "'");
        }
    }

    static std::string key_of(const Arg& a) { return a.text; }

    void set_label(const Arg& a, const std::string& lemma) {
        auto [it, inserted] = labels_.emplace(a.text, lemma);
        if (!inserted && it->second != lemma) {
            throw ParseError("variable " + a.text + " labeled both '" + it->second + "' and '" + lemma + "' in '" + raw_ + "'");
        }
        if (std::find(order_.begin(), order_.end(), a.text) == order_.end()) order_.push_back(a.text);
    }

    DepTree assemble() {
        DepTree t;
        std::unordered_map<std::string, int> node_of;
        for (const auto& key : order_) {
            node_of[key] = t.size();
            t.nodes.push_back({labels_[key], {}});
        }
        std::vector<int> parent(t.nodes.size(), -1);
        for (const auto& [head_key, arg] : edges_) {
            int head = node_of.at(head_key);
            int child = -1;
            if (arg.kind == Arg::Kind::constant) {
                child = t.size();
                t.nodes.push_back({lower(arg.text), {}});
                parent.push_back(-1);
            } else if (arg.kind == Arg::Kind::bound) {
                if (!labels_.count(arg.text)) continue;  // anonymous binder, no subtree
                child = node_of.at(arg.text);
            } else {
                auto it = node_of.find(arg.text);
                if (it == node_of.end()) throw ParseError("unresolvable variable reference " + arg.text + " in '" + raw_ + "'");
                child = it->second;
            }
            // keep the first attachment: control constructions share an
            // argument across two predicates, a dependency tree keeps one head
            if (parent[static_cast<std::size_t>(child)] != -1) continue;
            if (is_ancestor(t, child, head)) {
                throw ParseError("cyclic argument structure at " + head_key + " in '" + raw_ + "'");
            }
            parent[static_cast<std::size_t>(child)] = head;
            t.nodes[static_cast<std::size_t>(head)].children.push_back(child);
        }
        std::vector<int> roots;
        for (int i = 0; i < t.size(); ++i) {
            if (parent[static_cast<std::size_t>(i)] == -1) roots.push_back(i);
        }
        if (roots.empty()) throw ParseError("no root found in '" + raw_ + "'");
        if (roots.size() > 1) {
            std::string names;
            for (int r : roots) {
                if (!names.empty()) names += ", ";
                names += t.nodes[static_cast<std::size_t>(r)].label;
            }
            throw ParseError("multiple disconnected event graphs (roots: " + names + ") in '" + raw_ + "'");
        }
        t.root = roots[0];
        return t;
    }

    static bool is_ancestor(const DepTree& t, int candidate, int below) {
        // walk down from candidate looking for below
        std::vector<int> stack = {candidate};
        while (!stack.empty()) {
            int n = stack.back();
            stack.pop_back();
            if (n == below) return true;
            for (int c : t.nodes[static_cast<std::size_t>(n)].children) stack.push_back(c);
        }
        return false;
    }

    std::vector<std::string> toks_;
    std::string raw_;
    std::size_t pos_ = 0;
    std::set<std::string> bound_;
    std::map<std::string, std::string> labels_;  // var -> lemma
    std::vector<std::string> order_;             // vars in first-mention order
    std::vector<std::pair<std::string, Arg>> edges_;
};

class SynthLfParser {
public:
    explicit SynthLfParser(const std::string& raw) : toks_(lex_logical_form(raw)), raw_(raw) {}

    DepTree parse() {
        DepTree t;
        t.root = parse_term(t);
        if (pos_ != toks_.size()) throw ParseError("trailing tokens after term in '" + raw_ + "'");
        return t;
    }

private:
    int parse_term(DepTree& t) {
        if (pos_ >= toks_.size()) throw ParseError("unexpected end of term in '" + raw_ + "'");
        std::string name = toks_[pos_++];
        if (!is_word(name)) throw ParseError("expected term name but found '" + name + "' in '" + raw_ + "'");
        int idx = t.size();
        t.nodes.push_back({name, {}});
        if (pos_ < toks_.size() && toks_[pos_] == "(") {
            ++pos_;
            // recursion appends nodes, so resolve the child index before
            // touching t.nodes[idx] again
            int child = parse_term(t);
            t.nodes[static_cast<std::size_t>(idx)].children.push_back(child);
            while (pos_ < toks_.size() && toks_[pos_] == ",") {
                ++pos_;
                child = parse_term(t);
                t.nodes[static_cast<std::size_t>(idx)].children.push_back(child);
            }
            if (pos_ >= toks_.size() || toks_[pos_] != ")") throw ParseError("unbalanced parentheses in '" + raw_ + "'");
            ++pos_;
        }
        return idx;
    }

    std::vector<std::string> toks_;
    std::string raw_;
    std::size_t pos_ = 0;
};

}  // namespace detail

// Predicate-argument skeleton of a logical form. Quantifiers, variables and
// role suffixes are stripped; node labels are bare lowercase lemmas.
inline DepTree logical_form_to_deptree(const std::string& raw_target, LfDialect dialect) {
    if (dialect == LfDialect::cogs) return detail::CogsLfParser(raw_target).parse();
    return detail::SynthLfParser(raw_target).parse();
}

// Canonical encoding: preorder `label(child,child,...)`, no whitespace.
inline std::string encode_tree(const DepTree& t, int node) {
    const DepNode& n = t.node(node);
    if (n.children.empty()) return n.label;
    std::string out = n.label + "(";
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += ",";
        out += encode_tree(t, n.children[i]);
    }
    out += ")";
    return out;
}

inline std::string encode_tree(const DepTree& t) { return encode_tree(t, t.root); }

using PartialTreeMultiset = std::map<std::string, std::int64_t>;

namespace detail {

// Number of partial trees rooted at each node: prod over children of
// (1 + count(child)), saturating so cap checks cannot overflow.
inline std::uint64_t count_fragments_rooted(const DepTree& t, int node, std::uint64_t clamp,
                                            std::vector<std::uint64_t>& memo) {
    std::uint64_t& slot = memo[static_cast<std::size_t>(node)];
    if (slot != 0) return slot;
    std::uint64_t prod = 1;
    for (int c : t.node(node).children) {
        std::uint64_t fc = count_fragments_rooted(t, c, clamp, memo);
        if (prod > clamp / (fc + 1)) {
            prod = clamp;
            break;
        }
        prod *= (fc + 1);
    }
    return slot = prod;
}

inline void enumerate_rooted(const DepTree& t, int node, std::vector<std::string>& out) {
    const DepNode& n = t.node(node);
    std::vector<std::string> acc = {""};  // child-list suffixes built so far
    for (int c : n.children) {
        std::vector<std::string> child_encodings;
        enumerate_rooted(t, c, child_encodings);
        std::vector<std::string> next;
        next.reserve(acc.size() * (1 + child_encodings.size()));
        for (const auto& prefix : acc) {
            next.push_back(prefix);  // child excluded
            for (const auto& ce : child_encodings) {
                next.push_back(prefix.empty() ? ce : prefix + "," + ce);
            }
        }
        acc = std::move(next);
    }
    out.reserve(out.size() + acc.size());
    for (const auto& body : acc) {
        out.push_back(body.empty() ? n.label : n.label + "(" + body + ")");
    }
}

}  // namespace detail

// Exhaustive enumeration of every connected, child-order-preserving fragment,
// as a multiset of canonical encodings. Oracle for the partial tree kernel;
// only intended for small trees, hence the hard cap.
inline PartialTreeMultiset enumerate_partial_trees(const DepTree& t, std::uint64_t cap = 100000) {
    if (t.root < 0 || t.nodes.empty()) throw ConfigError("cannot enumerate an empty tree");
    std::vector<std::uint64_t> memo(t.nodes.size(), 0);
    std::uint64_t total = 0;
    for (int i = 0; i < t.size(); ++i) {
        std::uint64_t f = detail::count_fragments_rooted(t, i, cap + 1, memo);
        total = total > cap ? total : total + f;
        if (total > cap) {
            throw ConfigError("partial-tree count exceeds cap " + std::to_string(cap));
        }
    }
    PartialTreeMultiset ms;
    for (int i = 0; i < t.size(); ++i) {
        std::vector<std::string> encodings;
        detail::enumerate_rooted(t, i, encodings);
        for (auto& e : encodings) ++ms[e];
    }
    return ms;
}

// Total count without materializing encodings (used for normalization checks).
inline std::uint64_t count_partial_trees(const DepTree& t, std::uint64_t cap = 100000) {
    std::vector<std::uint64_t> memo(t.nodes.size(), 0);
    std::uint64_t total = 0;
    for (int i = 0; i < t.size(); ++i) {
        total += detail::count_fragments_rooted(t, i, cap + 1, memo);
        if (total > cap) throw ConfigError("partial-tree count exceeds cap " + std::to_string(cap));
    }
    return total;
}

}  // namespace simaml
