#include "codegaze/vocab.hpp"

#include <algorithm>
#include <map>

namespace codegaze::ast {

Vocabulary::Vocabulary(std::vector<std::string> reserved)
    : tokens_(std::move(reserved)), reserved_(static_cast<int>(tokens_.size())) {
    for (int k = 0; k < reserved_; ++k) index_[tokens_[k]] = k;
}

Vocabulary Vocabulary::with_sentence_markers() {
    return Vocabulary({"<pad>", "<unk>", "<s>", "</s>"});
}

int Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_[token] = id;
    return id;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size()) throw IndexError("vocabulary id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::bos_id() const {
    if (reserved_ < 3) throw UsageError("vocabulary has no sentence markers");
    return 2;
}

int Vocabulary::eos_id() const {
    if (reserved_ < 4) throw UsageError("vocabulary has no sentence markers");
    return 3;
}

nlohmann::json Vocabulary::to_json() const {
    return nlohmann::json{{"reserved", reserved_}, {"tokens", tokens_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    std::vector<std::string> all = j.at("tokens").get<std::vector<std::string>>();
    int reserved = j.at("reserved").get<int>();
    Vocabulary v(std::vector<std::string>(all.begin(), all.begin() + reserved));
    for (size_t k = static_cast<size_t>(reserved); k < all.size(); ++k) v.add(all[k]);
    return v;
}

namespace {

Vocabulary from_counts(const std::map<std::string, long>& counts, int max_size,
                       Vocabulary vocab) {
    std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [token, count] : ranked) {
        if (vocab.size() >= max_size) break;
        if (!vocab.contains(token)) vocab.add(token);
    }
    return vocab;
}

}  // namespace

Vocabulary build_vocab(const std::vector<const AstGraph*>& corpus, int max_size) {
    if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
    std::map<std::string, long> counts;
    for (const AstGraph* g : corpus)
        for (const auto& node : g->nodes) ++counts[node.label];
    return from_counts(counts, max_size, Vocabulary());
}

Vocabulary build_vocab(const std::vector<AstGraph>& corpus, int max_size) {
    std::vector<const AstGraph*> ptrs;
    ptrs.reserve(corpus.size());
    for (const auto& g : corpus) ptrs.push_back(&g);
    return build_vocab(ptrs, max_size);
}

Vocabulary build_token_vocab(const std::vector<std::vector<std::string>>& sequences, int max_size,
                             bool sentence_markers) {
    if (sequences.empty()) throw ConfigError("build_token_vocab: empty corpus");
    std::map<std::string, long> counts;
    for (const auto& seq : sequences)
        for (const auto& tok : seq) ++counts[tok];
    return from_counts(counts, max_size,
                       sentence_markers ? Vocabulary::with_sentence_markers() : Vocabulary());
}

NodeSequence encode_sequence(const AstGraph& g, const Vocabulary& vocab, int m_cap) {
    if (m_cap <= 0) throw ConfigError("encode_sequence: m_cap must be positive");
    std::vector<int> order = linearize(g);
    NodeSequence seq;
    seq.truncated = static_cast<int>(order.size()) > m_cap;
    seq.true_length = std::min<int>(static_cast<int>(order.size()), m_cap);
    seq.pad_length = m_cap - seq.true_length;
    seq.ids.assign(static_cast<size_t>(m_cap), Vocabulary::kPad);
    seq.visibility.assign(static_cast<size_t>(m_cap), 0);
    for (int k = 0; k < seq.true_length; ++k) {
        const AstNode& node = g.nodes[static_cast<size_t>(order[k])];
        seq.ids[static_cast<size_t>(k)] = vocab.id_of(node.label);
        seq.visibility[static_cast<size_t>(k)] = node.visible ? 1 : 0;
    }
    return seq;
}

}  // namespace codegaze::ast
