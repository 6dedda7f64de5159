#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "codegaze/ast.hpp"
#include "codegaze/errors.hpp"

namespace codegaze::ast {

// Token table with fixed reserved ids up front. PAD=0 and UNK=1 always;
// sequence vocabularies add <s>/</s>.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocabulary() : Vocabulary(std::vector<std::string>{"<pad>", "<unk>"}) {}
    explicit Vocabulary(std::vector<std::string> reserved);

    static Vocabulary with_sentence_markers();  // <pad> <unk> <s> </s>

    int add(const std::string& token);
    int id_of(const std::string& token) const;  // kUnk when absent
    bool contains(const std::string& token) const;
    const std::string& token_of(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    int reserved_count() const { return reserved_; }
    int bos_id() const;
    int eos_id() const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    int reserved_ = 0;
};

// Most frequent labels (ties broken lexicographically) up to max_size total
// table entries, reserved ids included.
Vocabulary build_vocab(const std::vector<const AstGraph*>& corpus, int max_size);
Vocabulary build_vocab(const std::vector<AstGraph>& corpus, int max_size);
Vocabulary build_token_vocab(const std::vector<std::vector<std::string>>& sequences, int max_size,
                             bool sentence_markers);

struct NodeSequence {
    std::vector<int> ids;                  // length exactly m_cap
    std::vector<std::uint8_t> visibility;  // aligned; padding is false
    int pad_length = 0;
    int true_length = 0;
    bool truncated = false;
};

NodeSequence encode_sequence(const AstGraph& g, const Vocabulary& vocab,
                             int m_cap = kDefaultNodeCap);

}  // namespace codegaze::ast
