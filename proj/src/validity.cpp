#include "ktune/validity.hpp"

#include <algorithm>
#include <cctype>

#include "ktune/errors.hpp"

namespace ktune {

namespace {

struct Token {
  enum class Kind { kNumber, kName, kPlus, kStar, kLParen, kRParen, kLe, kLt, kEq, kEnd };
  Kind kind;
  std::int64_t number = 0;
  std::string name;
};

std::vector<Token> tokenize(const std::string& src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Token::Kind::kNumber, std::stoll(src.substr(i, j - i)), {}});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      out.push_back({Token::Kind::kName, 0, src.substr(i, j - i)});
      i = j;
    } else if (c == '+') {
      out.push_back({Token::Kind::kPlus, 0, {}});
      ++i;
    } else if (c == '*') {
      out.push_back({Token::Kind::kStar, 0, {}});
      ++i;
    } else if (c == '(') {
      out.push_back({Token::Kind::kLParen, 0, {}});
      ++i;
    } else if (c == ')') {
      out.push_back({Token::Kind::kRParen, 0, {}});
      ++i;
    } else if (c == '<') {
      if (i + 1 < src.size() && src[i + 1] == '=') {
        out.push_back({Token::Kind::kLe, 0, {}});
        i += 2;
      } else {
        out.push_back({Token::Kind::kLt, 0, {}});
        ++i;
      }
    } else if (c == '=' && i + 1 < src.size() && src[i + 1] == '=') {
      out.push_back({Token::Kind::kEq, 0, {}});
      i += 2;
    } else {
      throw ConfigError("validity rule: unexpected character '" + std::string(1, c) + "' in \"" +
                        src + "\"");
    }
  }
  out.push_back({Token::Kind::kEnd, 0, {}});
  return out;
}

}  // namespace

// Recursive-descent parser emitting a postfix program.
ValidityRule ValidityRule::parse(const std::string& source,
                                 const std::vector<std::string>& knob_names) {
  ValidityRule rule;
  rule.source_ = source;
  const std::vector<Token> tokens = tokenize(source);
  std::size_t pos = 0;

  auto peek = [&]() -> const Token& { return tokens[pos]; };
  auto advance = [&]() -> const Token& { return tokens[pos++]; };

  // Forward declarations through std::function-free recursion.
  struct Parser {
    const std::vector<Token>& tokens;
    std::size_t& pos;
    ValidityRule& rule;
    const std::vector<std::string>& knob_names;

    const Token& peek() const { return tokens[pos]; }
    const Token& advance() { return tokens[pos++]; }

    void atom() {
      const Token& t = advance();
      switch (t.kind) {
        case Token::Kind::kNumber:
          rule.ops_.push_back({OpCode::kPushConst, t.number});
          break;
        case Token::Kind::kName: {
          const auto it = std::find(knob_names.begin(), knob_names.end(), t.name);
          if (it == knob_names.end()) {
            throw ConfigError("validity rule: unknown knob '" + t.name + "' in \"" +
                              rule.source_ + "\"");
          }
          const int idx = static_cast<int>(it - knob_names.begin());
          rule.ops_.push_back({OpCode::kPushKnob, idx});
          if (std::find(rule.referenced_.begin(), rule.referenced_.end(), idx) ==
              rule.referenced_.end()) {
            rule.referenced_.push_back(idx);
          }
          break;
        }
        case Token::Kind::kLParen:
          sum();
          if (advance().kind != Token::Kind::kRParen) {
            throw ConfigError("validity rule: missing ')' in \"" + rule.source_ + "\"");
          }
          break;
        default:
          throw ConfigError("validity rule: expected value in \"" + rule.source_ + "\"");
      }
    }

    void prod() {
      atom();
      while (peek().kind == Token::Kind::kStar) {
        advance();
        atom();
        rule.ops_.push_back({OpCode::kMul, 0});
      }
    }

    void sum() {
      prod();
      while (peek().kind == Token::Kind::kPlus) {
        advance();
        prod();
        rule.ops_.push_back({OpCode::kAdd, 0});
      }
    }
  } parser{tokens, pos, rule, knob_names};

  parser.sum();
  const Token& cmp = advance();
  OpCode cmp_op;
  switch (cmp.kind) {
    case Token::Kind::kLe: cmp_op = OpCode::kCmpLe; break;
    case Token::Kind::kLt: cmp_op = OpCode::kCmpLt; break;
    case Token::Kind::kEq: cmp_op = OpCode::kCmpEq; break;
    default:
      throw ConfigError("validity rule: expected comparison operator in \"" + source + "\"");
  }
  parser.sum();
  rule.ops_.push_back({cmp_op, 0});
  if (peek().kind != Token::Kind::kEnd) {
    throw ConfigError("validity rule: trailing input in \"" + source + "\"");
  }
  std::sort(rule.referenced_.begin(), rule.referenced_.end());
  return rule;
}

bool ValidityRule::evaluate(const std::vector<std::int64_t>& knob_values) const {
  using Wide = __int128;
  std::vector<Wide> stack;
  stack.reserve(8);
  for (const Op& op : ops_) {
    switch (op.code) {
      case OpCode::kPushConst:
        stack.push_back(op.arg);
        break;
      case OpCode::kPushKnob:
        stack.push_back(knob_values[static_cast<std::size_t>(op.arg)]);
        break;
      case OpCode::kAdd: {
        const Wide b = stack.back();
        stack.pop_back();
        stack.back() += b;
        break;
      }
      case OpCode::kMul: {
        const Wide b = stack.back();
        stack.pop_back();
        stack.back() *= b;
        break;
      }
      case OpCode::kCmpLe: {
        const Wide b = stack.back();
        stack.pop_back();
        return stack.back() <= b;
      }
      case OpCode::kCmpLt: {
        const Wide b = stack.back();
        stack.pop_back();
        return stack.back() < b;
      }
      case OpCode::kCmpEq: {
        const Wide b = stack.back();
        stack.pop_back();
        return stack.back() == b;
      }
    }
  }
  return true;  // empty rule is vacuously true
}

}  // namespace ktune
