#pragma once

// Reader for the subset of TOML used by configuration and benchmark files:
// [table] / [a.b] headers, bare, quoted and dotted keys, basic and literal
// strings, integers, floats (incl. inf/nan), booleans, arrays (may span lines)
// and inline tables. Dates, multi-line strings and arrays of tables are not
// supported and are reported as errors.

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "p2s/error.hpp"

namespace p2s {

namespace detail {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') error("arrays of tables are not supported");
        skip_ws();
        const auto path = key_path();
        skip_ws();
        expect(']');
        table = &root;
        for (const auto& part : path) {
          auto& next = (*table)[part];
          if (next.is_null()) next = nlohmann::json::object();
          if (!next.is_object()) error("'" + part + "' is not a table");
          table = &next;
        }
      } else {
        assign(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  [[noreturn]] void error(const std::string& what) const {
    fail(Errc::invalid_argument, "config line " + std::to_string(line_) + ": " + what);
  }

  void expect(char c) {
    if (peek() != c) error(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_ws() {
    while (peek() == ' ' || peek() == '\t') ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }

  void newline() {
    if (peek() == '\r') ++pos_;
    expect('\n');
    ++line_;
  }

  void skip_blank_lines() {
    while (true) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r')
        newline();
      else
        return;
    }
  }

  // Whitespace, comments and newlines, as allowed inside arrays.
  void skip_space_in_array() {
    while (true) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r')
        newline();
      else
        return;
    }
  }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (!eof()) newline();
  }

  static bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string simple_key() {
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    const std::size_t start = pos_;
    while (bare_key_char(peek())) ++pos_;
    if (start == pos_) error("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> parts{simple_key()};
    skip_ws();
    while (peek() == '.') {
      ++pos_;
      skip_ws();
      parts.push_back(simple_key());
      skip_ws();
    }
    return parts;
  }

  void assign(nlohmann::json& table) {
    const auto path = key_path();
    skip_ws();
    expect('=');
    skip_ws();
    nlohmann::json* target = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      auto& next = (*target)[path[i]];
      if (next.is_null()) next = nlohmann::json::object();
      if (!next.is_object()) error("'" + path[i] + "' is not a table");
      target = &next;
    }
    if (target->contains(path.back())) error("duplicate key '" + path.back() + "'");
    (*target)[path.back()] = value();
  }

  std::string basic_string() {
    expect('"');
    if (text_.substr(pos_, 2) == "\"\"") error("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') error("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      const char e = text_[pos_++];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: error(std::string("unsupported escape \\") + e);
      }
    }
  }

  std::string literal_string() {
    expect('\'');
    const std::size_t start = pos_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') error("unterminated string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  nlohmann::json array() {
    expect('[');
    nlohmann::json out = nlohmann::json::array();
    while (true) {
      skip_space_in_array();
      if (peek() == ']') break;
      out.push_back(value());
      skip_space_in_array();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() != ']') error("expected ',' or ']' in array");
    }
    ++pos_;
    return out;
  }

  nlohmann::json inline_table() {
    expect('{');
    nlohmann::json out = nlohmann::json::object();
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      assign(out);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      return out;
    }
  }

  nlohmann::json scalar() {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || std::string_view("+-._").find(peek()) != std::string_view::npos))
      ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    if (token.empty()) error("expected a value");
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char c : token)
      if (c != '_') digits += c;
    const std::string_view body = digits[0] == '+' || digits[0] == '-' ? std::string_view(digits).substr(1) : digits;
    if (body == "inf") return digits[0] == '-' ? -HUGE_VAL : HUGE_VAL;
    if (body == "nan") return std::nan("");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const long long v = std::stoll(digits, &used, 10);
        if (used == digits.size()) return v;
      }
    } catch (const std::exception&) {
    }
    error("invalid value '" + token + "'");
  }

  nlohmann::json value() {
    switch (peek()) {
      case '"': return basic_string();
      case '\'': return literal_string();
      case '[': return array();
      case '{': return inline_table();
      default: return scalar();
    }
  }
};

}  // namespace detail

inline nlohmann::json parse_toml(std::string_view text) { return detail::TomlParser(text).parse(); }

inline nlohmann::json load_toml(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io_failure, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str());
}

}  // namespace p2s
