#include "dspar/tin.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "dspar/errors.hpp"

namespace dspar {

namespace {

struct Lexer {
  std::string text;
  size_t at = 0;

  void skip_space() {
    while (at < text.size() && std::isspace(static_cast<unsigned char>(text[at]))) at++;
  }

  bool done() {
    skip_space();
    return at >= text.size();
  }

  char peek() {
    skip_space();
    return at < text.size() ? text[at] : '\0';
  }

  bool accept(char c) {
    skip_space();
    if (at < text.size() && text[at] == c) {
      at++;
      return true;
    }
    return false;
  }

  /// The UTF-8 middle dot is a multiplication synonym.
  bool accept_times() {
    skip_space();
    if (accept('*')) return true;
    if (at + 1 < text.size() && static_cast<unsigned char>(text[at]) == 0xC2 &&
        static_cast<unsigned char>(text[at + 1]) == 0xB7) {
      at += 2;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!accept(c))
      throw ParseError(std::string("expected '") + c + "' " + what + " at offset " +
                       std::to_string(at) + " in '" + text + "'");
  }

  std::string identifier() {
    skip_space();
    size_t start = at;
    while (at < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[at])) || text[at] == '_'))
      at++;
    if (start == at)
      throw ParseError("expected identifier at offset " + std::to_string(start) + " in '" +
                       text + "'");
    if (std::isdigit(static_cast<unsigned char>(text[start])))
      throw ParseError("identifier cannot start with a digit in '" + text + "'");
    return text.substr(start, at - start);
  }
};

Access parse_access(Lexer& lex) {
  Access a;
  a.tensor = lex.identifier();
  lex.expect('(', "before access index list");
  if (!lex.accept(')')) {
    while (true) {
      a.vars.push_back(lex.identifier());
      if (lex.accept(')')) break;
      lex.expect(',', "between index variables");
    }
  }
  for (size_t i = 0; i < a.vars.size(); i++) {
    for (size_t j = i + 1; j < a.vars.size(); j++) {
      if (a.vars[i] == a.vars[j])
        throw ValidationError("repeated index variable '" + a.vars[i] + "' in access to '" +
                              a.tensor + "'");
    }
  }
  return a;
}

}  // namespace

TinStatement parse_tin(const std::string& text) {
  Lexer lex{text};
  TinStatement stmt;
  stmt.lhs = parse_access(lex);
  lex.expect('=', "after left-hand side");

  while (true) {
    std::vector<Access> term;
    term.push_back(parse_access(lex));
    while (lex.accept_times()) term.push_back(parse_access(lex));
    stmt.terms.push_back(std::move(term));
    if (lex.done()) break;
    if (!lex.accept('+'))
      throw ParseError("unknown character '" + std::string(1, lex.peek()) + "' in '" + text +
                       "'");
  }

  // Arity consistency per tensor name; the output may not be read.
  std::map<std::string, size_t> arity;
  arity[stmt.lhs.tensor] = stmt.lhs.vars.size();
  for (const auto& term : stmt.terms) {
    for (const auto& a : term) {
      if (a.tensor == stmt.lhs.tensor)
        throw ValidationError("output tensor '" + a.tensor + "' may not appear on the rhs");
      auto [it, fresh] = arity.emplace(a.tensor, a.vars.size());
      if (!fresh && it->second != a.vars.size())
        throw ValidationError("arity mismatch for tensor '" + a.tensor + "'");
    }
  }

  // Loop order: lhs variables, then rhs-only variables by appearance.
  std::vector<std::string> rhs_vars;
  for (const auto& term : stmt.terms) {
    for (const auto& a : term) {
      for (const auto& v : a.vars) {
        if (std::find(rhs_vars.begin(), rhs_vars.end(), v) == rhs_vars.end())
          rhs_vars.push_back(v);
      }
    }
  }
  for (const auto& v : stmt.lhs.vars) {
    if (std::find(rhs_vars.begin(), rhs_vars.end(), v) == rhs_vars.end())
      throw ValidationError("left-hand side variable '" + v + "' does not appear on the rhs");
    stmt.vars.push_back(v);
  }
  for (const auto& v : rhs_vars) {
    if (std::find(stmt.lhs.vars.begin(), stmt.lhs.vars.end(), v) == stmt.lhs.vars.end()) {
      stmt.reduction_vars.push_back(v);
      stmt.vars.push_back(v);
    }
  }
  return stmt;
}

bool TinStatement::has_var(const std::string& v) const {
  return std::find(vars.begin(), vars.end(), v) != vars.end();
}

bool TinStatement::is_reduction(const std::string& v) const {
  return std::find(reduction_vars.begin(), reduction_vars.end(), v) != reduction_vars.end();
}

std::vector<std::string> TinStatement::tensor_names() const {
  std::vector<std::string> names{lhs.tensor};
  for (const auto& term : terms) {
    for (const auto& a : term) {
      if (std::find(names.begin(), names.end(), a.tensor) == names.end())
        names.push_back(a.tensor);
    }
  }
  return names;
}

int TinStatement::tensor_order(const std::string& name) const {
  if (lhs.tensor == name) return static_cast<int>(lhs.vars.size());
  for (const auto& term : terms) {
    for (const auto& a : term) {
      if (a.tensor == name) return static_cast<int>(a.vars.size());
    }
  }
  throw ValidationError("statement does not access tensor '" + name + "'");
}

std::vector<Access> TinStatement::rhs_accesses() const {
  std::vector<Access> out;
  for (const auto& term : terms) out.insert(out.end(), term.begin(), term.end());
  return out;
}

namespace {
void print_access(std::ostream& out, const Access& a) {
  out << a.tensor << "(";
  for (size_t i = 0; i < a.vars.size(); i++) {
    if (i) out << ", ";
    out << a.vars[i];
  }
  out << ")";
}
}  // namespace

std::string TinStatement::to_string() const {
  std::ostringstream out;
  print_access(out, lhs);
  out << " = ";
  for (size_t t = 0; t < terms.size(); t++) {
    if (t) out << " + ";
    for (size_t a = 0; a < terms[t].size(); a++) {
      if (a) out << " * ";
      print_access(out, terms[t][a]);
    }
  }
  return out.str();
}

}  // namespace dspar
